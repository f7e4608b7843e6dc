"""Information Bottleneck frontier by reversed deterministic annealing.

For each trade-off parameter beta the optimal encoder minimises
``I(M;W) - beta * I(W;U)``.  Solutions are found with the usual
self-consistent (Blahut-Arimoto style) updates, sweeping beta from high to low
and warm-starting each solve from the previous solution.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import xlogy

from .beliefs import BeliefModel, joint_wu
from .encoders import Encoder, accuracy, complexity
from .info import DimensionError, conditional_distribution, prob_vector

log = logging.getLogger(__name__)

LN2 = np.log(2.0)
DEFAULT_BETA_MIN = 1.0
DEFAULT_BETA_MAX = 2.0 ** 20
DEFAULT_N_BETAS = 100
DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITERS = 10_000
DEFAULT_JITTER = 1e-3
# words whose marginal falls below this are dropped from the support
EMPTY_WORD_MASS = 1e-13


class RangeError(ValueError):
    pass


def beta_grid(n=DEFAULT_N_BETAS, beta_min=DEFAULT_BETA_MIN, beta_max=DEFAULT_BETA_MAX):
    """``n`` values log-linearly spaced in [beta_min, beta_max], ascending."""
    if n < 1 or beta_min <= 0 or beta_max < beta_min:
        raise ValueError("need n >= 1 and 0 < beta_min <= beta_max")
    if n == 1:
        return np.array([float(beta_min)])
    return np.logspace(np.log10(beta_min), np.log10(beta_max), n)


@dataclass(frozen=True)
class IBProblem:
    """Prior p(m), beliefs p(u|m) and a bound on the number of words."""
    prior: np.ndarray
    beliefs: np.ndarray
    max_words: int = 0

    def __post_init__(self):
        prior = prob_vector(self.prior)
        beliefs = self.beliefs.conditional if isinstance(self.beliefs, BeliefModel) else self.beliefs
        beliefs = conditional_distribution(beliefs)
        if beliefs.shape[0] != prior.size:
            raise DimensionError("prior and beliefs disagree on the number of meanings")
        max_words = int(self.max_words) or prior.size
        if max_words < 1:
            raise ValueError("max_words must be >= 1")
        object.__setattr__(self, "prior", prior)
        object.__setattr__(self, "beliefs", beliefs)
        object.__setattr__(self, "max_words", max_words)

    @property
    def n_meanings(self):
        return self.prior.size


def ib_objective(encoder, beliefs, beta):
    """F_beta[q] = I(M;W) - beta * I(W;U), in bits."""
    if beta < 0:
        raise ValueError("beta must be non-negative")
    return complexity(encoder) - beta * accuracy(encoder, beliefs)


def _mi_bits(joint):
    px = joint.sum(axis=1, keepdims=True)
    py = joint.sum(axis=0, keepdims=True)
    nz = joint > 0
    val = np.sum(joint[nz] * (np.log(joint[nz]) - np.log((px * py)[nz]))) / LN2
    return max(0.0, float(val))


def _safe_log(x):
    with np.errstate(divide="ignore"):
        return np.log(x)


def _weighted_sum(weights, log_ratio):
    """sum(weights * log_ratio) in bits, with 0 * log 0 = 0, clipped at 0."""
    nz = weights > 0
    return max(0.0, float(np.sum(weights[nz] * log_ratio[nz])) / LN2)


def _plane(prior, beliefs, q):
    joint_mw = prior[:, None] * q
    return _mi_bits(joint_mw), _mi_bits(joint_mw.T @ beliefs)


@dataclass
class FixedPointResult:
    policy: np.ndarray
    complexity: float
    accuracy: float
    objective: float
    trace: list
    converged: bool
    iterations: int


def ib_fixed_point(problem, beta, init, tol=DEFAULT_TOL, max_iters=DEFAULT_MAX_ITERS):
    """Iterate the self-consistent IB equations from ``init`` at fixed ``beta``.

    Stops when one full update changes the objective by less than
    ``tol * max(1, beta)`` bits, i.e. by ``tol`` on the beta-normalised scale
    used for deviations.  If ``max_iters`` is reached the best iterate is
    returned with ``converged=False``.  Words whose marginal mass vanishes are
    dropped along the way.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if beta < 0:
        raise ValueError("beta must be non-negative")
    pm = problem.prior
    pum = problem.beliefs
    q = init.policy if isinstance(init, Encoder) else np.asarray(init, dtype=float)
    q = conditional_distribution(q)
    if q.shape[0] != pm.size:
        raise DimensionError("initial encoder has the wrong number of meanings")

    # sum_u p(u|m) ln p(u|m), constant across iterations
    neg_h = xlogy(pum, pum).sum(axis=1, keepdims=True)
    support = pum > 0
    log_pu = _safe_log(pm @ pum)
    threshold = tol * max(1.0, beta)

    log_q = _safe_log(q)
    trace = []
    best = None
    converged = False
    it = 0
    while True:
        pw = pm @ q
        keep = pw > EMPTY_WORD_MASS
        if not keep.all():
            q = q[:, keep]
            q = q / q.sum(axis=1, keepdims=True)
            log_q = _safe_log(q)
            pw = pm @ q
        log_pw = np.log(pw)
        # decoder p(u|w) = sum_m p(u|m) p(m|w)
        dec = ((pm[:, None] * q) / pw[None, :]).T @ pum
        log_dec = _safe_log(dec)

        # objective of the current iterate, reusing the decoder
        c = _weighted_sum(pm[:, None] * q, log_q - log_pw[None, :])
        a = _weighted_sum(pw[:, None] * dec, log_dec - log_pu[None, :])
        f = c - beta * a
        trace.append(f)
        if best is None or f < best[0]:
            best = (f, q, c, a)
        if len(trace) > 1 and abs(trace[-2] - f) < threshold:
            converged = True
            break
        if it == max_iters:
            break
        it += 1

        finite = np.isfinite(log_dec)
        cross = pum @ (log_dec if finite.all() else np.where(finite, log_dec, 0.0)).T
        kl = neg_h - cross
        logits = log_pw[None, :] - beta * kl
        if not finite.all():
            # a word whose decoder misses part of a meaning's belief support is unreachable
            unreachable = support.astype(float) @ (~finite).T.astype(float) > 0
            logits[unreachable] = -np.inf
        logits -= logits.max(axis=1, keepdims=True)
        q = np.exp(logits)
        total = q.sum(axis=1, keepdims=True)
        q /= total
        log_q = logits - np.log(total)

    if converged:
        f, q, c, a = trace[-1], q, c, a
    else:
        f, q, c, a = best
        log.warning("IB fixed point did not converge at beta=%.6g after %d iterations", beta, it)
    return FixedPointResult(q, c, a, f, trace, converged, it)


def _jitter(q, scale, rng):
    if scale <= 0:
        return q
    noisy = q * np.exp(scale * rng.standard_normal(q.shape))
    return noisy / noisy.sum(axis=1, keepdims=True)


def _initial_policy(problem, rng):
    n, k = problem.n_meanings, problem.max_words
    if k >= n:
        return np.eye(n)
    # fewer words than meanings: spread meanings round-robin, softened
    q = np.full((n, k), 1e-3)
    q[np.arange(n), np.arange(n) % k] = 1.0
    return _jitter(q / q.sum(axis=1, keepdims=True), 1e-1, rng)


@dataclass
class FrontierCurve:
    """Per-beta IB solutions, ascending in beta.

    ``complexity``/``accuracy`` hold, for each grid beta, the best converged
    solution found by the sweep at that beta; ``raw_complexity``/``raw_accuracy``
    keep the fixed point actually reached there, for audit.  ``optimal_values`` holds F*_beta, the smallest objective attained at
    that beta by any converged solution in the sweep (including the trivial
    one-word encoder).
    """
    betas: np.ndarray
    complexity: np.ndarray
    accuracy: np.ndarray
    converged: np.ndarray
    policies: list = field(default_factory=list, repr=False)
    iterations: np.ndarray = None
    jitter: float = DEFAULT_JITTER
    raw_complexity: np.ndarray = None
    raw_accuracy: np.ndarray = None

    def __post_init__(self):
        self.betas = np.asarray(self.betas, dtype=float)
        self.complexity = np.asarray(self.complexity, dtype=float)
        self.accuracy = np.asarray(self.accuracy, dtype=float)
        # the fixed point reached at each beta, before best-of-sweep replacement
        self.raw_complexity = (self.complexity.copy() if self.raw_complexity is None
                               else np.asarray(self.raw_complexity, dtype=float))
        self.raw_accuracy = (self.accuracy.copy() if self.raw_accuracy is None
                             else np.asarray(self.raw_accuracy, dtype=float))
        self.converged = np.asarray(self.converged, dtype=bool)
        if np.any(np.diff(self.betas) <= 0):
            raise ValueError("betas must be strictly ascending")

    def __len__(self):
        return self.betas.size

    def _lines(self):
        ok = self.converged
        c = np.concatenate([[0.0], self.complexity[ok]])
        a = np.concatenate([[0.0], self.accuracy[ok]])
        return c, a

    @property
    def optimal_values(self):
        c, a = self._lines()
        vals = np.min(c[None, :] - self.betas[:, None] * a[None, :], axis=1)
        return np.where(self.converged, vals, np.nan)

    def value(self, beta):
        """F*_beta for a beta inside the grid range."""
        lo, hi = self.betas[0], self.betas[-1]
        if not (lo * (1 - 1e-12) <= beta <= hi * (1 + 1e-12)):
            raise RangeError(f"beta={beta!r} outside frontier grid [{lo:g}, {hi:g}]")
        c, a = self._lines()
        return float(np.min(c - beta * a))

    def envelope(self):
        """Upper concave envelope of the converged points, ascending in complexity.

        Returns an array of (complexity, accuracy) rows; dominated and
        non-concave points are removed.  The origin is always included.
        """
        c, a = self._lines()
        pts = sorted(set(zip(c.tolist(), a.tolist())))
        hull = []
        for p in pts:
            while len(hull) >= 2:
                (x1, y1), (x2, y2) = hull[-2], hull[-1]
                # drop the middle point unless it lies strictly above the chord
                if (x2 - x1) * (p[1] - y1) - (y2 - y1) * (p[0] - x1) >= 0:
                    hull.pop()
                else:
                    break
            hull.append(p)
        hull = np.array(hull)
        top = int(np.argmax(hull[:, 1]))
        return hull[: top + 1]

    def accuracy_bound(self, complexity):
        """Best accuracy reachable at the given complexity along the envelope."""
        env = self.envelope()
        return np.interp(complexity, env[:, 0], env[:, 1])


def reverse_annealing(problem, betas=None, tol=DEFAULT_TOL, max_iters=DEFAULT_MAX_ITERS,
                      jitter=DEFAULT_JITTER, seed=0, keep_policies=True):
    """Trace the frontier sweeping ``betas`` from the largest to the smallest.

    Each solve starts from the previous (higher-beta) solution perturbed by
    multiplicative log-normal noise of relative scale ``jitter``.
    """
    betas = beta_grid() if betas is None else np.asarray(betas, dtype=float)
    if betas.ndim != 1 or betas.size == 0 or np.any(np.diff(betas) <= 0):
        raise ValueError("beta grid must be strictly ascending")
    if np.any(betas <= 0):
        raise ValueError("beta grid must be strictly positive")
    rng = np.random.default_rng(seed)
    n = betas.size
    comp = np.empty(n)
    acc = np.empty(n)
    conv = np.zeros(n, dtype=bool)
    iters = np.zeros(n, dtype=int)
    policies = [None] * n
    q = _initial_policy(problem, rng)
    for k in range(n - 1, -1, -1):
        res = ib_fixed_point(problem, betas[k], _jitter(q, jitter, rng), tol=tol, max_iters=max_iters)
        q = res.policy
        comp[k], acc[k], conv[k], iters[k] = res.complexity, res.accuracy, res.converged, res.iterations
        if keep_policies:
            policies[k] = q
        log.debug("beta=%.6g complexity=%.6f accuracy=%.6f iters=%d", betas[k], comp[k], acc[k], iters[k])
    raw_c, raw_a = comp.copy(), acc.copy()
    _keep_best(problem, betas, comp, acc, conv, policies)
    return FrontierCurve(betas, comp, acc, conv, policies, iters, jitter, raw_c, raw_a)


def _keep_best(problem, betas, comp, acc, conv, policies):
    """Store, at each beta, the best converged sweep solution (or the trivial encoder).

    Near a phase transition or close to beta = 1 the fixed point can creep
    towards a better solution slowly enough to pass the convergence test; the
    stored point is then replaced so that it attains F*_beta.
    """
    ok = np.flatnonzero(conv)
    c = np.concatenate([[0.0], comp[ok]])
    a = np.concatenate([[0.0], acc[ok]])
    source = np.concatenate([[-1], ok])
    trivial = np.ones((problem.prior.size, 1))
    old_c, old_a, old_p = comp[ok].copy(), acc[ok].copy(), list(policies)
    for k in ok:
        vals = c - betas[k] * a
        j = int(np.argmin(vals))
        if vals[j] < comp[k] - betas[k] * acc[k]:
            src = source[j]
            comp[k] = 0.0 if src < 0 else old_c[j - 1]
            acc[k] = 0.0 if src < 0 else old_a[j - 1]
            if policies[k] is not None:
                policies[k] = trivial if src < 0 else old_p[src]
            log.debug("beta=%.6g replaced by solution from %s", betas[k],
                      "trivial encoder" if src < 0 else f"beta={betas[src]:.6g}")


def frontier_value(curve, beta):
    return curve.value(beta)
