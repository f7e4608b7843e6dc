"""Counterfactual encoders and their deviation from the IB frontier."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .encoders import Encoder
from .frontier import _plane

DEFAULT_FRACTIONS = (0.01, 0.05, 0.10)


@dataclass(frozen=True)
class PerturbationSpec:
    fraction: float
    sample_count: int
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.fraction <= 1.0:
            raise ValueError(f"perturbation fraction must lie in [0, 1], got {self.fraction}")
        if self.sample_count < 0:
            raise ValueError("sample_count must be non-negative")


def rows_to_permute(fraction, n_meanings):
    """Number of policy rows moved per perturbed sample.

    ``ceil(fraction * n)``, raised to 2 when positive, since a single row cannot
    be permuted.
    """
    if fraction == 0:
        return 0
    k = math.ceil(round(fraction * n_meanings, 9))
    if n_meanings < 2:
        raise ValueError("need at least two meanings to permute rows")
    return min(max(k, 2), n_meanings)


def random_derangement(k, rng):
    """Uniform random permutation of range(k) with no fixed points (k >= 2)."""
    while True:
        perm = rng.permutation(k)
        if not np.any(perm == np.arange(k)):
            return perm


def iter_row_permutations(n_meanings, spec):
    """Yield (targets, sources) index arrays, one pair per perturbed sample.

    Row ``sources[i]`` of the original policy becomes row ``targets[i]``.
    """
    rng = np.random.default_rng(spec.seed)
    k = rows_to_permute(spec.fraction, n_meanings)
    empty = np.empty(0, dtype=int)
    for _ in range(spec.sample_count):
        if k == 0:
            yield empty, empty
            continue
        chosen = rng.choice(n_meanings, size=k, replace=False)
        yield chosen, chosen[random_derangement(k, rng)]


def iter_perturbed_policies(policy, spec):
    policy = np.asarray(policy)
    for targets, sources in iter_row_permutations(policy.shape[0], spec):
        out = np.array(policy)
        out[targets] = policy[sources]
        yield out


def perturb_encoder(encoder, spec):
    """Sample encoders whose policy rows are shuffled among a random subset of meanings.

    Each sample picks ``rows_to_permute(fraction, n)`` distinct meanings and
    hands each chosen meaning the row of another chosen meaning (a derangement).
    The prior and the lexicon are unchanged.
    """
    if spec.fraction == 0:
        return [encoder for _ in range(spec.sample_count)]
    return [encoder.with_policy(p) for p in iter_perturbed_policies(encoder.policy, spec)]


def random_encoder(n_words, n_meanings, seed=0, soft=False, prior=None, rng=None):
    """A uniform-random encoder.

    By default every meaning is mapped to a single word drawn uniformly from
    the lexicon (one-hot rows).  ``soft=True`` draws each row from a flat
    Dirichlet instead.
    """
    if n_words < 1 or n_meanings < 1:
        raise ValueError("lexicon size and meaning count must be >= 1")
    rng = np.random.default_rng(seed) if rng is None else rng
    if soft:
        policy = rng.dirichlet(np.ones(n_words), size=n_meanings)
    else:
        policy = np.zeros((n_meanings, n_words))
        policy[np.arange(n_meanings), rng.integers(0, n_words, size=n_meanings)] = 1.0
    prior = np.full(n_meanings, 1.0 / n_meanings) if prior is None else prior
    return Encoder(policy, prior)


def random_encoders(n_words, n_meanings, count, seed=0, soft=False, prior=None):
    rng = np.random.default_rng(seed)
    return [random_encoder(n_words, n_meanings, soft=soft, prior=prior, rng=rng) for _ in range(count)]


def iter_random_assignments(n_words, n_meanings, count, seed=0, chunk=1024):
    """Word indices for ``count`` one-hot random encoders, in chunks of rows."""
    rng = np.random.default_rng(seed)
    done = 0
    while done < count:
        b = min(chunk, count - done)
        yield rng.integers(0, n_words, size=(b, n_meanings))
        done += b


def _beliefs_matrix(beliefs):
    return beliefs.conditional if hasattr(beliefs, "conditional") else np.asarray(beliefs, dtype=float)


def _mi_batch(joint):
    """Mutual information (bits) of each 2-D joint in a (B, X, Y) stack."""
    px = joint.sum(axis=2, keepdims=True)
    py = joint.sum(axis=1, keepdims=True)
    denom = px * py
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(joint > 0, joint * (np.log2(joint) - np.log2(denom)), 0.0)
    return np.maximum(terms.sum(axis=(1, 2)), 0.0)


def batch_plane(policies, prior, beliefs):
    """(complexity, accuracy) in bits for a (B, M, W) stack of policies."""
    policies = np.asarray(policies, dtype=float)
    pum = _beliefs_matrix(beliefs)
    joint_mw = np.asarray(prior, dtype=float)[None, :, None] * policies
    joint_wu = np.matmul(joint_mw.transpose(0, 2, 1), pum)
    return _mi_batch(joint_mw), _mi_batch(joint_wu)


def plane_coordinates(encoders, beliefs, chunk=256):
    """(complexity, accuracy) arrays in bits for a sequence of encoders."""
    pum = _beliefs_matrix(beliefs)
    encoders = list(encoders)
    comp = np.empty(len(encoders))
    acc = np.empty(len(encoders))
    for start in range(0, len(encoders), chunk):
        batch = encoders[start:start + chunk]
        shapes = {e.policy.shape for e in batch}
        if len(shapes) == 1:
            c, a = batch_plane(np.stack([e.policy for e in batch]), batch[0].prior, pum)
            if all(np.array_equal(e.prior, batch[0].prior) for e in batch):
                comp[start:start + len(batch)], acc[start:start + len(batch)] = c, a
                continue
        for k, e in enumerate(batch):
            comp[start + k], acc[start + k] = _plane(e.prior, pum, e.policy)
    return comp, acc


def onehot_plane_coordinates(assignments, n_words, beliefs, prior=None):
    """Fast (complexity, accuracy) for one-hot encoders given as word indices.

    ``assignments`` has shape (n_encoders, n_meanings).
    """
    pum = _beliefs_matrix(beliefs)
    assignments = np.atleast_2d(np.asarray(assignments, dtype=int))
    n_enc, n_m = assignments.shape
    pm = np.full(n_m, 1.0 / n_m) if prior is None else np.asarray(prior, dtype=float)
    weighted = pm[:, None] * pum
    rows = (np.arange(n_enc)[:, None] * n_words + assignments).ravel()
    cols = np.tile(np.arange(n_m), n_enc)
    onehot = sparse.csr_matrix((np.ones(rows.size), (rows, cols)), shape=(n_enc * n_words, n_m))
    joint_wu = np.asarray(onehot @ weighted).reshape(n_enc, n_words, pum.shape[1])
    # one-hot rows make I(M;W) = H(W)
    pw = joint_wu.sum(axis=2)
    with np.errstate(divide="ignore", invalid="ignore"):
        comp = -np.where(pw > 0, pw * np.log2(pw), 0.0).sum(axis=1)
    return np.maximum(comp, 0.0), _mi_batch(joint_wu)


@dataclass
class DeviationReport:
    label: str
    epsilon: float
    argmin_beta: float
    gaps: np.ndarray
    kind: str = ""
    fraction: float = float("nan")


def deviation_from_plane(comp, acc, curve):
    """Vectorised deviation for arrays of plane coordinates.

    Returns (epsilon, argmin_beta, gaps) where ``gaps`` has one column per
    usable grid beta.
    """
    comp = np.atleast_1d(np.asarray(comp, dtype=float))
    acc = np.atleast_1d(np.asarray(acc, dtype=float))
    ok = curve.converged
    if not ok.any():
        raise ValueError("no converged frontier points to compare against")
    betas = curve.betas[ok]
    fstar = curve.optimal_values[ok]
    gaps = (comp[:, None] - betas[None, :] * acc[:, None] - fstar[None, :]) / betas[None, :]
    idx = np.argmin(gaps, axis=1)
    eps = gaps[np.arange(gaps.shape[0]), idx]
    return eps, betas[idx], gaps


def deviation(encoder, beliefs, curve, label=""):
    """epsilon = min over grid beta of (F_beta[q] - F*_beta) / beta."""
    c, a = plane_coordinates([encoder], beliefs)
    eps, b, gaps = deviation_from_plane(c, a, curve)
    return DeviationReport(label, float(eps[0]), float(b[0]), gaps[0])
