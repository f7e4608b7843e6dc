"""Similarity predictors over embedding pairs: cosine, ridge and low-rank projection."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .data import InputError, SimilarityMatrix, zscore_columns

log = logging.getLogger(__name__)


class UndefinedPairError(ValueError):
    pass


class DivergenceError(RuntimeError):
    pass


def _as_vectors(e):
    return e.vectors if hasattr(e, "vectors") else np.asarray(e, dtype=float)


def cosine_matrix(x):
    norms = np.linalg.norm(x, axis=1)
    zero = np.flatnonzero(norms == 0)
    if zero.size:
        raise UndefinedPairError(f"items {zero.tolist()} have a zero vector; cosine undefined")
    unit = x / norms[:, None]
    return np.clip(unit @ unit.T, -1.0, 1.0)


def cosine_baseline(embeddings):
    """Cosine similarity between embeddings z-scored per dimension across items."""
    x = _as_vectors(embeddings)
    if x.shape[0] < 2:
        raise InputError("cosine baseline needs at least two items")
    sims = cosine_matrix(zscore_columns(x))
    sims = (sims + sims.T) / 2
    ids = getattr(embeddings, "ids", tuple(range(x.shape[0])))
    return SimilarityMatrix(sims, ids, "predicted")


def pair_features(fa, fb):
    """Stacked pair features: Hadamard product, L1 distance, cosine similarity."""
    fa = np.atleast_2d(fa)
    fb = np.atleast_2d(fb)
    had = fa * fb
    l1 = np.abs(fa - fb).sum(axis=1, keepdims=True)
    na = np.linalg.norm(fa, axis=1)
    nb = np.linalg.norm(fb, axis=1)
    denom = na * nb
    cos = np.divide(had.sum(axis=1), denom, out=np.zeros_like(denom), where=denom > 0)
    return np.hstack([had, l1, cos[:, None]])


def upper_pairs(n):
    return np.triu_indices(n, k=1)


@dataclass
class RidgeModel:
    coef: np.ndarray
    intercept: float
    alpha: float

    def predict_pairs(self, fa, fb):
        return pair_features(fa, fb) @ self.coef + self.intercept

    def predict_matrix(self, x):
        x = _as_vectors(x)
        n = x.shape[0]
        out = np.zeros((n, n))
        i, j = upper_pairs(n)
        vals = self.predict_pairs(x[i], x[j])
        out[i, j] = vals
        out[j, i] = vals
        return out


def fit_ridge(features, y, alpha):
    """Ridge regression with an unpenalised intercept via the normal equations."""
    if not alpha > 0:
        raise ValueError("ridge alpha must be > 0")
    mu_x = features.mean(axis=0)
    mu_y = float(np.mean(y))
    xc = features - mu_x
    yc = y - mu_y
    gram = xc.T @ xc + alpha * np.eye(xc.shape[1])
    coef = np.linalg.solve(gram, xc.T @ yc)
    return coef, mu_y - float(mu_x @ coef)


def ridge_baseline(embeddings, target, alpha):
    """Fit a ridge predictor on all off-diagonal pairs of ``target``."""
    x = _as_vectors(embeddings)
    s = target.values if isinstance(target, SimilarityMatrix) else np.asarray(target, dtype=float)
    i, j = upper_pairs(x.shape[0])
    coef, b = fit_ridge(pair_features(x[i], x[j]), s[i, j], alpha)
    return RidgeModel(coef, b, alpha)


@dataclass
class LowRankModel:
    """Predicts similarity as (P f_i) . (P f_j) with a D x d projection P."""
    projection: np.ndarray
    penalty: float
    loss_history: list = field(default_factory=list, repr=False)

    @property
    def rank(self):
        return self.projection.shape[0]

    @property
    def dim(self):
        return self.projection.shape[1]

    def predict_matrix(self, x):
        z = _as_vectors(x) @ self.projection.T
        return z @ z.T

    def to_dict(self):
        return {"rank": self.rank, "penalty": self.penalty, "projection": self.projection.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["projection"], dtype=float), float(d["penalty"]))


def predict_similarity(model, f_i, f_j):
    f_i = np.asarray(f_i, dtype=float)
    f_j = np.asarray(f_j, dtype=float)
    if f_i.shape != (model.dim,) or f_j.shape != (model.dim,):
        raise InputError(f"vectors must have dimension {model.dim}")
    return float((model.projection @ f_i) @ (model.projection @ f_j))


def _loss_and_grad(q, z, s, mask, lam):
    zq = z @ q.T
    r = mask * (zq @ zq.T - s)
    loss = 0.5 * np.sum(r * r) + lam * np.sum(q * q)
    grad = 2.0 * q @ (z.T @ r @ z) + 2.0 * lam * q
    return loss, grad


def train_low_rank(embeddings, target, rank, penalty, seed=0, max_iters=5000, tol=1e-12,
                   pair_mask=None, max_retries=30):
    """Minimise 0.5 * sum_{i != j} (s_ij - (P f_i).(P f_j))^2 + penalty * ||P||_F^2.

    Full-batch gradient descent with Armijo backtracking; the step grows after
    each accepted move.  P is kept in the row space of the training embeddings,
    where the optimum lies.  ``pair_mask`` restricts which pairs contribute.
    """
    if rank < 1:
        raise ValueError("rank must be >= 1")
    if penalty < 0:
        raise ValueError("penalty must be >= 0")
    x = _as_vectors(embeddings)
    s = target.values if isinstance(target, SimilarityMatrix) else np.asarray(target, dtype=float)
    n = x.shape[0]
    if s.shape != (n, n):
        raise InputError("target size does not match the number of embeddings")
    if not np.allclose(s, s.T, atol=1e-12):
        raise InputError("target similarities must be symmetric")
    mask = np.ones((n, n)) if pair_mask is None else np.asarray(pair_mask, dtype=float)
    mask = mask * (1.0 - np.eye(n))
    s = np.where(mask > 0, s, 0.0)

    # coordinates of the items in an orthonormal basis of their span
    u, sv, vt = np.linalg.svd(x, full_matrices=False)
    r = int(np.sum(sv > sv.max() * 1e-10)) if sv.size else 0
    z = u[:, :r] * sv[:r]
    basis = vt[:r]

    rng = np.random.default_rng(seed)
    q = rng.standard_normal((rank, r)) / np.sqrt(max(r, 1))
    zq = z @ q.T
    g0 = np.abs((zq @ zq.T)[mask > 0]).mean() if mask.any() else 1.0
    target_scale = np.abs(s[mask > 0]).mean() if mask.any() else 1.0
    if g0 > 0 and target_scale > 0:
        q *= np.sqrt(target_scale / g0)

    loss, grad = _loss_and_grad(q, z, s, mask, penalty)
    history = [loss]
    step = 1.0 / max(1.0, np.sum(z * z) ** 2 / max(n, 1))
    retries = 0
    for _ in range(max_iters):
        gnorm2 = float(np.sum(grad * grad))
        if gnorm2 == 0.0:
            break
        while True:
            cand = q - step * grad
            new_loss, new_grad = _loss_and_grad(cand, z, s, mask, penalty)
            if not np.isfinite(new_loss):
                retries += 1
                if retries > max_retries:
                    raise DivergenceError("low-rank training diverged")
                step *= 0.5
                continue
            if new_loss <= loss - 1e-4 * step * gnorm2:
                break
            step *= 0.5
            if step < 1e-300:
                new_loss, new_grad, cand = loss, grad, q
                break
        converged = loss - new_loss <= tol * max(loss, 1e-300) or cand is q
        q, loss, grad = cand, new_loss, new_grad
        history.append(loss)
        if converged:
            break
        step *= 2.0
    return LowRankModel(q @ basis, float(penalty), history)
