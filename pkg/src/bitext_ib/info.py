"""Exact discrete information measures (bits).

All functions take plain numpy arrays and validate them; nothing is estimated
from samples.
"""
import numpy as np

LOG_BASE = 2.0
NORM_TOL = 1e-9
_RENORM_TOL = 1e-12


class DistributionError(ValueError):
    """Raised when an array is not a valid probability distribution."""


class DimensionError(ValueError):
    """Raised when two objects disagree on an index set or shape."""


class AbsoluteContinuityError(DistributionError):
    """Raised by KL divergence when p(x) > 0 but q(x) = 0."""

    def __init__(self, index):
        self.index = index
        super().__init__(f"q has zero mass at index {index} where p is positive")


def _check_mass(arr, name, axis=None):
    arr = np.asarray(arr, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DistributionError(f"{name} has non-finite entries")
    if np.any(arr < 0):
        raise DistributionError(f"{name} has negative mass")
    total = arr.sum(axis=axis, keepdims=axis is not None)
    drift = np.abs(total - 1.0)
    if np.any(drift > NORM_TOL):
        raise DistributionError(f"{name} does not sum to 1 (max drift {float(np.max(drift)):.3g})")
    if np.any(drift > _RENORM_TOL):
        return arr / total
    return arr


def prob_vector(p):
    """Validate a 1-D probability vector and return it as a float array."""
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise DistributionError("probability vector must be a non-empty 1-D array")
    return _check_mass(p, "probability vector")


def joint_distribution(j):
    j = np.asarray(j, dtype=float)
    if j.ndim != 2 or j.size == 0:
        raise DistributionError("joint distribution must be a non-empty 2-D array")
    return _check_mass(j, "joint distribution")


def conditional_distribution(c):
    """Validate a row-stochastic matrix p(col | row)."""
    c = np.asarray(c, dtype=float)
    if c.ndim != 2 or c.size == 0:
        raise DistributionError("conditional distribution must be a non-empty 2-D array")
    return _check_mass(c, "conditional distribution", axis=1)


def _plogp(p):
    out = np.zeros_like(p)
    nz = p > 0
    out[nz] = p[nz] * np.log2(p[nz])
    return out


def entropy(p):
    """Shannon entropy of a probability vector, in bits. 0 log 0 = 0."""
    p = prob_vector(p)
    return max(0.0, float(-_plogp(p).sum()))


def kl_divergence(p, q):
    """KL(p || q) in bits.

    Raises AbsoluteContinuityError (carrying the offending index) if q has no
    mass somewhere p does, rather than returning infinity.
    """
    p = prob_vector(p)
    q = prob_vector(q)
    if p.shape != q.shape:
        raise DistributionError(f"support sizes differ: {p.size} vs {q.size}")
    bad = np.flatnonzero((p > 0) & (q <= 0))
    if bad.size:
        raise AbsoluteContinuityError(int(bad[0]))
    nz = p > 0
    return max(0.0, float(np.sum(p[nz] * (np.log2(p[nz]) - np.log2(q[nz])))))


def mutual_information(j):
    """I(X;Y) in bits for a joint distribution with X on rows, Y on columns."""
    j = joint_distribution(j)
    return _mi_unchecked(j)


def _mi_unchecked(j):
    px = j.sum(axis=1, keepdims=True)
    py = j.sum(axis=0, keepdims=True)
    nz = j > 0
    outer = (px * py)[nz]
    mi = float(np.sum(j[nz] * (np.log2(j[nz]) - np.log2(outer))))
    return max(0.0, mi)


def row_marginal(j):
    return joint_distribution(j).sum(axis=1)


def col_marginal(j):
    return joint_distribution(j).sum(axis=0)
