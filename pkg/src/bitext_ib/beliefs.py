"""Belief distributions p(u|m) built from similarity scores."""
from dataclasses import dataclass

import numpy as np
from scipy.special import softmax

from .info import DimensionError, conditional_distribution


@dataclass(frozen=True)
class BeliefModel:
    conditional: np.ndarray
    temperature: float = 1.0

    def __post_init__(self):
        cond = conditional_distribution(self.conditional)
        cond.setflags(write=False)
        object.__setattr__(self, "conditional", cond)

    @property
    def n_meanings(self):
        return self.conditional.shape[0]

    @property
    def n_states(self):
        return self.conditional.shape[1]


def belief_from_similarity(sim, gamma=1.0):
    """Row-wise softmax of ``gamma * sim``: p(u_j | m_i) ∝ exp(gamma * sim[i, j])."""
    sim = np.asarray(sim, dtype=float)
    if sim.ndim != 2 or sim.shape[0] != sim.shape[1]:
        raise DimensionError(f"similarity matrix must be square, got shape {sim.shape}")
    if not np.isfinite(gamma):
        raise ValueError("gamma must be finite")
    # scipy's softmax subtracts the row max before exponentiating
    return BeliefModel(softmax(gamma * sim, axis=1), float(gamma))


def _belief_matrix(b):
    return b.conditional if isinstance(b, BeliefModel) else conditional_distribution(b)


def joint_wu(encoder, beliefs):
    """p(w, u) = sum_m p(m) p(w|m) p(u|m); words on rows, world states on columns."""
    pum = _belief_matrix(beliefs)
    if pum.shape[0] != encoder.n_meanings:
        raise DimensionError(
            f"encoder has {encoder.n_meanings} meanings, beliefs have {pum.shape[0]}")
    return encoder.joint_mw().T @ pum
