"""Rank correlation and item-level nested cross-validation."""
from __future__ import annotations

import itertools
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from .data import InputError, SimilarityMatrix, zscore_columns
from .models import cosine_matrix, ridge_baseline, train_low_rank

log = logging.getLogger(__name__)


class ConfigurationError(ValueError):
    pass


class UndefinedCorrelationError(ValueError):
    pass


def spearman_rho(x, y):
    """Pearson correlation of average ranks."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.size != y.size:
        raise ValueError("inputs must have equal length")
    if x.size < 3:
        raise ValueError("need at least three observations")
    rx = rankdata(x)
    ry = rankdata(y)
    rx -= rx.mean()
    ry -= ry.mean()
    denom = np.sqrt(np.sum(rx * rx) * np.sum(ry * ry))
    if denom == 0:
        raise UndefinedCorrelationError("correlation undefined for constant input")
    return float(np.clip(np.sum(rx * ry) / denom, -1.0, 1.0))


def _score(pred, target):
    """Spearman rho on the strict upper triangle; 0 when undefined."""
    i, j = np.triu_indices(target.shape[0], k=1)
    try:
        return spearman_rho(pred[i, j], target[i, j])
    except UndefinedCorrelationError:
        log.debug("constant predictions on a fold; scoring rho as 0")
        return 0.0


class CosineFamily:
    name = "cosine"

    def grid(self):
        return [{}]

    def fit(self, x, s, params, seed):
        return lambda x_new: cosine_matrix(zscore_columns(x_new))


class RidgeFamily:
    name = "ridge"

    def __init__(self, alphas=(1e-2, 1e-1, 1.0, 10.0, 100.0)):
        self.alphas = tuple(alphas)

    def grid(self):
        return [{"alpha": a} for a in self.alphas]

    def fit(self, x, s, params, seed):
        return ridge_baseline(x, s, params["alpha"]).predict_matrix


class LowRankFamily:
    name = "low_rank"

    def __init__(self, ranks=(1, 2, 5, 10), penalties=(1e-3, 1e-1), max_iters=3000, tol=1e-9):
        self.ranks = tuple(ranks)
        self.penalties = tuple(penalties)
        self.max_iters = max_iters
        self.tol = tol

    def grid(self):
        return [{"rank": r, "penalty": p} for r, p in itertools.product(self.ranks, self.penalties)]

    def fit(self, x, s, params, seed):
        return train_low_rank(x, s, params["rank"], params["penalty"], seed=seed,
                              max_iters=self.max_iters, tol=self.tol).predict_matrix


FAMILIES = {"cosine": CosineFamily, "ridge": RidgeFamily, "low_rank": LowRankFamily}


@dataclass
class CVResult:
    family: str
    fold_scores: list
    chosen: list
    test_items: list
    inner_scores: list = field(default_factory=list, repr=False)

    @property
    def mean(self):
        return float(np.mean(self.fold_scores))

    @property
    def std(self):
        return float(np.std(self.fold_scores))

    def to_dict(self):
        return {
            "family": self.family,
            "mean_rho": self.mean,
            "std_rho": self.std,
            "fold_rho": list(self.fold_scores),
            "chosen_hyperparameters": list(self.chosen),
            "test_items": [list(t) for t in self.test_items],
        }


def item_folds(n_items, folds, rng):
    if folds < 2:
        raise ConfigurationError("need at least two folds")
    parts = np.array_split(rng.permutation(n_items), folds)
    if min(len(p) for p in parts) < 2:
        raise ConfigurationError(
            f"{n_items} items cannot be split into {folds} folds of at least 2 items")
    return [np.sort(p) for p in parts]


def _fit_score(family, x, s, train, test, params, seed):
    predict = family.fit(x[train], s[np.ix_(train, train)], params, seed)
    return _score(predict(x[test]), s[np.ix_(test, test)])


def nested_cv(embeddings, target, family, folds=6, seed=0, threads=1):
    """Item-level nested cross-validation scored by Spearman rho.

    Items are split into ``folds`` outer folds.  A pair is a test pair only
    when both of its items are held out; training uses only pairs of training
    items, so no test item is ever seen in training.  Hyperparameters are
    chosen per outer fold by mean rho over ``folds`` inner splits of the
    training items.
    """
    if isinstance(family, str):
        family = FAMILIES[family]()
    x = embeddings.vectors if hasattr(embeddings, "vectors") else np.asarray(embeddings, dtype=float)
    s = target.values if isinstance(target, SimilarityMatrix) else np.asarray(target, dtype=float)
    n = x.shape[0]
    if s.shape != (n, n):
        raise InputError("target size does not match the number of embeddings")
    ids = getattr(embeddings, "ids", tuple(range(n)))
    rng = np.random.default_rng(seed)
    outer = item_folds(n, folds, rng)
    grid = family.grid()

    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    scores, chosen, test_items, inner_log = [], [], [], []
    try:
        for k, test in enumerate(outer):
            train = np.setdiff1d(np.arange(n), test)
            if len(grid) > 1:
                inner = item_folds(train.size, folds, np.random.default_rng([seed, k]))
                jobs = []
                for g, params in enumerate(grid):
                    for f, held in enumerate(inner):
                        itest = train[held]
                        itrain = np.setdiff1d(train, itest)
                        jobs.append((family, x, s, itrain, itest, params, _seed(seed, k, g, f)))
                if pool is None:
                    results = [_fit_score(*job) for job in jobs]
                else:
                    results = list(pool.map(lambda job: _fit_score(*job), jobs))
                per_grid = np.array(results).reshape(len(grid), len(inner)).mean(axis=1)
                best = int(np.argmax(per_grid))
                inner_log.append(per_grid.tolist())
            else:
                best = 0
                inner_log.append([])
            params = grid[best]
            scores.append(_fit_score(family, x, s, train, test, params, _seed(seed, k, best, -1)))
            chosen.append(dict(params))
            test_items.append(tuple(ids[t] for t in test))
    finally:
        if pool is not None:
            pool.shutdown()
    return CVResult(family.name, scores, chosen, test_items, inner_log)


def _seed(*parts):
    return int(np.random.SeedSequence([p % (2 ** 32) for p in parts]).generate_state(1)[0])
