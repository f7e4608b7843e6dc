"""Representative-item selection and classical MDS."""
from __future__ import annotations

import warnings

import numpy as np
from sklearn.cluster import KMeans

from .data import InputError, SimilarityMatrix


def fit_kmeans(x, k, seed=0, n_init=50):
    return KMeans(n_clusters=k, init="k-means++", n_init=n_init, random_state=seed).fit(x)


def select_representatives(embeddings, k, seed=0, n_init=50):
    """Run k-means (k-means++ init) and return the item nearest each centroid.

    Centroids are visited in label order; if an item is already taken the next
    nearest unused item is returned, so the result has ``k`` distinct ids.
    """
    x = embeddings.vectors
    n = x.shape[0]
    if k < 1 or k > n:
        raise InputError(f"cannot select {k} representatives from {n} items")
    if k == n:
        return list(embeddings.ids)
    km = fit_kmeans(x, k, seed, n_init)
    dist = np.linalg.norm(x[:, None, :] - km.cluster_centers_[None, :, :], axis=2)
    taken = set()
    out = []
    for c in range(k):
        for i in np.argsort(dist[:, c], kind="stable"):
            if i not in taken:
                taken.add(int(i))
                out.append(embeddings.ids[i])
                break
    return out


def kmeans_inertia(x, labels_or_centers):
    centers = np.asarray(labels_or_centers, dtype=float)
    d2 = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    return float(d2.min(axis=1).sum())


def classical_mds(sim, dims=2):
    """Torgerson MDS on dissimilarities 1 - sim.

    Returns an (n, dims) array centred at the origin.  When fewer than ``dims``
    eigenvalues are positive the remaining coordinates are zero.
    """
    if dims < 1:
        raise ValueError("dims must be >= 1")
    s = sim.values if isinstance(sim, SimilarityMatrix) else np.asarray(sim, dtype=float)
    n = s.shape[0]
    d2 = (1.0 - s) ** 2
    np.fill_diagonal(d2, 0.0)
    j = np.eye(n) - np.full((n, n), 1.0 / n)
    b = -0.5 * j @ d2 @ j
    vals, vecs = np.linalg.eigh((b + b.T) / 2)
    order = np.argsort(vals)[::-1]
    vals, vecs = vals[order], vecs[:, order]
    tol = max(1e-12, 1e-10 * abs(vals[0]))
    positive = int(np.sum(vals[:dims] > tol))
    if positive < dims:
        warnings.warn(f"only {positive} positive eigenvalues; padding MDS with zeros",
                      RuntimeWarning, stacklevel=2)
    coords = np.zeros((n, dims))
    coords[:, :positive] = vecs[:, :positive] * np.sqrt(vals[:positive])
    # fix the sign of each axis so output is reproducible
    for c in range(positive):
        pivot = np.argmax(np.abs(coords[:, c]))
        if coords[pivot, c] < 0:
            coords[:, c] *= -1
    return coords - coords.mean(axis=0)
