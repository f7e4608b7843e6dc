"""Seeded synthetic datasets with planted structure, for demos and tests."""
from __future__ import annotations

import numpy as np

from .similarity.data import EmbeddingSet, SimilarityMatrix
from .similarity.models import LowRankModel


def planted_embeddings(n_items=30, dim=64, rank=5, semantic=10, nuisance=6, noise=0.05, seed=0):
    """Embeddings with a planted similarity-relevant block, and the planted projection.

    ``semantic`` coordinates carry independent Gaussian features that a dense
    random ``rank`` x ``dim`` projection P* mixes; the remaining coordinates
    hold ``nuisance`` latent factors that are irrelevant to similarity.
    Coordinates are shuffled so the block is not contiguous.
    """
    rng = np.random.default_rng(seed)
    x = np.zeros((n_items, dim))
    x[:, :semantic] = rng.standard_normal((n_items, semantic))
    mix = rng.standard_normal((nuisance, dim - semantic)) / np.sqrt(nuisance)
    x[:, semantic:] = rng.standard_normal((n_items, nuisance)) @ mix
    x += noise * rng.standard_normal((n_items, dim))
    proj = np.zeros((rank, dim))
    proj[:, :semantic] = rng.standard_normal((rank, semantic)) / np.sqrt(semantic)
    perm = rng.permutation(dim)
    emb = EmbeddingSet(tuple(str(i + 1) for i in range(n_items)), x[:, perm])
    return emb, proj[:, perm]


def planted_similarity(n_items=30, dim=64, rank=5, sim_noise=0.05, seed=0):
    """Embeddings, similarities (P* f_i).(P* f_j) + N(0, sim_noise^2), and P*."""
    emb, proj = planted_embeddings(n_items, dim, rank, seed=seed)
    y = emb.vectors @ proj.T
    s = y @ y.T
    noise = np.triu(np.random.default_rng([seed, 1]).normal(scale=sim_noise, size=s.shape), 1)
    return emb, SimilarityMatrix(s + noise + noise.T, emb.ids, "predicted"), proj


def planted_pile_sort(n_items=30, n_participants=35, dim=64, rank=5, pile_range=(3, 9),
                      judgement_noise=0.3, seed=0):
    """Pile-sort rows driven by the planted geometry.

    Each participant perceives item i at P* f_i plus Gaussian noise and puts it
    in the pile whose random anchor direction has the largest inner product
    with it.  Returns (rows, embeddings, P*).
    """
    emb, proj = planted_embeddings(n_items, dim, rank, seed=seed)
    rng = np.random.default_rng([seed, 2])
    y = emb.vectors @ proj.T
    y = y / y.std()
    rows = []
    for p in range(n_participants):
        seen = y + judgement_noise * rng.standard_normal(y.shape)
        k = int(rng.integers(pile_range[0], pile_range[1] + 1))
        anchors = rng.standard_normal((k, rank))
        anchors /= np.linalg.norm(anchors, axis=1, keepdims=True)
        piles = np.argmax(seen @ anchors.T, axis=1)
        for i, pile in enumerate(piles):
            rows.append((f"p{p + 1:02d}", emb.ids[i], f"pile{int(pile) + 1}"))
    return rows, emb, proj


def planted_corpus(n_meanings=40, n_clusters=5, languages=("de", "en", "sr"), dim=12,
                   rank=3, occurrences=(1, 3), flip=0.1, seed=0):
    """Alignment records over clustered meanings, plus embeddings and a projection model.

    Meanings are drawn around ``n_clusters`` centres; each language names a
    meaning's cluster with its own word and, with probability ``flip``, uses a
    word of another cluster instead, so attested encoders sit near (not on)
    the efficient clustering.
    """
    rng = np.random.default_rng(seed)
    centres = 3.0 * rng.standard_normal((n_clusters, dim))
    cluster = np.sort(np.arange(n_meanings) % n_clusters)
    x = centres[cluster] + 0.5 * rng.standard_normal((n_meanings, dim))
    proj = rng.standard_normal((rank, dim)) / np.sqrt(dim)
    scale = np.sqrt(np.abs((x @ proj.T) @ (x @ proj.T).T).mean())
    model = LowRankModel(proj / scale, 0.0)

    records = []
    rid = 0
    ids = []
    for m in range(n_meanings):
        key = f"contexte {m + 1:03d} : la relation spatiale numero {m + 1}"
        first = None
        for _ in range(int(rng.integers(occurrences[0], occurrences[1] + 1))):
            rid += 1
            first = first or str(rid)
            for lang in languages:
                c = cluster[m]
                if rng.random() < flip:
                    c = int(rng.integers(n_clusters))
                records.append((str(rid), key, f"prep{cluster[m] + 1}", lang, f"{lang}_{c + 1}"))
        ids.append(first)
    emb = EmbeddingSet(tuple(ids), x)
    return records, emb, model


def toy_corpus():
    """Four meanings in two languages with a hand-set embedding geometry."""
    meanings = [
        ("1", "le chat est sur la table", "sur"),
        ("2", "la tasse est posée sur le bureau", "sur"),
        ("3", "il entra dans la maison", "dans"),
        ("4", "la clé est dans la boîte", "dans"),
    ]
    words = {"en": ["on", "on", "into", "in"], "de": ["auf", "auf", "in", "in"]}
    records = []
    for lang in ("de", "en"):
        for (rid, key, src), w in zip(meanings, words[lang]):
            records.append((rid, key, src, lang, w))
    x = np.array([
        [1.0, 0.2, 0.0, 0.1],
        [0.9, 0.3, 0.1, 0.0],
        [0.0, 0.1, 1.0, 0.3],
        [0.1, 0.0, 0.8, 0.4],
    ])
    emb = EmbeddingSet(("1", "2", "3", "4"), x)
    model = LowRankModel(np.array([[2.0, 0.5, 0.0, 0.0], [0.0, 0.0, 2.0, 0.5]]), 0.0)
    return records, emb, model
