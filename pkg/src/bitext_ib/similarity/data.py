"""Pile-sort judgements, embedding sets and similarity matrices."""
from __future__ import annotations

import csv
import io
import warnings
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

PILE_SORT_COLUMNS = ("participant_id", "item_id", "pile_id")


class InputError(ValueError):
    """Malformed or inconsistent input data."""


@dataclass(frozen=True)
class PileSortDataset:
    assignments: tuple  # (participant_id, item_id, pile_id)
    items: tuple

    @property
    def item_count(self):
        return len(self.items)

    @property
    def participants(self):
        return sorted({p for p, _, _ in self.assignments})

    def validate(self):
        seen = defaultdict(dict)
        for p, i, pile in self.assignments:
            if i in seen[p]:
                raise InputError(f"participant {p!r} assigns item {i!r} more than once")
            seen[p][i] = pile
        if not seen:
            raise InputError("pile-sort dataset has no participants")
        items = set(self.items)
        for p, piles in seen.items():
            missing = items - set(piles)
            if missing:
                raise InputError(
                    f"participant {p!r} did not sort items {sorted(missing)[:5]}")
        return seen


def parse_pile_sort(raw, source="<stream>"):
    if isinstance(raw, bytes):
        raw = raw.decode("utf-8")
    if not raw.strip():
        raise InputError(f"{source}: pile-sort file is empty")
    reader = csv.DictReader(io.StringIO(raw))
    if reader.fieldnames is None or any(c not in reader.fieldnames for c in PILE_SORT_COLUMNS):
        raise InputError(f"{source}: header must contain {', '.join(PILE_SORT_COLUMNS)}")
    rows = []
    for line_no, row in enumerate(reader, start=2):
        vals = tuple((row.get(c) or "").strip() for c in PILE_SORT_COLUMNS)
        if not all(vals):
            raise InputError(f"{source}: line {line_no}: empty field")
        rows.append(vals)
    if not rows:
        raise InputError(f"{source}: pile-sort file has no rows")
    items = tuple(sorted({i for _, i, _ in rows}, key=_natural_key))
    return PileSortDataset(tuple(rows), items)


def read_pile_sort(path):
    with open(path, "rb") as fh:
        return parse_pile_sort(fh.read(), source=str(path))


def _natural_key(s):
    return (0, int(s), s) if s.lstrip("-").isdigit() else (1, 0, s)


@dataclass(frozen=True)
class SimilarityMatrix:
    values: np.ndarray
    items: tuple
    kind: str = "predicted"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise InputError(f"similarity matrix must be square, got {v.shape}")
        if len(self.items) != v.shape[0]:
            raise InputError("item labels do not match matrix size")
        if not np.allclose(v, v.T, atol=1e-12, rtol=0):
            raise InputError("similarity matrix is not symmetric")
        if self.kind == "empirical":
            if v.min() < 0 or v.max() > 1 or not np.allclose(np.diag(v), 1.0):
                raise InputError("empirical similarities must lie in [0, 1] with unit diagonal")
        elif self.kind != "predicted":
            raise ValueError(f"unknown similarity kind {self.kind!r}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "items", tuple(self.items))

    def subset(self, items):
        pos = {it: k for k, it in enumerate(self.items)}
        idx = [pos[i] for i in items]
        return SimilarityMatrix(self.values[np.ix_(idx, idx)], tuple(items), self.kind)


def empirical_similarity(ds):
    """Proportion of participants who put each pair of items in the same pile."""
    piles = ds.validate()
    idx = {it: k for k, it in enumerate(ds.items)}
    k = len(ds.items)
    counts = np.zeros((k, k))
    for assignment in piles.values():
        labels = np.empty(k, dtype=object)
        for item, pile in assignment.items():
            labels[idx[item]] = pile
        counts += labels[:, None] == labels[None, :]
    return SimilarityMatrix(counts / len(piles), ds.items, "empirical")


@dataclass(frozen=True)
class EmbeddingSet:
    ids: tuple
    vectors: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=float)
        if v.ndim != 2 or v.shape[0] != len(self.ids):
            raise InputError("embedding matrix must have one row per item id")
        if not np.all(np.isfinite(v)):
            raise InputError("embeddings contain non-finite values")
        if len(set(self.ids)) != len(self.ids):
            raise InputError("duplicate item ids in embeddings")
        v.setflags(write=False)
        object.__setattr__(self, "vectors", v)
        object.__setattr__(self, "ids", tuple(self.ids))

    def __len__(self):
        return len(self.ids)

    @property
    def dim(self):
        return self.vectors.shape[1]

    def subset(self, ids):
        pos = {it: k for k, it in enumerate(self.ids)}
        missing = [i for i in ids if i not in pos]
        if missing:
            raise InputError(f"no embedding for items {missing[:5]}")
        return EmbeddingSet(tuple(ids), self.vectors[[pos[i] for i in ids]])


def parse_embeddings(raw, source="<stream>"):
    if isinstance(raw, bytes):
        raw = raw.decode("utf-8")
    ids, rows = [], []
    width = None
    for line_no, line in enumerate(raw.splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.rstrip("\n").split("\t")
        if width is None:
            width = len(parts)
            if width < 2:
                raise InputError(f"{source}: line {line_no}: no vector values")
        elif len(parts) != width:
            raise InputError(f"{source}: line {line_no}: expected {width} fields, found {len(parts)}")
        try:
            rows.append([float(x) for x in parts[1:]])
        except ValueError as exc:
            if line_no == 1:
                # a header row
                width = None
                continue
            raise InputError(f"{source}: line {line_no}: {exc}") from None
        ids.append(parts[0].strip())
    if not rows:
        raise InputError(f"{source}: embedding file is empty")
    return EmbeddingSet(tuple(ids), np.array(rows))


def read_embeddings(path):
    with open(path, "rb") as fh:
        return parse_embeddings(fh.read(), source=str(path))


def zscore_columns(x):
    """Standardise each column; constant columns are dropped with a warning."""
    x = np.asarray(x, dtype=float)
    sd = x.std(axis=0)
    keep = sd > 0
    if not keep.all():
        warnings.warn(f"dropping {int((~keep).sum())} zero-variance embedding dimensions",
                      RuntimeWarning, stacklevel=2)
    return (x[:, keep] - x[:, keep].mean(axis=0)) / sd[keep]
