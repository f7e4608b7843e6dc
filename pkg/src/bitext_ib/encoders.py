"""Alignment tables, translation encoders and their place in the information plane."""
from __future__ import annotations

import csv
import io
import re
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .beliefs import joint_wu
from .info import DimensionError, conditional_distribution, mutual_information, prob_vector

ALIGNMENT_COLUMNS = ("id", "meaning_key", "source_term", "target_language", "target_term")
ZERO_ALIGNMENT = "None"

_WS = re.compile(r"\s+")


class AlignmentParseError(ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class EmptyInputError(ValueError):
    pass


def normalize_meaning_key(text):
    """Lowercase and collapse whitespace; punctuation is kept."""
    return _WS.sub(" ", text.strip()).lower()


@dataclass(frozen=True)
class AlignmentRecord:
    meaning_key: str
    source_term: str
    target_term: str
    target_language: str
    record_id: str = ""


@dataclass(frozen=True)
class AlignmentTable:
    records: tuple

    def __len__(self):
        return len(self.records)

    @property
    def meanings(self):
        return sorted({r.meaning_key for r in self.records})

    @property
    def languages(self):
        return sorted({r.target_language for r in self.records})

    def for_language(self, language):
        return AlignmentTable(tuple(r for r in self.records if r.target_language == language))

    def counts(self):
        """Occurrence counts keyed by (meaning_key, target_term)."""
        return Counter((r.meaning_key, r.target_term) for r in self.records)


def parse_alignments(raw, source="<stream>"):
    """Parse an alignment TSV (bytes, str, or a path-like opened by the caller).

    Rows whose target term is the literal ``None`` are zero alignments and are
    skipped.
    """
    if isinstance(raw, bytes):
        raw = raw.decode("utf-8")
    if not isinstance(raw, str):
        raw = raw.read()
        if isinstance(raw, bytes):
            raw = raw.decode("utf-8")
    if not raw.strip():
        raise EmptyInputError(f"{source}: alignment file is empty")

    reader = csv.reader(io.StringIO(raw), delimiter="\t", quoting=csv.QUOTE_NONE)
    header = next(reader)
    header = [h.strip() for h in header]
    missing = [c for c in ALIGNMENT_COLUMNS if c not in header]
    if missing:
        raise AlignmentParseError(f"header is missing columns {missing}", line=1)
    pos = {c: header.index(c) for c in ALIGNMENT_COLUMNS}

    records = []
    for line_no, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            raise AlignmentParseError(
                f"expected {len(header)} columns, found {len(row)}", line=line_no)
        values = {c: row[i].strip() for c, i in pos.items()}
        if values["target_term"] == ZERO_ALIGNMENT:
            continue
        key = normalize_meaning_key(values["meaning_key"])
        if not key:
            raise AlignmentParseError("empty meaning_key", line=line_no)
        if not values["target_term"]:
            raise AlignmentParseError("empty target_term", line=line_no)
        if not values["target_language"]:
            raise AlignmentParseError("empty target_language", line=line_no)
        records.append(AlignmentRecord(
            meaning_key=key,
            source_term=values["source_term"],
            target_term=values["target_term"],
            target_language=values["target_language"],
            record_id=values["id"],
        ))
    if not records:
        raise EmptyInputError(f"{source}: no usable alignment rows")
    return AlignmentTable(tuple(records))


def read_alignments(path):
    with open(path, "rb") as fh:
        return parse_alignments(fh.read(), source=str(path))


@dataclass(frozen=True)
class Encoder:
    """A translation encoder: policy p(w|m) plus the prior p(m).

    Rows of ``policy`` follow ``meanings``; columns follow ``lexicon``.
    """
    policy: np.ndarray
    prior: np.ndarray
    lexicon: tuple = field(default=())
    meanings: tuple = field(default=())

    def __post_init__(self):
        policy = conditional_distribution(self.policy)
        prior = prob_vector(self.prior)
        if policy.shape[0] != prior.size:
            raise DimensionError(
                f"policy has {policy.shape[0]} rows but prior has {prior.size} entries")
        lexicon = tuple(self.lexicon) or tuple(f"w{k}" for k in range(policy.shape[1]))
        meanings = tuple(self.meanings) or tuple(f"m{k}" for k in range(policy.shape[0]))
        if len(lexicon) != policy.shape[1] or len(meanings) != policy.shape[0]:
            raise DimensionError("labels do not match policy shape")
        policy.setflags(write=False)
        prior.setflags(write=False)
        object.__setattr__(self, "policy", policy)
        object.__setattr__(self, "prior", prior)
        object.__setattr__(self, "lexicon", lexicon)
        object.__setattr__(self, "meanings", meanings)

    @property
    def n_meanings(self):
        return self.policy.shape[0]

    @property
    def n_words(self):
        return self.policy.shape[1]

    def joint_mw(self):
        """p(m, w) = p(w|m) p(m), meanings on rows."""
        return self.prior[:, None] * self.policy

    def with_policy(self, policy):
        return Encoder(policy, self.prior, self.lexicon, self.meanings)


def uniform_prior(n):
    return np.full(n, 1.0 / n)


def build_encoder(table, prior="uniform", meanings=None):
    """Empirical encoder from an alignment table.

    Each policy row is the occurrence-weighted distribution of target terms
    aligned to that meaning. ``prior`` is ``"uniform"`` (default) or
    ``"frequency"`` (proportional to each meaning's occurrence count).
    ``meanings`` fixes the row order; it defaults to the sorted meaning keys.
    """
    if not len(table):
        raise EmptyInputError("alignment table is empty")
    counts = table.counts()
    meanings = tuple(meanings) if meanings is not None else tuple(table.meanings)
    lexicon = tuple(sorted({w for _, w in counts}))
    m_idx = {m: i for i, m in enumerate(meanings)}
    w_idx = {w: i for i, w in enumerate(lexicon)}
    unknown = sorted({m for m, _ in counts} - set(m_idx))
    if unknown:
        raise DimensionError(f"meanings absent from the requested inventory: {unknown[:5]}")

    mat = np.zeros((len(meanings), len(lexicon)))
    for (m, w), c in counts.items():
        mat[m_idx[m], w_idx[w]] += c
    row_tot = mat.sum(axis=1)
    empty = [meanings[i] for i in np.flatnonzero(row_tot == 0)]
    if empty:
        raise DimensionError(f"meanings with no alignment: {empty[:5]}")

    if prior == "uniform":
        p_m = uniform_prior(len(meanings))
    elif prior == "frequency":
        p_m = row_tot / row_tot.sum()
    else:
        raise ValueError(f"unknown prior {prior!r}")
    return Encoder(mat / row_tot[:, None], p_m, lexicon, meanings)


def complexity(e):
    """I(M;W) in bits."""
    return mutual_information(e.joint_mw())


def accuracy(e, beliefs):
    """I(W;U) in bits, for a belief model p(u|m) over the encoder's meanings."""
    return mutual_information(joint_wu(e, beliefs))


@dataclass(frozen=True)
class PlanePoint:
    complexity: float
    accuracy: float
    label: str = ""


def plane_point(e, beliefs, label=""):
    return PlanePoint(complexity(e), accuracy(e, beliefs), label)
