"""Readers and writers for the delimited and JSON artefacts."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math

import numpy as np

from .encoders import ALIGNMENT_COLUMNS
from .frontier import FrontierCurve
from .similarity.data import InputError, PILE_SORT_COLUMNS

FRONTIER_COLUMNS = ("beta", "complexity_bits", "accuracy_bits", "converged",
                    "raw_complexity_bits", "raw_accuracy_bits")
INFOPLANE_COLUMNS = ("label", "kind", "language", "fraction", "complexity_bits", "accuracy_bits")
DEVIATION_COLUMNS = ("label", "kind", "fraction", "epsilon_bits", "argmin_beta")


def fmt(x):
    """Decimal with 12 significant digits; empty for missing values."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        if math.isnan(x):
            return ""
        if x == 0:
            return "0"
        return f"{float(x):.12g}"
    return str(x)


def rows_to_csv(columns, rows, delimiter=","):
    buf = io.StringIO()
    w = csv.writer(buf, delimiter=delimiter, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def frontier_csv(curve):
    rows = zip(curve.betas, curve.complexity, curve.accuracy, curve.converged,
               curve.raw_complexity, curve.raw_accuracy)
    return rows_to_csv(FRONTIER_COLUMNS, rows)


def parse_frontier_csv(text, source="<frontier>"):
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or list(reader.fieldnames)[:4] != list(FRONTIER_COLUMNS[:4]):
        raise InputError(f"{source}: expected columns {','.join(FRONTIER_COLUMNS[:4])}")
    has_raw = set(FRONTIER_COLUMNS[4:]) <= set(reader.fieldnames)
    b, c, a, ok, rc, ra = [], [], [], [], [], []
    for row in reader:
        b.append(float(row["beta"]))
        c.append(float(row["complexity_bits"]))
        a.append(float(row["accuracy_bits"]))
        ok.append(row["converged"].strip().lower() in ("true", "1"))
        if has_raw:
            rc.append(float(row["raw_complexity_bits"]))
            ra.append(float(row["raw_accuracy_bits"]))
    if not b:
        raise InputError(f"{source}: frontier file has no rows")
    return FrontierCurve(np.array(b), np.array(c), np.array(a), np.array(ok),
                         raw_complexity=np.array(rc) if has_raw else None,
                         raw_accuracy=np.array(ra) if has_raw else None)


def read_frontier_csv(path):
    with open(path, encoding="utf-8") as fh:
        return parse_frontier_csv(fh.read(), str(path))


def alignments_tsv(records):
    return rows_to_csv(ALIGNMENT_COLUMNS, records, delimiter="\t")


def pile_sort_csv(rows):
    return rows_to_csv(PILE_SORT_COLUMNS, rows)


def embeddings_tsv(emb):
    lines = []
    for i, vec in zip(emb.ids, emb.vectors):
        lines.append("\t".join([i] + [repr(float(v)) for v in vec]))
    return "\n".join(lines) + "\n"


def dumps_json(obj):
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


def sha256_text(text):
    return hashlib.sha256(text.encode("utf-8")).hexdigest()
