"""End-to-end runs behind the command-line interface.

Every ``run_*`` function returns a mapping of output file name to file
contents; nothing touches the filesystem until :func:`write_outputs` stages
the whole set and moves it into place.
"""
from __future__ import annotations

import json
import logging
import os
import shutil
import tempfile
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import io as aio
from .baselines import (
    PerturbationSpec,
    batch_plane,
    deviation_from_plane,
    iter_perturbed_policies,
    iter_random_assignments,
    onehot_plane_coordinates,
)
from .beliefs import belief_from_similarity
from .encoders import AlignmentParseError, EmptyInputError, build_encoder, read_alignments
from .frontier import IBProblem, beta_grid, reverse_annealing
from .info import DimensionError, DistributionError
from .similarity import (
    EmbeddingSet,
    InputError,
    LowRankFamily,
    LowRankModel,
    RidgeFamily,
    classical_mds,
    cosine_baseline,
    empirical_similarity,
    nested_cv,
    read_embeddings,
    read_pile_sort,
    select_representatives,
    spearman_rho,
    train_low_rank,
)
from .similarity.evaluation import ConfigurationError, CosineFamily

log = logging.getLogger(__name__)

BATCH = 256


class PipelineError(Exception):
    exit_code = 2


class NonConvergenceError(PipelineError):
    exit_code = 3


INPUT_ERRORS = (InputError, AlignmentParseError, EmptyInputError, DimensionError,
                DistributionError, ConfigurationError, OSError, ValueError)


def _require(cfg, *names):
    missing = [n for n in names if not getattr(cfg, n)]
    if missing:
        raise PipelineError(f"missing required input(s): {', '.join(missing)}")


# --------------------------------------------------------------------------
# similarity


def _similarity_inputs(cfg):
    _require(cfg, "piles", "embeddings")
    piles = read_pile_sort(cfg.piles)
    target = empirical_similarity(piles)
    emb = read_embeddings(cfg.embeddings).subset(list(target.items))
    return piles, target, emb


def run_similarity(cfg):
    """Table-style comparison of similarity predictors plus the persisted best model."""
    piles, target, emb = _similarity_inputs(cfg)
    s = target.values
    i, j = np.triu_indices(len(target.items), k=1)
    cos_all = spearman_rho(cosine_baseline(emb).values[i, j], s[i, j])
    cos_cv = nested_cv(emb, target, CosineFamily(), cfg.folds, cfg.cv_seed, cfg.threads)
    ridge = nested_cv(emb, target, RidgeFamily(cfg.alphas), cfg.folds, cfg.cv_seed, cfg.threads)
    per_rank = {}
    for d in cfg.ranks:
        fam = LowRankFamily(ranks=(d,), penalties=cfg.penalties)
        per_rank[d] = nested_cv(emb, target, fam, cfg.folds, cfg.cv_seed, cfg.threads)

    best_rank = max(cfg.ranks, key=lambda d: (per_rank[d].mean, -d))
    votes = Counter(c["penalty"] for c in per_rank[best_rank].chosen)
    best_penalty = min(votes, key=lambda p: (-votes[p], p))
    model = train_low_rank(emb, target, best_rank, best_penalty, seed=cfg.train_seed)

    report = {
        "items": list(target.items),
        "n_participants": len(piles.participants),
        "cosine": {"rho_all_pairs": cos_all, "cv": cos_cv.to_dict()},
        "ridge": ridge.to_dict(),
        "low_rank": {str(d): per_rank[d].to_dict() for d in cfg.ranks},
        "best": {"rank": best_rank, "penalty": best_penalty,
                 "mean_rho": per_rank[best_rank].mean, "std_rho": per_rank[best_rank].std},
    }
    rows = [("cosine", "", cos_all, float("nan")),
            ("ridge", "", ridge.mean, ridge.std)]
    rows += [("low_rank", d, per_rank[d].mean, per_rank[d].std) for d in cfg.ranks]
    model_json = dict(model.to_dict(), items=list(emb.ids), dim=model.dim)
    return {
        "similarity_report.json": aio.dumps_json(report),
        "similarity_report.csv": aio.rows_to_csv(("model", "rank", "mean_rho", "std_rho"), rows),
        "low_rank_model.json": aio.dumps_json(model_json),
    }, model


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        try:
            return LowRankModel.from_dict(json.load(fh))
        except (KeyError, ValueError, TypeError) as exc:
            raise InputError(f"{path}: not a low-rank model file ({exc})") from None


def run_mds(cfg, dims=2):
    _require(cfg, "piles")
    target = empirical_similarity(read_pile_sort(cfg.piles))
    coords = classical_mds(target, dims)
    out = {"items": list(target.items), "dims": dims,
           "coordinates": {it: [float(v) for v in row] for it, row in zip(target.items, coords)}}
    return {"mds.json": aio.dumps_json(out)}


def run_select(cfg):
    _require(cfg, "embeddings")
    emb = read_embeddings(cfg.embeddings)
    chosen = select_representatives(emb, cfg.k, seed=cfg.select_seed)
    return {"representatives.json": aio.dumps_json({"k": cfg.k, "seed": cfg.select_seed,
                                                     "items": chosen})}


# --------------------------------------------------------------------------
# information plane


@dataclass
class MeaningSpace:
    meanings: tuple
    prior: np.ndarray
    beliefs: object
    encoders: dict
    similarity_files: dict = field(default_factory=dict)


def _meaning_embeddings(table, emb):
    ids_by_meaning = {}
    for r in table.records:
        ids_by_meaning.setdefault(r.meaning_key, []).append(r.record_id)
    known = set(emb.ids)
    chosen, missing = [], []
    for m in table.meanings:
        hit = sorted(set(ids_by_meaning[m]) & known, key=_natural_key)
        if hit:
            chosen.append(hit[0])
        else:
            missing.append(m)
    if missing:
        raise DimensionError(
            f"no embedding for the record ids of meaning_keys: {missing[:5]}"
            + (f" (+{len(missing) - 5} more)" if len(missing) > 5 else ""))
    return emb.subset(chosen)


def _natural_key(s):
    return (0, int(s), s) if s.isdigit() else (1, 0, s)


def build_meaning_space(cfg):
    _require(cfg, "alignments", "embeddings")
    table = read_alignments(cfg.alignments)
    meanings = tuple(table.meanings)
    langs = table.languages
    for lang in langs:
        have = set(table.for_language(lang).meanings)
        absent = [m for m in meanings if m not in have]
        if absent:
            raise DimensionError(
                f"language {lang!r} has no alignment for meaning_keys: {absent[:5]}")
    emb = read_embeddings(cfg.embeddings)
    files = {}
    if cfg.model:
        model = load_model(cfg.model)
    elif cfg.piles:
        files, model = run_similarity(cfg)
    else:
        raise PipelineError("need a similarity model (--model) or pile-sort data (--piles)")
    memb = _meaning_embeddings(table, emb)
    if memb.dim != model.dim:
        raise DimensionError(f"model expects {model.dim}-d embeddings, got {memb.dim}")
    beliefs = belief_from_similarity(model.predict_matrix(memb), cfg.gamma)

    if cfg.prior == "frequency":
        # occurrences = distinct source records per meaning
        occ = {}
        for r in table.records:
            occ.setdefault(r.meaning_key, set()).add(r.record_id)
        prior = np.array([len(occ[m]) for m in meanings], dtype=float)
        prior /= prior.sum()
    else:
        prior = np.full(len(meanings), 1.0 / len(meanings))
    encoders = {}
    for lang in langs:
        enc = build_encoder(table.for_language(lang), meanings=meanings)
        encoders[lang] = enc.__class__(enc.policy, prior, enc.lexicon, enc.meanings)
    return MeaningSpace(meanings, prior, beliefs, encoders, files)


def compute_frontier(cfg, space):
    problem = IBProblem(space.prior, space.beliefs.conditional, cfg.max_words)
    curve = reverse_annealing(problem, beta_grid(cfg.n_betas, cfg.beta_min, cfg.beta_max),
                              tol=cfg.tol, max_iters=cfg.max_iters,
                              jitter=cfg.annealing_jitter, seed=cfg.frontier_seed,
                              keep_policies=False)
    bad = int((~curve.converged).sum())
    if bad:
        msg = f"{bad} of {len(curve)} frontier points did not converge"
        if cfg.strict:
            raise NonConvergenceError(msg)
        log.warning(msg)
    return curve


@dataclass
class AnalysisBundle:
    config: object
    curve: object
    points: list      # (label, kind, language, fraction, complexity, accuracy)
    deviations: list  # (label, kind, fraction, epsilon, argmin_beta)
    extra_files: dict = field(default_factory=dict)


def _seed(*parts):
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0])


def _map(fn, items, threads):
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _chunks(iterable, size):
    buf = []
    for x in iterable:
        buf.append(x)
        if len(buf) == size:
            yield buf
            buf = []
    if buf:
        yield buf


def _perturbed_coords(enc, beliefs, spec, threads):
    def job(batch):
        return batch_plane(np.stack(batch), enc.prior, beliefs)
    parts = _map(job, list(_chunks(iter_perturbed_policies(enc.policy, spec), BATCH)), threads)
    if not parts:
        return np.empty(0), np.empty(0)
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def _random_coords(enc, beliefs, count, seed, soft, threads):
    if soft:
        rng = np.random.default_rng(seed)

        def batches():
            done = 0
            while done < count:
                b = min(BATCH, count - done)
                yield rng.dirichlet(np.ones(enc.n_words), size=(b, enc.n_meanings))
                done += b
        parts = _map(lambda p: batch_plane(p, enc.prior, beliefs), list(batches()), threads)
    else:
        chunks = list(iter_random_assignments(enc.n_words, enc.n_meanings, count, seed, BATCH))
        parts = _map(lambda a: onehot_plane_coordinates(a, enc.n_words, beliefs, enc.prior),
                     chunks, threads)
    if not parts:
        return np.empty(0), np.empty(0)
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def run_analysis(cfg):
    cfg.validate()
    space = build_meaning_space(cfg)
    curve = compute_frontier(cfg, space)
    points, devs = [], []

    def add(labels, kind, lang, fraction, comp, acc):
        eps, argmin, _ = deviation_from_plane(comp, acc, curve)
        for lab, c, a, e, b in zip(labels, comp, acc, eps, argmin):
            points.append((lab, kind, lang, fraction, c, a))
            devs.append((lab, kind, fraction, e, b))

    for li, (lang, enc) in enumerate(sorted(space.encoders.items())):
        c, a = batch_plane(enc.policy[None], enc.prior, space.beliefs)
        add([f"{lang}:attested"], "attested", lang, float("nan"), c, a)
        for fi, frac in enumerate(cfg.fractions):
            spec = PerturbationSpec(frac, cfg.perturbed_count, _seed(cfg.baseline_seed, li, fi, 1))
            c, a = _perturbed_coords(enc, space.beliefs, spec, cfg.threads)
            add([f"{lang}:perturbed:{frac:g}:{k}" for k in range(c.size)],
                "perturbed", lang, frac, c, a)
        c, a = _random_coords(enc, space.beliefs, cfg.random_count,
                              _seed(cfg.baseline_seed, li, 2), cfg.soft_random, cfg.threads)
        add([f"{lang}:random:{k}" for k in range(c.size)], "random", lang, float("nan"), c, a)
    return AnalysisBundle(cfg, curve, points, devs, dict(space.similarity_files))


def emit_plot_data(bundle, jitter=False, jitter_seed=0, jitter_scale=0.01):
    """``infoplane.csv`` and ``deviations.csv`` with a fixed column order.

    With ``jitter`` a separate ``complexity_jitter`` column holds a seeded
    display offset; the true coordinates are never altered.
    """
    missing = [n for n in ("curve", "points", "deviations") if getattr(bundle, n, None) is None]
    if missing:
        raise PipelineError(f"incomplete analysis bundle, missing: {', '.join(missing)}")
    cols = aio.INFOPLANE_COLUMNS
    rows = [list(p) for p in bundle.points]
    if jitter:
        offsets = np.random.default_rng(jitter_seed).normal(scale=jitter_scale, size=len(rows))
        cols = cols + ("complexity_jitter",)
        for row, off in zip(rows, offsets):
            row.append(float(off))
    return {
        "infoplane.csv": aio.rows_to_csv(cols, rows),
        "deviations.csv": aio.rows_to_csv(aio.DEVIATION_COLUMNS, bundle.deviations),
    }


def analysis_files(bundle):
    cfg = bundle.config
    files = dict(bundle.extra_files)
    files["frontier.csv"] = aio.frontier_csv(bundle.curve)
    files.update(emit_plot_data(bundle, cfg.plot_jitter, cfg.jitter_seed, cfg.jitter_scale))
    return with_manifest(cfg, files, "analyze")


def with_manifest(cfg, files, command):
    files = dict(files)
    # the content hash covers data files only, so it does not depend on the output path
    content = {name: aio.sha256_text(text) for name, text in sorted(files.items())}
    files["config.ini"] = cfg.to_ini()
    hashes = {name: aio.sha256_text(text) for name, text in sorted(files.items())}
    manifest = {
        "command": command,
        "config": cfg.as_dict(),
        "seeds": {k: getattr(cfg, k) for k in
                  ("frontier_seed", "baseline_seed", "cv_seed", "train_seed", "select_seed",
                   "jitter_seed")},
        "files": hashes,
        "content_hash": aio.sha256_text(aio.dumps_json(content)),
    }
    files["manifest.json"] = aio.dumps_json(manifest)
    return files


def run_frontier(cfg):
    space = build_meaning_space(cfg)
    curve = compute_frontier(cfg, space)
    return with_manifest(cfg, {"frontier.csv": aio.frontier_csv(curve)}, "frontier")


def run_deviations(cfg, frontier_path):
    """Deviations of the attested encoders against a previously written frontier."""
    space = build_meaning_space(cfg)
    curve = aio.read_frontier_csv(frontier_path)
    rows = []
    for lang, enc in sorted(space.encoders.items()):
        c, a = batch_plane(enc.policy[None], enc.prior, space.beliefs)
        eps, argmin, _ = deviation_from_plane(c, a, curve)
        rows.append((f"{lang}:attested", "attested", float("nan"), eps[0], argmin[0]))
    return with_manifest(cfg, {"deviations.csv": aio.rows_to_csv(aio.DEVIATION_COLUMNS, rows)},
                         "deviations")


def write_outputs(out_dir, files):
    """Write all files into a staging directory, then move them into ``out_dir``."""
    out_dir = os.path.abspath(out_dir)
    parent = os.path.dirname(out_dir)
    os.makedirs(parent, exist_ok=True)
    stage = tempfile.mkdtemp(prefix=".staging-", dir=parent)
    try:
        for name, text in files.items():
            with open(os.path.join(stage, name), "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        os.makedirs(out_dir, exist_ok=True)
        for name in files:
            os.replace(os.path.join(stage, name), os.path.join(out_dir, name))
    finally:
        shutil.rmtree(stage, ignore_errors=True)
    return sorted(files)
