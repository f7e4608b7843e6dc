"""Command-line entry point: ``bitext-ib <subcommand> [options]``.

Exit codes: 0 success, 2 input/configuration error, 3 frontier
non-convergence under ``--strict``.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys

from . import io as aio
from . import pipeline
from .config import ConfigError, load_config
from .synthetic import planted_corpus, planted_pile_sort, toy_corpus

log = logging.getLogger("bitext_ib")

def _common(p):
    p.add_argument("--config", help="INI configuration file; flags override it")
    p.add_argument("--out", dest="out_dir", help="output directory")
    p.add_argument("--threads", type=int)
    p.add_argument("-v", "--verbose", action="store_true")

def _inputs(p, *names):
    for n in names:
        p.add_argument(f"--{n}", dest=n, help=f"{n} input file")

def _belief_opts(p):
    p.add_argument("--gamma", type=float, help="softmax temperature for p(u|m)")
    p.add_argument("--prior", choices=("uniform", "frequency"))

def _frontier_opts(p):
    p.add_argument("--n-betas", dest="n_betas", type=int)
    p.add_argument("--beta-min", dest="beta_min", type=float)
    p.add_argument("--beta-max", dest="beta_max", type=float)
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iters", dest="max_iters", type=int)
    p.add_argument("--annealing-jitter", dest="annealing_jitter", type=float)
    p.add_argument("--frontier-seed", dest="frontier_seed", type=int)
    p.add_argument("--max-words", dest="max_words", type=int)
    p.add_argument("--strict", action="store_const", const=True, default=None,
                   help="treat frontier non-convergence as failure (exit 3)")

def _cv_opts(p):
    p.add_argument("--folds", type=int)
    p.add_argument("--cv-seed", dest="cv_seed", type=int)
    p.add_argument("--train-seed", dest="train_seed", type=int)
    p.add_argument("--ranks", help="comma-separated projection ranks")
    p.add_argument("--penalties", help="comma-separated low-rank penalties")
    p.add_argument("--alphas", help="comma-separated ridge penalties")

def build_parser():
    parser = argparse.ArgumentParser(prog="bitext-ib", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("similarity", help="compare similarity predictors by nested CV")
    _common(p)
    _inputs(p, "piles", "embeddings")
    _cv_opts(p)

    p = sub.add_parser("analyze", help="frontier, attested and counterfactual encoders")
    _common(p)
    _inputs(p, "alignments", "embeddings", "model", "piles")
    _belief_opts(p)
    _frontier_opts(p)
    _cv_opts(p)
    p.add_argument("--fractions", help="comma-separated perturbation fractions")
    p.add_argument("--perturbed-count", dest="perturbed_count", type=int)
    p.add_argument("--random-count", dest="random_count", type=int)
    p.add_argument("--baseline-seed", dest="baseline_seed", type=int)
    p.add_argument("--soft-random", dest="soft_random", action="store_const", const=True,
                   default=None)
    p.add_argument("--plot-jitter", dest="plot_jitter", action="store_const", const=True,
                   default=None, help="add a seeded display-jitter column to infoplane.csv")
    p.add_argument("--jitter-seed", dest="jitter_seed", type=int)
    p.add_argument("--jitter-scale", dest="jitter_scale", type=float)

    p = sub.add_parser("frontier", help="compute the IB frontier only")
    _common(p)
    _inputs(p, "alignments", "embeddings", "model", "piles")
    _belief_opts(p)
    _frontier_opts(p)

    p = sub.add_parser("deviations", help="deviation of attested encoders from a frontier CSV")
    _common(p)
    _inputs(p, "alignments", "embeddings", "model", "piles")
    _belief_opts(p)
    p.add_argument("--frontier", required=True, help="frontier.csv from a previous run")

    p = sub.add_parser("mds", help="classical MDS of empirical similarities")
    _common(p)
    _inputs(p, "piles")
    p.add_argument("--dims", type=int, default=2)

    p = sub.add_parser("select", help="k-means selection of representative items")
    _common(p)
    _inputs(p, "embeddings")
    p.add_argument("--k", type=int)
    p.add_argument("--select-seed", dest="select_seed", type=int)

    p = sub.add_parser("synth", help="write the bundled synthetic datasets")
    p.add_argument("out_dir")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-v", "--verbose", action="store_true")
    return parser

_NOT_CONFIG = {"command", "config", "verbose", "frontier", "dims", "seed"}

def _config_from_args(args):
    overrides = {k: v for k, v in vars(args).items() if k not in _NOT_CONFIG}
    return load_config(args.config, overrides)

def write_synthetic(out_dir, seed=0):
    """Toy corpus (4 meanings, 2 languages) and planted pile-sort/corpus datasets."""
    files = {}
    records, emb, model = toy_corpus()
    files["toy_alignments.tsv"] = aio.alignments_tsv(records)
    files["toy_embeddings.tsv"] = aio.embeddings_tsv(emb)
    files["toy_model.json"] = aio.dumps_json(dict(model.to_dict(), dim=model.dim))
    rows, pemb, _ = planted_pile_sort(seed=seed)
    files["planted_piles.csv"] = aio.pile_sort_csv(rows)
    files["planted_embeddings.tsv"] = aio.embeddings_tsv(pemb)
    records, cemb, cmodel = planted_corpus(seed=seed)
    files["corpus_alignments.tsv"] = aio.alignments_tsv(records)
    files["corpus_embeddings.tsv"] = aio.embeddings_tsv(cemb)
    files["corpus_model.json"] = aio.dumps_json(dict(cmodel.to_dict(), dim=cmodel.dim))
    return pipeline.write_outputs(out_dir, files)

def run(args):
    if args.command == "synth":
        return write_synthetic(args.out_dir, args.seed)
    cfg = _config_from_args(args)
    if args.command == "similarity":
        files, _ = pipeline.run_similarity(cfg)
        files = pipeline.with_manifest(cfg, files, "similarity")
    elif args.command == "analyze":
        files = pipeline.analysis_files(pipeline.run_analysis(cfg))
    elif args.command == "frontier":
        files = pipeline.run_frontier(cfg)
    elif args.command == "deviations":
        files = pipeline.run_deviations(cfg, args.frontier)
    elif args.command == "mds":
        files = pipeline.with_manifest(cfg, pipeline.run_mds(cfg, args.dims), "mds")
    elif args.command == "select":
        files = pipeline.with_manifest(cfg, pipeline.run_select(cfg), "select")
    else:  # pragma: no cover
        raise AssertionError(args.command)
    return pipeline.write_outputs(cfg.out_dir, files)

def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        written = run(args)
    except pipeline.NonConvergenceError as exc:
        log.error("%s", exc)
        return exc.exit_code
    except (pipeline.PipelineError, ConfigError) as exc:
        log.error("%s", exc)
        return 2
    except pipeline.INPUT_ERRORS as exc:
        log.error("input error: %s", exc)
        return 2
    out = getattr(args, "out_dir", None)
    for name in written:
        print(os.path.join(out, name) if out else name)
    return 0

if __name__ == "__main__":
    sys.exit(main())
