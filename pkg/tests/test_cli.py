import csv
import io
import json
import math
from pathlib import Path

import numpy as np
import pytest

from bitext_ib import cli
from bitext_ib.config import load_config

FAST = ["--n-betas", "12", "--perturbed-count", "40", "--random-count", "200", "--fractions", "0.25,0.5"]


@pytest.fixture(scope="module")
def data(tmp_path_factory):
    d = tmp_path_factory.mktemp("synth")
    assert cli.main(["synth", str(d)]) == 0
    return d


def analyze(data, out, *extra):
    return cli.main(["analyze", "--alignments", str(data / "toy_alignments.tsv"),
                     "--embeddings", str(data / "toy_embeddings.tsv"),
                     "--model", str(data / "toy_model.json"), "--out", str(out), *FAST, *extra])


def read_csv(path):
    return list(csv.DictReader(io.StringIO(Path(path).read_text())))


def test_synth_writes_datasets(data):
    names = {p.name for p in data.iterdir()}
    assert {"toy_alignments.tsv", "planted_piles.csv", "corpus_model.json"} <= names


def test_analyze_outputs_and_dpi(data, tmp_path):
    assert analyze(data, tmp_path / "a") == 0
    out = tmp_path / "a"
    for name in ("frontier.csv", "infoplane.csv", "deviations.csv", "manifest.json", "config.ini"):
        assert (out / name).exists()
    plane = read_csv(out / "infoplane.csv")
    assert {r["kind"] for r in plane} == {"attested", "perturbed", "random"}
    for r in plane:
        c, a = float(r["complexity_bits"]), float(r["accuracy_bits"])
        assert -1e-12 <= a <= c + 1e-9 <= math.log2(4) + 1e-9
    devs = read_csv(out / "deviations.csv")
    assert all(float(r["epsilon_bits"]) >= -1e-6 for r in devs)
    manifest = json.loads((out / "manifest.json").read_text())
    assert set(manifest["files"]) >= {"frontier.csv", "infoplane.csv"}
    assert "content_hash" in manifest


def test_analyze_is_deterministic_and_seeds_are_scoped(data, tmp_path):
    assert analyze(data, tmp_path / "a") == 0
    assert analyze(data, tmp_path / "b") == 0
    assert analyze(data, tmp_path / "c", "--baseline-seed", "7") == 0
    a, b, c = (tmp_path / n for n in "abc")
    for name in ("frontier.csv", "infoplane.csv", "deviations.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    manifest = lambda d: json.loads((d / "manifest.json").read_text())
    assert manifest(a)["content_hash"] == manifest(b)["content_hash"] != manifest(c)["content_hash"]
    assert (a / "frontier.csv").read_bytes() == (c / "frontier.csv").read_bytes()
    assert (a / "infoplane.csv").read_bytes() != (c / "infoplane.csv").read_bytes()
    attested = lambda d: [r for r in read_csv(d / "infoplane.csv") if r["kind"] == "attested"]
    assert attested(a) == attested(c)


def test_bad_fraction_exits_2(data, tmp_path):
    assert analyze(data, tmp_path / "bad", "--fractions", "1.5") == 2
    assert not (tmp_path / "bad").exists()


def test_empty_pile_sort_exits_2(data, tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("participant_id,item_id,pile_id\n")
    rc = cli.main(["similarity", "--piles", str(empty), "--embeddings",
                   str(data / "planted_embeddings.tsv"), "--out", str(tmp_path / "o")])
    assert rc == 2
    assert not (tmp_path / "o").exists()


def test_missing_input_exits_2(tmp_path):
    assert cli.main(["frontier", "--out", str(tmp_path / "o")]) == 2


def test_strict_non_convergence_exits_3(data, tmp_path):
    rc = cli.main(["frontier", "--alignments", str(data / "toy_alignments.tsv"),
                   "--embeddings", str(data / "toy_embeddings.tsv"),
                   "--model", str(data / "toy_model.json"), "--n-betas", "5",
                   "--max-iters", "1", "--tol", "1e-300", "--strict", "--out", str(tmp_path / "o")])
    assert rc == 3
    assert not (tmp_path / "o").exists()


def test_plot_jitter_column(data, tmp_path):
    assert analyze(data, tmp_path / "plain") == 0
    assert "complexity_jitter" not in read_csv(tmp_path / "plain" / "infoplane.csv")[0]
    assert analyze(data, tmp_path / "j1", "--plot-jitter", "--jitter-seed", "4") == 0
    assert analyze(data, tmp_path / "j2", "--plot-jitter", "--jitter-seed", "4") == 0
    rows = read_csv(tmp_path / "j1" / "infoplane.csv")
    assert "complexity_jitter" in rows[0]
    assert (tmp_path / "j1" / "infoplane.csv").read_bytes() == (tmp_path / "j2" / "infoplane.csv").read_bytes()
    plain = read_csv(tmp_path / "plain" / "infoplane.csv")
    assert [r["complexity_bits"] for r in rows] == [r["complexity_bits"] for r in plain]


def test_frontier_then_deviations(data, tmp_path):
    common = ["--alignments", str(data / "toy_alignments.tsv"), "--embeddings",
              str(data / "toy_embeddings.tsv"), "--model", str(data / "toy_model.json")]
    assert cli.main(["frontier", *common, "--n-betas", "12", "--out", str(tmp_path / "f")]) == 0
    assert cli.main(["deviations", *common, "--frontier", str(tmp_path / "f" / "frontier.csv"),
                     "--out", str(tmp_path / "d")]) == 0
    devs = read_csv(tmp_path / "d" / "deviations.csv")
    assert {r["label"] for r in devs} == {"de:attested", "en:attested"}
    assert all(-1e-6 <= float(r["epsilon_bits"]) < 1e-3 for r in devs)


def test_similarity_mds_select(data, tmp_path):
    piles, emb = str(data / "planted_piles.csv"), str(data / "planted_embeddings.tsv")
    rc = cli.main(["similarity", "--piles", piles, "--embeddings", emb, "--folds", "3",
                   "--ranks", "2", "--penalties", "0.1", "--alphas", "1", "--out", str(tmp_path / "s")])
    assert rc == 0
    report = json.loads((tmp_path / "s" / "similarity_report.json").read_text())
    assert {"cosine", "ridge", "low_rank"} <= set(report["families"] if "families" in report else report)
    assert cli.main(["mds", "--piles", piles, "--out", str(tmp_path / "m")]) == 0
    mds = json.loads((tmp_path / "m" / "mds.json").read_text())
    coords = np.array([mds["coordinates"][k] for k in sorted(mds["coordinates"])])
    assert coords.shape[1] == 2
    assert cli.main(["select", "--embeddings", emb, "--k", "5", "--out", str(tmp_path / "k")]) == 0
    reps = json.loads((tmp_path / "k" / "representatives.json").read_text())
    assert len(set(reps["items"])) == 5


def test_config_file_and_flag_precedence(tmp_path):
    ini = tmp_path / "run.ini"
    ini.write_text("[frontier]\nn_betas = 17\ntol = 1e-6\n[baselines]\nfractions = 0.2, 0.3\n")
    cfg = load_config(str(ini), {"n_betas": 9, "tol": None})
    assert cfg.n_betas == 9 and cfg.tol == 1e-6 and cfg.fractions == (0.2, 0.3)
    assert load_config(str(ini)).n_betas == 17
    ini.write_text("[frontier]\nn_betas = many\n")
    assert cli.main(["frontier", "--config", str(ini), "--out", str(tmp_path / "o")]) == 2
