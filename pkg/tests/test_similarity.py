import numpy as np
import pytest
from scipy.stats import spearmanr

from bitext_ib.similarity import (
    EmbeddingSet,
    InputError,
    PileSortDataset,
    SimilarityMatrix,
    classical_mds,
    cosine_baseline,
    empirical_similarity,
    parse_pile_sort,
    predict_similarity,
    select_representatives,
    spearman_rho,
    train_low_rank,
)
from bitext_ib.similarity.evaluation import (
    ConfigurationError,
    LowRankFamily,
    RidgeFamily,
    UndefinedCorrelationError,
    item_folds,
    nested_cv,
)
from bitext_ib.similarity.geometry import fit_kmeans, kmeans_inertia
from bitext_ib.similarity.models import (
    LowRankModel,
    UndefinedPairError,
    fit_ridge,
    pair_features,
    ridge_baseline,
)
from bitext_ib.synthetic import planted_similarity


PILES = """participant_id,item_id,pile_id
p1,a,1
p1,b,1
p1,c,2
p2,a,x
p2,b,y
p2,c,y
"""


def test_empirical_similarity_counts():
    s = empirical_similarity(parse_pile_sort(PILES))
    assert s.items == ("a", "b", "c")
    np.testing.assert_allclose(s.values, [[1, 0.5, 0], [0.5, 1, 0.5], [0, 0.5, 1]])


def test_pile_sort_rejects_incomplete_participant():
    ds = parse_pile_sort(PILES + "p3,a,1\n")
    with pytest.raises(InputError):
        ds.validate()
    with pytest.raises(InputError):
        parse_pile_sort("participant_id,item_id,pile_id\n")


def test_similarity_matrix_validation():
    with pytest.raises(InputError):
        SimilarityMatrix(np.array([[1.0, 0.2], [0.3, 1.0]]), ("a", "b"), "empirical")
    with pytest.raises(InputError):
        SimilarityMatrix(np.array([[1.0, 1.2], [1.2, 1.0]]), ("a", "b"), "empirical")


def test_cosine_baseline_oracle(rng):
    x = rng.normal(size=(6, 4))
    z = (x - x.mean(axis=0)) / x.std(axis=0)
    sim = cosine_baseline(EmbeddingSet(tuple("abcdef"), x)).values
    for i in range(6):
        for j in range(6):
            expect = z[i] @ z[j] / np.linalg.norm(z[i]) / np.linalg.norm(z[j])
            assert sim[i, j] == pytest.approx(expect, abs=1e-12)


def test_cosine_zero_vector_undefined():
    x = np.array([[1.0, 2.0], [3.0, 4.0], [2.0, 3.0]])
    with pytest.raises(UndefinedPairError):
        cosine_baseline(x)


def test_ridge_matches_augmented_normal_equations(rng):
    x = rng.normal(size=(8, 3))
    s = rng.uniform(size=(8, 8))
    s = (s + s.T) / 2
    i, j = np.triu_indices(8, 1)
    feats = pair_features(x[i], x[j])
    a = np.hstack([feats, np.ones((feats.shape[0], 1))])
    pen = np.diag([0.7] * feats.shape[1] + [0.0])
    w = np.linalg.solve(a.T @ a + pen, a.T @ s[i, j])
    coef, b = fit_ridge(feats, s[i, j], 0.7)
    np.testing.assert_allclose(coef, w[:-1], atol=1e-9)
    assert b == pytest.approx(w[-1], abs=1e-9)
    model = ridge_baseline(x, s, 0.7)
    np.testing.assert_allclose(model.predict_matrix(x)[i, j], a @ w, atol=1e-9)
    with pytest.raises(ValueError):
        fit_ridge(feats, s[i, j], 0.0)


def test_low_rank_recovers_planted_structure():
    emb, target, proj = planted_similarity(n_items=30, dim=20, rank=3, sim_noise=0.0, seed=4)
    model = train_low_rank(emb, target, rank=3, penalty=1e-6, seed=0, max_iters=5000)
    i, j = np.triu_indices(30, 1)
    pred = model.predict_matrix(emb)
    assert spearmanr(pred[i, j], target.values[i, j])[0] > 0.99
    hist = np.array(model.loss_history)
    assert np.all(np.diff(hist) <= 1e-9 * hist[0])


def test_low_rank_heavy_penalty_shrinks_to_zero():
    emb, target, _ = planted_similarity(n_items=12, dim=20, rank=2, seed=1)
    model = train_low_rank(emb, target, rank=2, penalty=1e6, seed=0)
    assert np.abs(model.projection).max() < 1e-3


def test_predict_similarity_contract(rng):
    p = rng.normal(size=(2, 4))
    m = LowRankModel(p, 0.1)
    fi, fj = rng.normal(size=4), rng.normal(size=4)
    assert predict_similarity(m, fi, fj) == pytest.approx((p @ fi) @ (p @ fj))
    assert predict_similarity(m, fi, fj) == pytest.approx(predict_similarity(m, fj, fi))
    with pytest.raises(InputError):
        predict_similarity(m, fi, np.ones(3))
    m2 = LowRankModel.from_dict(m.to_dict())
    np.testing.assert_array_equal(m2.projection, p)


def test_spearman_matches_scipy(rng):
    for _ in range(50):
        x = rng.integers(0, 5, size=20).astype(float)
        y = x + rng.normal(size=20)
        assert spearman_rho(x, y) == pytest.approx(spearmanr(x, y)[0], abs=1e-12)
    with pytest.raises(UndefinedCorrelationError):
        spearman_rho(np.ones(5), np.arange(5))


def test_item_folds_partition(rng):
    parts = item_folds(20, 6, rng)
    assert sorted(np.concatenate(parts).tolist()) == list(range(20))
    with pytest.raises(ConfigurationError):
        item_folds(10, 6, rng)


class RecordingRidge(RidgeFamily):
    def __init__(self):
        super().__init__(alphas=(0.1, 10.0))
        self.seen = []

    def fit(self, x, s, params, seed):
        self.seen.append({tuple(np.round(r, 12)) for r in x})
        return super().fit(x, s, params, seed)


def test_nested_cv_never_trains_on_test_items():
    emb, target, _ = planted_similarity(n_items=24, dim=20, rank=2, seed=2)
    fam = RecordingRidge()
    res = nested_cv(emb, target, fam, folds=4, seed=1)
    rows = {i: tuple(np.round(emb.vectors[k], 12)) for k, i in enumerate(emb.ids)}
    outer_train_sets = fam.seen[-1:]  # the last fit is the final refit of the last outer fold
    assert not {rows[i] for i in res.test_items[-1]} & outer_train_sets[0]
    held = [set(t) for t in res.test_items]
    assert set().union(*held) == set(emb.ids)
    assert sum(len(h) for h in held) == len(emb.ids)


def test_nested_cv_deterministic_and_threads_agree():
    emb, target, _ = planted_similarity(n_items=18, dim=20, rank=2, seed=3)
    fam = LowRankFamily(ranks=(1, 2), penalties=(1e-3,), max_iters=300)
    a = nested_cv(emb, target, fam, folds=3, seed=5)
    b = nested_cv(emb, target, fam, folds=3, seed=5, threads=3)
    assert a.fold_scores == b.fold_scores and a.chosen == b.chosen


def test_nested_cv_null_case_near_zero(rng):
    emb = EmbeddingSet(tuple(range(36)), rng.normal(size=(36, 5)))
    noise = rng.uniform(size=(36, 36))
    s = (noise + noise.T) / 2
    np.fill_diagonal(s, 1.0)
    res = nested_cv(emb, SimilarityMatrix(s, emb.ids, "predicted"), "ridge", folds=6, seed=0)
    assert abs(res.mean) < 0.25


def blobs(rng, k=5, per=8):
    centres = rng.normal(scale=20.0, size=(k, 3))
    pts = np.concatenate([c + rng.normal(size=(per, 3)) for c in centres])
    return EmbeddingSet(tuple(f"i{n}" for n in range(k * per)), pts), per


def test_select_one_per_blob(rng):
    emb, per = blobs(rng)
    chosen = select_representatives(emb, 5, seed=0)
    assert len(set(chosen)) == 5
    assert sorted(int(c[1:]) // per for c in chosen) == list(range(5))
    assert select_representatives(emb, 5, seed=0) == chosen
    assert select_representatives(emb, len(emb), seed=0) == list(emb.ids)
    with pytest.raises(InputError):
        select_representatives(emb, 0)


def test_select_inertia_close_to_multi_restart(rng):
    emb = EmbeddingSet(tuple(range(40)), rng.normal(size=(40, 4)))
    got = fit_kmeans(emb.vectors, 6, seed=0)
    assert kmeans_inertia(emb.vectors, got.cluster_centers_) == pytest.approx(got.inertia_)
    oracle = min(fit_kmeans(emb.vectors, 6, seed=s, n_init=1).inertia_ for s in range(100))
    assert got.inertia_ <= oracle * 1.01


def test_mds_recovers_line_and_warns_on_degenerate():
    pos = np.array([0.0, 0.1, 0.25, 0.6])
    sim = 1.0 - np.abs(pos[:, None] - pos[None, :])
    with pytest.warns(RuntimeWarning):
        coords = classical_mds(sim, dims=2)
    assert np.allclose(coords[:, 1], 0)
    np.testing.assert_allclose(np.abs(coords[:, 0] - coords[0, 0]), pos, atol=1e-10)
    d = np.linalg.norm(coords[:, None] - coords[None], axis=2)
    np.testing.assert_allclose(d, 1 - sim, atol=1e-10)


def test_mds_planar_distances(rng):
    pts = rng.uniform(size=(7, 2)) * 0.5
    d = np.linalg.norm(pts[:, None] - pts[None], axis=2)
    coords = classical_mds(1 - d)
    np.testing.assert_allclose(np.linalg.norm(coords[:, None] - coords[None], axis=2), d, atol=1e-10)
    np.testing.assert_allclose(coords.mean(axis=0), 0, atol=1e-12)
