import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bitext_ib.baselines import (
    PerturbationSpec,
    batch_plane,
    deviation,
    deviation_from_plane,
    iter_random_assignments,
    onehot_plane_coordinates,
    perturb_encoder,
    plane_coordinates,
    random_derangement,
    random_encoder,
    random_encoders,
    rows_to_permute,
)
from bitext_ib.beliefs import belief_from_similarity
from bitext_ib.encoders import Encoder, accuracy, complexity
from bitext_ib.frontier import IBProblem, beta_grid, ib_objective, reverse_annealing

from conftest import random_simplex


def distinct_rows_encoder(n, w, seed=0):
    return Encoder(np.random.default_rng(seed).dirichlet(np.ones(w), size=n), np.full(n, 1.0 / n))


@pytest.fixture(scope="module")
def toy():
    x = np.random.default_rng(1).normal(size=(5, 2))
    b = belief_from_similarity(-((x[:, None] - x[None]) ** 2).sum(axis=2), 2.0)
    return b, reverse_annealing(IBProblem(np.full(5, 0.2), b), beta_grid(30))


def test_fraction_out_of_range():
    for f in (-0.1, 1.5):
        with pytest.raises(ValueError):
            PerturbationSpec(f, 10)


def test_rows_to_permute_counts():
    assert rows_to_permute(0.0, 50) == 0
    assert rows_to_permute(0.01, 50) == 2
    assert rows_to_permute(0.05, 580) == 29
    assert rows_to_permute(0.10, 580) == 58
    assert rows_to_permute(1.0, 7) == 7


def test_derangement_has_no_fixed_points(rng):
    for k in range(2, 9):
        perm = random_derangement(k, rng)
        assert sorted(perm) == list(range(k))
        assert not np.any(perm == np.arange(k))


def test_zero_fraction_is_identity():
    enc = distinct_rows_encoder(6, 3)
    out = perturb_encoder(enc, PerturbationSpec(0.0, 5, seed=3))
    assert len(out) == 5
    for e in out:
        np.testing.assert_array_equal(e.policy, enc.policy)


def test_two_meanings_swap():
    enc = distinct_rows_encoder(2, 3)
    for e in perturb_encoder(enc, PerturbationSpec(0.5, 4, seed=1)):
        np.testing.assert_array_equal(e.policy, enc.policy[::-1])


def test_full_scale_row_count():
    enc = distinct_rows_encoder(580, 20)
    for e in perturb_encoder(enc, PerturbationSpec(0.05, 20, seed=2)):
        changed = np.any(e.policy != enc.policy, axis=1)
        assert changed.sum() == 29


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 30), st.floats(0.0, 1.0), st.integers(0, 2**31))
def test_perturbation_preserves_rows_and_complexity(n, f, seed):
    enc = distinct_rows_encoder(n, 4, seed)
    (e,) = perturb_encoder(enc, PerturbationSpec(f, 1, seed=seed))
    key = lambda p: sorted(map(tuple, np.round(p, 12)))
    assert key(e.policy) == key(enc.policy)
    # uniform prior: marginal p(w) and hence I(M;W) are unchanged
    assert complexity(e) == pytest.approx(complexity(enc), abs=1e-9)
    assert e.lexicon == enc.lexicon


def test_perturbation_seed_replay():
    enc = distinct_rows_encoder(40, 5)
    a = perturb_encoder(enc, PerturbationSpec(0.1, 8, seed=9))
    b = perturb_encoder(enc, PerturbationSpec(0.1, 8, seed=9))
    c = perturb_encoder(enc, PerturbationSpec(0.1, 8, seed=10))
    assert all(np.array_equal(x.policy, y.policy) for x, y in zip(a, b))
    assert not all(np.array_equal(x.policy, y.policy) for x, y in zip(a, c))


def test_random_encoder_single_word(toy):
    b, _ = toy
    enc = random_encoder(1, 5, seed=0)
    assert complexity(enc) == 0.0 and accuracy(enc, b) == 0.0


def test_random_encoder_replay_and_rows():
    a = random_encoder(4, 10, seed=5)
    assert np.array_equal(a.policy, random_encoder(4, 10, seed=5).policy)
    assert np.all(a.policy.sum(axis=1) == 1) and set(np.unique(a.policy)) <= {0.0, 1.0}
    s = random_encoder(4, 10, seed=5, soft=True)
    np.testing.assert_allclose(s.policy.sum(axis=1), 1.0)


def test_random_word_frequencies_uniform():
    n, w, count = 20, 5, 2000
    words = np.concatenate(list(iter_random_assignments(w, n, count, seed=4, chunk=300))).ravel()
    counts = np.bincount(words, minlength=w)
    expect = n * count / w
    sigma = math.sqrt(n * count * (1 / w) * (1 - 1 / w))
    assert np.all(np.abs(counts - expect) <= 3 * sigma)


def test_batch_plane_matches_scalar(toy):
    b, _ = toy
    encs = random_encoders(3, 5, 20, seed=2, soft=True)
    c, a = plane_coordinates(encs, b)
    for e, ci, ai in zip(encs, c, a):
        assert ci == pytest.approx(complexity(e), abs=1e-12)
        assert ai == pytest.approx(accuracy(e, b), abs=1e-12)


def test_onehot_fast_path_matches_dense(toy):
    b, _ = toy
    assign = np.concatenate(list(iter_random_assignments(4, 5, 200, seed=1)))
    dense = np.eye(4)[assign]
    c1, a1 = onehot_plane_coordinates(assign, 4, b)
    c2, a2 = batch_plane(dense, np.full(5, 0.2), b)
    np.testing.assert_allclose(c1, c2, atol=1e-12)
    np.testing.assert_allclose(a1, a2, atol=1e-12)


def test_frontier_encoders_have_zero_deviation(toy):
    b, curve = toy
    for k in range(len(curve)):
        enc = Encoder(curve.policies[k], np.full(5, 0.2))
        assert deviation(enc, b, curve).epsilon <= 1e-6


def test_deviation_sign_and_oracle(toy, rng):
    b, curve = toy
    const = Encoder(np.tile([0.3, 0.7], (5, 1)), np.full(5, 0.2))
    assert deviation(const, b, curve).epsilon >= -1e-9
    for _ in range(20):
        enc = Encoder(random_simplex(rng, (5, 3)), np.full(5, 0.2))
        rep = deviation(enc, b, curve)
        direct = min((ib_objective(enc, b, bt) - f) / bt for bt, f in zip(curve.betas, curve.optimal_values))
        assert rep.epsilon == pytest.approx(direct, abs=1e-10)
        assert rep.epsilon >= -1e-6
        assert rep.argmin_beta in curve.betas


def test_deviation_skips_unconverged(toy):
    b, curve = toy
    from dataclasses import replace

    broken = replace(curve, converged=np.zeros(len(curve), dtype=bool))
    with pytest.raises(ValueError):
        deviation_from_plane([1.0], [0.5], broken)
