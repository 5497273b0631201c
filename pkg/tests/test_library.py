import numpy as np
import pytest
from hypothesis import given, strategies as st

from deimga.deim import IndexSet
from deimga.errors import ClassificationError, DimensionError, ValidationError
from deimga.library import SampledLibrary, build_library, classify, noisy_trials
from deimga.pod import SnapshotSet, compute_pod
from oracles import orthonormal, residual_classify


def _set(data, label):
    return SnapshotSet(np.asarray(data), np.arange(np.asarray(data).shape[1], dtype=float),
                       regime=label)


def _low_rank_regimes(rng, n=30, p=12, ranks=(2, 2, 2), cplx=False):
    sets = []
    for i, r in enumerate(ranks):
        V = orthonormal(n, r, rng, cplx)
        C = rng.standard_normal((r, p))
        sets.append(_set(V @ C, f"R{i}"))
    return sets


def test_two_orthogonal_rank_one_regimes():
    e1, e2 = np.eye(4)[:, 0], np.eye(4)[:, 1]
    lib = build_library([_set(np.outer(e1, [1, 2, 3]), "a"), _set(np.outer(e2, [2, 1]), "b")])
    assert lib.concat.shape == (4, 2)
    assert lib.ranks == {"a": 1, "b": 1}
    assert lib.blocks == {"a": slice(0, 1), "b": slice(1, 2)}


def test_order_equivariance(rng):
    sets = _low_rank_regimes(rng)
    fwd = build_library(sets)
    rev = build_library(sets[::-1])
    assert rev.regime_ids == fwd.regime_ids[::-1]
    for r in fwd.regime_ids:
        np.testing.assert_array_equal(fwd.concat[:, fwd.blocks[r]], rev.concat[:, rev.blocks[r]])


def test_library_requires_two_regimes_and_common_n(rng):
    a = _set(rng.standard_normal((5, 3)), "a")
    with pytest.raises(ValidationError):
        build_library([a])
    with pytest.raises(DimensionError):
        build_library([a, _set(rng.standard_normal((6, 3)), "b")])
    with pytest.raises(ValidationError):
        build_library([a, _set(rng.standard_normal((5, 3)), "a")])


def test_max_rank_caps_sublibraries(rng):
    lib = build_library(_low_rank_regimes(rng, ranks=(4, 2)), energy=1.0, max_rank=3)
    assert lib.ranks == {"R0": 3, "R1": 2}


def test_sublibrary_ranks_match_pod(rng):
    sets = _low_rank_regimes(rng, ranks=(1, 3, 2))
    lib = build_library(sets, energy=0.999)
    for s in sets:
        assert lib.ranks[s.regime] == compute_pod(s, energy=0.999).rank


def test_exact_membership(rng):
    sets = _low_rank_regimes(rng, cplx=True)
    lib = build_library(sets, energy=0.999)
    idx = IndexSet((2, 7, 11, 15, 19, 23, 28), 30)
    for k, s in enumerate(sets):
        res = classify(lib, idx, s.data[idx.rows, 3])
        assert res.predicted == s.regime
        assert res.residuals[s.regime] <= 1e-8
        assert res.margin > 0
        assert all(v >= 0 for v in res.residuals.values())


def test_zero_samples_fail(rng):
    lib = build_library(_low_rank_regimes(rng))
    with pytest.raises(ClassificationError):
        classify(lib, IndexSet((1, 2, 3), 30), np.zeros(3))


def test_sample_count_checked(rng):
    lib = build_library(_low_rank_regimes(rng))
    with pytest.raises(DimensionError):
        classify(lib, IndexSet((1, 2, 3), 30), np.ones(4))


@given(st.integers(0, 2**31), st.floats(-1e3, 1e3).filter(lambda c: abs(c) > 1e-3))
def test_scale_invariance(seed, c):
    rng = np.random.default_rng(seed)
    lib = build_library(_low_rank_regimes(rng))
    idx = IndexSet(tuple(sorted(int(i) + 1 for i in rng.choice(30, 5, replace=False))), 30)
    y = rng.standard_normal(5)
    a, b = classify(lib, idx, y), classify(lib, idx, c * y)
    assert a.predicted == b.predicted
    for r in lib.regime_ids:
        assert b.residuals[r] == pytest.approx(a.residuals[r], rel=1e-9, abs=1e-12)


@given(st.integers(0, 2**31))
def test_matches_residual_oracle(seed):
    rng = np.random.default_rng(seed)
    lib = build_library(_low_rank_regimes(rng, ranks=(1, 2, 3)))
    idx = IndexSet(tuple(sorted(int(i) + 1 for i in rng.choice(30, 6, replace=False))), 30)
    y = rng.standard_normal(6)
    pred, res = residual_classify([lib.sublibraries[r].modes for r in lib.regime_ids],
                                  idx.rows, y)
    got = classify(lib, idx, y)
    for r, v in zip(lib.regime_ids, res):
        assert got.residuals[r] == pytest.approx(v, abs=1e-10)
    if sorted(res)[1] - sorted(res)[0] > 1e-9:
        assert got.predicted == lib.regime_ids[pred]


@given(st.integers(0, 2**31))
def test_self_consistency(seed):
    rng = np.random.default_rng(seed)
    sets = _low_rank_regimes(rng, n=25, ranks=(2, 1, 2))
    lib = build_library(sets, energy=0.999)
    idx = IndexSet(tuple(sorted(int(i) + 1 for i in rng.choice(25, 6, replace=False))), 25)
    sampled = SampledLibrary(lib, idx)
    if any(np.linalg.cond(A) > 1e8 for A in sampled.sampled.values()):
        return
    for k, s in enumerate(sets):
        pred, _ = sampled.predict(s.data[idx.rows])
        assert np.all(pred == k)


def test_noisy_trials_basics(rng):
    sets = _low_rank_regimes(rng, cplx=True)
    lib = build_library(sets)
    idx = IndexSet((2, 7, 11, 15, 19, 23), 30)
    states = {s.regime: s.data for s in sets}
    clean = noisy_trials(lib, idx, states, noise_sigma_frac=0.0, rounds=50)
    assert clean == {r: 1.0 for r in lib.regime_ids}
    a = noisy_trials(lib, idx, states, 0.3, rounds=80, seed=3)
    assert a == noisy_trials(lib, idx, states, 0.3, rounds=80, seed=3)
    assert all(0.0 <= v <= 1.0 for v in a.values())
    with pytest.raises(ValidationError):
        noisy_trials(lib, idx, {"R0": sets[0].data}, 0.1)


@pytest.mark.slow
def test_cqgle_accuracy_monotone_in_noise(cqgle_problem, cqgle_starts):
    lib = cqgle_problem.library
    states = cqgle_problem.validation
    levels = (0.0, 0.05, 0.1, 0.3)
    means = []
    for sigma in levels:
        accs = []
        for seed in range(5):
            for idx in cqgle_starts:
                acc = noisy_trials(lib, idx.sorted(), states, sigma, rounds=400, seed=seed)
                accs.append(np.mean(list(acc.values())))
        means.append(float(np.mean(accs)))
    assert np.all(np.diff(means) <= 0), means


@pytest.mark.slow
def test_cqgle_library_ranks_match_pod(cqgle_problem, cqgle_config):
    # the capped library never exceeds the uncapped per-regime POD rank
    for r, S in cqgle_problem.training.items():
        full = compute_pod(S, energy=cqgle_config.energy).rank
        assert cqgle_problem.library.ranks[r] == min(full, cqgle_config.library_max_rank)
