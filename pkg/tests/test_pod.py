import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from deimga.errors import DegenerateInputError, DimensionError, ValidationError
from deimga.pod import (SnapshotSet, build_snapshots, compute_pod,
                        orthonormality_error, project, reconstruct)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def test_build_snapshots_columns():
    S = build_snapshots([[1, 0, 0], [0, 1, 0]], [0.0, 1.0])
    assert S.data.shape == (3, 2)
    np.testing.assert_array_equal(S.data, [[1, 0], [0, 1], [0, 0]])


def test_build_snapshots_empty():
    with pytest.raises(ValidationError):
        build_snapshots([], [])


def test_build_snapshots_length_mismatch():
    with pytest.raises(DimensionError):
        build_snapshots([[1, 2], [1, 2, 3]], [0, 1])
    with pytest.raises(DimensionError):
        build_snapshots([[1, 2], [3, 4]], [0])


def test_nonmonotone_times():
    with pytest.raises(ValidationError):
        build_snapshots([[1.0], [2.0]], [1.0, 1.0])


def test_split_holds_out_interior_columns():
    S = SnapshotSet(np.arange(40.0).reshape(2, 20), np.arange(20.0))
    train, test = S.split(4)
    assert train.p == 16 and test.p == 4
    assert 0 not in test.times and 19 not in test.times
    assert set(train.times) | set(test.times) == set(range(20))


def test_identity_pod():
    b = compute_pod(np.eye(3), rank=3)
    np.testing.assert_allclose(np.abs(b.modes), np.abs(np.eye(3))[:, np.argmax(np.abs(b.modes), 0)])
    np.testing.assert_allclose(b.singular_values, 1.0)


def test_rank_one_energy():
    v, w = np.array([1.0, 2.0, -1.0]), np.array([0.5, 1.0, 3.0, -2.0])
    b = compute_pod(np.outer(v, w), energy=0.999)
    assert b.rank == 1
    assert b.energy_captured == pytest.approx(1.0)


def test_energy_tie_takes_smaller_rank():
    # sigma^2 = (1, 1): energy 0.5 is met exactly at r = 1
    b = compute_pod(np.diag([1.0, 1.0]), energy=0.5)
    assert b.rank == 1


def test_zero_matrix_is_degenerate():
    with pytest.raises(DegenerateInputError):
        compute_pod(np.zeros((4, 3)), energy=0.9)
    with pytest.raises(DegenerateInputError):
        compute_pod(np.full((2, 2), 1e-300), energy=0.9)


def test_bad_truncation_arguments():
    X = np.random.default_rng(0).standard_normal((5, 3))
    with pytest.raises(ValidationError):
        compute_pod(X, rank=4)
    with pytest.raises(ValidationError):
        compute_pod(X, energy=0.0)


def test_project_first_mode_and_orthogonal(rng):
    X = rng.standard_normal((8, 5)) + 1j * rng.standard_normal((8, 5))
    b = compute_pod(X, rank=3)
    np.testing.assert_allclose(project(b.modes[:, 0], b).coeffs, [1, 0, 0], atol=1e-12)
    Q = np.linalg.qr(np.hstack([b.modes, rng.standard_normal((8, 1))]))[0]
    np.testing.assert_allclose(project(Q[:, -1], b).coeffs, 0, atol=1e-12)


def test_full_rank_completeness(rng):
    X = rng.standard_normal((6, 6))
    b = compute_pod(X, rank=6)
    u = rng.standard_normal(6)
    assert np.linalg.norm(reconstruct(project(u, b), b) - u) <= 1e-10 * np.linalg.norm(u)


def test_project_dimension_mismatch(rng):
    b = compute_pod(rng.standard_normal((5, 3)), rank=2)
    with pytest.raises(DimensionError):
        project(np.ones(4), b)


@given(arrays(np.float64, st.tuples(st.integers(2, 9), st.integers(2, 7)), elements=finite),
       st.booleans())
def test_orthonormal_and_sorted(X, cplx):
    if cplx:
        X = X + 1j * X[::-1]
    if np.linalg.norm(X) < 1e-100:
        return
    b = compute_pod(X, energy=1.0)
    assert orthonormality_error(b) <= 1e-10
    assert np.all(np.diff(b.singular_values) <= 1e-12)


@given(arrays(np.float64, (7, 5), elements=finite), st.integers(1, 5))
def test_eckart_young(X, r):
    s = np.linalg.svd(X, compute_uv=False)
    if s[0] < 1e-6:
        return
    b = compute_pod(X, rank=r)
    err = np.linalg.norm(X - b.modes @ (b.modes.conj().T @ X))
    expected = np.sqrt(np.sum(s[r:] ** 2))
    assert err == pytest.approx(expected, rel=1e-8, abs=1e-10 * s[0])


@given(arrays(np.float64, (6, 4), elements=finite), arrays(np.float64, 3, elements=finite))
def test_project_reconstruct_idempotent(X, a):
    if np.linalg.matrix_rank(X) < 3:
        return
    b = compute_pod(X, rank=3)
    u = reconstruct(a, b)
    np.testing.assert_allclose(reconstruct(project(u, b), b), u, atol=1e-9 * (1 + np.abs(a).max()))



def test_truncate_recomputes_energy():
    X = np.diag([3.0, 2.0, 1.0])
    b = compute_pod(X, rank=3).truncate(2)
    assert b.rank == 2
    assert b.energy_captured == pytest.approx(13 / 14)
    assert compute_pod(X, rank=2).energy_captured == pytest.approx(b.energy_captured)
