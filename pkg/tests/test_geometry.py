import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from osa.exceptions import DimensionMismatch
from osa.geometry import (
    Basis,
    extend_basis,
    orthonormalize,
    project_onto,
    residual_norm,
    residual_norms,
    sin_angle,
    subset_pca_costs,
    subspace_contains,
    top_k_subspace,
)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def points(n_max=8, d_max=5):
    return st.tuples(st.integers(1, n_max), st.integers(1, d_max)).flatmap(
        lambda s: arrays(float, s, elements=finite)
    )


def same_span(A: Basis, B: Basis, tol=1e-8):
    return A.dim == B.dim and np.allclose(A.projector(), B.projector(), atol=tol)


# ---- orthonormalize

def test_orthonormalize_axis_vectors():
    B = orthonormalize([(1, 0), (0, 2)])
    np.testing.assert_allclose(B.vectors, [[1, 0], [0, 1]], atol=1e-15)


def test_orthonormalize_drops_dependent():
    B = orthonormalize([(1, 0), (2, 0)])
    assert B.dim == 1
    np.testing.assert_allclose(B.vectors, [[1, 0]])


def test_orthonormalize_normalizes():
    B = orthonormalize([(1, 1, 0)])
    np.testing.assert_allclose(B.vectors, [[1 / math.sqrt(2), 1 / math.sqrt(2), 0]])


def test_orthonormalize_empty_and_ragged():
    assert orthonormalize(np.zeros((0, 4))).dim == 0
    assert orthonormalize([], d=3).ambient == 3
    with pytest.raises(DimensionMismatch):
        orthonormalize([(1, 0), (1, 0, 0)])


def test_basis_rejects_non_orthonormal():
    with pytest.raises(ValueError):
        Basis(np.array([[1.0, 0.0], [1.0, 1.0]]))


def test_extend_basis_stops_at_full_dimension():
    B = extend_basis(Basis.empty(2), np.random.default_rng(0).standard_normal((5, 2)))
    assert B.dim == 2


@settings(max_examples=60, deadline=None)
@given(points())
def test_orthonormalize_idempotent(X):
    B = orthonormalize(X)
    assert same_span(orthonormalize(B.vectors, d=X.shape[1]), B)


# ---- residuals and projections

def test_residual_norm_examples():
    B = orthonormalize([(1, 0)])
    assert residual_norm((3, 4), B) == pytest.approx(4)
    assert residual_norm((3, 4), Basis.empty(2)) == pytest.approx(5)
    assert residual_norm((5, 0), B) <= 1e-10


def test_residual_norm_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        residual_norm((1, 2, 3), orthonormalize([(1, 0)]))


def test_residual_norms_on_basis_rows_and_empty():
    B = orthonormalize([(1, 2, 0), (0, 1, 1)])
    assert np.all(residual_norms(B.vectors, B) <= 1e-12)
    X = np.array([[3.0, 4.0, 0.0], [0.0, 0.0, 2.0]])
    np.testing.assert_allclose(residual_norms(X, Basis.empty(3)), [5, 2])


def test_residual_norms_matches_loop():
    X = np.random.default_rng(11).standard_normal((6, 3))
    B = orthonormalize([np.random.default_rng(12).standard_normal(3)])
    frozen = [0.2172601300928614, 0.5743859307917014, 0.859511465528523,
              2.0875834662294106, 0.7166211083108364, 0.7933765313665867]
    np.testing.assert_allclose(residual_norms(X, B), frozen, rtol=1e-12)
    np.testing.assert_allclose(residual_norms(X, B), [residual_norm(x, B) for x in X], rtol=0, atol=0)


def test_project_onto_examples():
    X = np.random.default_rng(1).standard_normal((4, 3))
    np.testing.assert_allclose(project_onto(X, orthonormalize(np.eye(3))), X, atol=1e-14)
    assert project_onto(X, Basis.empty(3)).shape == (4, 0)


def test_pythagoras_random():
    rng = np.random.default_rng(2)
    X = rng.standard_normal((10, 4))
    B = orthonormalize(rng.standard_normal((2, 4)))
    lhs = np.sum(X ** 2, axis=1)
    rhs = np.sum(project_onto(X, B) ** 2, axis=1) + residual_norms(X, B) ** 2
    np.testing.assert_allclose(lhs, rhs, rtol=1e-8)


@settings(max_examples=80, deadline=None)
@given(points(), st.integers(0, 2 ** 32 - 1))
def test_pythagoras_property(X, seed):
    d = X.shape[1]
    m = np.random.default_rng(seed).integers(0, d + 1)
    B = orthonormalize(np.random.default_rng(seed).standard_normal((m, d)), d=d)
    sq = np.sum(X ** 2, axis=1)
    got = np.sum(project_onto(X, B) ** 2, axis=1) + residual_norms(X, B) ** 2
    assert np.all(np.abs(got - sq) <= 1e-8 * np.maximum(sq, 1e-300) + 1e-12)


@settings(max_examples=80, deadline=None)
@given(points(), st.integers(0, 2 ** 32 - 1))
def test_residual_monotone_under_growth(X, seed):
    d = X.shape[1]
    rng = np.random.default_rng(seed)
    B = orthonormalize(rng.standard_normal((rng.integers(0, d + 1), d)), d=d)
    B2 = extend_basis(B, rng.standard_normal((2, d)))
    assert subspace_contains(B2, B)
    assert np.all(residual_norms(X, B2) <= residual_norms(X, B) + 1e-9)


# ---- top_k_subspace

def test_top_k_line():
    X = np.array([[1.0, 1.0], [2.0, 2.0], [-3.0, -3.0]])
    B = top_k_subspace(X, k=1)
    assert np.sum(residual_norms(X, B) ** 2) <= 1e-20
    assert abs(B.vectors[0] @ np.array([1, 1]) / math.sqrt(2)) == pytest.approx(1)


def test_top_k_symmetric_tie():
    B = top_k_subspace(np.eye(2), k=1)
    assert np.sum(residual_norms(np.eye(2), B) ** 2) == pytest.approx(1)


def test_top_k_matches_eigen_oracle():
    X = np.random.default_rng(7).standard_normal((5, 3))
    cost = np.sum(residual_norms(X, top_k_subspace(X, k=1)) ** 2)
    assert cost == pytest.approx(2.6159115535783806, abs=1e-8)


def test_top_k_bad_k():
    with pytest.raises(ValueError):
        top_k_subspace(np.eye(3), k=0)
    with pytest.raises(ValueError):
        top_k_subspace(np.eye(3), k=4)


def test_top_k_weights():
    X = np.array([[1.0, 0.0], [0.0, 1.0]])
    B = top_k_subspace(X, weights=[1.0, 4.0], k=1)
    assert abs(B.vectors[0, 1]) == pytest.approx(1)


@settings(max_examples=60, deadline=None)
@given(points())
def test_top_k_full_rank_zero_cost(X):
    r = np.linalg.matrix_rank(X)
    if r == 0:
        return
    B = top_k_subspace(X, k=r)
    assert np.sum(residual_norms(X, B) ** 2) <= 1e-8 * np.sum(X ** 2)


# ---- sin_angle

def test_sin_angle_examples():
    V = orthonormalize([(1, 0, 0)])
    assert sin_angle(orthonormalize([(2, 0, 0)]), V) == pytest.approx(0, abs=1e-12)
    assert sin_angle(orthonormalize([(0, 1, 0)]), V) == pytest.approx(1)
    assert sin_angle(orthonormalize([(1, 1, 0)]), V) == pytest.approx(1 / math.sqrt(2))
    with pytest.raises(ValueError):
        sin_angle(orthonormalize([(1, 0, 0), (0, 1, 0)]), V)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 6), st.integers(0, 2 ** 32 - 1))
def test_sin_angle_zero_iff_contained(d, seed):
    rng = np.random.default_rng(seed)
    V = orthonormalize(rng.standard_normal((d - 1, d)))
    inside = orthonormalize([rng.standard_normal(d - 1) @ V.vectors])
    outside = orthonormalize([rng.standard_normal(d)])
    assert sin_angle(inside, V) <= 1e-10
    assert (sin_angle(outside, V) <= 1e-10) == subspace_contains(V, outside, tol=1e-10)


# ---- subset_pca_costs

@pytest.mark.parametrize("d,m", [(3, 6), (6, 3)])
def test_subset_pca_costs_matches_svd(d, m):
    rng = np.random.default_rng(d * 10 + m)
    Y = rng.standard_normal((9, d))
    subsets = np.array([rng.choice(9, m, replace=False) for _ in range(5)])
    got = subset_pca_costs(Y, subsets, k=2)
    ref = [np.sum(np.linalg.svd(Y[s], compute_uv=False)[2:] ** 2) for s in subsets]
    np.testing.assert_allclose(got, ref, rtol=1e-9, atol=1e-12)
