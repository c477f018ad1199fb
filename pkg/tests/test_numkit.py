import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from homsense.errors import DomainError, InputError
from homsense.numkit import (
    DEFAULT_TOL,
    Subspace,
    SubspaceArrangement,
    Tolerance,
    column_space,
    contained_in,
    cos_vector_subspace,
    image,
    intersect,
    matrix_from_json,
    matrix_to_json,
    null_space,
    pinv,
    preimage,
    rank_tol,
    sigma_max,
    subspace_sum,
    subspaces_equal,
)


def e(n, *idx):
    return Subspace.coordinate(n, idx)


def test_tolerance_validation_and_threshold():
    with pytest.raises(InputError):
        Tolerance(rel=0)
    with pytest.raises(InputError):
        Tolerance(abs=-1)
    t = Tolerance(rel=1e-3, abs=1e-2)
    assert t.threshold(1.0) == 1e-2
    assert t.threshold(100.0) == pytest.approx(0.1)


def test_rank_examples():
    assert rank_tol(np.eye(3)) == 3
    assert rank_tol(np.zeros((4, 2))) == 0
    assert rank_tol(np.array([[1, 1], [1, 1 + 1e-14]]), Tolerance(rel=1e-8)) == 1


def test_rank_rejects_nonfinite():
    with pytest.raises(InputError):
        rank_tol(np.array([[np.nan, 1.0]]))


def test_rank_of_stack_matches_loop():
    rng = np.random.default_rng(0)
    M = rng.standard_normal((20, 5, 3)) @ rng.standard_normal((20, 3, 4))
    assert list(rank_tol(M)) == [rank_tol(m) for m in M]


def test_null_space_examples():
    assert null_space(np.zeros((2, 3))).dim == 3
    assert null_space(np.eye(3)).dim == 0
    N = null_space(np.array([[1.0, 2.0]]))
    assert N.dim == 1
    v = N.basis[:, 0] * np.sign(N.basis[0, 0])
    assert np.allclose(v, np.array([2, -1]) / np.sqrt(5))


def test_sum_intersect_preimage_examples():
    assert subspace_sum(e(3, 0), e(3, 1)).dim == 2
    assert subspaces_equal(intersect(e(3, 0, 1), e(3, 1, 2)), e(3, 1))
    W = Subspace.from_spanning(np.random.default_rng(1).standard_normal((4, 2)))
    assert subspaces_equal(preimage(np.eye(4), W), W)


def test_dimension_mismatch():
    with pytest.raises(InputError):
        subspace_sum(e(3, 0), e(4, 0))


def test_contained_in_examples():
    W = e(2, 0, 1)
    assert contained_in(Subspace.zero(2), W)
    assert contained_in(e(3, 0), e(3, 0, 1))
    a = Subspace(np.array([[1.0], [-1.0]]) / np.sqrt(2))
    b = Subspace(np.array([[1.0], [1.0]]) / np.sqrt(2))
    assert not contained_in(a, b)


def test_cos_examples():
    W = Subspace.from_spanning(np.array([[2.0], [1.0]]))
    assert cos_vector_subspace(np.array([1.0, 2.0]), W) == pytest.approx(0.8, abs=1e-14)
    assert cos_vector_subspace(np.array([2.0, 1.0]), W) == pytest.approx(1.0)
    assert cos_vector_subspace(np.array([-1.0, 2.0]), W) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(DomainError):
        cos_vector_subspace(np.zeros(2), W)
    with pytest.raises(DomainError):
        cos_vector_subspace(np.ones(2), Subspace.zero(2))


def test_pinv_examples():
    assert np.allclose(pinv(np.eye(3)), np.eye(3))
    assert pinv(np.zeros((3, 2))).shape == (2, 3)
    assert np.allclose(pinv(np.zeros((3, 2))), 0)
    assert np.allclose(pinv(np.array([[1.0], [2.0]])), [[0.2, 0.4]])
    assert sigma_max(np.diag([3.0, -5.0])) == pytest.approx(5.0)


def test_image_of_map():
    T = np.array([[1.0, 0, 0], [0, 0, 0]])
    assert image(T, Subspace.full(3)).dim == 1
    assert image(T, e(3, 1)).dim == 0


def test_json_roundtrip_real_and_complex():
    rng = np.random.default_rng(2)
    for M in (rng.standard_normal((3, 2)), rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))):
        obj = matrix_to_json(M)
        assert np.array_equal(matrix_from_json(obj), M)
    with pytest.raises(InputError):
        matrix_from_json({"ambient_dim": 2, "ncols": 2, "data": [1.0]})


def test_subspace_json_and_orthonormality():
    V = Subspace.from_spanning(np.random.default_rng(3).standard_normal((5, 3)))
    assert V.orthonormality_error() <= 10 * np.finfo(float).eps * 3
    assert subspaces_equal(Subspace.from_json(V.to_json()), V)


def test_complement_and_complexify():
    V = e(4, 0, 2)
    C = V.complement()
    assert C.dim == 2 and intersect(V, C).dim == 0
    Vc = V.complexify()
    assert Vc.field == "complex" and Vc.dim == 2


def test_arrangement_induced_parts():
    parts = [e(4, 0), e(4, 1), e(4, 2)]
    arr = SubspaceArrangement(parts, index_sets=[(0, 1), (1, 2), (0,)])
    dims = [p.dim for p in arr.induced_parts()]
    assert dims == [2, 2, 1]
    with pytest.raises(InputError):
        SubspaceArrangement([e(3, 0), e(4, 0)])


matrices = st.tuples(st.integers(1, 6), st.integers(1, 6), st.integers(0, 10**6))


@settings(max_examples=60, deadline=None)
@given(matrices)
def test_rank_nullity(shape):
    m, n, seed = shape
    rng = np.random.default_rng(seed)
    k = rng.integers(0, min(m, n) + 1)
    M = rng.standard_normal((m, k)) @ rng.standard_normal((k, n))
    assert rank_tol(M) + null_space(M).dim == n
    assert rank_tol(M) == k


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 6), st.integers(0, 10**6), st.booleans())
def test_grassmann_formula_and_containments(n, seed, cplx):
    rng = np.random.default_rng(seed)
    d1, d2 = rng.integers(0, n + 1, size=2)
    shared = rng.integers(0, min(d1, d2) + 1)

    def draw(shape):
        X = rng.standard_normal(shape)
        return X + 1j * rng.standard_normal(shape) if cplx else X

    S = draw((n, shared))
    U = Subspace.from_spanning(np.hstack([S, draw((n, d1 - shared))]))
    W = Subspace.from_spanning(np.hstack([S, draw((n, d2 - shared))]))
    I, Ssum = intersect(U, W), subspace_sum(U, W)
    assert Ssum.dim + I.dim == U.dim + W.dim
    assert contained_in(I, U) and contained_in(I, W)
    assert contained_in(U, Ssum) and contained_in(W, Ssum)


@settings(max_examples=60, deadline=None)
@given(matrices)
def test_pinv_identity(shape):
    m, n, seed = shape
    rng = np.random.default_rng(seed)
    k = rng.integers(0, min(m, n) + 1)
    M = rng.standard_normal((m, k)) @ rng.standard_normal((k, n))
    P = pinv(M)
    assert np.linalg.norm(M @ P @ M - M) <= 1e-8 * max(np.linalg.norm(M), 1e-300) + 1e-12


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 6), st.integers(0, 10**6), st.floats(1e-3, 1e3), st.booleans())
def test_cos_scale_invariant(n, seed, scale, negate):
    rng = np.random.default_rng(seed)
    W = Subspace.from_spanning(rng.standard_normal((n, rng.integers(1, n + 1))))
    u = rng.standard_normal(n)
    c = cos_vector_subspace(u, W)
    s = -scale if negate else scale
    assert abs(cos_vector_subspace(s * u, W) - c) <= 1e-12
    assert 0.0 <= c <= 1.0


def test_default_tolerance_values():
    assert DEFAULT_TOL.rel == 1e-10 and DEFAULT_TOL.abs == 1e-13


def test_column_space_rank_deficient():
    M = np.array([[1.0, 2.0], [2.0, 4.0], [0, 0]])
    assert column_space(M).dim == 1
