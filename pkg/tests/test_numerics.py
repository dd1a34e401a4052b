import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rpsr_kit.fixtures import LOADUNLOAD_REFERENCE_TESTS
from rpsr_kit.numerics import Basis, projector, pseudoinverse, try_extend
from rpsr_kit.psr import outcome


def reference_outcomes(m):
    return [outcome(m, m.parse_seq(t)) for t in LOADUNLOAD_REFERENCE_TESTS]


def test_try_extend_examples(loadunload):
    b = Basis(3)
    assert try_extend(b, np.array([1.0, 0, 0]))
    assert not try_extend(b, np.array([2.0, 0, 0]))
    assert len(b) == 1

    cols = reference_outcomes(loadunload)
    b = Basis(10)
    for c in cols[:4]:
        assert b.try_extend(c)
    assert b.try_extend(cols[4])
    assert len(b) == 5


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        Basis(3).try_extend(np.ones(4))


def test_hysteresis_band():
    tau = 1e-6
    b = Basis(2, tau)
    b.try_extend(np.array([1.0, 0.0]))
    assert not b.is_independent(np.array([1.0, 0.5 * tau]))
    assert b.is_independent(np.array([1.0, 10 * tau]))


def test_basis_never_exceeds_dim():
    rng = np.random.default_rng(0)
    b = Basis(4)
    for v in rng.normal(size=(30, 4)):
        b.try_extend(v)
    assert len(b) == 4
    assert b.matrix.shape == (4, 4)


def test_pinv_identity_and_full_rank():
    np.testing.assert_allclose(pseudoinverse(np.eye(3)), np.eye(3))
    M = np.random.default_rng(1).normal(size=(6, 3))
    np.testing.assert_allclose(pseudoinverse(M) @ M, np.eye(3), atol=1e-9)


def test_pinv_matches_numpy_oracle():
    rng = np.random.default_rng(2)
    M = rng.normal(size=(5, 2)) @ rng.normal(size=(2, 4))  # rank 2
    np.testing.assert_allclose(pseudoinverse(M), np.linalg.pinv(M, rcond=1e-8), atol=1e-9)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 6), st.integers(1, 6), st.integers(1, 6))
def test_penrose_identities(seed, n, k, r):
    rng = np.random.default_rng(seed)
    M = rng.normal(size=(n, r)) @ rng.normal(size=(r, k))
    P = pseudoinverse(M)
    np.testing.assert_allclose(M @ P @ M, M, atol=1e-8)
    np.testing.assert_allclose(P @ M @ P, P, atol=1e-8)
    np.testing.assert_allclose((M @ P).T, M @ P, atol=1e-8)
    np.testing.assert_allclose((P @ M).T, P @ M, atol=1e-8)


def test_projector_examples(loadunload):
    e1 = np.zeros((4, 1))
    e1[0] = 1
    np.testing.assert_allclose(projector(e1), np.diag([1.0, 0, 0, 0]))

    U = np.column_stack(reference_outcomes(loadunload))
    R_tilde = projector(U) @ loadunload.reward
    want = np.zeros((10, 2))
    want[[0, 1, 8, 9]] = 0.5
    np.testing.assert_allclose(R_tilde, want, atol=1e-9)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 6), st.integers(1, 6))
def test_projector_properties(seed, n, k):
    M = np.random.default_rng(seed).normal(size=(n, k))
    P = projector(M)
    np.testing.assert_allclose(P @ P, P, atol=1e-8)
    np.testing.assert_allclose(P, P.T, atol=1e-8)
    np.testing.assert_allclose(P @ M, M, atol=1e-8)
