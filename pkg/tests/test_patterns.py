"""Sparsity patterns and the column-major vectorization identities."""

import numpy as np
import pytest
from conftest import rand_stable_ss
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from nrfsyn import (
    DescriptorRealization,
    SparsityPattern,
    blkdiag,
    kron_with_identity,
    pattern_membership,
    unvec,
    vec,
)
from nrfsyn.errors import DimensionMismatch

finite_floats = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def test_vec_is_column_major():
    M = np.array([[1.0, 3.0], [2.0, 4.0]])
    assert vec(M).tolist() == [1.0, 2.0, 3.0, 4.0]
    assert np.array_equal(unvec(vec(M), 2, 2), M)


@settings(max_examples=40, deadline=None)
@given(
    A=hnp.arrays(float, (3, 2), elements=finite_floats),
    Q=hnp.arrays(float, (2, 4), elements=finite_floats),
    B=hnp.arrays(float, (4, 2), elements=finite_floats),
)
def test_vec_of_triple_product(A, Q, B):
    lhs = vec(A @ Q @ B)
    rhs = np.kron(B.T, A) @ vec(Q)
    assert np.allclose(lhs, rhs, atol=1e-9)


def test_pattern_validation():
    with pytest.raises(DimensionMismatch):
        SparsityPattern(np.array([[0, 2], [1, 0]]))


def test_diagonal_predicates():
    assert SparsityPattern.identity(3).has_unit_diagonal()
    ring = np.eye(4, dtype=int) + np.roll(np.eye(4, dtype=int), 1, axis=0)
    assert SparsityPattern(ring).has_unit_diagonal()
    assert SparsityPattern(ring).without_diagonal().has_zero_diagonal()


def test_mask_matrix_selects_forbidden_entries():
    P = SparsityPattern(np.array([[1, 0], [0, 1]]))
    F = P.mask_matrix()
    v = vec(np.array([[1.0, 3.0], [2.0, 4.0]]))
    assert (F @ v).tolist() == [0.0, 2.0, 3.0, 0.0]
    assert set(P.forbidden_positions().tolist()) == {1, 2}


def test_kron_with_identity_realization(rng):
    G = rand_stable_ss(rng, 3, 2, 2)
    K = kron_with_identity(G, 3)
    s = 0.8 + 1.1j
    assert np.allclose(K.evaluate(s), np.kron(G.evaluate(s), np.eye(3)), atol=1e-10)


class TestPatternMembership:
    def test_identity_in_identity(self):
        assert pattern_membership(DescriptorRealization.identity(3), SparsityPattern.identity(3))

    def test_dense_constant_violates_sparse_pattern(self):
        G = DescriptorRealization.from_gain(np.array([[1.0, 2.0], [3.0, 4.0]]))
        P = SparsityPattern(np.array([[1, 0], [1, 1]]))
        assert not pattern_membership(G, P)

    def test_block_diagonal_dynamics(self, rng):
        G = blkdiag(rand_stable_ss(rng, 2, 1, 1), rand_stable_ss(rng, 2, 1, 1))
        assert pattern_membership(G, SparsityPattern.identity(2))
        assert not pattern_membership(G, SparsityPattern.identity(2).without_diagonal())

    def test_dynamically_coupled_entry_detected(self, rng):
        # off-diagonal coupling with zero feedthrough: needs frequency sampling
        A = np.diag([-1.0, -2.0])
        G = DescriptorRealization(np.eye(2), A, np.eye(2), np.array([[1.0, 0.0], [0.5, 1.0]]), np.zeros((2, 2)))
        assert not pattern_membership(G, SparsityPattern.identity(2))

    def test_membership_matches_masked_vec(self, rng):
        G = blkdiag(rand_stable_ss(rng, 2, 1, 1), rand_stable_ss(rng, 1, 1, 1))
        P = SparsityPattern.identity(2)
        F = P.mask_matrix()
        for _ in range(G.n + 1):
            s = complex(rng.uniform(0.2, 2.0), rng.standard_normal() * 3)
            assert np.abs(F @ vec(G.evaluate(s))).max() < 1e-9
        assert pattern_membership(G, P)

    def test_shape_mismatch(self):
        with pytest.raises(DimensionMismatch):
            pattern_membership(DescriptorRealization.identity(2), SparsityPattern.identity(3))
