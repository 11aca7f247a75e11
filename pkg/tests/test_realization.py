"""Descriptor realization algebra against pointwise complex arithmetic."""

import numpy as np
import pytest
from conftest import assert_same_transfer, rand_stable_ss

from nrfsyn import DescriptorRealization, add, blkdiag, hstack, lft_lower, series, vstack
from nrfsyn.errors import DimensionMismatch, IllPosed, SingularAtPoint


def scalar(E, A, B, C, D):
    return DescriptorRealization([[E]], [[A]], [[B]], [[C]], [[D]])


# Pencil realization of s + 4: differentiator chain with feedthrough.
PSI = DescriptorRealization([[0, 1], [0, 0]], np.eye(2), [[0], [-1]], [[1, 0]], [[4]])

# (s+2)/(s+1) spread over one dynamic and one algebraic variable.
G_Y = DescriptorRealization(np.diag([1.0, 0.0]), -np.eye(2), [[1], [1]], [[1, 1]], [[0]])


def test_first_order_pencil_evaluates_to_affine_function():
    assert PSI.evaluate(2.0) == pytest.approx(6.0)
    assert PSI.evaluate(-4.0) == pytest.approx(0.0, abs=1e-12)
    v = PSI.evaluate(0.5j)
    assert v[0, 0] == pytest.approx(4 + 0.5j)


def test_descriptor_evaluation_matches_rational_function():
    for s in (0.0, 1.0, 2.0 + 3.0j, -0.5 + 1j):
        assert G_Y.evaluate(s)[0, 0] == pytest.approx((s + 2) / (s + 1))


def test_identity_gain_evaluates_to_identity():
    I3 = DescriptorRealization.identity(3)
    assert np.allclose(I3.evaluate(1.7 + 0.3j), np.eye(3))


def test_evaluation_at_pole_raises():
    with pytest.raises(SingularAtPoint):
        G_Y.evaluate(-1.0)


def test_shape_validation():
    with pytest.raises(DimensionMismatch):
        DescriptorRealization(np.eye(2), np.eye(3), np.ones((2, 1)), np.ones((1, 2)), [[0]])
    with pytest.raises(DimensionMismatch):
        DescriptorRealization(np.eye(2), np.eye(2), np.ones((3, 1)), np.ones((1, 2)), [[0]])


def test_instances_are_immutable():
    with pytest.raises(ValueError):
        G_Y.A[0, 0] = 5.0


def test_add_series_neg_pointwise(rng):
    G1 = rand_stable_ss(rng, 3, 2, 2)
    G2 = rand_stable_ss(rng, 2, 2, 2)
    s = 0.7 + 2.1j
    assert np.allclose((G1 + G2).evaluate(s), G1.evaluate(s) + G2.evaluate(s))
    assert np.allclose((G1 - G2).evaluate(s), G1.evaluate(s) - G2.evaluate(s))
    assert np.allclose(series(G1, G2).evaluate(s), G1.evaluate(s) @ G2.evaluate(s))
    assert np.allclose((-G1).evaluate(s), -G1.evaluate(s))
    assert np.allclose((2.5 * G1).evaluate(s), 2.5 * G1.evaluate(s))


def test_stacking_operations_pointwise(rng):
    G1 = rand_stable_ss(rng, 2, 2, 3)
    G2 = rand_stable_ss(rng, 3, 2, 3)
    G3 = rand_stable_ss(rng, 2, 3, 2)
    s = -0.3 + 1.4j
    h = hstack(G1, G2)
    assert (h.p, h.m) == (3, 4)
    assert np.allclose(h.evaluate(s), np.hstack([G1.evaluate(s), G2.evaluate(s)]))
    G4 = rand_stable_ss(rng, 1, 2, 2)
    v = vstack(G1, G4)
    assert np.allclose(v.evaluate(s), np.vstack([G1.evaluate(s), G4.evaluate(s)]))
    b = blkdiag(G1, G3)
    from scipy.linalg import block_diag

    assert np.allclose(b.evaluate(s), block_diag(G1.evaluate(s), G3.evaluate(s)))


def test_transpose_and_adjoint(rng):
    G = rand_stable_ss(rng, 3, 2, 4)
    s = 1.1 + 0.8j
    assert np.allclose(G.transpose().evaluate(s), G.evaluate(s).T)
    assert np.allclose(G.adjoint().evaluate(s), G.evaluate(-s).T)


def test_inverse_realization(rng):
    G = rand_stable_ss(rng, 3, 2, 2)
    Gi = G.inverse()
    s = 0.4 + 1.9j
    assert np.allclose(Gi.evaluate(s), np.linalg.inv(G.evaluate(s)))
    assert_same_transfer(series(G, Gi), DescriptorRealization.identity(2), tol=1e-9)


def test_inverse_requires_square():
    with pytest.raises(DimensionMismatch):
        rand_stable_ss(np.random.default_rng(1), 2, 1, 2).inverse()


def test_lft_with_zero_controller_returns_upper_left_block(rng):
    P = rand_stable_ss(rng, 4, 3, 3)
    K = DescriptorRealization.zeros(1, 1)
    cl = lft_lower(P, K)
    s = 0.9 + 2.2j
    assert np.allclose(cl.evaluate(s), P.evaluate(s)[:2, :2])


def test_lft_with_zero_inner_block_is_affine(rng):
    # G22 = 0 forced by zeroing the matching rows/columns
    n, m1, p1 = 3, 2, 2
    A = rand_stable_ss(rng, n, 1, 1).A
    B1 = rng.standard_normal((n, m1))
    B2 = rng.standard_normal((n, 1))
    C1 = rng.standard_normal((p1, n))
    D11 = rng.standard_normal((p1, m1))
    D12 = rng.standard_normal((p1, 1))
    D21 = rng.standard_normal((1, m1))
    P = DescriptorRealization(
        np.eye(n),
        A,
        np.hstack([B1, B2]),
        np.vstack([C1, np.zeros((1, n))]),
        np.block([[D11, D12], [D21, np.zeros((1, 1))]]),
    )
    K = DescriptorRealization.from_gain([[1.3]])
    cl = lft_lower(P, K)
    s = 0.2 + 0.5j
    Pv = P.evaluate(s)
    expected = Pv[:p1, :m1] + Pv[:p1, m1:] @ (1.3 * np.eye(1)) @ Pv[p1:, :m1]
    assert np.allclose(cl.evaluate(s), expected)


def test_lft_matches_pointwise_formula(rng):
    for _ in range(5):
        P = rand_stable_ss(rng, 4, 4, 4)
        K = rand_stable_ss(rng, 2, 2, 2)
        cl = lft_lower(P, K)
        for _ in range(4):
            s = complex(rng.uniform(0.2, 2.0), rng.uniform(-5, 5))
            Pv, Kv = P.evaluate(s), K.evaluate(s)
            G11, G12 = Pv[:2, :2], Pv[:2, 2:]
            G21, G22 = Pv[2:, :2], Pv[2:, 2:]
            expected = G11 + G12 @ Kv @ np.linalg.solve(np.eye(2) - G22 @ Kv, G21)
            assert np.abs(cl.evaluate(s) - expected).max() < 1e-9 * max(1, np.abs(expected).max())


def test_lft_ill_posed_loop_raises():
    P = DescriptorRealization.from_gain(np.array([[0.0, 1.0], [1.0, 1.0]]))
    K = DescriptorRealization.from_gain([[1.0]])  # 1 - G22*K = 0 identically
    with pytest.raises(IllPosed):
        lft_lower(P, K)


def test_improper_algebra_still_evaluates():
    # (s+4) * 1/(s+1) + (s+4): improper intermediates, proper-by-hand values
    G1 = scalar(1, -1, 1, 1, 0)
    combo = series(PSI, G1) + PSI
    for s in (0.5, 2.0, 1j):
        expected = (s + 4) / (s + 1) + (s + 4)
        assert combo.evaluate(s)[0, 0] == pytest.approx(expected)
