"""Riccati solver, admissible feedback, and coprime-factor normalization.

The Riccati route here (Hamiltonian Schur on the reduced equation) is
cross-checked against scipy's independent CARE solver.
"""

import numpy as np
import pytest
import scipy.linalg
from conftest import rand_stable_matrix

from nrfsyn import DescriptorRealization, default_grid, is_admissible
from nrfsyn.errors import NoStabilizingSolution, NotStronglyStabilizable, SingularDtD, SingularE
from nrfsyn.stabilization import (
    admissible_feedback,
    gcare_residual,
    gcare_solve,
    normalize_rcf,
    stability_radius,
)

ROOT2 = np.sqrt(2.0)


def rand_gcare_data(rng, n, m, p):
    """Random instance satisfying the solver hypotheses: E invertible,
    (E, A) stable, D'D positive definite."""
    Q1 = np.linalg.qr(rng.standard_normal((n, n)))[0]
    E = Q1 @ np.diag(rng.uniform(0.5, 2.0, n))
    A = E @ rand_stable_matrix(rng, n)
    B = rng.standard_normal((n, m))
    C = rng.standard_normal((p, n))
    # floor the singular values of D so G(jw) keeps full column rank
    U, sv, Vt = np.linalg.svd(rng.standard_normal((p, m)), full_matrices=False)
    D = U @ np.diag(np.maximum(sv, 1.0)) @ Vt
    return E, A, B, C, D


class TestGcare:
    def test_scalar_hand_case(self):
        sol = gcare_solve(1, -1, 1, 1, 1)
        assert abs(sol.X_r[0, 0]) < 1e-12
        assert sol.F_r[0, 0] == pytest.approx(-1.0, abs=1e-12)

    def test_zero_cost(self):
        sol = gcare_solve(np.eye(3), -np.eye(3), np.ones((3, 1)), np.zeros((1, 3)), np.eye(1))
        assert np.abs(sol.X_r).max() < 1e-12
        assert np.abs(sol.F_r).max() < 1e-12

    def test_random_suite_residual_and_stability(self, rng):
        for _ in range(100):
            n = int(rng.integers(1, 9))
            m = int(rng.integers(1, 4))
            p = int(rng.integers(m, m + 4))
            E, A, B, C, D = rand_gcare_data(rng, n, m, p)
            sol = gcare_solve(E, A, B, C, D)
            assert sol.residual < 1e-10 * (1 + np.linalg.norm(sol.X_r, "fro"))
            assert np.allclose(sol.X_r, sol.X_r.T)
            cl = np.linalg.eigvals(np.linalg.solve(E, A + B @ sol.F_r))
            assert cl.real.max() < 0

    def test_agrees_with_scipy_care(self, rng):
        # scipy solves the explicitly reduced standard equation; the
        # generalized solution maps back through the descriptor weight
        for _ in range(25):
            n, m, p = 5, 2, 4
            E, A, B, C, D = rand_gcare_data(rng, n, m, p)
            sol = gcare_solve(E, A, B, C, D)
            Xh_ref = scipy.linalg.solve_continuous_are(
                np.linalg.solve(E, A), np.linalg.solve(E, B), C.T @ C, D.T @ D, s=C.T @ D
            )
            X_ref = np.linalg.solve(E.T, np.linalg.solve(E.T, Xh_ref.T).T)
            assert np.allclose(sol.X_r, X_ref, atol=1e-8 * (1 + np.linalg.norm(X_ref)))

    def test_residual_detects_wrong_solution(self):
        assert gcare_residual(1, -1, 1, 1, 1, 1.0) > 1.0

    def test_singular_e_rejected(self):
        with pytest.raises(SingularE):
            gcare_solve(np.diag([1.0, 0.0]), -np.eye(2), np.eye(2), np.eye(2), np.eye(2))

    def test_rank_deficient_d_rejected(self):
        with pytest.raises(SingularDtD):
            gcare_solve(1, -1, 1, 1, 0)

    def test_unstabilizable_data_rejected(self):
        # stable pencil is a hypothesis; violating it with B = 0 leaves the
        # unstable mode untouched and no stabilizing solution exists
        with pytest.raises(NoStabilizingSolution):
            gcare_solve(1, 1, 0, 1, 1)


class TestAdmissibleFeedback:
    def test_already_admissible(self):
        F = admissible_feedback([[-1.0]], [[1.0]], [[1.0]])
        assert is_admissible(np.array([[-1.0]]) + F, np.eye(1))

    def test_scalar_unstable(self):
        F = admissible_feedback([[2.0]], [[1.0]], [[1.0]])
        assert 2.0 + F[0, 0] < 0

    def test_impulsive_pencil(self):
        E = np.array([[0.0, 1.0], [0.0, 0.0]])
        A = np.eye(2)
        B = np.array([[0.0], [-1.0]])
        F = admissible_feedback(A, E, B)
        assert is_admissible(A + B @ F, E)

    def test_random_descriptor_systems(self, rng):
        from scipy.linalg import block_diag

        for _ in range(15):
            n_dyn, n_alg, m = 3, 2, 2
            n = n_dyn + n_alg
            # dynamic block unstable on purpose; algebraic block controllable
            A = block_diag(rng.standard_normal((n_dyn, n_dyn)) + np.eye(n_dyn), np.eye(n_alg))
            E = block_diag(np.eye(n_dyn), np.zeros((n_alg, n_alg)))
            B = rng.standard_normal((n, m))
            U = np.linalg.qr(rng.standard_normal((n, n)))[0]
            V = np.linalg.qr(rng.standard_normal((n, n)))[0]
            A, E, B = U @ A @ V, U @ E @ V, U @ B
            F = admissible_feedback(A, E, B)
            assert is_admissible(A + B @ F, E)

    def test_not_strongly_stabilizable(self):
        with pytest.raises(NotStronglyStabilizable):
            admissible_feedback([[1.0]], [[1.0]], [[0.0]])


class TestNormalizeRcf:
    def test_first_order_hand_case(self):
        # G = 1/(s+1) with N = G, M = 1
        rcf = DescriptorRealization([[1.0]], [[-1.0]], [[1.0]], [[1.0], [0.0]], [[0.0], [1.0]])
        nr = normalize_rcf(rcf)
        for s in (0.0, 1.0j, 2.0 + 1.0j, 5.0j):
            assert nr.N_hat.evaluate(s)[0, 0] == pytest.approx(1 / (s + ROOT2), abs=1e-9)
            assert nr.M_hat.evaluate(s)[0, 0] == pytest.approx((s + 1) / (s + ROOT2), abs=1e-9)
        assert np.allclose(nr.H_r.T @ nr.H_r, rcf.D.T @ rcf.D)

    def test_zero_plant(self):
        rcf = DescriptorRealization.from_gain(np.array([[0.0], [1.0]]))
        nr = normalize_rcf(rcf)
        assert nr.N_hat.evaluate(1j)[0, 0] == pytest.approx(0.0)
        assert nr.M_hat.evaluate(1j)[0, 0] == pytest.approx(1.0)
        assert stability_radius(nr) == pytest.approx(1.0)

    @pytest.mark.parametrize("seed", range(8))
    def test_normalization_identity_random(self, seed):
        rng = np.random.default_rng(seed)
        n, m, p = 4, 2, 3
        A = rand_stable_matrix(rng, n)
        B = rng.standard_normal((n, m))
        C = rng.standard_normal((p, n))
        D = rng.standard_normal((p, m))
        # trivial RCF of a stable plant: N = G, M = I
        rcf = DescriptorRealization(
            np.eye(n), A, B, np.vstack([C, np.zeros((m, n))]), np.vstack([D, np.eye(m)])
        )
        nr = normalize_rcf(rcf)
        for w in default_grid(60):
            V = nr.stacked.evaluate(1j * w)
            assert np.abs(V.conj().T @ V - np.eye(m)).max() < 1e-6
            # the factorization still represents the same plant
            G_ref = C @ np.linalg.solve(1j * w * np.eye(n) - A, B) + D
            G_new = nr.N_hat.evaluate(1j * w) @ np.linalg.inv(nr.M_hat.evaluate(1j * w))
            assert np.abs(G_new - G_ref).max() < 1e-8 * max(1.0, np.abs(G_ref).max())

    def test_descriptor_input_residualized(self):
        # same plant as the hand case, padded with an algebraic variable
        E = np.diag([1.0, 0.0])
        A = np.diag([-1.0, 1.0])
        B = np.array([[1.0], [0.0]])
        C = np.array([[1.0, 0.0], [0.0, 0.0]])
        D = np.array([[0.0], [1.0]])
        nr = normalize_rcf(DescriptorRealization(E, A, B, C, D))
        assert nr.M_hat.evaluate(1j)[0, 0] == pytest.approx((1j + 1) / (1j + ROOT2), abs=1e-9)


class TestStabilityRadius:
    def test_first_order_closed_form(self):
        rcf = DescriptorRealization([[1.0]], [[-1.0]], [[1.0]], [[1.0], [0.0]], [[0.0], [1.0]])
        b = stability_radius(normalize_rcf(rcf))
        assert b == pytest.approx(np.sqrt(2 + ROOT2) / 2, abs=1e-9)
