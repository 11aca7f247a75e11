import numpy as np
import pytest

from nrfsyn import (
    DescriptorRealization,
    admissible_feedback,
    bezout_residual,
    dcf_from_feedbacks,
    hinf_norm,
    is_internally_stable,
    is_regular_pencil,
    is_strongly_stabilizable,
    lft_lower,
    normalize_rcf,
    nrf_extract,
    youla_controller,
)
from nrfsyn.errors import (
    HypothesisViolation,
    NormTooLarge,
    NotStabilizing,
    SingularDenominator,
    UnstableQbar,
)
from nrfsyn.robust import (
    build_t_eps,
    gap_certificate,
    optimize_qbar,
    perturbed_plant,
    rcf_from_feedback,
    reduced_dcf,
    robust_certificate,
    sample_perturbation,
    t_eps_affine,
)


def scalar_unstable():
    """G = 1/(s-1)."""
    return DescriptorRealization(np.eye(1), [[1.0]], [[1.0]], [[1.0]], [[0.0]])


def coupled_2x2(rng):
    A = np.array([[1.0, 0.4], [0.0, -2.0]])
    B = rng.standard_normal((2, 2))
    C = rng.standard_normal((2, 2))
    D = 0.3 * rng.standard_normal((2, 2))
    return DescriptorRealization(np.eye(2), A, B, C, D)


def robust_setup(G, rng, eps):
    F = admissible_feedback(G.A, G.E, G.B, rng=rng)
    H = admissible_feedback(G.A.T, G.E.T, G.C.T, rng=rng).T
    rcf = rcf_from_feedback(G, F)
    nrcf = normalize_rcf(rcf)
    rp = build_t_eps(G, F, rcf, nrcf.gcare, nrcf.H_r, eps)
    dcf = reduced_dcf(G, F, H)
    return rp, dcf, nrcf


def stable_q(rng, m, p, order=1):
    return DescriptorRealization(
        np.eye(order),
        -np.eye(order) - np.diag(rng.uniform(0, 2, order)),
        rng.standard_normal((order, p)),
        rng.standard_normal((m, order)),
        0.3 * rng.standard_normal((m, p)),
    )


class TestBuildTeps:
    def test_measured_channel_is_the_plant(self, rng):
        G = coupled_2x2(rng)
        rp, _, _ = robust_setup(G, rng, eps=0.5)
        t22 = rp.T_eps.g22()
        for w in [0.0, 0.3, 2.0, 50.0]:
            assert np.allclose(t22.evaluate(1j * w), G.evaluate(1j * w), atol=1e-9)
        assert is_strongly_stabilizable(t22)
        assert is_strongly_stabilizable(t22, dual=True)

    def test_eps_scales_the_performance_row(self, rng):
        G = scalar_unstable()
        F = admissible_feedback(G.A, G.E, G.B, rng=rng)
        rcf = rcf_from_feedback(G, F)
        nrcf = normalize_rcf(rcf)
        eps = 0.37
        rp_e = build_t_eps(G, F, rcf, nrcf.gcare, nrcf.H_r, eps)
        rp_1 = build_t_eps(G, F, rcf, nrcf.gcare, nrcf.H_r, 1.0)
        m = G.m
        for w in [0.1, 1.0, 12.0]:
            Te = rp_e.T_eps.G.evaluate(1j * w)
            T1 = rp_1.T_eps.G.evaluate(1j * w)
            assert np.allclose(Te[:m, :], eps * T1[:m, :], atol=1e-12)
            assert np.allclose(Te[m:, :], T1[m:, :], atol=1e-12)

    def test_hypothesis_checks(self, rng):
        G = scalar_unstable()
        F = admissible_feedback(G.A, G.E, G.B, rng=rng)
        rcf = rcf_from_feedback(G, F)
        nrcf = normalize_rcf(rcf)
        for bad_eps in [0.0, -0.2, 1.5]:
            with pytest.raises(HypothesisViolation):
                build_t_eps(G, F, rcf, nrcf.gcare, nrcf.H_r, bad_eps)
        with pytest.raises(HypothesisViolation):
            build_t_eps(G, F, rcf, nrcf.gcare, 2.0 * nrcf.H_r, 0.5)
        unstable_rcf = DescriptorRealization(
            rcf.E, rcf.A + 10.0 * np.eye(rcf.n), rcf.B, rcf.C, rcf.D
        )
        with pytest.raises(HypothesisViolation):
            build_t_eps(G, F, unstable_rcf, nrcf.gcare, nrcf.H_r, 0.5)
        with pytest.raises(HypothesisViolation):
            build_t_eps(G, np.zeros((1, 1)), rcf, nrcf.gcare, nrcf.H_r, 0.5)


class TestReducedDcf:
    def test_bezout(self, rng):
        G = coupled_2x2(rng)
        _, dcf, _ = robust_setup(G, rng, eps=0.5)
        assert bezout_residual(dcf) < 1e-8

    def test_matches_full_order_dcf(self, rng):
        """Lifting the plant feedbacks with zero blocks over the RCF states
        must reproduce the reduced factors exactly."""
        G = coupled_2x2(rng)
        rp, dcf, _ = robust_setup(G, rng, eps=0.5)
        n_r = rp.rcf.n
        F_hat = np.hstack([np.zeros((G.m, n_r)), dcf.F])
        H_hat = np.vstack([np.zeros((n_r, G.p)), dcf.H])
        full = dcf_from_feedbacks(rp.T_eps, F_hat, H_hat)
        pairs = [
            (dcf.M, full.M),
            (dcf.N, full.N),
            (dcf.X, full.X),
            (dcf.Y, full.Y),
            (dcf.M_t, full.M_t),
            (dcf.N_t, full.N_t),
            (dcf.X_t, full.X_t),
            (dcf.Y_t, full.Y_t),
        ]
        for w in [0.0, 0.7, 4.0, 33.0]:
            s = 1j * w
            for reduced, lifted in pairs:
                assert np.allclose(reduced.evaluate(s), lifted.evaluate(s), atol=1e-8)


class TestTepsAffine:
    def test_t2_block_echo(self, rng):
        G = scalar_unstable()
        rp, dcf, nrcf = robust_setup(G, rng, eps=0.7)
        acl = t_eps_affine(rp, dcf)
        r = rp.rcf
        ref = DescriptorRealization(
            r.E, r.A, r.B, -0.7 * nrcf.H_r @ rp.gcare.F_r, 0.7 * nrcf.H_r
        )
        assert np.allclose(acl.T2.A, ref.A)
        assert np.allclose(acl.T2.B, ref.B)
        assert np.allclose(acl.T2.C, ref.C)
        assert np.allclose(acl.T2.D, ref.D)

    def test_affine_equals_lft(self, rng):
        G = coupled_2x2(rng)
        rp, dcf, _ = robust_setup(G, rng, eps=0.6)
        acl = t_eps_affine(rp, dcf)
        pl = rp.T_eps
        K0 = youla_controller(dcf, DescriptorRealization.zeros(G.m, G.p))
        cl0 = lft_lower(pl.G, K0, m2=pl.m2, p2=pl.p2)
        for w in [0.0, 0.5, 6.0]:
            assert np.allclose(acl.T1.evaluate(1j * w), cl0.evaluate(1j * w), atol=1e-8)
        for k in range(10):
            Q = stable_q(rng, G.m, G.p, order=1 + k % 2)
            K = youla_controller(dcf, Q)
            cl = lft_lower(pl.G, K, m2=pl.m2, p2=pl.p2)
            affine = acl.at(Q)
            for w in [0.1, 1.3, 20.0]:
                assert np.allclose(affine.evaluate(1j * w), cl.evaluate(1j * w), atol=1e-8)


class TestRobustCertificate:
    def test_scaling_controls_the_verdict(self, rng):
        G = scalar_unstable()
        F = admissible_feedback(G.A, G.E, G.B, rng=rng)
        H = admissible_feedback(G.A.T, G.E.T, G.C.T, rng=rng).T
        rcf = rcf_from_feedback(G, F)
        nrcf = normalize_rcf(rcf)
        dcf = reduced_dcf(G, F, H)
        Q = stable_q(rng, 1, 1)
        K = youla_controller(dcf, Q)
        rp1 = build_t_eps(G, F, rcf, nrcf.gcare, nrcf.H_r, 1.0)
        pl = rp1.T_eps
        n1 = hinf_norm(lft_lower(pl.G, K, m2=pl.m2, p2=pl.p2))
        assert n1 > 1.5  # this Q is deliberately not a robust design
        eps_ok = 0.9 / n1
        assert robust_certificate(build_t_eps(G, F, rcf, nrcf.gcare, nrcf.H_r, eps_ok), K)
        # monotone: shrinking the radius keeps the certificate
        assert robust_certificate(
            build_t_eps(G, F, rcf, nrcf.gcare, nrcf.H_r, eps_ok / 2), K
        )
        eps_bad = min(1.0, 1.5 / n1)
        assert not robust_certificate(
            build_t_eps(G, F, rcf, nrcf.gcare, nrcf.H_r, eps_bad), K
        )

    def test_tiny_radius_always_certifies(self, rng):
        G = scalar_unstable()
        rp, dcf, _ = robust_setup(G, rng, eps=1e-6)
        K = youla_controller(dcf, stable_q(rng, 1, 1))
        assert robust_certificate(rp, K)

    def test_non_stabilizing_controller_rejected(self, rng):
        G = scalar_unstable()
        rp, _, _ = robust_setup(G, rng, eps=0.5)
        with pytest.raises(NotStabilizing):
            robust_certificate(rp, DescriptorRealization.from_gain([[5.0]]))

    def test_certified_law_survives_sampled_perturbations(self, rng):
        """The norm condition is the hypothesis of the robustness theorem;
        sampling the ball guards the implementation of everything else."""
        G = coupled_2x2(rng)
        F = admissible_feedback(G.A, G.E, G.B, rng=rng)
        H = admissible_feedback(G.A.T, G.E.T, G.C.T, rng=rng).T
        rcf = rcf_from_feedback(G, F)
        nrcf = normalize_rcf(rcf)
        dcf = reduced_dcf(G, F, H)
        Q = stable_q(rng, 2, 2)
        K = youla_controller(dcf, Q)
        rp1 = build_t_eps(G, F, rcf, nrcf.gcare, nrcf.H_r, 1.0)
        pl = rp1.T_eps
        n1 = hinf_norm(lft_lower(pl.G, K, m2=pl.m2, p2=pl.p2))
        eps = min(0.99, 0.95 / n1)
        rp = build_t_eps(G, F, rcf, nrcf.gcare, nrcf.H_r, eps)
        assert robust_certificate(rp, K)
        nrf = nrf_extract(dcf, Q)
        K_nrf = nrf.controller()
        for _ in range(50):
            dn, dm = sample_perturbation(nrcf, eps, rng)
            gd = perturbed_plant(nrcf, dn, dm, eps).G_Delta
            assert is_internally_stable(gd, K_nrf)


class TestPerturbedPlant:
    def test_zero_perturbation_is_identity(self, rng):
        G = scalar_unstable()
        _, _, nrcf = robust_setup(G, rng, eps=0.5)
        pp = perturbed_plant(
            nrcf,
            DescriptorRealization.zeros(1, 1),
            DescriptorRealization.zeros(1, 1),
            eps=0.5,
        )
        for w in [0.2, 1.0, 8.0]:
            assert np.allclose(pp.G_Delta.evaluate(1j * w), G.evaluate(1j * w), atol=1e-9)

    def test_oversized_perturbation_rejected(self, rng):
        G = scalar_unstable()
        _, _, nrcf = robust_setup(G, rng, eps=0.5)
        with pytest.raises(NormTooLarge):
            perturbed_plant(
                nrcf,
                DescriptorRealization.from_gain([[1.0]]),
                DescriptorRealization.zeros(1, 1),
                eps=0.5,
            )

    def test_vanishing_denominator_rejected(self):
        # biproper plant keeps ||M_hat|| strictly below 1, leaving room
        # for the cancelling perturbation inside the ball
        G = DescriptorRealization(np.eye(1), [[-1.0]], [[1.0]], [[1.0]], [[1.0]])
        nrcf = normalize_rcf(rcf_from_feedback(G, np.zeros((1, 1))))
        assert hinf_norm(nrcf.M_hat) < 0.75
        with pytest.raises(SingularDenominator):
            perturbed_plant(nrcf, DescriptorRealization.zeros(1, 1), -nrcf.M_hat, eps=0.9)


class TestGapCertificate:
    def make(self, a, rng):
        G = DescriptorRealization(np.eye(1), [[a]], [[1.0]], [[1.0]], [[0.0]])
        F = admissible_feedback(G.A, G.E, G.B, rng=rng)
        return G, normalize_rcf(rcf_from_feedback(G, F))

    def test_same_plant_identity_qbar(self, rng):
        _, nrcf = self.make(1.0, rng)
        cert = gap_certificate(nrcf, nrcf, DescriptorRealization.identity(1), eps=0.3)
        assert cert.mu < 1e-8
        assert cert.in_class

    def test_zero_qbar_hits_the_normalization(self, rng):
        _, n1 = self.make(1.0, rng)
        _, n2 = self.make(0.8, rng)
        cert = gap_certificate(n1, n2, DescriptorRealization.zeros(1, 1))
        assert cert.mu == pytest.approx(1.0, abs=1e-5)

    def test_unstable_qbar_rejected(self, rng):
        _, n1 = self.make(1.0, rng)
        with pytest.raises(UnstableQbar):
            gap_certificate(n1, n1, DescriptorRealization(np.eye(1), [[2.0]], [[1.0]], [[1.0]], [[0.0]]))

    def test_optimizer_certifies_nearby_plant(self, rng):
        """mu below eps must produce an actual class member equal to the
        compared plant; that closes the membership argument."""
        G1, n1 = self.make(1.0, rng)
        G2, n2 = self.make(1.15, rng)
        cert = optimize_qbar(n1, n2, eps=0.3)
        assert cert.mu < 0.3
        assert cert.in_class
        # mu < 1 forces an invertible steering parameter
        qinv = cert.Q_bar.inverse()
        assert is_regular_pencil(qinv.A, qinv.E)
        from nrfsyn.robust import _gap_defect

        defect = _gap_defect(n1, n2, cert.Q_bar)
        pp = perturbed_plant(
            n1,
            defect.output_rows(np.arange(n1.p)),
            defect.output_rows(np.arange(n1.p, n1.p + n1.m)),
            eps=0.3,
        )
        for w in [0.1, 1.0, 10.0]:
            assert np.allclose(
                pp.G_Delta.evaluate(1j * w), G2.evaluate(1j * w), atol=1e-7
            )
