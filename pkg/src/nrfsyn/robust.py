"""Robust stabilization against normalized-coprime-factor perturbations.

Builds the weighted generalized plant whose closed-loop norm certifies
that an NRF control law stabilizes every plant within radius eps of the
nominal factors, the matching-order DCF and affine maps for it, and the
directed-gap certificate used to place one plant inside another's
perturbation class.
"""

from __future__ import annotations

import dataclasses

import numpy as np
from scipy.linalg import block_diag

from .errors import (
    HypothesisViolation,
    NormTooLarge,
    NotAdmissibleF,
    NotStabilizing,
    SingularDenominator,
    Unstable,
    UnstableQbar,
)
from .factorization import AffineClosedLoop, Dcf, PartitionedPlant, dcf_from_feedbacks
from .norms import default_grid, hinf_norm, linf_gain_on_grid
from .pencil import is_admissible, is_internally_stable, minimal_realization, state_space_form
from .realization import (
    DescriptorRealization,
    add,
    diag_replicate,
    is_regular_pencil,
    lft_lower,
    series,
    vstack,
)
from .stabilization import GcareSolution, Nrcf

__all__ = [
    "RobustPlant",
    "PerturbedPlant",
    "GapCertificate",
    "rcf_from_feedback",
    "build_t_eps",
    "reduced_dcf",
    "t_eps_affine",
    "robust_certificate",
    "perturbed_plant",
    "sample_perturbation",
    "gap_certificate",
    "optimize_qbar",
]


def rcf_from_feedback(G: DescriptorRealization, F) -> DescriptorRealization:
    """Stacked right-coprime factors [N; M] induced by an admissible
    state feedback, in state-space form."""
    F = np.atleast_2d(np.asarray(F, dtype=float))
    if not is_admissible(G.A + G.B @ F, G.E):
        raise NotAdmissibleF("A + BF - sE is not admissible")
    stack = DescriptorRealization(
        G.E,
        G.A + G.B @ F,
        G.B,
        np.vstack([G.C + G.D @ F, F]),
        np.vstack([G.D, np.eye(G.m)]),
    )
    return state_space_form(stack)


@dataclasses.dataclass(frozen=True)
class RobustPlant:
    """Generalized plant whose lower LFT with a controller measures
    robustness over the eps-ball of coprime-factor perturbations."""

    T_eps: PartitionedPlant
    eps: float
    G: DescriptorRealization
    F: np.ndarray
    rcf: DescriptorRealization
    gcare: GcareSolution
    H_r: np.ndarray


def build_t_eps(
    G: DescriptorRealization,
    F,
    rcf_realization: DescriptorRealization,
    gcare: GcareSolution,
    H_r,
    eps: float,
) -> RobustPlant:
    """Assemble the weighted plant block for block from the plant data,
    the stacked RCF realization and its normalizing solution."""
    F = np.atleast_2d(np.asarray(F, dtype=float))
    H_r = np.atleast_2d(np.asarray(H_r, dtype=float))
    if not (0.0 < eps <= 1.0):
        raise HypothesisViolation(f"eps must lie in (0, 1], got {eps}")
    r = rcf_realization
    if r.n:
        sv = np.linalg.svd(r.E, compute_uv=False)
        if sv[-1] <= 1e-10 * max(1.0, sv[0]):
            raise HypothesisViolation("RCF realization must have an invertible E")
    if not is_admissible(r.A, r.E):
        raise HypothesisViolation("RCF realization must be stable")
    defect = np.linalg.norm(H_r.T @ H_r - r.D.T @ r.D)
    if defect > 1e-8 * max(1.0, np.linalg.norm(r.D.T @ r.D)):
        raise HypothesisViolation("H_r' H_r does not match D_r' D_r")
    if not is_admissible(G.A + G.B @ F, G.E):
        raise HypothesisViolation("A + BF - sE is not admissible")
    m, p, n, n_r = G.m, G.p, G.n, r.n
    F_r = gcare.F_r
    eHr = eps * H_r
    T = DescriptorRealization(
        block_diag(r.E, G.E),
        np.block([[r.A, -r.B @ F], [np.zeros((n, n_r)), G.A]]),
        np.block(
            [
                [np.zeros((n_r, p)), -r.B, r.B],
                [np.zeros((n, p)), -G.B, G.B],
            ]
        ),
        np.block([[-eHr @ F_r, -eHr @ F], [np.zeros((p, n_r)), G.C]]),
        np.block(
            [
                [np.zeros((m, p)), -eHr, eHr],
                [np.eye(p), -G.D, G.D],
            ]
        ),
    )
    return RobustPlant(
        T_eps=PartitionedPlant(T, m2=m, p2=p),
        eps=float(eps),
        G=G,
        F=F,
        rcf=r,
        gcare=gcare,
        H_r=H_r,
    )


def reduced_dcf(G: DescriptorRealization, F, H) -> Dcf:
    """DCF of the measured channel with the same order as the plant
    model itself (the whole plant is the measured channel here)."""
    return dcf_from_feedbacks(PartitionedPlant(G, m2=G.m, p2=G.p), F, H)


def t_eps_affine(robust_plant: RobustPlant, dcf: Dcf) -> AffineClosedLoop:
    """Reduced-order affine closed-loop maps for the weighted plant."""
    G, r = robust_plant.G, robust_plant.rcf
    F, H = robust_plant.F, dcf.H
    eHr = robust_plant.eps * robust_plant.H_r
    F_r = robust_plant.gcare.F_r
    n, n_r, m, p = G.n, r.n, G.m, G.p
    A_H = G.A + H @ G.C
    T1 = DescriptorRealization(
        block_diag(r.E, G.E),
        np.block([[r.A, -r.B @ F], [np.zeros((n, n_r)), A_H]]),
        np.block([[np.zeros((n_r, p)), -r.B], [H, -G.B - H @ G.D]]),
        np.hstack([-eHr @ F_r, -eHr @ F]),
        np.hstack([np.zeros((m, p)), -eHr]),
    )
    T2 = DescriptorRealization(r.E, r.A, r.B, -eHr @ F_r, eHr)
    T3 = DescriptorRealization(
        G.E, A_H, np.hstack([H, -G.B - H @ G.D]), G.C, np.hstack([np.eye(p), -G.D])
    )
    return AffineClosedLoop(
        T1=state_space_form(minimal_realization(T1)),
        T2=state_space_form(T2),
        T3=state_space_form(T3),
    )


def robust_certificate(robust_plant: RobustPlant, K: DescriptorRealization, tol: float = 1e-6) -> bool:
    """True when the weighted closed loop stays within the unit ball, so
    the controller's NRF law covers the whole perturbation class."""
    if not is_internally_stable(robust_plant.G, K):
        raise NotStabilizing("controller does not stabilize the nominal plant")
    pl = robust_plant.T_eps
    cl = lft_lower(pl.G, K, m2=pl.m2, p2=pl.p2)
    return bool(hinf_norm(cl) <= 1.0 + tol)


@dataclasses.dataclass(frozen=True)
class PerturbedPlant:
    Delta_N: DescriptorRealization
    Delta_M: DescriptorRealization
    G_Delta: DescriptorRealization


def perturbed_plant(nrcf: Nrcf, Delta_N, Delta_M, eps: float) -> PerturbedPlant:
    """Member of the perturbation class built from explicit stable
    factor perturbations."""
    stacked = vstack(Delta_N, Delta_M)
    try:
        size = hinf_norm(stacked)
    except Unstable as exc:
        raise NormTooLarge(f"perturbation must be stable and proper: {exc}") from exc
    if size >= eps:
        raise NormTooLarge(f"perturbation norm {size:.6f} >= eps = {eps}")
    den = add(nrcf.M_hat, Delta_M)
    den_inv = den.inverse()
    if not is_regular_pencil(den_inv.A, den_inv.E):
        raise SingularDenominator("M_hat + Delta_M has identically zero determinant")
    G_Delta = series(add(nrcf.N_hat, Delta_N), den_inv)
    return PerturbedPlant(Delta_N=Delta_N, Delta_M=Delta_M, G_Delta=G_Delta)


def sample_perturbation(nrcf: Nrcf, eps: float, rng, max_order: int = 4):
    """Random stable perturbation pair with stacked norm drawn uniformly
    from (0, eps); returns (Delta_N, Delta_M)."""
    p, m = nrcf.p, nrcf.m
    order = int(rng.integers(1, max_order + 1))
    A = rng.standard_normal((order, order))
    A = A - (max(np.linalg.eigvals(A).real) + rng.uniform(0.3, 1.5)) * np.eye(order)
    raw = DescriptorRealization(
        np.eye(order),
        A,
        rng.standard_normal((order, m)),
        rng.standard_normal((p + m, order)),
        0.2 * rng.standard_normal((p + m, m)),
    )
    target = eps * rng.uniform(0.05, 0.98)
    scale = target / hinf_norm(raw)
    scaled = scale * raw
    return scaled.output_rows(np.arange(p)), scaled.output_rows(np.arange(p, p + m))


@dataclasses.dataclass(frozen=True)
class GapCertificate:
    """Directed-gap style certificate: mu bounds the distance from the
    nominal factors to the compared plant's factors, steered by Q_bar."""

    Q_bar: DescriptorRealization
    mu: float
    eps: float | None = None

    @property
    def in_class(self) -> bool:
        if self.eps is None:
            raise ValueError("no radius was supplied to certify against")
        return self.mu < self.eps


def _gap_defect(nrcf_G: Nrcf, nrcf_Gbar: Nrcf, Q_bar: DescriptorRealization) -> DescriptorRealization:
    # [N;M] of Gbar times Q_bar minus [N;M] of G; small norm puts Gbar
    # inside the class around G (the perturbation is the defect itself)
    return add(series(nrcf_Gbar.stacked, Q_bar), -nrcf_G.stacked)


def gap_certificate(
    nrcf_G: Nrcf,
    nrcf_Gbar: Nrcf,
    Q_bar: DescriptorRealization,
    eps: float | None = None,
) -> GapCertificate:
    try:
        hinf_norm(Q_bar)
    except Unstable as exc:
        raise UnstableQbar(f"comparison parameter must be in RH-infinity: {exc}") from exc
    mu = hinf_norm(_gap_defect(nrcf_G, nrcf_Gbar, Q_bar))
    return GapCertificate(Q_bar=Q_bar, mu=float(mu), eps=eps)


def _first_order_qbar(d: float, r: float, tau: float, m: int) -> DescriptorRealization:
    siso = DescriptorRealization([[1.0]], [[-tau]], [[1.0]], [[r]], [[d]])
    return diag_replicate(siso, m)


def optimize_qbar(
    nrcf_G: Nrcf,
    nrcf_Gbar: Nrcf,
    eps: float | None = None,
    sweeps: int = 3,
    grid=None,
) -> GapCertificate:
    """Coarse search for a Q_bar with small defect: static multiples of
    the identity, then a repeated-scalar first-order term, refined by
    coordinate descent on a frequency grid.  The returned mu is the
    exact norm of the best candidate, so the certificate stands on its
    own regardless of how coarse the search was.
    """
    m = nrcf_G.m
    grid = default_grid(160) if grid is None else grid

    def rough(params):
        d, r, tau = params
        return linf_gain_on_grid(_gap_defect(nrcf_G, nrcf_Gbar, _first_order_qbar(d, r, tau, m)), grid)

    best = None
    for alpha in np.concatenate([np.linspace(-2.0, 2.0, 17), [0.05, -0.05]]):
        val = rough((alpha, 0.0, 1.0))
        if best is None or val < best[1]:
            best = ((alpha, 0.0, 1.0), val)
    params, val = list(best[0]), best[1]
    steps = [0.4, 0.4, 0.8]
    for _ in range(sweeps):
        for k in range(3):
            step = steps[k]
            while step > 1e-3:
                improved = False
                for sign in (1.0, -1.0):
                    trial = params.copy()
                    trial[k] += sign * step
                    if k == 2 and trial[2] <= 1e-2:
                        continue
                    v = rough(trial)
                    if v < val - 1e-12:
                        params, val = trial, v
                        improved = True
                        break
                if not improved:
                    step /= 2.0
    d, r, tau = params
    return gap_certificate(nrcf_G, nrcf_Gbar, _first_order_qbar(d, r, tau, m), eps=eps)
