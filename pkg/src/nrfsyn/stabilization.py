"""Admissible feedback, the generalized Riccati equation, and normalized
right coprime factorizations.

The Riccati solver reduces E'XA + A'XE + C'C - (E'XB + C'D)(D'D)^{-1}
(B'XE + D'C) = 0 with invertible E to a standard CARE in Xhat = E'XE
and extracts the stabilizing solution from the stable invariant
subspace of the 2n Hamiltonian.
"""

from __future__ import annotations

import dataclasses

import numpy as np
import scipy.linalg

from .errors import (
    NoStabilizingSolution,
    NotStronglyStabilizable,
    SingularDtD,
    SingularE,
)
from .norms import hankel_singular_values
from .pencil import (
    _eliminate_algebraic,
    is_admissible,
    is_strongly_stabilizable,
    residualize,
)
from .realization import DescriptorRealization

__all__ = [
    "GcareSolution",
    "Nrcf",
    "admissible_feedback",
    "gcare_solve",
    "gcare_residual",
    "normalize_rcf",
    "stability_radius",
]


@dataclasses.dataclass(frozen=True)
class GcareSolution:
    """Stabilizing solution of the generalized Riccati equation."""

    X_r: np.ndarray
    F_r: np.ndarray
    residual: float


def gcare_residual(E, A, B, C, D, X) -> float:
    """Frobenius norm of the Riccati defect at X."""
    E, A, B, C, D, X = (np.atleast_2d(np.asarray(M, dtype=float)) for M in (E, A, B, C, D, X))
    R = D.T @ D
    L = E.T @ X @ B + C.T @ D
    res = E.T @ X @ A + A.T @ X @ E + C.T @ C - L @ np.linalg.solve(R, L.T)
    return float(np.linalg.norm(res, "fro"))


def _stable_invariant_subspace(H: np.ndarray) -> np.ndarray:
    n2 = H.shape[0]
    T, Z, sdim = scipy.linalg.schur(H, output="real", sort=lambda re, im: re < 0.0)
    if sdim != n2 // 2:
        raise NoStabilizingSolution(
            f"Hamiltonian has {sdim} stable eigenvalues, expected {n2 // 2}"
        )
    return Z[:, : n2 // 2]


def gcare_solve(E_r, A_r, B_r, C_r, D_r) -> GcareSolution:
    """Stabilizing (X_r, F_r) for the generalized Riccati equation."""
    E, A, B, C, D = (np.atleast_2d(np.asarray(M, dtype=float)) for M in (E_r, A_r, B_r, C_r, D_r))
    n, m = B.shape
    if n == 0:
        return GcareSolution(np.zeros((0, 0)), np.zeros((m, 0)), 0.0)
    sv = np.linalg.svd(E, compute_uv=False)
    if sv[-1] <= 1e-12 * max(1.0, sv[0]):
        raise SingularE("descriptor weight must be invertible here")
    R = D.T @ D
    try:
        scipy.linalg.cholesky(R)
    except scipy.linalg.LinAlgError as exc:
        raise SingularDtD("D'D must be positive definite") from exc

    Ah = np.linalg.solve(E, A)
    Bh = np.linalg.solve(E, B)
    RiDtC = np.linalg.solve(R, D.T @ C)
    A0 = Ah - Bh @ RiDtC
    Q0 = C.T @ C - C.T @ D @ RiDtC
    Q0 = 0.5 * (Q0 + Q0.T)
    G0 = Bh @ np.linalg.solve(R, Bh.T)
    H = np.block([[A0, -G0], [-Q0, -A0.T]])
    U = _stable_invariant_subspace(H)
    U1, U2 = U[:n, :], U[n:, :]
    if np.linalg.cond(U1) > 1e12:
        raise NoStabilizingSolution("stable subspace has no graph representation")
    Xh = U2 @ np.linalg.inv(U1)
    Xh = 0.5 * (Xh + Xh.T)
    X = np.linalg.solve(E.T, np.linalg.solve(E.T, Xh.T).T)  # (E')^{-1} Xh E^{-1}
    X = 0.5 * (X + X.T)
    F = -np.linalg.solve(R, B.T @ X @ E + D.T @ C)
    res = gcare_residual(E, A, B, C, D, X)
    if res > 1e-8 * (1.0 + np.linalg.norm(X, "fro")):
        raise NoStabilizingSolution(f"Riccati residual too large: {res:.2e}")
    cl = np.linalg.eigvals(np.linalg.solve(E, A + B @ F))
    if cl.size and cl.real.max() >= 0.0:
        raise NoStabilizingSolution("closed loop of the Riccati feedback is not stable")
    return GcareSolution(X, F, res)


def admissible_feedback(A, E, B, rng=None, max_tries: int = 25) -> np.ndarray:
    """State feedback F making A + BF - sE admissible.

    Two stages: first a kernel-directed term removes the impulsive
    modes, then the finite dynamics of the resulting impulse-free
    system are stabilized through a Riccati design with unit weights.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    E = np.atleast_2d(np.asarray(E, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    n, m = B.shape
    if n == 0:
        return np.zeros((m, 0))
    probe = DescriptorRealization(E, A, B, np.zeros((1, n)), np.zeros((1, m)))
    if not is_strongly_stabilizable(probe):
        raise NotStronglyStabilizable("no feedback can make this pencil admissible")

    U, sv, Vt = np.linalg.svd(E)
    r = int(np.sum(sv > 1e-9 * max(1.0, sv[0] if sv.size else 0.0)))
    V2 = Vt[r:, :].T
    U2 = U[:, r:]
    scaleW = (np.linalg.norm(A, 2) + 1.0) / (np.linalg.norm(B, 2) + 1.0)
    rng = np.random.default_rng(7 if rng is None else rng)

    def impulse_ok(W):
        S = U2.T @ (A @ V2 + B @ W)
        if S.size == 0:
            return True
        svs = np.linalg.svd(S, compute_uv=False)
        return svs[-1] > 1e-8 * max(1.0, svs[0])

    for k in range(max_tries):
        W = np.zeros((m, n - r)) if k == 0 else scaleW * rng.standard_normal((m, n - r))
        if not impulse_ok(W):
            continue
        F_inf = W @ V2.T
        A1 = A + B @ F_inf
        sys1 = DescriptorRealization(E, A1, B, np.zeros((0, n)), np.zeros((0, m)))
        out = _eliminate_algebraic(sys1)
        if out is None:
            continue
        A_red, B_red, _, _ = out
        k_r = A_red.shape[0]
        try:
            sol = gcare_solve(
                np.eye(k_r),
                A_red,
                B_red,
                np.vstack([np.eye(k_r), np.zeros((m, k_r))]),
                np.vstack([np.zeros((k_r, m)), np.eye(m)]),
            )
        except NoStabilizingSolution:
            continue
        F = F_inf + sol.F_r @ Vt[:r, :]
        if is_admissible(A + B @ F, E):
            return F
    raise NotStronglyStabilizable("failed to construct an admissible feedback")


@dataclasses.dataclass(frozen=True)
class Nrcf:
    """Normalized right coprime factorization [N_hat; M_hat], G = N_hat M_hat^{-1}."""

    stacked: DescriptorRealization  # p+m outputs, shared state
    p: int
    m: int
    G0: DescriptorRealization
    H_r: np.ndarray
    gcare: GcareSolution

    @property
    def N_hat(self) -> DescriptorRealization:
        return self.stacked.output_rows(np.arange(self.p))

    @property
    def M_hat(self) -> DescriptorRealization:
        return self.stacked.output_rows(np.arange(self.p, self.p + self.m))


def normalize_rcf(rcf: DescriptorRealization) -> Nrcf:
    """Normalization of a stable stacked right factorization [N; M].

    The input realization has p+m outputs and m inputs; its transfer
    stack satisfies G = N M^{-1}.  The output stack multiplies by
    G0^{-1} on the right and satisfies N'(-s)N(s) + M'(-s)M(s) = I.
    """
    m = rcf.m
    p = rcf.p - m
    if p < 0:
        raise SingularDtD("stacked factorization must have at least m outputs")
    ss = rcf if rcf.is_state_space else residualize(rcf)
    A, B, C, D = ss.A, ss.B, ss.C, ss.D
    sol = gcare_solve(np.eye(ss.n), A, B, C, D)
    S = D.T @ D
    L = np.linalg.cholesky(S)
    H_r = L.T  # upper triangular, H'H = D'D
    G0 = DescriptorRealization(np.eye(ss.n), A, B, -H_r @ sol.F_r, H_r)
    Hi = np.linalg.inv(H_r)
    # cascade with G0^{-1} shares the state: feedback-transformed factorization
    stacked = DescriptorRealization(np.eye(ss.n), A + B @ sol.F_r, B @ Hi, C + D @ sol.F_r, D @ Hi)
    return Nrcf(stacked=stacked, p=p, m=m, G0=G0, H_r=H_r, gcare=sol)


def stability_radius(nrcf: Nrcf) -> float:
    """Largest robustness margin sqrt(1 - hankel([N; M])^2)."""
    hsv = hankel_singular_values(nrcf.stacked)
    h = float(hsv[0]) if hsv.size else 0.0
    return float(np.sqrt(max(0.0, 1.0 - h * h)))
