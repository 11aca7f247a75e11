"""Doubly coprime factorizations, the stabilizing-controller family,
affine closed-loop maps, and network-realizable controller extraction.

Both factor stacks share a single generating pencil each (A + HC2 - sE
on the left, A + B2 F - sE on the right) and are stored in state-space
form, so every slice of them is immediately usable by the Riccati and
SDP layers.
"""

from __future__ import annotations

import dataclasses

import numpy as np
from scipy.linalg import block_diag

from .errors import (
    DegenerateQ,
    DiagonalSingular,
    DimensionMismatch,
    IllPosedAtInfinity,
    NotAdmissibleF,
    NotAdmissibleH,
)
from .pencil import is_admissible, minimal_realization, state_space_form, value_at_infinity
from .realization import (
    DescriptorRealization,
    add,
    blkdiag,
    from_scalar_entries,
    is_regular_pencil,
    series,
)

__all__ = [
    "PartitionedPlant",
    "Dcf",
    "AffineClosedLoop",
    "NrfPair",
    "dcf_from_feedbacks",
    "bezout_residual",
    "youla_controller",
    "closed_loop_affine",
    "nrf_extract",
    "diagonal_part",
]


@dataclasses.dataclass(frozen=True)
class PartitionedPlant:
    """Generalized plant with trailing control inputs and measured outputs."""

    G: DescriptorRealization
    m2: int
    p2: int

    def __post_init__(self):
        if not (0 <= self.m2 <= self.G.m and 0 <= self.p2 <= self.G.p):
            raise ValueError("partition exceeds plant dimensions")

    @property
    def m1(self) -> int:
        return self.G.m - self.m2

    @property
    def p1(self) -> int:
        return self.G.p - self.p2

    @property
    def E(self):
        return self.G.E

    @property
    def A(self):
        return self.G.A

    @property
    def B1(self):
        return self.G.B[:, : self.m1]

    @property
    def B2(self):
        return self.G.B[:, self.m1 :]

    @property
    def C1(self):
        return self.G.C[: self.p1, :]

    @property
    def C2(self):
        return self.G.C[self.p1 :, :]

    @property
    def D11(self):
        return self.G.D[: self.p1, : self.m1]

    @property
    def D12(self):
        return self.G.D[: self.p1, self.m1 :]

    @property
    def D21(self):
        return self.G.D[self.p1 :, : self.m1]

    @property
    def D22(self):
        return self.G.D[self.p1 :, self.m1 :]

    def g22(self) -> DescriptorRealization:
        return DescriptorRealization(self.E, self.A, self.B2, self.C2, self.D22)


@dataclasses.dataclass(frozen=True)
class Dcf:
    """Eight stable factors of G22 = N M^{-1} = M_t^{-1} N_t, stored as two
    state-space stacks (left: [Y_t, -X_t; -N_t, M_t], right: [M, X; N, Y])."""

    left: DescriptorRealization
    right: DescriptorRealization
    m: int
    p: int
    F: np.ndarray
    H: np.ndarray

    def _slice(self, stack, rows, cols, negate=False):
        out = stack.output_rows(rows).input_cols(cols)
        return -out if negate else out

    @property
    def M(self):
        return self._slice(self.right, np.arange(self.m), np.arange(self.m))

    @property
    def X(self):
        return self._slice(self.right, np.arange(self.m), np.arange(self.m, self.m + self.p))

    @property
    def N(self):
        return self._slice(self.right, np.arange(self.m, self.m + self.p), np.arange(self.m))

    @property
    def Y(self):
        return self._slice(
            self.right, np.arange(self.m, self.m + self.p), np.arange(self.m, self.m + self.p)
        )

    @property
    def Y_t(self):
        return self._slice(self.left, np.arange(self.m), np.arange(self.m))

    @property
    def X_t(self):
        return self._slice(
            self.left, np.arange(self.m), np.arange(self.m, self.m + self.p), negate=True
        )

    @property
    def N_t(self):
        return self._slice(
            self.left, np.arange(self.m, self.m + self.p), np.arange(self.m), negate=True
        )

    @property
    def M_t(self):
        return self._slice(
            self.left, np.arange(self.m, self.m + self.p), np.arange(self.m, self.m + self.p)
        )


def dcf_from_feedbacks(plant: PartitionedPlant, F, H) -> Dcf:
    """Factor stacks generated by an admissible state feedback and output
    injection on the measured channel."""
    F = np.atleast_2d(np.asarray(F, dtype=float))
    H = np.atleast_2d(np.asarray(H, dtype=float))
    E, A = plant.E, plant.A
    B2, C2, D22 = plant.B2, plant.C2, plant.D22
    m, p = plant.m2, plant.p2
    A_F = A + B2 @ F
    A_H = A + H @ C2
    if not is_admissible(A_F, E):
        raise NotAdmissibleF("A + B2 F - sE is not admissible")
    if not is_admissible(A_H, E):
        raise NotAdmissibleH("A + H C2 - sE is not admissible")
    left = DescriptorRealization(
        E,
        A_H,
        np.hstack([-B2 - H @ D22, H]),
        np.vstack([F, C2]),
        np.block([[np.eye(m), np.zeros((m, p))], [-D22, np.eye(p)]]),
    )
    right = DescriptorRealization(
        E,
        A_F,
        np.hstack([B2, -H]),
        np.vstack([F, C2 + D22 @ F]),
        np.block([[np.eye(m), np.zeros((m, p))], [D22, np.eye(p)]]),
    )
    return Dcf(
        left=state_space_form(left),
        right=state_space_form(right),
        m=m,
        p=p,
        F=F,
        H=H,
    )


def bezout_residual(dcf: Dcf, grid=None) -> float:
    """Peak deviation of the two-sided factor identity from I on a grid."""
    from .norms import default_grid

    grid = default_grid() if grid is None else grid
    k = dcf.m + dcf.p
    worst = 0.0
    for w in grid:
        L = dcf.left.evaluate(1j * w)
        R = dcf.right.evaluate(1j * w)
        worst = max(worst, float(np.linalg.norm(L @ R - np.eye(k), 2)))
    return worst


def _check_invertible(V: DescriptorRealization, what: str):
    Vinv = V.inverse()
    if not is_regular_pencil(Vinv.A, Vinv.E):
        raise DegenerateQ(f"det({what}) vanishes identically")
    return Vinv


def youla_controller(dcf: Dcf, Q: DescriptorRealization, form: str = "right") -> DescriptorRealization:
    """Stabilizing controller parameterized by a stable Q.

    form="right" gives (X + M Q)(Y + N Q)^{-1}; form="left" gives
    (Y_t + Q N_t)^{-1}(X_t + Q M_t).  The two agree as transfer
    matrices.
    """
    if (Q.p, Q.m) != (dcf.m, dcf.p):
        raise DimensionMismatch(f"parameter must be {dcf.m}x{dcf.p}, got {Q.p}x{Q.m}")
    if form == "right":
        num = add(dcf.X, series(dcf.M, Q))
        den = add(dcf.Y, series(dcf.N, Q))
        return series(num, _check_invertible(den, "Y + N Q"))
    if form == "left":
        den = add(dcf.Y_t, series(Q, dcf.N_t))
        num = add(dcf.X_t, series(Q, dcf.M_t))
        return series(_check_invertible(den, "Y_t + Q N_t"), num)
    raise ValueError(f"unknown form {form!r}")


@dataclasses.dataclass(frozen=True)
class AffineClosedLoop:
    """Closed loop T1 + T2 Q T3 over the stabilizing-controller family."""

    T1: DescriptorRealization
    T2: DescriptorRealization
    T3: DescriptorRealization

    def at(self, Q: DescriptorRealization) -> DescriptorRealization:
        return add(self.T1, series(self.T2, series(Q, self.T3)))


def closed_loop_affine(plant: PartitionedPlant, dcf: Dcf) -> AffineClosedLoop:
    """Affine parameterization of the w -> z channel over all stabilizing
    controllers of the measured channel."""
    E, A = plant.E, plant.A
    F, H = dcf.F, dcf.H
    A_F = A + plant.B2 @ F
    A_H = A + H @ plant.C2
    n = A.shape[0]
    CF = plant.C1 + plant.D12 @ F
    T1 = DescriptorRealization(
        block_diag(E, E),
        np.block([[A_F, -plant.B2 @ F], [np.zeros((n, n)), A_H]]),
        np.vstack([plant.B1, plant.B1 + H @ plant.D21]),
        np.hstack([CF, -plant.D12 @ F]),
        plant.D11,
    )
    T2 = DescriptorRealization(E, A_F, plant.B2, CF, plant.D12)
    T3 = DescriptorRealization(E, A_H, plant.B1 + H @ plant.D21, plant.C2, plant.D21)
    return AffineClosedLoop(
        T1=state_space_form(minimal_realization(T1)),
        T2=state_space_form(T2),
        T3=state_space_form(T3),
    )


def diagonal_part(G: DescriptorRealization) -> DescriptorRealization:
    """diag(G_11, ..., G_kk) as one square system (state per entry)."""
    if G.p != G.m:
        raise DimensionMismatch("diagonal part requires a square transfer matrix")
    return blkdiag(*[G.output_rows([i]).input_cols([i]) for i in range(G.m)])


@dataclasses.dataclass(frozen=True)
class NrfPair:
    """Network realization (Phi, Gamma): u = Phi u + Gamma y, Phi_ii = 0."""

    Phi: DescriptorRealization
    Gamma: DescriptorRealization

    def controller(self) -> DescriptorRealization:
        """K = (I - Phi)^{-1} Gamma."""
        eye = DescriptorRealization.identity(self.Phi.m)
        return series((eye - self.Phi).inverse(), self.Gamma)


def nrf_extract(dcf: Dcf, Q: DescriptorRealization, margin: float = 1e-9) -> NrfPair:
    """Split the controller K(Q) into an internal coupling Phi and a
    measurement gain Gamma, normalizing the diagonal.

    The controller denominator and its diagonal part must stay
    invertible at infinity; that keeps both pieces proper.  Phi and
    Gamma come back assembled entry by entry, so Phi's diagonal is zero
    by construction rather than by cancellation.
    """
    V = add(dcf.Y_t, series(Q, dcf.N_t))  # m x m denominator
    W = add(dcf.X_t, series(Q, dcf.M_t))  # m x p numerator
    V = state_space_form(minimal_realization(V))
    W = state_space_form(minimal_realization(W))
    m, p = dcf.m, dcf.p
    V_inf = value_at_infinity(V)
    sv = np.linalg.svd(V_inf, compute_uv=False)
    if sv[-1] <= margin * max(1.0, sv[0]):
        raise IllPosedAtInfinity("controller denominator singular at infinity")
    d = np.abs(np.diag(V_inf))
    if d.min() <= margin * max(1.0, d.max()):
        raise DiagonalSingular("diagonal of the denominator singular at infinity")
    phi_rows: list[list[DescriptorRealization | None]] = []
    gamma_rows: list[list[DescriptorRealization | None]] = []
    for i in range(m):
        inv_i = minimal_realization(V.output_rows([i]).input_cols([i])).inverse()
        phi_rows.append(
            [
                None
                if j == i
                else minimal_realization(-series(inv_i, V.output_rows([i]).input_cols([j])))
                for j in range(m)
            ]
        )
        gamma_rows.append(
            [
                minimal_realization(series(inv_i, W.output_rows([i]).input_cols([j])))
                for j in range(p)
            ]
        )
    return NrfPair(Phi=from_scalar_entries(phi_rows), Gamma=from_scalar_entries(gamma_rows))
