"""Descriptor state-space realizations and their interconnection algebra.

A realization is the 5-tuple (E, A, B, C, D) representing the transfer
matrix C (sE - A)^{-1} B + D.  E may be singular; regularity of the
pencil A - sE is assumed (and checkable via :func:`is_regular_pencil`).

All operations return new objects; instances are immutable.
"""

from __future__ import annotations

import dataclasses
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, SingularAtPoint

__all__ = [
    "DescriptorRealization",
    "add",
    "blkdiag",
    "diag_replicate",
    "from_scalar_entries",
    "hstack",
    "series",
    "vstack",
    "is_regular_pencil",
    "lft_lower",
    "feedback_pencil",
]


def _mat(M, dtype=float) -> np.ndarray:
    arr = np.atleast_2d(np.asarray(M, dtype=dtype))
    if arr.ndim != 2:
        raise DimensionMismatch(f"expected a matrix, got shape {arr.shape}")
    return arr


@dataclasses.dataclass(frozen=True)
class DescriptorRealization:
    """Immutable descriptor system  E x' = A x + B u,  y = C x + D u."""

    E: np.ndarray
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        E, A, B, C, D = (_mat(getattr(self, f)) for f in "EABCD")
        n = A.shape[0]
        if A.shape != (n, n) or E.shape != (n, n):
            raise DimensionMismatch(f"A {A.shape} and E {E.shape} must be square of equal size")
        p, m = D.shape
        if B.shape != (n, m):
            raise DimensionMismatch(f"B has shape {B.shape}, expected ({n}, {m})")
        if C.shape != (p, n):
            raise DimensionMismatch(f"C has shape {C.shape}, expected ({p}, {n})")
        for f, v in zip("EABCD", (E, A, B, C, D)):
            v.setflags(write=False)
            object.__setattr__(self, f, v)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.D.shape[1]

    @property
    def p(self) -> int:
        return self.D.shape[0]

    @property
    def is_state_space(self) -> bool:
        return self.n == 0 or bool(np.array_equal(self.E, np.eye(self.n)))

    @classmethod
    def from_gain(cls, D) -> "DescriptorRealization":
        """Static system G(s) = D."""
        D = _mat(D)
        z = np.zeros((0, 0))
        return cls(z, z, np.zeros((0, D.shape[1])), np.zeros((D.shape[0], 0)), D)

    @classmethod
    def zeros(cls, p: int, m: int) -> "DescriptorRealization":
        return cls.from_gain(np.zeros((p, m)))

    @classmethod
    def identity(cls, k: int) -> "DescriptorRealization":
        return cls.from_gain(np.eye(k))

    def evaluate(self, s: complex) -> np.ndarray:
        """Transfer matrix value C (sE - A)^{-1} B + D at a finite point s."""
        if self.n == 0:
            return self.D.astype(complex)
        pencil = s * self.E - self.A
        try:
            X = np.linalg.solve(pencil, self.B)
        except np.linalg.LinAlgError as exc:
            raise SingularAtPoint(f"sE - A singular at s = {s}") from exc
        cond = np.linalg.cond(pencil)
        if not np.isfinite(cond) or cond > 1e13:
            raise SingularAtPoint(f"sE - A numerically singular at s = {s} (cond = {cond:.2e})")
        return self.C @ X + self.D

    def frequency_response(self, omegas: Sequence[float]) -> np.ndarray:
        """Stacked values G(j*omega) for each frequency, shape (len, p, m)."""
        return np.array([self.evaluate(1j * w) for w in omegas])

    # ---- unary algebra -------------------------------------------------

    def __neg__(self) -> "DescriptorRealization":
        return DescriptorRealization(self.E, self.A, self.B, -self.C, -self.D)

    def __mul__(self, alpha: float) -> "DescriptorRealization":
        if not np.isscalar(alpha):
            return NotImplemented
        return DescriptorRealization(self.E, self.A, self.B, alpha * self.C, alpha * self.D)

    __rmul__ = __mul__

    def transpose(self) -> "DescriptorRealization":
        """Realization of G(s)^T."""
        return DescriptorRealization(self.E.T, self.A.T, self.C.T, self.B.T, self.D.T)

    def adjoint(self) -> "DescriptorRealization":
        """Realization of G~(s) = G(-s)^T, used in all-pass/normalization checks."""
        return DescriptorRealization(self.E.T, -self.A.T, self.C.T, -self.B.T, self.D.T)

    def inverse(self) -> "DescriptorRealization":
        """Realization of G(s)^{-1} for square G, via state augmentation.

        Always formable; the result has a regular pencil iff det G(s) is
        not identically zero.
        """
        if self.m != self.p:
            raise DimensionMismatch("inverse requires a square transfer matrix")
        n, m = self.n, self.m
        E = np.block([
            [self.E, np.zeros((n, m))],
            [np.zeros((m, n)), np.zeros((m, m))],
        ])
        A = np.block([[self.A, self.B], [self.C, self.D]])
        B = np.vstack([np.zeros((n, m)), -np.eye(m)])
        C = np.hstack([np.zeros((m, n)), np.eye(m)])
        return DescriptorRealization(E, A, B, C, np.zeros((m, m)))

    # ---- block selection -----------------------------------------------

    def output_rows(self, rows) -> "DescriptorRealization":
        rows = np.atleast_1d(rows)
        return DescriptorRealization(self.E, self.A, self.B, self.C[rows, :], self.D[rows, :])

    def input_cols(self, cols) -> "DescriptorRealization":
        cols = np.atleast_1d(cols)
        return DescriptorRealization(self.E, self.A, self.B[:, cols], self.C, self.D[:, cols])

    def __add__(self, other) -> "DescriptorRealization":
        return add(self, other)

    def __sub__(self, other) -> "DescriptorRealization":
        return add(self, -_coerce(other, self.p, self.m))

    def __matmul__(self, other) -> "DescriptorRealization":
        return series(self, other)


def _coerce(G, p: int, m: int) -> DescriptorRealization:
    if isinstance(G, DescriptorRealization):
        return G
    arr = np.asarray(G, dtype=float)
    if arr.ndim == 0:
        if p != m:
            raise DimensionMismatch("scalar coerces to identity gain only for square shape")
        return DescriptorRealization.from_gain(float(arr) * np.eye(p))
    return DescriptorRealization.from_gain(arr)


def add(G1: DescriptorRealization, G2) -> DescriptorRealization:
    """Parallel interconnection G1 + G2."""
    G2 = _coerce(G2, G1.p, G1.m)
    if (G1.p, G1.m) != (G2.p, G2.m):
        raise DimensionMismatch(f"add: {G1.p}x{G1.m} vs {G2.p}x{G2.m}")
    from scipy.linalg import block_diag

    return DescriptorRealization(
        block_diag(G1.E, G2.E),
        block_diag(G1.A, G2.A),
        np.vstack([G1.B, G2.B]),
        np.hstack([G1.C, G2.C]),
        G1.D + G2.D,
    )


def series(G1: DescriptorRealization, G2) -> DescriptorRealization:
    """Cascade G1 G2, i.e. y = G1(G2(u))."""
    G2 = _coerce(G2, G1.m, G1.m)
    if G1.m != G2.p:
        raise DimensionMismatch(f"series: inner output {G2.p} != outer input {G1.m}")
    from scipy.linalg import block_diag

    n1, n2 = G1.n, G2.n
    A = np.block([
        [G1.A, G1.B @ G2.C],
        [np.zeros((n2, n1)), G2.A],
    ])
    return DescriptorRealization(
        block_diag(G1.E, G2.E),
        A,
        np.vstack([G1.B @ G2.D, G2.B]),
        np.hstack([G1.C, G1.D @ G2.C]),
        G1.D @ G2.D,
    )


def hstack(*blocks: DescriptorRealization) -> DescriptorRealization:
    """Row of systems [G1 G2 ...] sharing the output space."""
    p = blocks[0].p
    if any(G.p != p for G in blocks):
        raise DimensionMismatch("hstack blocks must share the output dimension")
    from scipy.linalg import block_diag

    return DescriptorRealization(
        block_diag(*(G.E for G in blocks)),
        block_diag(*(G.A for G in blocks)),
        block_diag(*(G.B for G in blocks)),
        np.hstack([G.C for G in blocks]),
        np.hstack([G.D for G in blocks]),
    )


def vstack(*blocks: DescriptorRealization) -> DescriptorRealization:
    """Column of systems [G1; G2; ...] sharing the input space."""
    m = blocks[0].m
    if any(G.m != m for G in blocks):
        raise DimensionMismatch("vstack blocks must share the input dimension")
    from scipy.linalg import block_diag

    return DescriptorRealization(
        block_diag(*(G.E for G in blocks)),
        block_diag(*(G.A for G in blocks)),
        np.vstack([G.B for G in blocks]),
        block_diag(*(G.C for G in blocks)),
        np.vstack([G.D for G in blocks]),
    )


def blkdiag(*blocks: DescriptorRealization) -> DescriptorRealization:
    """Block-diagonal system diag(G1, G2, ...)."""
    from scipy.linalg import block_diag

    return DescriptorRealization(
        block_diag(*(G.E for G in blocks)),
        block_diag(*(G.A for G in blocks)),
        block_diag(*(G.B for G in blocks)),
        block_diag(*(G.C for G in blocks)),
        block_diag(*(G.D for G in blocks)),
    )


def diag_replicate(G: DescriptorRealization, count: int) -> DescriptorRealization:
    """diag(G, ..., G) with `count` copies."""
    return blkdiag(*([G] * count))


def from_scalar_entries(entries) -> DescriptorRealization:
    """Assemble a p x m system from a grid of SISO realizations.

    entries[i][j] is the (i, j) entry; None marks an entry that is zero
    by construction (no state, no feedthrough), so the assembled system
    is exactly zero there, not merely small.
    """
    p = len(entries)
    m = len(entries[0])
    placed: list[tuple[int, int, DescriptorRealization]] = []
    for i in range(p):
        if len(entries[i]) != m:
            raise DimensionMismatch("entry grid is ragged")
        for j, G in enumerate(entries[i]):
            if G is None:
                continue
            if (G.p, G.m) != (1, 1):
                raise DimensionMismatch(f"entry ({i}, {j}) is {G.p}x{G.m}, expected scalar")
            placed.append((i, j, G))
    n = sum(G.n for _, _, G in placed)
    E = np.zeros((n, n))
    A = np.zeros((n, n))
    B = np.zeros((n, m))
    C = np.zeros((p, n))
    D = np.zeros((p, m))
    k = 0
    for i, j, G in placed:
        sl = slice(k, k + G.n)
        E[sl, sl] = G.E
        A[sl, sl] = G.A
        B[sl, j] = G.B[:, 0]
        C[i, sl] = G.C[0, :]
        D[i, j] += G.D[0, 0]
        k += G.n
    return DescriptorRealization(E, A, B, C, D)


def is_regular_pencil(A: np.ndarray, E: np.ndarray, rng=None, samples: int | None = None) -> bool:
    """Random-point determinant test for det(A - sE) not identically zero."""
    A = _mat(A)
    E = _mat(E)
    n = A.shape[0]
    if n == 0:
        return True
    rng = np.random.default_rng(0 if rng is None else rng)
    pts = samples if samples is not None else n + 2
    scale = max(np.linalg.norm(A, ord="fro"), np.linalg.norm(E, ord="fro"), 1.0)
    for _ in range(pts):
        s = complex(rng.standard_normal(), rng.standard_normal()) * 3.0
        sv = np.linalg.svd(A - s * E, compute_uv=False)
        if sv[-1] > 1e-10 * scale:
            return True
    return False


def feedback_pencil(
    G: DescriptorRealization,
    K: DescriptorRealization,
    m2: int | None = None,
    p2: int | None = None,
):
    """Closed-loop pencil (E_cl, A_cl) of the loop u2 = K y2 around the
    trailing (p2, m2) channel of G, with the algebraic loop kept as
    explicit constraint variables (no feedthrough inversion).

    Returns (E_cl, A_cl, B_cl, C_cl, D_cl) matrices of the map from the
    leading inputs w to the leading outputs z.
    """
    p2 = K.m if p2 is None else p2
    m2 = K.p if m2 is None else m2
    if p2 > G.p or m2 > G.m:
        raise DimensionMismatch("partition exceeds plant dimensions")
    p1, m1 = G.p - p2, G.m - m2
    B1, B2 = G.B[:, :m1], G.B[:, m1:]
    C1, C2 = G.C[:p1, :], G.C[p1:, :]
    D11, D12 = G.D[:p1, :m1], G.D[:p1, m1:]
    D21, D22 = G.D[p1:, :m1], G.D[p1:, m1:]
    n, nk = G.n, K.n
    from scipy.linalg import block_diag

    # States [x, xK, u2, y2]; the last two rows are algebraic constraints
    #   0 = C2 x + D22 u2 - y2 + D21 w
    #   0 = CK xK + DK y2 - u2
    E_cl = block_diag(G.E, K.E, np.zeros((m2 + p2, m2 + p2)))
    A_cl = np.block([
        [G.A, np.zeros((n, nk)), B2, np.zeros((n, p2))],
        [np.zeros((nk, n)), K.A, np.zeros((nk, m2)), K.B],
        [C2, np.zeros((p2, nk)), D22, -np.eye(p2)],
        [np.zeros((m2, n)), K.C, -np.eye(m2), K.D],
    ])
    B_cl = np.vstack([B1, np.zeros((nk, m1)), D21, np.zeros((m2, m1))])
    C_cl = np.hstack([C1, np.zeros((p1, nk)), D12, np.zeros((p1, p2))])
    return E_cl, A_cl, B_cl, C_cl, D11


def lft_lower(
    G: DescriptorRealization,
    K: DescriptorRealization,
    m2: int | None = None,
    p2: int | None = None,
) -> DescriptorRealization:
    """Lower linear fractional transformation G11 + G12 K (I - G22 K)^{-1} G21.

    The plant is partitioned so its last `m2` inputs close against K's
    outputs and its last `p2` outputs feed K's inputs; both default to
    K's shape.  The loop is kept algebraic, so no feedthrough matrix is
    inverted and improper/ill-posed loops surface through the pencil.
    """
    E_cl, A_cl, B_cl, C_cl, D_cl = feedback_pencil(G, K, m2=m2, p2=p2)
    if not is_regular_pencil(A_cl, E_cl):
        from .errors import IllPosed

        raise IllPosed("closed-loop pencil is singular: det(I - G22 K) vanishes identically")
    return DescriptorRealization(E_cl, A_cl, B_cl, C_cl, D_cl)
