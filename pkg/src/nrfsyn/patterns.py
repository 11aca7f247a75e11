"""Binary sparsity patterns and the vectorization toolkit behind them.

A pattern P marks which transfer-matrix entries are allowed to be
nonzero.  Membership of G in the induced set is the identity
(I - diag(vec P)) vec G(s) = 0, with vec the column-major stacking.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .errors import DimensionMismatch
from .realization import DescriptorRealization

__all__ = [
    "SparsityPattern",
    "vec",
    "unvec",
    "kron_with_identity",
    "pattern_membership",
]


def vec(M: np.ndarray) -> np.ndarray:
    """Column-major stacking of a matrix into a vector."""
    return np.asarray(M).flatten(order="F")


def unvec(v: np.ndarray, p: int, m: int) -> np.ndarray:
    return np.asarray(v).reshape((p, m), order="F")


@dataclasses.dataclass(frozen=True)
class SparsityPattern:
    """Binary p x m matrix of allowed entries."""

    entries: np.ndarray

    def __post_init__(self):
        arr = np.atleast_2d(np.asarray(self.entries))
        if not np.isin(arr, (0, 1)).all():
            raise DimensionMismatch("pattern entries must be 0 or 1")
        arr = arr.astype(int)
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape

    @classmethod
    def identity(cls, k: int) -> "SparsityPattern":
        return cls(np.eye(k, dtype=int))

    @classmethod
    def full(cls, p: int, m: int) -> "SparsityPattern":
        return cls(np.ones((p, m), dtype=int))

    def has_unit_diagonal(self) -> bool:
        arr = self.entries
        k = min(arr.shape)
        return bool(np.all(np.diag(arr)[:k] == 1))

    def has_zero_diagonal(self) -> bool:
        arr = self.entries
        k = min(arr.shape)
        return bool(np.all(np.diag(arr)[:k] == 0))

    def without_diagonal(self) -> "SparsityPattern":
        arr = self.entries.copy()
        np.fill_diagonal(arr, 0)
        return SparsityPattern(arr)

    def forbidden_positions(self) -> np.ndarray:
        """Indices into vec(G) where the entry must vanish."""
        return np.flatnonzero(vec(self.entries) == 0)

    def mask_matrix(self) -> np.ndarray:
        """I - diag(vec P): selector of the forbidden entries."""
        v = vec(self.entries)
        return np.eye(v.size) - np.diag(v.astype(float))


def kron_with_identity(G: DescriptorRealization, k: int) -> DescriptorRealization:
    """Realization of G(s) kron I_k."""
    Ik = np.eye(k)
    return DescriptorRealization(
        np.kron(G.E, Ik),
        np.kron(G.A, Ik),
        np.kron(G.B, Ik),
        np.kron(G.C, Ik),
        np.kron(G.D, Ik),
    )


def pattern_membership(
    G: DescriptorRealization,
    P: SparsityPattern,
    tol: float = 1e-9,
    rng=None,
) -> bool:
    """True iff every forbidden entry of G is identically zero.

    Tested at n + 1 random points off the pole set; a handful of
    structural shortcuts (zero rows/columns of the realization) decide
    exact zeros without evaluation.
    """
    if (G.p, G.m) != P.shape:
        raise DimensionMismatch(f"pattern {P.shape} does not match system {G.p}x{G.m}")
    forbidden = np.argwhere(P.entries == 0)
    if forbidden.size == 0:
        return True
    # structural: output row i decoupled when C[i] = 0, input col j when B[:, j] = 0
    zero_rows = ~np.any(G.C, axis=1)
    zero_cols = ~np.any(G.B, axis=0)
    undecided = [
        (i, j)
        for i, j in forbidden
        if G.D[i, j] != 0.0 or not (zero_rows[i] or zero_cols[j])
    ]
    if not undecided:
        return True
    rng = np.random.default_rng(12345 if rng is None else rng)
    for _ in range(G.n + 1):
        s = complex(abs(rng.standard_normal()) + 0.3, 2.0 * rng.standard_normal())
        val = G.evaluate(s)
        scale = max(1.0, float(np.abs(val).max()))
        for i, j in undecided:
            if abs(val[i, j]) > tol * scale:
                return False
    return True
