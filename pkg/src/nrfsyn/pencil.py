"""Pencil eigenstructure, admissibility, and realization reduction.

The workhorse is the shifted-inverse form: for a regular pencil A - sE
pick a point s0 with A - s0*E invertible and form W = (A - s0 E)^{-1} E.
Finite eigenvalues lam of the pencil map to nonzero eigenvalues
mu = 1/(lam - s0) of W, and the infinite eigenvalue maps to mu = 0 with
the same partial multiplicities.  This turns every structural question
(spectrum, impulsive modes, minimality) into ordinary matrix algebra.
"""

from __future__ import annotations

import dataclasses

import numpy as np
import scipy.linalg

from .errors import DimensionMismatch, IllPosed, ImproperAtInfinity, NotAdmissible, SingularPencil
from .realization import DescriptorRealization, is_regular_pencil

__all__ = [
    "PencilSpectrum",
    "pencil_spectrum",
    "is_admissible",
    "is_strongly_stabilizable",
    "residualize",
    "state_space_form",
    "minimal_realization",
    "value_at_infinity",
    "is_proper",
    "loop_realization",
    "is_internally_stable",
]

_DEFAULT_TOL = 1e-9


def _shift_point(A: np.ndarray, E: np.ndarray) -> tuple[float, np.ndarray]:
    """Real shift s0 with A - s0*E comfortably invertible, plus the LU-ready matrix."""
    scale = max(np.linalg.norm(A, 2), np.linalg.norm(E, 2), 1.0)
    best = None
    for s0 in (0.0, 1.0, -1.0, 3.14159, -2.71828, 17.0, -23.0, 101.0, -353.0):
        P = A - s0 * E
        smin = np.linalg.svd(P, compute_uv=False)[-1] if P.size else 1.0
        if best is None or smin > best[1]:
            best = (s0, smin, P)
        if smin > 1e-3 * scale:
            return s0, P
    s0, smin, P = best
    if smin <= 1e-12 * scale:
        raise SingularPencil("could not find a regular point of A - sE")
    return s0, P


def _rank(M: np.ndarray, tol_abs: float) -> int:
    if M.size == 0:
        return 0
    sv = np.linalg.svd(M, compute_uv=False)
    return int(np.sum(sv > tol_abs))


def _zero_jordan_sizes(N: np.ndarray, tol_abs: float) -> list[int]:
    """Partial multiplicities of the eigenvalue 0 of a nilpotent block."""
    k = N.shape[0]
    if k == 0:
        return []
    ge = [k]  # ge[j-1] = number of blocks of size >= j
    Nj = np.eye(k)
    r_prev = k
    for _ in range(k):
        Nj = Nj @ N
        r = _rank(Nj, tol_abs)
        ge.append(r_prev - r)
        r_prev = r
        if r == 0:
            break
    ge = ge[1:]
    sizes: list[int] = []
    for j in range(len(ge), 0, -1):
        exactly = ge[j - 1] - (ge[j] if j < len(ge) else 0)
        sizes.extend([j] * exactly)
    return sorted(sizes, reverse=True)


@dataclasses.dataclass(frozen=True)
class PencilSpectrum:
    """Generalized eigenvalues of a regular pencil A - sE."""

    finite: np.ndarray  # complex finite eigenvalues, with multiplicity
    infinite_multiplicities: tuple[int, ...]  # partial multiplicities of s = infinity

    @property
    def total(self) -> int:
        return len(self.finite) + sum(self.infinite_multiplicities)

    @property
    def impulsive(self) -> bool:
        return any(k >= 2 for k in self.infinite_multiplicities)

    def stable(self, margin: float = 0.0) -> bool:
        return bool(np.all(self.finite.real < -margin))


def pencil_spectrum(A, E, tol: float = _DEFAULT_TOL) -> PencilSpectrum:
    """Finite spectrum and infinite partial multiplicities of A - sE."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    E = np.atleast_2d(np.asarray(E, dtype=float))
    n = A.shape[0]
    if n == 0:
        return PencilSpectrum(np.array([], dtype=complex), ())
    if not is_regular_pencil(A, E):
        raise SingularPencil("det(A - sE) is identically zero")
    s0, P = _shift_point(A, E)
    W = np.linalg.solve(P, E)
    wscale = max(1.0, np.linalg.norm(W, 2))
    ztol = tol * wscale * 10.0
    mu = np.linalg.eigvals(W)
    finite = np.array([s0 + 1.0 / m for m in mu if abs(m) >= ztol])
    n_inf = n - len(finite)
    if n_inf == 0:
        return PencilSpectrum(finite, ())
    # Nilpotent cluster via ordered real Schur form, zero eigenvalues leading
    T, _, sdim = scipy.linalg.schur(W, output="real", sort=lambda re, im: np.hypot(re, im) < ztol)
    if sdim != n_inf:
        # borderline cluster split; fall back to the eigenvalue count
        sdim = n_inf
    N = T[:sdim, :sdim]
    sizes = _zero_jordan_sizes(N, tol * wscale)
    if sum(sizes) != n_inf:  # rank tolerance disagreed with the eigenvalue count
        sizes = _zero_jordan_sizes(N, 10 * tol * wscale)
    return PencilSpectrum(finite, tuple(sizes))


def is_admissible(A, E, tol: float = _DEFAULT_TOL) -> bool:
    """Regular pencil, stable finite spectrum, no impulsive modes."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    E = np.atleast_2d(np.asarray(E, dtype=float))
    if A.shape[0] == 0:
        return True
    if not is_regular_pencil(A, E):
        return False
    spec = pencil_spectrum(A, E, tol=tol)
    return spec.stable() and not spec.impulsive


def _kernel_basis_of(E: np.ndarray, tol_abs: float) -> np.ndarray:
    """Orthonormal basis of Ker E (columns)."""
    n = E.shape[0]
    if n == 0:
        return np.zeros((0, 0))
    U, sv, Vt = np.linalg.svd(E)
    r = int(np.sum(sv > tol_abs))
    return Vt[r:, :].T


def is_strongly_stabilizable(
    G: DescriptorRealization, dual: bool = False, tol: float = _DEFAULT_TOL
) -> bool:
    """Existence test for admissibility-inducing feedback.

    Checks rank [A - sE, B] = n at every finite eigenvalue with
    Re s >= 0 and rank [E, A S_inf, B] = n where S_inf spans Ker E.
    With dual=True the test runs on (A^T, E^T, C^T), i.e. detectability.
    """
    if dual:
        A, E, B = G.A.T, G.E.T, G.C.T
    else:
        A, E, B = G.A, G.E, G.B
    n = A.shape[0]
    if n == 0:
        return True
    spec = pencil_spectrum(A, E, tol=tol)  # raises SingularPencil if irregular
    scale = max(np.linalg.norm(A, 2), np.linalg.norm(E, 2), np.linalg.norm(B, 2), 1.0)
    tol_abs = tol * scale * 100.0
    for lam in spec.finite:
        if lam.real >= -tol:
            if _rank(np.hstack([A - lam * E, B]), tol_abs) < n:
                return False
    S_inf = _kernel_basis_of(E, tol * max(1.0, np.linalg.norm(E, 2)))
    return _rank(np.hstack([E, A @ S_inf, B]), tol_abs) == n


def _svd_coordinates(G: DescriptorRealization, tol: float):
    """Orthogonal change of coordinates putting E into diag(Sigma_r, 0)."""
    U, sv, Vt = np.linalg.svd(G.E)
    r = int(np.sum(sv > tol * max(1.0, sv[0] if sv.size else 0.0)))
    A = U.T @ G.A @ Vt.T
    B = U.T @ G.B
    C = G.C @ Vt.T
    return r, sv[:r], A, B, C


def _eliminate_algebraic(G: DescriptorRealization, tol: float = _DEFAULT_TOL):
    """Fold the algebraic (non-dynamic) variables of an impulse-free system.

    Returns (A_red, B_red, C_red, D_red) with E = I implied, or None when
    the algebraic block is singular (impulsive modes present).
    """
    if G.n == 0:
        return np.zeros((0, 0)), np.zeros((0, G.m)), np.zeros((G.p, 0)), G.D.copy()
    r, sig, A, B, C = _svd_coordinates(G, tol)
    A11, A12 = A[:r, :r], A[:r, r:]
    A21, A22 = A[r:, :r], A[r:, r:]
    B1, B2 = B[:r, :], B[r:, :]
    C1, C2 = C[:, :r], C[:, r:]
    k = G.n - r
    if k:
        sv22 = np.linalg.svd(A22, compute_uv=False)
        if sv22[-1] <= tol * max(1.0, sv22[0]):
            return None
        X = np.linalg.solve(A22, np.hstack([A21, B2]))
        XA, XB = X[:, :r], X[:, r:]
    else:
        XA, XB = np.zeros((0, r)), np.zeros((0, G.m))
    inv_sig = 1.0 / sig
    A_red = inv_sig[:, None] * (A11 - A12 @ XA)
    B_red = inv_sig[:, None] * (B1 - A12 @ XB)
    C_red = C1 - C2 @ XA
    D_red = G.D - C2 @ XB
    return A_red, B_red, C_red, D_red


def residualize(G: DescriptorRealization, tol: float = _DEFAULT_TOL) -> DescriptorRealization:
    """State-space (E = I) realization of an admissible descriptor system."""
    if not is_admissible(G.A, G.E, tol=tol):
        raise NotAdmissible("residualization requires an admissible pencil")
    out = _eliminate_algebraic(G, tol)
    if out is None:
        raise NotAdmissible("algebraic block is singular despite admissibility verdict")
    A, B, C, D = out
    return DescriptorRealization(np.eye(A.shape[0]), A, B, C, D)


def state_space_form(G: DescriptorRealization, tol: float = _DEFAULT_TOL) -> DescriptorRealization:
    """E = I realization of a proper system; stability is not required.

    Tolerates non-minimal impulsive modes (they are stripped first);
    raises ImproperAtInfinity when the transfer genuinely grows at
    infinity.
    """
    if G.is_state_space:
        return G
    out = _eliminate_algebraic(G, tol)
    if out is None:
        Gm = minimal_realization(G, tol)
        if Gm.is_state_space:
            return Gm
        out = _eliminate_algebraic(Gm, tol)
        if out is None:
            raise ImproperAtInfinity("no state-space form: polynomial part present")
    A, B, C, D = out
    return DescriptorRealization(np.eye(A.shape[0]), A, B, C, D)


def _orth_cols(M: np.ndarray, tol_abs: float) -> np.ndarray:
    if M.size == 0:
        return np.zeros((M.shape[0], 0))
    U, sv, _ = np.linalg.svd(M, full_matrices=False)
    return U[:, sv > tol_abs]


def _krylov_basis(W: np.ndarray, M: np.ndarray, tol_abs: float) -> np.ndarray:
    """Orthonormal basis of the smallest W-invariant subspace containing range M."""
    n = W.shape[0]
    Q = _orth_cols(M, tol_abs)
    while 0 < Q.shape[1] < n:
        R = W @ Q
        R -= Q @ (Q.T @ R)
        R -= Q @ (Q.T @ R)
        R = _orth_cols(R, tol_abs)
        if R.shape[1] == 0:
            break
        Q = np.hstack([Q, R])
    return Q


def _trim_pair(W, M, C, tol_abs):
    """Remove pair-uncontrollable, then pair-unobservable directions."""
    V = _krylov_basis(W, M, tol_abs)
    W, M, C = V.T @ W @ V, V.T @ M, C @ V
    V = _krylov_basis(W.T, C.T, tol_abs)
    return V.T @ W @ V, V.T @ M, C @ V


def minimal_realization(
    G: DescriptorRealization, tol: float = _DEFAULT_TOL
) -> DescriptorRealization:
    """Remove hidden finite and infinite modes; transfer matrix preserved.

    The finite part comes out in state-space form; a nonzero polynomial
    part is kept as a trailing nilpotent descriptor block.  Non-dynamic
    modes are folded into the feedthrough.
    """
    if G.n == 0:
        return G
    if not is_regular_pencil(G.A, G.E):
        raise SingularPencil("minimal realization requires a regular pencil")

    if G.is_state_space:
        tol_abs = tol * max(
            1.0, np.linalg.norm(G.A, 2), np.linalg.norm(G.B, 2), np.linalg.norm(G.C, 2)
        )
        A, B, C = _trim_pair(G.A, G.B, G.C, tol_abs)
        return DescriptorRealization(np.eye(A.shape[0]), A, B, C, G.D)

    s0, P = _shift_point(G.A, G.E)
    W = np.linalg.solve(P, G.E)
    M = np.linalg.solve(P, G.B)
    wscale = max(1.0, np.linalg.norm(W, 2), np.linalg.norm(M, 2), np.linalg.norm(G.C, 2))
    tol_abs = tol * wscale
    W, M, C = _trim_pair(W, M, G.C, tol_abs)
    n = W.shape[0]
    if n == 0:
        return DescriptorRealization.from_gain(G.D)

    ztol = 10.0 * tol * max(1.0, np.linalg.norm(W, 2))
    T, Zs, sdim = scipy.linalg.schur(W, output="real", sort=lambda re, im: np.hypot(re, im) < ztol)
    if sdim == 0:
        # E was invertible in disguise: pure finite dynamics
        Winv = np.linalg.inv(W)
        return DescriptorRealization(np.eye(n), Winv + s0 * np.eye(n), Winv @ M, C, G.D)
    T11, T12, T22 = T[:sdim, :sdim], T[:sdim, sdim:], T[sdim:, sdim:]
    if sdim < n:
        X = scipy.linalg.solve_sylvester(T11, -T22, -T12)
    else:
        X = np.zeros((sdim, 0))
    # right transform V = Z [[I, X],[0, I]], left inverse applies [[I, -X],[0, I]] Z^T
    Mt = Zs.T @ M
    Mt[:sdim, :] -= X @ Mt[sdim:, :]
    Ct = C @ Zs
    Ct_nil = Ct[:, :sdim]
    Ct_fin = Ct[:, sdim:] + Ct[:, :sdim] @ X

    N, M_nil = T11, Mt[:sdim, :]
    W_fin, M_fin = T22, Mt[sdim:, :]

    D = G.D.copy()
    blocks_E, blocks_A, Bs, Cs = [], [], [], []

    if sdim < n:
        Winv = np.linalg.inv(W_fin)
        blocks_E.append(np.eye(n - sdim))
        blocks_A.append(Winv + s0 * np.eye(n - sdim))
        Bs.append(Winv @ M_fin)
        Cs.append(Ct_fin)

    # nilpotent block: C (zN - I)^{-1} M = -sum_j z^j C N^j M, z = s - s0
    D -= Ct_nil @ M_nil
    markov = []
    Nj = np.eye(sdim)
    poly_scale = max(1.0, np.linalg.norm(Ct_nil, 2) * np.linalg.norm(M_nil, 2))
    for _ in range(sdim):
        Nj = Nj @ N
        markov.append(Ct_nil @ Nj @ M_nil)
    if any(np.linalg.norm(Mk, 2) > tol * poly_scale * 100 for Mk in markov):
        # genuine polynomial part: keep the (already pair-trimmed) nilpotent block
        blocks_E.append(N)
        blocks_A.append(np.eye(sdim) + s0 * N)
        Bs.append(M_nil)
        Cs.append(Ct_nil)
        D += Ct_nil @ M_nil  # undo the fold, the block carries its own constant

    if not blocks_E:
        return DescriptorRealization.from_gain(D)
    E_out = scipy.linalg.block_diag(*blocks_E)
    A_out = scipy.linalg.block_diag(*blocks_A)
    return DescriptorRealization(E_out, A_out, np.vstack(Bs), np.hstack(Cs), D)


def loop_realization(G22: DescriptorRealization, K: DescriptorRealization) -> DescriptorRealization:
    """Map (w1, w2) -> (u, y) for the loop u = K y + w1, y = G22 u + w2.

    The algebraic loop stays explicit, so well-posedness shows up as
    pencil regularity instead of a feedthrough inversion.
    """
    if K.m != G22.p or K.p != G22.m:
        raise DimensionMismatch(f"loop shapes: G22 is {G22.p}x{G22.m}, K is {K.p}x{K.m}")
    m, p = G22.m, G22.p
    ng, nk = G22.n, K.n
    E = scipy.linalg.block_diag(G22.E, K.E, np.zeros((m + p, m + p)))
    A = np.block([
        [G22.A, np.zeros((ng, nk)), G22.B, np.zeros((ng, p))],
        [np.zeros((nk, ng)), K.A, np.zeros((nk, m)), K.B],
        [np.zeros((m, ng)), K.C, -np.eye(m), K.D],
        [G22.C, np.zeros((p, nk)), G22.D, -np.eye(p)],
    ])
    B = np.vstack([
        np.zeros((ng + nk, m + p)),
        np.hstack([np.eye(m), np.zeros((m, p))]),
        np.hstack([np.zeros((p, m)), np.eye(p)]),
    ])
    C = np.hstack([np.zeros((m + p, ng + nk)), np.eye(m + p)])
    return DescriptorRealization(E, A, B, C, np.zeros((m + p, m + p)))


def is_internally_stable(
    G22: DescriptorRealization, K: DescriptorRealization, tol: float = _DEFAULT_TOL
) -> bool:
    """All four loop transfers (w1, w2) -> (u, y) stable and proper."""
    loop = loop_realization(G22, K)
    if not is_regular_pencil(loop.A, loop.E):
        raise IllPosed("feedback loop is ill-posed")
    loop_min = minimal_realization(loop, tol)
    return is_admissible(loop_min.A, loop_min.E, tol)


def value_at_infinity(G: DescriptorRealization, tol: float = _DEFAULT_TOL) -> np.ndarray:
    """G(inf) for proper systems; raises ImproperAtInfinity otherwise."""
    if G.n == 0:
        return G.D.copy()
    sv = np.linalg.svd(G.E, compute_uv=False)
    if sv[-1] > tol * max(1.0, sv[0]):
        return G.D.copy()
    out = _eliminate_algebraic(G, tol)
    if out is not None:
        return out[3]
    Gm = minimal_realization(G, tol)
    if Gm.n == 0:
        return Gm.D.copy()
    out = _eliminate_algebraic(Gm, tol)
    if out is None:
        raise ImproperAtInfinity("transfer matrix has a polynomial part")
    return out[3]


def is_proper(G: DescriptorRealization, tol: float = _DEFAULT_TOL) -> bool:
    try:
        value_at_infinity(G, tol)
        return True
    except ImproperAtInfinity:
        return False
