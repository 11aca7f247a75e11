"""System norms: H-infinity (Hamiltonian bisection) and Hankel.

hinf_norm follows the two-step level-set scheme: test a level gamma by
checking the Hamiltonian for imaginary-axis eigenvalues, then push the
lower bound up using the gains at the midpoints of consecutive
crossings.  A dense-grid scan backs it up when the Hamiltonian form is
ill-conditioned.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .errors import Unstable
from .pencil import minimal_realization, pencil_spectrum
from .realization import DescriptorRealization

__all__ = ["default_grid", "hinf_norm", "hankel_singular_values", "linf_gain_on_grid"]


def default_grid(num: int = 400) -> np.ndarray:
    """Logarithmic frequency grid covering the dynamics handled here."""
    return np.logspace(-4.0, 4.0, num)


def _stable_state_space(G: DescriptorRealization, tol: float):
    """Minimal E = I form of a stable proper system, or raise Unstable."""
    Gm = minimal_realization(G, tol=max(tol, 1e-12))
    if Gm.n == 0:
        return Gm
    spec = pencil_spectrum(Gm.A, Gm.E)
    if spec.infinite_multiplicities:
        raise Unstable("system is improper, H-infinity norm undefined")
    if not spec.stable():
        raise Unstable(f"poles in the closed right half-plane: {spec.finite[spec.finite.real >= 0]}")
    return Gm


def _sigma_max(G: DescriptorRealization, w: float) -> float:
    return float(np.linalg.svd(G.evaluate(1j * w), compute_uv=False)[0]) if G.m and G.p else 0.0


def _hamiltonian(A, B, C, D, gamma: float) -> np.ndarray:
    m = B.shape[1]
    R = gamma * gamma * np.eye(m) - D.T @ D
    Rinv = np.linalg.inv(R)
    BRi = B @ Rinv
    return np.block([
        [A + BRi @ D.T @ C, BRi @ B.T],
        [-C.T @ (np.eye(D.shape[0]) + D @ Rinv @ D.T) @ C, -(A + BRi @ D.T @ C).T],
    ])


def _imaginary_eigs(H: np.ndarray, scale: float) -> np.ndarray:
    ev = np.linalg.eigvals(H)
    on_axis = ev[np.abs(ev.real) <= 1e-7 * max(1.0, scale)]
    return np.unique(np.round(np.abs(on_axis.imag), 9))


def hinf_norm(G: DescriptorRealization, tol: float = 1e-6) -> float:
    """Peak gain sup_w sigma_max(G(jw)) of a stable proper system."""
    Gm = _stable_state_space(G, tol=1e-9)
    if Gm.m == 0 or Gm.p == 0:
        return 0.0
    if Gm.n == 0:
        return float(np.linalg.svd(Gm.D, compute_uv=False)[0])
    A, B, C, D = Gm.A, Gm.B, Gm.C, Gm.D

    grid = np.concatenate([[0.0], default_grid(120)])
    lb = max(_sigma_max(Gm, w) for w in grid)
    lb = max(lb, float(np.linalg.svd(D, compute_uv=False)[0]))
    if lb == 0.0:
        return 0.0
    scale = np.linalg.norm(A, 2)

    for _ in range(60):
        gamma = lb * (1.0 + 2.0 * tol)
        try:
            H = _hamiltonian(A, B, C, D, gamma)
        except np.linalg.LinAlgError:
            return _grid_fallback(Gm, lb, tol)
        omegas = _imaginary_eigs(H, scale)
        omegas = omegas[omegas > 0]
        if omegas.size == 0:
            return lb * (1.0 + tol)
        mids = np.sqrt(omegas[:-1] * omegas[1:]) if omegas.size > 1 else np.array([])
        cand = np.concatenate([omegas, mids, [omegas[0] / 2, omegas[-1] * 2]])
        new_lb = max(_sigma_max(Gm, w) for w in cand)
        if new_lb <= lb * (1.0 + tol / 10):
            # level sits on a flat spot (all-pass direction); accept
            return lb * (1.0 + tol)
        lb = new_lb
    return _grid_fallback(Gm, lb, tol)


def _grid_fallback(Gm: DescriptorRealization, lb: float, tol: float) -> float:
    grid = np.concatenate([[0.0], default_grid(4000)])
    vals = np.array([_sigma_max(Gm, w) for w in grid])
    k = int(np.argmax(vals))
    lo = grid[max(k - 1, 0)]
    hi = grid[min(k + 1, len(grid) - 1)]
    if lo == 0.0:
        lo = 1e-8
    if hi <= lo:
        hi = lo * 10
    fine = np.geomspace(lo, hi, 200)
    peak = max(float(v) for v in [vals[k]] + [_sigma_max(Gm, w) for w in fine])
    return max(peak, lb)


def hankel_singular_values(G: DescriptorRealization, tol: float = 1e-9) -> np.ndarray:
    """Hankel singular values of the strictly proper part of a stable system."""
    Gm = _stable_state_space(G, tol)
    if Gm.n == 0:
        return np.zeros(0)
    A, B, C = Gm.A, Gm.B, Gm.C
    P = scipy.linalg.solve_continuous_lyapunov(A, -B @ B.T)
    Q = scipy.linalg.solve_continuous_lyapunov(A.T, -C.T @ C)
    ev = np.linalg.eigvals(P @ Q)
    ev = np.clip(ev.real, 0.0, None)
    return np.sqrt(np.sort(ev)[::-1])


def linf_gain_on_grid(G: DescriptorRealization, grid=None) -> float:
    """Cheap lower bound of the peak gain, no stability requirement."""
    grid = default_grid() if grid is None else grid
    return max(float(np.linalg.svd(G.evaluate(1j * w), compute_uv=False)[0]) for w in grid)
