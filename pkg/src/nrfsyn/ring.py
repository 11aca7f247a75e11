"""Ring-network example: identical single-input subsystems passing their
outputs around a cycle, plus the static-shift approximant used to design
one scalar law that every node runs.

All constants live in one spec object so tests and the pipeline agree on
the exact numbers.  Matrices named here follow the convention that
``shift_matrix(ell)`` sends coordinate i to coordinate i+1 cyclically.
"""

import dataclasses

import numpy as np

from .errors import DimensionMismatch, NotAdmissibleF, NotAdmissibleH
from .patterns import SparsityPattern
from .pencil import is_admissible, is_strongly_stabilizable
from .realization import DescriptorRealization

__all__ = [
    "RingNetworkSpec",
    "build_approx_network",
    "build_ring_network",
    "ring_spec",
    "shift_matrix",
]


def shift_matrix(ell: int, kappa: float = 1.0) -> np.ndarray:
    """kappa times the cyclic permutation sending entry i to entry i+1."""
    if ell < 2:
        raise DimensionMismatch("a cycle needs at least two nodes")
    P = np.zeros((ell, ell))
    P[0, ell - 1] = 1.0
    P[1:, : ell - 1] = np.eye(ell - 1)
    return kappa * P


@dataclasses.dataclass(frozen=True)
class RingNetworkSpec:
    """Constants of the ring instance.

    Gy and Gu are the scalar subsystem channels (previous node's output
    and own input), Psi the scalar approximant with its admissible
    feedback pair.  Omega couples each node to its second neighbor and
    is what makes the diagonal/cyclic sparsity targets reachable."""

    ell: int
    Gy: DescriptorRealization
    Gu: DescriptorRealization
    Psi: DescriptorRealization
    F_psi: np.ndarray
    H_psi: np.ndarray

    def xi(self, kappa: float) -> np.ndarray:
        return shift_matrix(self.ell, kappa)

    @property
    def omega(self) -> np.ndarray:
        return self.xi(2.0) + np.eye(self.ell)

    @property
    def gamma_pattern(self) -> SparsityPattern:
        """Diagonal law: each node feeds back only its own output."""
        return SparsityPattern(np.eye(self.ell, dtype=int))

    @property
    def vden_pattern(self) -> SparsityPattern:
        """Cyclic-plus-diagonal support for the recursive denominator."""
        return SparsityPattern((self.xi(1.0) + np.eye(self.ell) != 0).astype(int))


def ring_spec(ell: int) -> RingNetworkSpec:
    if ell < 2:
        raise DimensionMismatch("a cycle needs at least two nodes")
    Gy = DescriptorRealization(
        np.diag([1.0, 0.0]),
        np.diag([-1.0, -1.0]),
        np.array([[1.0], [1.0]]),
        np.array([[1.0, 1.0]]),
        np.zeros((1, 1)),
    )
    Gu = DescriptorRealization(
        np.diag([1.0, 0.0]),
        np.diag([1.0, -1.0]),
        np.array([[11.0], [4.0]]),
        np.array([[1.0, 1.0]]),
        np.zeros((1, 1)),
    )
    Psi = DescriptorRealization(
        np.array([[0.0, 1.0], [0.0, 0.0]]),
        np.eye(2),
        np.array([[0.0], [-1.0]]),
        np.array([[1.0, 0.0]]),
        np.array([[4.0]]),
    )
    return RingNetworkSpec(
        ell=ell,
        Gy=Gy,
        Gu=Gu,
        Psi=Psi,
        F_psi=np.array([[1.0, 5.0]]),
        H_psi=np.array([[-5.0], [-1.0]]),
    )


def _rep(M: np.ndarray, ell: int) -> np.ndarray:
    return np.kron(np.eye(ell), M)


def build_ring_network(ell: int) -> DescriptorRealization:
    """Improper cycle interconnection: node i+1 sees node i's output
    through Gy and its own input through Gu."""
    spec = ring_spec(ell)
    Gy, Gu = spec.Gy, spec.Gu
    Xi1 = spec.xi(1.0)
    Ey, Ay, By, Cy = _rep(Gy.E, ell), _rep(Gy.A, ell), _rep(Gy.B, ell), _rep(Gy.C, ell)
    Eu, Au, Bu, Cu = _rep(Gu.E, ell), _rep(Gu.A, ell), _rep(Gu.B, ell), _rep(Gu.C, ell)
    ny = Ay.shape[0]
    nu = Au.shape[0]
    E = np.block([[Ey, np.zeros((ny, nu))], [np.zeros((nu, ny)), Eu]])
    A = np.block(
        [[Ay + By @ Xi1 @ Cy, By @ Xi1 @ Cu], [np.zeros((nu, ny)), Au]]
    )
    B = np.vstack([np.zeros((ny, ell)), Bu])
    C = np.hstack([Cy, Cu])
    G = DescriptorRealization(E, A, B, C, np.zeros((ell, ell)))
    if not is_strongly_stabilizable(G):
        raise NotAdmissibleF("ring realization lost strong stabilizability")
    if not is_strongly_stabilizable(G, dual=True):
        raise NotAdmissibleH("ring realization lost strong detectability")
    return G


def build_approx_network(ell: int):
    """Decoupled copies of the scalar approximant times the static
    second-neighbor coupling, with feedbacks that stay admissible after
    the coupling is absorbed into the input map."""
    spec = ring_spec(ell)
    Psi, Omega = spec.Psi, spec.omega
    G = DescriptorRealization(
        _rep(Psi.E, ell),
        _rep(Psi.A, ell),
        _rep(Psi.B, ell) @ Omega,
        _rep(Psi.C, ell),
        _rep(Psi.D, ell) @ Omega,
    )
    F = np.linalg.solve(Omega, _rep(spec.F_psi, ell))
    H = _rep(spec.H_psi, ell)
    if not is_admissible(G.A + G.B @ F, G.E):
        raise NotAdmissibleF("approximant feedback is not admissible")
    if not is_admissible(G.A + H @ G.C, G.E):
        raise NotAdmissibleH("approximant injection is not admissible")
    return G, F, H, Omega
