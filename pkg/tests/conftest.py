import numpy as np
import pytest

from nrfsyn import DescriptorRealization


def rand_stable_matrix(rng, n: int) -> np.ndarray:
    """Random Hurwitz matrix with margin ~0.3."""
    R = rng.standard_normal((n, n))
    shift = max(0.0, np.linalg.eigvals(R).real.max()) + 0.3 + rng.uniform(0.0, 0.5)
    return R - shift * np.eye(n)


def rand_stable_ss(rng, n: int, m: int, p: int, strictly_proper: bool = False):
    A = rand_stable_matrix(rng, n)
    B = rng.standard_normal((n, m))
    C = rng.standard_normal((p, n))
    D = np.zeros((p, m)) if strictly_proper else rng.standard_normal((p, m))
    return DescriptorRealization(np.eye(n), A, B, C, D)


def rand_admissible_descriptor(rng, n_dyn: int, n_alg: int, m: int, p: int):
    """Admissible system: stable dynamic block plus algebraic block, in
    scrambled coordinates so E is not diagonal."""
    from scipy.linalg import block_diag

    A = block_diag(rand_stable_matrix(rng, n_dyn), np.eye(n_alg))
    E = block_diag(np.eye(n_dyn), np.zeros((n_alg, n_alg)))
    n = n_dyn + n_alg
    B = rng.standard_normal((n, m))
    C = rng.standard_normal((p, n))
    D = rng.standard_normal((p, m))
    U = np.linalg.qr(rng.standard_normal((n, n)))[0]
    V = np.linalg.qr(rng.standard_normal((n, n)))[0]
    return DescriptorRealization(U @ E @ V, U @ A @ V, U @ B, C @ V, D)


def assert_same_transfer(G1, G2, points=None, tol: float = 1e-8, rng=None):
    if points is None:
        rng = np.random.default_rng(0 if rng is None else rng)
        points = [complex(rng.uniform(0.1, 3.0), rng.uniform(-20, 20)) for _ in range(12)]
    for s in points:
        v1, v2 = G1.evaluate(s), G2.evaluate(s)
        scale = max(1.0, np.abs(v1).max(), np.abs(v2).max())
        assert np.abs(v1 - v2).max() <= tol * scale, f"transfer mismatch at s={s}"


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
