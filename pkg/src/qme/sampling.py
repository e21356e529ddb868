"""Random generators for property checks and sweeps."""

import numpy as np

from .generators import Constant, GeneratorSpec, Jump, PeriodicSum
from .vectorized import hermitian_basis


def random_hermitian(d, rng, scale=1.0):
    A = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return scale * (A + A.conj().T) / 2.0


def random_jump_frame(d, rng):
    """Traceless Hilbert-Schmidt orthonormal operators: a Haar-unitary mix of the Gell-Mann basis."""
    B = hermitian_basis(d)[1:]
    n = len(B)
    Z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    Q, R = np.linalg.qr(Z)
    Q = Q * (np.diag(R) / np.abs(np.diag(R)))
    return np.einsum("ik,iab->kab", Q, B)


def random_canonical_spec(d, rng, low=-2.0, high=2.0, hamiltonian_scale=1.0):
    """Canonical spec with constant couplings drawn uniformly from ``[low, high]``."""
    H = random_hermitian(d, rng, hamiltonian_scale)
    frame = random_jump_frame(d, rng)
    c = rng.uniform(low, high, size=len(frame))
    return GeneratorSpec(H, tuple(Jump(L, Constant(float(x))) for L, x in zip(frame, c)))


def random_periodic_lgks_spec(d, rng, omega=1.0, high=2.0):
    """Canonical spec with couplings ``a + b cos(omega t + phi)``, ``a >= |b|`` so they stay non-negative."""
    H = random_hermitian(d, rng)
    frame = random_jump_frame(d, rng)
    jumps = []
    for L in frame:
        a = rng.uniform(0.0, high)
        b = rng.uniform(-a, a)
        jumps.append(Jump(L, PeriodicSum(((a, 0.0, 0.0), (b, omega, float(rng.uniform(0, 2 * np.pi)))))))
    return GeneratorSpec(H, tuple(jumps))


def random_classical_generator(d, rng, low=-1.0, high=2.0):
    """Matrix with zero column sums and off-diagonals drawn from ``[low, high]`` (signs mixed)."""
    W = rng.uniform(low, high, size=(d, d))
    np.fill_diagonal(W, 0.0)
    np.fill_diagonal(W, -W.sum(axis=0))
    return W
