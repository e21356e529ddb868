"""Row-stacking vectorization, superoperators and time-ordered propagators.

A d x d matrix ``O`` is mapped to the length-d^2 vector of its rows laid end
to end, which is numpy's C-order ravel. Under this convention
``vec(A O B) = (A kron B^T) vec(O)``, and the generator becomes the d^2 x d^2
matrix

    -i (H kron 1 - 1 kron H^T)
    + sum_l c_l (L kron conj(L) - (L^dag L kron 1 + 1 kron L^T conj(L)) / 2).
"""

from __future__ import annotations

import math
import threading
import warnings
import weakref
from functools import lru_cache

import numpy as np
from scipy import integrate

from . import kernels
from .errors import IntegrationError, QuadratureError, StructuralError
from .generators import generator_trace

DEFAULT_TOL = 1e-10
MAX_STEPS = 2_000_000


def reshape(O):
    """Stack the rows of a square matrix into one vector."""
    O = np.asarray(O)
    if O.ndim != 2 or O.shape[0] != O.shape[1]:
        raise StructuralError(f"expected a square matrix, got shape {O.shape}")
    return O.reshape(-1).copy()


def unreshape(v):
    """Inverse of :func:`reshape`."""
    v = np.asarray(v)
    if v.ndim != 1:
        raise StructuralError(f"expected a vector, got shape {v.shape}")
    d = math.isqrt(v.size)
    if d * d != v.size or d == 0:
        raise StructuralError(f"vector length {v.size} is not a perfect square")
    return v.reshape(d, d).copy()


@lru_cache(maxsize=None)
def _hermitian_basis(d):
    basis = [np.eye(d, dtype=np.complex128) / math.sqrt(d)]
    for j in range(d):
        for k in range(j + 1, d):
            m = np.zeros((d, d), dtype=np.complex128)
            m[j, k] = m[k, j] = 1.0
            basis.append(m / math.sqrt(2.0))
            m = np.zeros((d, d), dtype=np.complex128)
            m[j, k], m[k, j] = -1j, 1j
            basis.append(m / math.sqrt(2.0))
    for l in range(1, d):
        m = np.zeros((d, d), dtype=np.complex128)
        m[np.arange(l), np.arange(l)] = 1.0
        m[l, l] = -l
        basis.append(m / math.sqrt(l * (l + 1)))
    out = np.stack(basis)
    out.flags.writeable = False
    return out


def hermitian_basis(d):
    """Normalized generalized Gell-Mann basis, shape ``(d*d, d, d)``.

    The identity comes first; for d = 2 the order is 1, sigma_1, sigma_2,
    sigma_3 (each divided by sqrt 2).
    """
    if d < 1:
        raise StructuralError("dimension must be positive")
    return _hermitian_basis(int(d))


# --------------------------------------------------------------------------
# superoperator

_parts_cache = weakref.WeakKeyDictionary()
_parts_lock = threading.Lock()


def _parts(spec):
    """Hamiltonian part and flattened per-channel dissipators of the superoperator (cached)."""
    with _parts_lock:
        cached = _parts_cache.get(spec)
    if cached is not None:
        return cached
    d = spec.d
    I = np.eye(d, dtype=np.complex128)
    H = spec.hamiltonian
    LH = -1j * (np.kron(H, I) - np.kron(I, H.T))
    D = np.empty((len(spec.jumps), d * d, d * d), dtype=np.complex128)
    for k, jump in enumerate(spec.jumps):
        L = jump.matrix
        LdL = L.conj().T @ L
        D[k] = np.kron(L, L.conj()) - 0.5 * (np.kron(LdL, I) + np.kron(I, LdL.T))
    D = D.reshape(len(spec.jumps), d ** 4)
    LH.flags.writeable = False
    D.flags.writeable = False
    with _parts_lock:
        _parts_cache[spec] = (LH, D)
    return LH, D


def build_superoperator(spec, t):
    """The d^2 x d^2 matrix of ``L(t)`` acting on row-stacked matrices."""
    LH, D = _parts(spec)
    c = spec.couplings(t)
    if not len(c):
        return LH.copy()
    return LH + (c @ D).reshape(LH.shape)


# --------------------------------------------------------------------------
# time-ordered exponentials


def _integrate(gen, s, t, tol, h, max_steps):
    """Adaptive exponential-midpoint integration of ``dF/dt = G(t) F`` on ``[s, t]``.

    Returns the propagator, the last accepted step size and the number of
    accepted steps.
    """
    span = t - s
    n = gen(s).shape[0]
    F = np.eye(n, dtype=np.complex128)
    if span <= 0.0:
        return F, h, 0
    h = span if h is None else min(h, span)
    h_min = 1e-13 * max(1.0, abs(s), abs(t))
    tau = s
    steps = 0
    while tau < t:
        if t - tau <= h * (1.0 + 1e-12):
            h = t - tau
        trial = 0
        while True:
            Lm = gen(tau + 0.5 * h)
            La = gen(tau + 0.25 * h)
            Lb = gen(tau + 0.75 * h)
            E, err = kernels.magnus_trial(La, Lm, Lb, h)
            if not np.isfinite(err):
                err = np.inf
            if err <= tol:
                break
            trial += 1
            h *= max(0.1, 0.9 * (tol / err) ** (1.0 / 3.0)) if np.isfinite(err) else 0.1
            if h < h_min or trial > 200:
                raise IntegrationError(
                    f"step size underflow near t={tau:.6g} (error {err:.3g} > tol {tol:.3g})",
                    operation="vectorized.propagate")
        F = E @ F
        tau = t if h >= t - tau else tau + h
        steps += 1
        if steps > max_steps:
            raise IntegrationError(f"more than {max_steps} steps on [{s}, {t}]",
                                   operation="vectorized.propagate")
        grow = 5.0 if err == 0.0 else min(5.0, 0.9 * (tol / err) ** (1.0 / 3.0))
        h *= max(1.0, grow)
    if not np.all(np.isfinite(F)):
        raise IntegrationError("propagator overflowed", operation="vectorized.propagate")
    return F, h, steps


def time_ordered_exp(gen, s, t, tol=DEFAULT_TOL, breakpoints=(), max_steps=MAX_STEPS):
    """Time-ordered exponential of a matrix-valued function ``gen`` on ``[s, t]``.

    The interval is split at ``breakpoints`` (kinks of tabulated data) and each
    piece integrated with the adaptive exponential-midpoint rule.
    """
    if t < s:
        raise StructuralError(f"propagation needs t >= s, got s={s}, t={t}")
    cuts = [s] + [b for b in sorted(breakpoints) if s < b < t] + [t]
    F = None
    h = None
    for a, b in zip(cuts, cuts[1:]):
        step, h, _ = _integrate(gen, a, b, tol, h, max_steps)
        F = step if F is None else step @ F
    if F is None:
        F = np.eye(gen(s).shape[0], dtype=np.complex128)
    return F


class Propagator:
    """Sequential propagation of one spec over consecutive intervals.

    Keeps the last accepted step size between calls so that long horizons cut
    into many intervals do not restart the step controller each time, and
    remembers each interval's propagator so repeated requests are free.
    """

    def __init__(self, spec, tol=DEFAULT_TOL, max_steps=MAX_STEPS):
        self.spec = spec
        self.tol = tol
        self.max_steps = max_steps
        self._h = None
        self._L0 = build_superoperator(spec, 0.0) if spec.is_autonomous else None
        self._memo = {}

    def gen(self, t):
        return build_superoperator(self.spec, t)

    def step(self, s, t):
        if t < s:
            raise StructuralError(f"propagation needs t >= s, got s={s}, t={t}")
        key = (float(s), float(t))
        if key not in self._memo:
            self._memo[key] = self._compute(s, t)
        return self._memo[key].copy()

    def _compute(self, s, t):
        if self._L0 is not None:
            return kernels.expm((t - s) * self._L0)
        cuts = [s] + [b for b in self.spec.breakpoints if s < b < t] + [t]
        F = np.eye(self.spec.d ** 2, dtype=np.complex128)
        for a, b in zip(cuts, cuts[1:]):
            E, self._h, _ = _integrate(self.gen, a, b, self.tol, self._h, self.max_steps)
            F = E @ F
        return F


def propagate(spec, s, t, tol=DEFAULT_TOL, max_steps=MAX_STEPS):
    """Propagator ``F(t, s)`` of the reshaped master equation.

    Autonomous generators are exponentiated in one step; otherwise the adaptive
    exponential-midpoint rule keeps the local step-doubling error below ``tol``.
    """
    return Propagator(spec, tol, max_steps).step(s, t)


def pauli_transfer_matrix(F):
    """Matrix of a superoperator in the normalized Gell-Mann basis.

    Entry ``(j, i)`` is ``Tr(B_j^dag Phi(B_i))``. The imaginary part vanishes for
    maps that preserve self-adjointness and is dropped.
    """
    F = np.asarray(F)
    n = F.shape[0]
    d = math.isqrt(n)
    if F.shape != (n, n) or d * d != n:
        raise StructuralError(f"superoperator must be d^2 x d^2, got shape {F.shape}")
    Bv = hermitian_basis(d).reshape(n, n)
    return (Bv.conj() @ F @ Bv.T).real


def log_det(F):
    """``log |det F|`` through an LU factorization (no overflow for long horizons)."""
    sign, logabs = np.linalg.slogdet(np.asarray(F))
    if sign == 0:
        return -np.inf
    return float(logabs)


def log_det_propagator(spec, T, tol=DEFAULT_TOL, dt=1.0):
    """``log |det F(T, 0)|`` accumulated interval by interval."""
    prop = Propagator(spec, tol)
    grid = np.append(np.arange(0.0, T, dt), T)
    return math.fsum(log_det(prop.step(a, b)) for a, b in zip(grid, grid[1:]) if b > a)


def integrate_scalar(f, T, points=(), operation="vectorized.volume_rate", lower=0.0):
    """``int_lower^T f`` by adaptive quadrature, raising on non-convergence."""
    pts = [p for p in points if lower < p < T]
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, _ = integrate.quad(f, lower, T, points=pts or None, limit=500,
                                    epsabs=1e-13, epsrel=1e-12)
        except integrate.IntegrationWarning as exc:
            raise QuadratureError(str(exc).split("\n")[0], operation=operation) from None
    return float(val)


def volume_rate(spec, T):
    """Time average ``(1/T) int_0^T Tr L(s) ds`` of the generator trace."""
    if T <= 0:
        raise StructuralError("horizon must be positive")
    if spec.is_autonomous:
        return generator_trace(spec, 0.0)
    return integrate_scalar(lambda s: generator_trace(spec, s), T, spec.breakpoints) / T
