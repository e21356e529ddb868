"""Lyapunov spectra of propagators, matrix norms and logarithmic-norm envelopes.

Three estimators are provided: eigenvalues of a constant generator, Floquet
multipliers over one period, and finite-time exponents from re-orthonormalized
propagation of a basis. Decay rates are the negated exponents.
"""

from __future__ import annotations

import io
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import ConditioningError, PeriodicityError, StructuralError, WrongMethodError
from .serialize import dumps
from .spectral_flow import classical_propagate
from .vectorized import (DEFAULT_TOL, Propagator, build_superoperator, hermitian_basis,
                         integrate_scalar, propagate, volume_rate)

log = logging.getLogger(__name__)

CONVERGENCE_TOL = 1e-6
PERIOD_TOL = 1e-8
CONDITION_FLOOR = 1e3 * np.finfo(float).eps


@dataclass
class LyapunovSpectrum:
    """Exponents sorted descending, with the method that produced them."""

    exponents: np.ndarray
    method: str
    horizon: float | None = None
    residual: float = 0.0
    flags: list = field(default_factory=list)
    running_times: np.ndarray | None = None
    running: np.ndarray | None = None

    def __post_init__(self):
        self.exponents = np.sort(np.asarray(self.exponents, dtype=float))[::-1]

    def to_dict(self):
        return {"method": self.method, "horizon": self.horizon,
                "exponents": [float(x) for x in self.exponents],
                "residual": float(self.residual), "flags": list(self.flags)}

    def to_json(self):
        return dumps(self.to_dict())

    def running_csv(self):
        """Running estimates (one column per exponent, in reporting order) for plotting."""
        if self.running is None:
            return ""
        buf = io.StringIO()
        n = self.running.shape[1]
        buf.write(",".join(["time"] + [f"lambda_{i}" for i in range(n)]) + "\n")
        for t, row in zip(self.running_times, self.running):
            buf.write(",".join([repr(float(t))] + [repr(float(x)) for x in row]) + "\n")
        return buf.getvalue()


def decay_rates(spectrum):
    """Rates ``Gamma = -lambda`` in ascending order."""
    return np.sort(-np.asarray(getattr(spectrum, "exponents", spectrum), dtype=float)) + 0.0


def spectrum_autonomous(spec):
    """Real parts of the eigenvalues of a constant generator."""
    if not spec.is_autonomous:
        raise WrongMethodError("coupling schedules are time-dependent; use floquet or gram",
                               operation="lyapunov.spectrum_autonomous")
    L = build_superoperator(spec, 0.0)
    exps = np.linalg.eigvals(L).real
    residual = abs(math.fsum(exps) - np.trace(L).real)
    return LyapunovSpectrum(exps, "autonomous-eigen", None, residual)


def check_periodic(spec, period, n_samples=64, tol=PERIOD_TOL):
    """Raise :class:`PeriodicityError` unless every coupling repeats after ``period``."""
    if period <= 0:
        raise PeriodicityError("period must be positive", operation="lyapunov.spectrum_floquet")
    ts = np.linspace(0.0, period, n_samples, endpoint=False)
    for t in ts:
        a, b = spec.couplings(t), spec.couplings(t + period)
        gap = np.abs(a - b)
        bad = np.nonzero(gap > tol * np.maximum(1.0, np.abs(a)))[0]
        if len(bad):
            raise PeriodicityError(
                f"coupling {bad[0]} differs by {gap[bad[0]]:.3g} between t={t:.6g} and t+{period:g}",
                operation="lyapunov.spectrum_floquet")


def _periodic_qr(props, period, max_sweeps=500, mix_tol=1e-8, tol=1e-12):
    """Moduli of the eigenvalues of ``props[-1] @ ... @ props[0]`` without forming the product.

    Repeated QR sweeps through the factors converge to a Schur frame of the
    product. Diagonal entries of the accumulated triangular factor then carry
    each modulus to full relative precision; columns the frame keeps rotating
    into each other (complex pairs, equal moduli) are resolved as small blocks.
    Returns the exponents and whether the sweeps settled.
    """
    n = props[0].shape[0]
    Q = np.eye(n, dtype=np.complex128)
    prev = None
    for _ in range(max_sweeps):
        Q0 = Q
        Rt = np.eye(n, dtype=np.complex128)
        logscale = np.zeros(n)
        for P in props:
            Q, R = np.linalg.qr(P @ Q)
            Rt = R @ Rt
            # column scaling keeps long, strongly contracting periods representable
            scale = np.abs(np.diag(Rt))
            scale[scale == 0] = 1.0
            Rt /= scale
            logscale += np.log(scale)
        S = Q0.conj().T @ Q
        _, labels = connected_components(csr_matrix(np.abs(S) > mix_tol), directed=False)
        exps = []
        for g in np.unique(labels):
            idx = np.nonzero(labels == g)[0]
            shift = logscale[idx].max()
            block = S[np.ix_(idx, idx)] @ (Rt[np.ix_(idx, idx)] * np.exp(logscale[idx] - shift))
            with np.errstate(divide="ignore"):
                exps.extend((np.log(np.abs(np.linalg.eigvals(block))) + shift) / period)
        exps = np.sort(exps)
        if prev is not None and np.all(np.isfinite(exps)) and np.abs(exps - prev).max() < tol:
            return exps, True
        prev = exps
    return prev, False


def spectrum_floquet(spec, period, tol=DEFAULT_TOL, dt=1.0):
    """``log|mu| / T`` for the eigenvalues ``mu`` of the monodromy matrix ``F(T, 0)``.

    The monodromy matrix is kept factored over sub-intervals of length at most
    ``dt`` so that strongly contracted multipliers keep their relative precision.
    """
    check_periodic(spec, period)
    grid = _interval_grid(period, dt)
    prop = Propagator(spec, tol)
    props = [prop.step(a, b) for a, b in zip(grid, grid[1:])]
    exps, settled = _periodic_qr(props, period)
    flags = [] if settled else ["periodic QR sweeps did not settle; exponents may be inaccurate"]
    residual = abs(math.fsum(exps) - volume_rate(spec, period))
    return LyapunovSpectrum(exps, "floquet", float(period), residual, flags)


def _orthonormal_basis(basis, n):
    if basis is None:
        B = hermitian_basis(math.isqrt(n)).reshape(n, n).T.copy()
    else:
        B = np.asarray(basis, dtype=np.complex128)
        if B.ndim == 3:
            B = B.reshape(B.shape[0], -1)
        B = B.T  # vectors as columns
        if B.shape != (n, n):
            raise StructuralError(f"basis must hold {n} vectors of length {n}")
    Q, R = np.linalg.qr(B)
    diag = np.abs(np.diag(R))
    if diag.min() <= 1e-12 * diag.max():
        raise StructuralError("basis vectors do not span the state space")
    return Q


def _interval_grid(T, dt):
    k = max(1, int(math.ceil(T / dt - 1e-12)))
    return np.linspace(0.0, T, k + 1)


def _qr_pass(props, Q, dt_hint):
    logs = np.zeros((len(props), Q.shape[1]))
    for k, P in enumerate(props):
        Q, R = np.linalg.qr(P @ Q)
        r = np.abs(np.diag(R))
        if r.min() < CONDITION_FLOOR * r.max():
            raise ConditioningError(
                f"propagated basis nearly dependent on interval {k} (|R| ratio {r.min() / r.max():.2e});"
                f" re-orthonormalize every {dt_hint:.3g} time units or less",
                operation="lyapunov.spectrum_gram")
        logs[k] = np.log(r)
    return Q, logs


def spectrum_gram(spec, T, basis=None, dt=1.0, tol=DEFAULT_TOL, align=True, max_passes=8,
                  convergence_tol=CONVERGENCE_TOL):
    """Finite-time exponents from the growth of Gram determinants of a propagated basis.

    The basis is carried through propagators over intervals of length ``dt``
    and re-orthonormalized by QR after each; the partial sums of the log
    ``|R_ii|`` equal the log Gram determinants of the original construction.
    With ``align`` the starting frame is first replaced by the frame reached
    at ``T``, repeatedly, until the estimates stop changing; this removes the
    bias from a starting frame that is not adapted to the dynamics.
    """
    if T <= 0:
        raise StructuralError("horizon must be positive")
    n = spec.d ** 2
    Q0 = _orthonormal_basis(basis, n)
    grid = _interval_grid(T, dt)
    prop = Propagator(spec, tol)
    props = [prop.step(a, b) for a, b in zip(grid, grid[1:])]
    norm = np.abs(build_superoperator(spec, 0.0)).sum(axis=0).max()
    dt_hint = min(dt, 25.0 / max(norm, 1e-300))

    Q, logs = _qr_pass(props, Q0, dt_hint)
    exps = logs.sum(axis=0) / T
    flags = []
    if align:
        for _ in range(max_passes - 1):
            Q, logs = _qr_pass(props, Q, dt_hint)
            new = logs.sum(axis=0) / T
            change = np.abs(np.sort(new) - np.sort(exps)).max()
            exps = new
            if change < 1e-10:
                break
        else:
            flags.append(f"frame alignment still moving after {max_passes} passes")

    running = np.cumsum(logs, axis=0) / grid[1:, None]
    order = np.argsort(-exps, kind="stable")
    running = running[:, order]
    tail = grid[1:] >= 0.8 * T
    if tail.sum() >= 2:
        slopes = np.polyfit(grid[1:][tail], running[tail], 1)[0]
        residual = float(np.abs(slopes).max())
        slow = [int(i) for i in np.nonzero(np.abs(slopes) > 10 * convergence_tol)[0]]
        if slow:
            flags.append(f"not converged: exponents {slow} still drifting "
                         f"(max slope {residual:.2e} over the last 20% of the horizon)")
    else:
        residual = float("nan")
        flags.append("horizon too short for a convergence diagnostic")
    return LyapunovSpectrum(exps, "gram-finite-time", float(T), residual, flags,
                            grid[1:].copy(), running)


def spectrum(spec, method="auto", horizon=50.0, period=None, tol=DEFAULT_TOL, **kwargs):
    """Dispatch to one of the estimators; ``auto`` prefers the exact methods."""
    if method == "auto":
        if spec.is_autonomous:
            method = "autonomous"
        elif period is not None:
            method = "floquet"
        else:
            method = "gram"
    if method == "autonomous":
        return spectrum_autonomous(spec)
    if method == "floquet":
        if period is None:
            raise WrongMethodError("floquet method needs a period", operation="lyapunov.spectrum_floquet")
        return spectrum_floquet(spec, period, tol)
    if method == "gram":
        return spectrum_gram(spec, horizon, tol=tol, **kwargs)
    raise WrongMethodError(f"unknown method {method!r}")


# --------------------------------------------------------------------------
# norms and envelopes


def vector_norm(v, which, axis=None):
    """1-, 2- or infinity-norm of a vector (or of each column with ``axis=0``)."""
    v = np.abs(np.asarray(v))
    if which in ("one", 1, "1"):
        return v.sum(axis=axis)
    if which in ("two", 2, "2"):
        return np.sqrt((v * v).sum(axis=axis))
    if which in ("infinity", "inf", np.inf):
        return v.max(axis=axis)
    raise ValueError(f"unknown norm {which!r}")


def matrix_norm(M, which):
    """Induced matrix norm: ``one`` (max column sum), ``two`` (largest singular value), ``infinity`` (max row sum)."""
    M = np.asarray(M)
    if which in ("one", 1, "1"):
        return float(np.abs(M).sum(axis=0).max())
    if which in ("two", 2, "2"):
        return float(np.linalg.norm(M, 2))
    if which in ("infinity", "inf", np.inf):
        return float(np.abs(M).sum(axis=1).max())
    raise ValueError(f"unknown norm {which!r}")


def _oriented(W, which):
    if which in ("one", 1, "1"):
        return W.T
    if which in ("infinity", "inf", np.inf):
        return W
    raise ValueError(f"envelope needs the one or infinity norm, got {which!r}")


def envelope_rates(W, which):
    """Instantaneous lower and upper growth rates for one generator matrix."""
    W = np.asarray(W, dtype=float)
    A = np.abs(_oriented(W, which))
    diag = np.diag(W)
    off = A.sum(axis=1) - np.diag(A)
    return float((diag - off).min()), float((diag + A.sum(axis=1)).max())


def _signature(W, which):
    """Discrete data whose changes mark kinks of the envelope integrands."""
    W = np.asarray(W, dtype=float)
    A = _oriented(W, which)
    diag = np.diag(W)
    absA = np.abs(A)
    off = absA.sum(axis=1) - np.diag(absA)
    lo, hi = diag - off, diag + absA.sum(axis=1)
    return (int(np.argmin(lo)), int(np.argmax(hi)), np.sign(W).astype(int).tobytes())


def _kinks(W, which, T, breakpoints, per_unit=64):
    """Locate switches of the active row and zero crossings of entries by bisection."""
    grid = np.unique(np.concatenate([np.linspace(0.0, T, max(65, int(per_unit * T) + 1)),
                                     [b for b in breakpoints if 0.0 < b < T]]))
    sigs = [_signature(W(s), which) for s in grid]
    found = []
    for a, b, sa, sb in zip(grid, grid[1:], sigs, sigs[1:]):
        if sa == sb:
            continue
        lo, hi = a, b
        while hi - lo > 4 * np.finfo(float).eps * max(1.0, hi):
            mid = 0.5 * (lo + hi)
            if _signature(W(mid), which) == sa:
                lo = mid
            else:
                hi = mid
        found.append(hi)
    return found


def lozinskii_dahlquist_envelope(W, T, which="infinity", breakpoints=()):
    """Time-averaged lower and upper rates bounding ``(1/T) log(|q(T)|_a / |q(0)|_a)``.

    ``W`` is a constant matrix or a callable ``t -> matrix``.
    """
    if T <= 0:
        raise StructuralError("horizon must be positive")
    if not callable(W):
        return envelope_rates(W, which)
    # integrate piecewise between kinks so that every piece is smooth
    cuts = sorted(set([0.0, float(T)] + [b for b in breakpoints if 0.0 < b < T] + _kinks(W, which, T, breakpoints)))
    op = "lyapunov.lozinskii_dahlquist_envelope"
    lo = math.fsum(integrate_scalar(lambda s: envelope_rates(W(s), which)[0], b, operation=op, lower=a)
                   for a, b in zip(cuts, cuts[1:]))
    hi = math.fsum(integrate_scalar(lambda s: envelope_rates(W(s), which)[1], b, operation=op, lower=a)
                   for a, b in zip(cuts, cuts[1:]))
    return lo / T, hi / T


def log_norm_growth(W, q0, T, which="infinity", tol=DEFAULT_TOL):
    """Measured ``(1/T) log(|q(T)|_a / |q(0)|_a)`` along ``dq/dt = W(t) q``.

    ``q0`` may hold several initial vectors as columns; one propagator serves all.
    """
    q0 = np.asarray(q0, dtype=float)
    qT = classical_propagate(W, q0, T, tol=tol)
    growth = np.log(vector_norm(qT, which, axis=0) / vector_norm(q0, which, axis=0)) / T
    return float(growth) if q0.ndim == 1 else growth
