"""Eigenvalue flow along solutions and the classical master equation it obeys.

A self-adjoint solution ``rho(t) = sum_i p_i(t) phi_i phi_i^dag`` has
eigenvalues that evolve under ``dp/dt = W(t) p`` with

    W_ij = <phi_i, L(t)[phi_j phi_j^dag] phi_i>   (i != j),

and diagonal fixed by zero column sums. The same matrix elements taken in an
arbitrary projector frame give the Kossakowski test of contractivity.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.stats import unitary_group

from . import kernels
from .bounds import prefactor
from .errors import ConsistencyError, StructuralError
from .generators import apply_generator, generator_trace
from .serialize import dumps, matrix_to_json
from .vectorized import DEFAULT_TOL, Propagator, reshape, time_ordered_exp, unreshape

log = logging.getLogger(__name__)

DEGENERACY_GAP = 1e-8
AMBIGUOUS_OVERLAP = 0.5


@dataclass
class Trajectory:
    """Sampled solution with continuously labelled eigenpairs.

    ``eigvecs[k][:, i]`` is the eigenvector carrying ``eigvals[k, i]``.
    """

    spec: object
    times: np.ndarray
    states: np.ndarray
    eigvals: np.ndarray
    eigvecs: np.ndarray
    warnings: list = field(default_factory=list)
    crossings: list = field(default_factory=list)

    @property
    def d(self):
        return self.states.shape[1]

    def __len__(self):
        return len(self.times)

    def to_dict(self):
        return {
            "times": self.times.tolist(),
            "eigvals": self.eigvals.tolist(),
            "eigvecs": [matrix_to_json(V) for V in self.eigvecs],
            "warnings": list(self.warnings),
            "crossings": [list(c) for c in self.crossings],
        }


def _phase_fix(V, ref=None):
    """Make each column's overlap with ``ref`` (or its largest entry) real positive."""
    if ref is None:
        idx = np.argmax(np.abs(V), axis=0)
        pivots = V[idx, np.arange(V.shape[1])]
    else:
        pivots = np.einsum("ij,ij->j", ref.conj(), V)
    mod = np.abs(pivots)
    phase = np.where(mod > 0, pivots.conj() / np.where(mod > 0, mod, 1.0), 1.0)
    return V * phase


def _clusters(w, gap):
    order = np.argsort(w)
    groups, current = [], [order[0]]
    for a, b in zip(order, order[1:]):
        if w[b] - w[a] < gap:
            current.append(b)
        else:
            groups.append(current)
            current = [b]
    groups.append(current)
    return [g for g in groups if len(g) > 1]


def _match(prev_V, w, V, gap):
    """Relabel ``(w, V)`` to follow ``prev_V``; returns the permuted pair and min overlap."""
    overlap = np.abs(prev_V.conj().T @ V)
    rows, cols = linear_sum_assignment(-overlap)
    perm = cols[np.argsort(rows)]
    w, V = w[perm], V[:, perm]
    for group in _clusters(w, gap):
        # orthogonal Procrustes inside a numerically degenerate eigenspace
        M = V[:, group].conj().T @ prev_V[:, group]
        U, _, Wh = np.linalg.svd(M)
        V[:, group] = V[:, group] @ (U @ Wh)
    V = _phase_fix(V, prev_V)
    return w, V, float(overlap[rows, cols].min())


def evolve_trajectory(spec, rho0, times, tol=DEFAULT_TOL, gap=DEGENERACY_GAP, propagator=None):
    """Propagate ``rho0`` (given at t = 0) and follow its eigenpairs over ``times``.

    Passing one :class:`Propagator` to several calls with the same ``times``
    integrates the equation only once.
    """
    rho0 = np.asarray(rho0, dtype=np.complex128)
    d = spec.d
    if rho0.shape != (d, d):
        raise StructuralError(f"initial state must be {d}x{d}")
    if np.abs(rho0 - rho0.conj().T).max() > 1e-10:
        raise StructuralError("initial state must be self-adjoint")
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or not len(times) or times[0] < 0 or np.any(np.diff(times) <= 0):
        raise StructuralError("sample times must be non-negative and strictly increasing")
    prop = Propagator(spec, tol) if propagator is None else propagator
    if prop.spec is not spec:
        raise StructuralError("propagator belongs to a different spec")
    v = reshape(rho0)
    tau = 0.0
    states = np.empty((len(times), d, d), dtype=np.complex128)
    eigvals = np.empty((len(times), d))
    eigvecs = np.empty((len(times), d, d), dtype=np.complex128)
    warns, crossings = [], []
    for k, t in enumerate(times):
        if t > tau:
            v = prop.step(tau, t) @ v
            tau = t
        rho = unreshape(v)
        rho = 0.5 * (rho + rho.conj().T)
        w, V = np.linalg.eigh(rho)
        if k == 0:
            w, V = w[::-1], _phase_fix(V[:, ::-1])
        else:
            w, V, worst = _match(eigvecs[k - 1], w, V, gap)
            if worst < AMBIGUOUS_OVERLAP:
                warns.append(f"t={t:.6g}: eigenvector matching ambiguous (overlap {worst:.3g})")
            before = np.argsort(-eigvals[k - 1], kind="stable")
            after = np.argsort(-w, kind="stable")
            if not np.array_equal(before, after):
                crossings.append((float(t), [int(i) for i in after]))
        if len(_clusters(w, gap)):
            warns.append(f"t={t:.6g}: degenerate eigenvalues (gap < {gap:g})")
        states[k], eigvals[k], eigvecs[k] = rho, w, V
    for msg in warns:
        log.debug(msg)
    return Trajectory(spec, times, states, eigvals, eigvecs, warns, crossings)


# --------------------------------------------------------------------------
# classical generators


def frame_generator(spec, t, vectors):
    """Matrix ``K_ij = Tr(P_i L(t)[P_j])`` for the rank-one projectors on the columns of ``vectors``."""
    Phi = np.asarray(vectors, dtype=np.complex128)
    d = spec.d
    K = np.empty((d, d))
    for j in range(d):
        image = apply_generator(spec, t, np.outer(Phi[:, j], Phi[:, j].conj()))
        K[:, j] = np.einsum("ai,ab,bi->i", Phi.conj(), image, Phi).real
    return K


def rate_matrix(spec, t, vectors):
    """Off-diagonal rates ``sum_l c_l |<phi_i, L_l phi_j>|^2`` (diagonal left at zero)."""
    Phi = np.asarray(vectors, dtype=np.complex128)
    c = spec.couplings(t)
    R = np.zeros((spec.d, spec.d))
    for cl, L in zip(c, spec.jump_stack):
        R += cl * np.abs(Phi.conj().T @ L @ Phi) ** 2
    np.fill_diagonal(R, 0.0)
    return R


def embedded_W(traj, k, check_tol=1e-8):
    """Classical generator of the eigenvalue flow at sample ``k``.

    Off-diagonals come from the generator applied to eigenprojectors and are
    cross-checked against the channel-rate formula; the diagonal makes every
    column sum vanish.
    """
    t = float(traj.times[k])
    Phi = traj.eigvecs[k]
    W = frame_generator(traj.spec, t, Phi)
    np.fill_diagonal(W, 0.0)
    R = rate_matrix(traj.spec, t, Phi)
    scale = max(1.0, float(np.abs(traj.spec.couplings(t)).sum()) if traj.spec.jumps else 1.0)
    gap = float(np.abs(W - R).max())
    if gap > check_tol * scale:
        raise ConsistencyError(f"embedded generator and rate formula differ by {gap:.3g} at t={t:.6g}",
                               operation="spectral_flow.embedded_W")
    np.fill_diagonal(W, -W.sum(axis=0))
    return W


# --------------------------------------------------------------------------
# Kossakowski conditions


@dataclass
class KossakowskiResult:
    passed: bool
    matrix: np.ndarray
    offending: list
    frame: np.ndarray | None = None

    def to_dict(self):
        out = {"passed": self.passed, "matrix": self.matrix.tolist(),
               "offending": [[i, j, v] for i, j, v in self.offending]}
        if self.frame is not None:
            out["frame"] = matrix_to_json(self.frame)
        return out


def _check_frame(projectors, d, tol=1e-10):
    P = np.asarray(projectors, dtype=np.complex128)
    if P.ndim != 3 or P.shape != (d, d, d):
        raise StructuralError(f"frame must hold {d} projectors of size {d}x{d}")
    if np.abs(P.sum(axis=0) - np.eye(d)).max() > tol:
        raise StructuralError("frame projectors do not sum to the identity")
    prod = np.einsum("iab,jbc->ijac", P, P)
    target = np.einsum("ij,iac->ijac", np.eye(d), P)
    if np.abs(prod - target).max() > tol:
        raise StructuralError("frame projectors are not mutually orthogonal idempotents")
    return P


def projectors_from_unitary(U):
    U = np.asarray(U, dtype=np.complex128)
    return np.einsum("ai,bi->iab", U, U.conj())


def kossakowski_check(spec, t, frame, tol=1e-10):
    """Test ``Tr(P_i L(t)[P_j]) >= -tol`` (i != j) and the column-sum identity on one frame."""
    P = _check_frame(frame, spec.d)
    d = spec.d
    images = np.stack([apply_generator(spec, t, P[j]) for j in range(d)])
    K = np.einsum("iab,jba->ij", P, images).real
    offending = [(i, j, float(K[i, j])) for i in range(d) for j in range(d)
                 if i != j and K[i, j] < -tol]
    col_ok = np.abs(K.sum(axis=0)).max() <= max(tol, 1e-10 * np.abs(K).max())
    return KossakowskiResult(not offending and col_ok, K, offending)


def haar_unitary(d, rng):
    return unitary_group.rvs(d, random_state=rng)


def kossakowski_sample(spec, t, n_frames=200, seed=0, tol=1e-10):
    """Check Haar-random frames (the computational frame first); return the first failure."""
    rng = np.random.default_rng(seed)
    last = None
    for k in range(n_frames):
        U = np.eye(spec.d, dtype=np.complex128) if k == 0 else haar_unitary(spec.d, rng)
        res = kossakowski_check(spec, t, projectors_from_unitary(U), tol)
        res.frame = U
        if not res.passed:
            return res
        last = res
    return last


# --------------------------------------------------------------------------
# classical propagation


def classical_propagate(G, p0, t, s=0.0, tol=DEFAULT_TOL):
    """Solve ``dp/dt = G(t) p`` from ``s`` to ``t``; ``G`` is a matrix or a callable.

    ``p0`` may be a matrix whose columns are propagated together.
    """
    p0 = np.asarray(p0, dtype=float)
    if callable(G):
        T = time_ordered_exp(lambda u: np.asarray(G(u), dtype=np.complex128), s, t, tol)
    else:
        G = np.asarray(G, dtype=np.complex128)
        if G.shape != (p0.shape[0], p0.shape[0]):
            raise StructuralError(f"generator shape {G.shape} does not match vector length {p0.shape[0]}")
        T = kernels.expm((t - s) * G)
    return (T @ p0).real


# --------------------------------------------------------------------------
# trace inequalities


@dataclass
class TraceInequalityReport:
    which: str
    times: np.ndarray
    trace_W: np.ndarray
    trace_L: np.ndarray
    margins: np.ndarray
    trace_W_nonpositive: np.ndarray

    @property
    def holds(self):
        return bool(np.all(self.margins >= -1e-8) and np.all(self.trace_W_nonpositive))

    def to_dict(self):
        return {"which": self.which, "times": self.times.tolist(), "trace_W": self.trace_W.tolist(),
                "trace_L": self.trace_L.tolist(), "margins": self.margins.tolist(),
                "trace_W_nonpositive": self.trace_W_nonpositive.tolist()}


def trace_inequality_check(traj, which="two_positive", tol=1e-10):
    """Margins ``Tr W(t) - c Tr L(t)`` with ``c = 1/d`` (two_positive) or ``2/(d+1)`` (schwarz)."""
    c = float(prefactor(traj.d, which))
    trW = np.array([np.trace(embedded_W(traj, k)) for k in range(len(traj))])
    trL = np.array([generator_trace(traj.spec, float(t)) for t in traj.times])
    return TraceInequalityReport(which, traj.times.copy(), trW, trL, trW - c * trL, trW <= tol)


# --------------------------------------------------------------------------
# export


def trajectory_csv(traj, file=None):
    """CSV with time, eigenvalues, Tr W and both trace-inequality margins."""
    two = trace_inequality_check(traj, "two_positive")
    sch = trace_inequality_check(traj, "schwarz")
    buf = file if file is not None else io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["time"] + [f"p_{i + 1}" for i in range(traj.d)]
                    + ["trW", "margin_two_positive", "margin_schwarz"])
    for k, t in enumerate(traj.times):
        writer.writerow([repr(float(t))] + [repr(float(p)) for p in traj.eigvals[k]]
                        + [repr(float(two.trace_W[k])), repr(float(two.margins[k])),
                           repr(float(sch.margins[k]))])
    return buf.getvalue() if file is None else None


def trajectory_json(traj):
    return dumps(traj.to_dict())


def load_trajectory_json(text):
    """Eigenvalue and eigenvector arrays back from :func:`trajectory_json` output."""
    data = json.loads(text)
    V = np.array([[[complex(*z) for z in row] for row in M] for M in data["eigvecs"]])
    return np.array(data["times"]), np.array(data["eigvals"]), V
