"""Positivity classes of dynamical maps and their generators.

Complete positivity is decided exactly from the Choi matrix. The weaker
classes (2-positive, Schwarz, positive) only have sampling falsifiers here: a
returned witness proves the map is outside the class, while "not falsified"
certifies nothing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import StructuralError, UnsupportedFormError
from .generators import apply_hs_adjoint
from .serialize import matrix_to_json
from .spectral_flow import haar_unitary
from .vectorized import DEFAULT_TOL, hermitian_basis, propagate

EIG_TOL = 1e-9
CERTIFICATE_NOTE = "not-falsified results come from sampling and are not certificates"


def _dim(F):
    F = np.asarray(F)
    n = F.shape[0]
    d = math.isqrt(n)
    if F.shape != (n, n) or d * d != n:
        raise StructuralError(f"superoperator must be d^2 x d^2, got shape {F.shape}")
    return d


def _apply(F, O):
    d = O.shape[0]
    return (F @ O.reshape(-1)).reshape(d, d)


@dataclass
class ChoiMatrix:
    matrix: np.ndarray
    d: int

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=np.complex128)
        scale = max(1.0, float(np.abs(self.matrix).max()))
        self.hermitian_defect = float(np.abs(self.matrix - self.matrix.conj().T).max()) / scale

    def eig(self):
        """Eigenvalues (ascending) and eigenvectors of the self-adjoint part."""
        return np.linalg.eigh(0.5 * (self.matrix + self.matrix.conj().T))

    @property
    def eigenvalues(self):
        return self.eig()[0]


def choi(transfer, basis=None):
    """Choi matrix ``sum_ij F_ji conj(B_i) kron B_j`` of a map given in an orthonormal matrix basis.

    ``transfer[j, i] = Tr(B_j^dag Phi(B_i))``; the default basis is the
    normalized Gell-Mann basis used by ``pauli_transfer_matrix``.
    """
    F = np.asarray(transfer, dtype=np.complex128)
    d = _dim(F)
    B = hermitian_basis(d) if basis is None else np.asarray(basis, dtype=np.complex128)
    if B.shape != (d * d, d, d):
        raise StructuralError(f"basis must hold {d * d} matrices of size {d}x{d}")
    G = np.einsum("iab,jab->ij", B.conj(), B)
    if np.abs(G - np.eye(d * d)).max() > 1e-10:
        raise StructuralError("matrix basis is not orthonormal in the Hilbert-Schmidt inner product")
    Bbar = B.conj()
    C = np.einsum("ji,iab,jce->acbe", F, Bbar, B).reshape(d * d, d * d)
    return ChoiMatrix(C, d)


def choi_from_superoperator(F):
    """Choi matrix ``sum_kl E_kl kron Phi(E_kl)`` of a superoperator on row-stacked matrices."""
    F = np.asarray(F, dtype=np.complex128)
    d = _dim(F)
    # C[(k, a), (l, b)] = Phi(E_kl)[a, b] = F[a d + b, k d + l]
    C = F.reshape(d, d, d, d).transpose(2, 0, 3, 1).reshape(d * d, d * d)
    return ChoiMatrix(C, d)


@dataclass
class CPResult:
    yes: bool
    min_eigenvalue: float
    eigenvalues: np.ndarray
    witness: np.ndarray

    def to_dict(self):
        out = {"verdict": "yes" if self.yes else "no", "min_eigenvalue": self.min_eigenvalue,
               "eigenvalues": self.eigenvalues.tolist()}
        if not self.yes:
            out["witness"] = matrix_to_json(self.witness)
        return out


def cp_test(C, tol=EIG_TOL):
    """Completely positive iff the smallest Choi eigenvalue is at least ``-tol``."""
    w, V = C.eig()
    return CPResult(bool(w[0] >= -tol), float(w[0]), w, V[:, 0])


def negative_count(C, tol=EIG_TOL):
    return int(np.sum(C.eigenvalues < -tol))


def k_positivity_bound(C, tol=EIG_TOL):
    """Largest ``k`` with at most ``(d-k)^2`` negative Choi eigenvalues (0 if none).

    A k-positive map cannot have more negative eigenvalues, so this is an
    upper bound on the positivity index.
    """
    neg = negative_count(C, tol)
    d = C.d
    for k in range(d, 0, -1):
        if neg <= (d - k) ** 2:
            return k
    return 0


# --------------------------------------------------------------------------
# sampling falsifiers


@dataclass
class FalsifierResult:
    falsified: bool
    samples: int
    min_value: float
    witness: dict = field(default_factory=dict)

    def to_dict(self):
        out = {"verdict": "falsified" if self.falsified else "not-falsified",
               "samples": self.samples, "min_value": self.min_value}
        if self.falsified:
            out["witness"] = {k: matrix_to_json(v) if isinstance(v, np.ndarray) else v
                              for k, v in self.witness.items()}
        return out


def ginibre(d, rng):
    return (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / math.sqrt(2.0)


def unit_vector(n, rng):
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return v / np.linalg.norm(v)


def _run(candidates, evaluate, tol):
    """Evaluate witnesses in order; stop at the first value below ``-tol``."""
    worst = math.inf
    count = 0
    for cand in candidates:
        count += 1
        value, witness = evaluate(cand)
        worst = min(worst, value)
        if value < -tol:
            return FalsifierResult(True, count, float(value), witness)
    return FalsifierResult(False, count, float(worst) if count else 0.0)


def _min_eig(M):
    w, V = np.linalg.eigh(0.5 * (M + M.conj().T))
    return float(w[0]), V[:, 0]


def _ginibre_stream(d, n, rng):
    for _ in range(n):
        yield ginibre(d, rng)


def schwarz_falsifier(spec, t, n_samples=500, seed=0, tol=EIG_TOL):
    """Sample ``L^‡[A^dag A] - L^‡[A^dag] A - A^dag L^‡[A] >= 0`` for Ginibre ``A``."""
    rng = np.random.default_rng(seed)

    def evaluate(A):
        Ad = A.conj().T
        M = (apply_hs_adjoint(spec, t, Ad @ A) - apply_hs_adjoint(spec, t, Ad) @ A
             - Ad @ apply_hs_adjoint(spec, t, A))
        value, _ = _min_eig(M)
        scale = max(1.0, float(np.linalg.norm(A, 2)) ** 2)
        return value / scale, {"A": A, "t": float(t)}

    return _run(_ginibre_stream(spec.d, n_samples, rng), evaluate, tol)


def map_schwarz_falsifier(F, n_samples=500, seed=0, tol=EIG_TOL):
    """Sample ``X^‡[A^dag A] >= X^‡[A^dag] X^‡[A]`` for the Hilbert-Schmidt adjoint of ``F``."""
    d = _dim(F)
    Fa = np.asarray(F).conj().T
    rng = np.random.default_rng(seed)

    def evaluate(A):
        Ad = A.conj().T
        M = _apply(Fa, Ad @ A) - _apply(Fa, Ad) @ _apply(Fa, A)
        value, _ = _min_eig(M)
        return value / max(1.0, float(np.linalg.norm(A, 2)) ** 2), {"A": A}

    return _run(_ginibre_stream(d, n_samples, rng), evaluate, tol)


def ampliate(F, u, k=2):
    """``(Id_k kron Phi)[u u^dag]`` for ``u`` in ``C^k kron C^d``."""
    d = _dim(F)
    blocks = np.asarray(u).reshape(k, d)
    out = np.empty((k * d, k * d), dtype=np.complex128)
    for s in range(k):
        for r in range(k):
            out[s * d:(s + 1) * d, r * d:(r + 1) * d] = _apply(F, np.outer(blocks[s], blocks[r].conj()))
    return out


def _choi_seeds(F, d):
    """Seeds for the 2-positivity sampler: maximally entangled and Choi-eigenvector truncations."""
    omega = np.zeros(2 * d, dtype=np.complex128)
    omega[0] = omega[d + 1] = 1.0 / math.sqrt(2.0)
    yield omega
    w, V = choi_from_superoperator(F).eig()
    for idx in range(min(3, len(w))):
        # best Schmidt-rank-2 part of the eigenvector, input factor first
        X = V[:, idx].reshape(d, d)
        U, S, Wh = np.linalg.svd(X)
        u = (S[:2, None] * Wh[:2]).reshape(-1)
        if np.linalg.norm(u) > 0:
            yield u / np.linalg.norm(u)


def two_positive_falsifier(F, n_samples=2000, seed=0, tol=EIG_TOL):
    """Sample rank-one ``u u^dag`` on ``C^2 kron C^d`` and look for a negative direction ``v`` of the image."""
    d = _dim(F)
    rng = np.random.default_rng(seed)

    def candidates():
        yield from _choi_seeds(F, d)
        for _ in range(n_samples):
            yield unit_vector(2 * d, rng)

    def evaluate(u):
        value, v = _min_eig(ampliate(F, u))
        return value, {"u": u, "v": v}

    return _run(candidates(), evaluate, tol)


def positive_falsifier(F, n_samples=2000, seed=0, tol=EIG_TOL):
    """Sample Haar pure states and check the image has no negative eigenvalue."""
    d = _dim(F)
    rng = np.random.default_rng(seed)

    def candidates():
        for j in range(d):
            yield np.eye(d, dtype=np.complex128)[j]
        for _ in range(n_samples):
            yield unit_vector(d, rng)

    def evaluate(psi):
        value, v = _min_eig(_apply(F, np.outer(psi, psi.conj())))
        return value, {"state": psi, "v": v}

    return _run(candidates(), evaluate, tol)


# --------------------------------------------------------------------------
# generator sign test and combined verdict


@dataclass
class LGKSResult:
    holds: bool
    t: float | None = None
    channel: int | None = None
    value: float | None = None

    def to_dict(self):
        if self.holds:
            return {"verdict": "holds"}
        return {"verdict": "violated", "t": self.t, "channel": self.channel, "value": self.value}


def lgks_sign_test(spec, T, n_times=201, tol=1e-12):
    """First grid point ``(t, channel)`` in ``[0, T]`` with a negative canonical coupling."""
    if not spec.canonical:
        raise UnsupportedFormError("sign test needs the canonical form; canonicalize the spec first",
                                   operation="positivity.lgks_sign_test")
    for t in np.linspace(0.0, T, n_times):
        c = spec.couplings(t)
        bad = np.nonzero(c < -tol)[0]
        if len(bad):
            return LGKSResult(False, float(t), int(bad[0]), float(c[bad[0]]))
    return LGKSResult(True)


@dataclass
class ClassVerdict:
    t: float
    lgks_generator: LGKSResult
    cp: CPResult
    k_positive_upper: int
    two_positive: FalsifierResult
    schwarz: FalsifierResult
    schwarz_generator: FalsifierResult
    positive: FalsifierResult
    seed: int
    note: str = CERTIFICATE_NOTE

    def to_dict(self):
        return {
            "t": self.t,
            "lgks_generator": self.lgks_generator.to_dict(),
            "cp": self.cp.to_dict(),
            "k_positive_upper": self.k_positive_upper,
            "two_positive": self.two_positive.to_dict(),
            "schwarz": self.schwarz.to_dict(),
            "schwarz_generator": self.schwarz_generator.to_dict(),
            "positive": self.positive.to_dict(),
            "seed": self.seed,
            "note": self.note,
        }


def classify(spec, t, n_samples=500, seed=0, tol=EIG_TOL, prop_tol=DEFAULT_TOL):
    """Positivity verdicts for ``F(t, 0)`` and sign/dissipativity checks of the generator on ``[0, t]``."""
    F = propagate(spec, 0.0, t, prop_tol)
    C = choi_from_superoperator(F)
    cp = cp_test(C, tol)
    seeds = np.random.SeedSequence(seed).spawn(4)
    gen_times = np.linspace(0.0, t, 5)
    per_time = max(1, n_samples // len(gen_times))
    sch_gen = FalsifierResult(False, 0, math.inf)
    for k, s in enumerate(gen_times):
        res = schwarz_falsifier(spec, float(s), per_time,
                                np.random.default_rng(seeds[3]).integers(2**63) + k, tol)
        sch_gen = FalsifierResult(res.falsified, sch_gen.samples + res.samples,
                                  min(sch_gen.min_value, res.min_value), res.witness)
        if res.falsified:
            break
    return ClassVerdict(
        t=float(t),
        lgks_generator=lgks_sign_test(spec, t),
        cp=cp,
        k_positive_upper=k_positivity_bound(C, tol),
        two_positive=two_positive_falsifier(F, n_samples, seeds[0], tol),
        schwarz=map_schwarz_falsifier(F, n_samples, seeds[1], tol),
        schwarz_generator=sch_gen,
        positive=positive_falsifier(F, n_samples, seeds[2], tol),
        seed=int(seed),
    )
