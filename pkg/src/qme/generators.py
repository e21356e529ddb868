"""Time-dependent master-equation generators.

A generator acts on d x d matrices as

    L(t)[O] = -i[H, O] + sum_l c_l(t) (L_l O L_l^dag - {L_l^dag L_l, O}/2)

with constant Hamiltonian ``H`` and jump operators ``L_l``; all time
dependence sits in the real scalar couplings ``c_l(t)``. The canonical form
additionally asks for traceless, Hilbert-Schmidt orthonormal jumps and a
self-adjoint ``H``. Couplings may be negative or change sign.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import jsonschema
import numpy as np

from .errors import ConfigError, ScheduleError, StructuralError, UnsupportedFormError
from .expr import Expression
from .serialize import matrix_from_json, matrix_to_json

TOL_HERM = 1e-10
TOL_ORTH = 1e-10


# --------------------------------------------------------------------------
# coupling schedules


@dataclass(frozen=True)
class Constant:
    value: float
    kind = "constant"

    def __call__(self, t):
        return self.value

    @property
    def is_constant(self):
        return True

    @property
    def breakpoints(self):
        return ()

    def scaled(self, factor):
        return Constant(self.value * factor)

    def to_dict(self):
        return {"kind": self.kind, "value": self.value}


@dataclass(frozen=True)
class PeriodicSum:
    """``c(t) = sum_k a_k cos(w_k t + phi_k)``; ``w_k = 0`` terms give an offset."""

    terms: tuple
    kind = "periodic-sum"

    def __call__(self, t):
        return sum(a * math.cos(w * t + p) for a, w, p in self.terms)

    @property
    def is_constant(self):
        return all(w == 0.0 or a == 0.0 for a, w, _ in self.terms)

    @property
    def breakpoints(self):
        return ()

    def scaled(self, factor):
        return PeriodicSum(tuple((a * factor, w, p) for a, w, p in self.terms))

    def to_dict(self):
        return {"kind": self.kind, "terms": [list(term) for term in self.terms]}


@dataclass(frozen=True)
class Tabulated:
    """Piecewise-linear interpolation of ``(time, value)`` samples, clamped outside."""

    times: tuple
    values: tuple
    kind = "tabulated"

    def __post_init__(self):
        if len(self.times) != len(self.values) or not self.times:
            raise ConfigError("tabulated schedule needs matching, non-empty samples")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ConfigError("tabulated sample times must be strictly increasing")

    def __call__(self, t):
        return float(np.interp(t, self.times, self.values))

    @property
    def is_constant(self):
        return all(v == self.values[0] for v in self.values)

    @property
    def breakpoints(self):
        return tuple(self.times)

    def scaled(self, factor):
        return Tabulated(self.times, tuple(v * factor for v in self.values))

    def to_dict(self):
        return {"kind": self.kind, "samples": [[a, b] for a, b in zip(self.times, self.values)]}


@dataclass(frozen=True)
class ExpressionSchedule:
    expression: Expression
    kind = "expression"

    @classmethod
    def parse(cls, source):
        return cls(Expression(source))

    def __call__(self, t):
        return self.expression(t)

    @property
    def is_constant(self):
        return not self.expression.depends_on_t

    @property
    def breakpoints(self):
        return ()

    def scaled(self, factor):
        return ExpressionSchedule.parse(f"{factor!r}*({self.expression.source})")

    def to_dict(self):
        return {"kind": self.kind, "expr": self.expression.source}


def as_schedule(value):
    """Accept a schedule object, a number (constant) or an expression string."""
    if isinstance(value, (Constant, PeriodicSum, Tabulated, ExpressionSchedule)):
        return value
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return Constant(float(value))
    if isinstance(value, str):
        return ExpressionSchedule.parse(value)
    raise ConfigError(f"cannot interpret {value!r} as a coupling schedule")


# --------------------------------------------------------------------------
# generator specification


def _frozen(M, name):
    arr = np.array(M, dtype=np.complex128, copy=True)
    if arr.ndim != 2:
        raise StructuralError(f"{name} must be a matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise StructuralError(f"{name} has non-finite entries")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class Jump:
    matrix: np.ndarray
    coupling: object

    def __post_init__(self):
        object.__setattr__(self, "matrix", _frozen(self.matrix, "jump operator"))
        object.__setattr__(self, "coupling", as_schedule(self.coupling))


@dataclass(frozen=True, eq=False)
class GeneratorSpec:
    """Hamiltonian plus weighted jump channels; immutable once built."""

    hamiltonian: np.ndarray
    jumps: tuple = field(default_factory=tuple)

    def __post_init__(self):
        H = _frozen(self.hamiltonian, "hamiltonian")
        if H.shape[0] != H.shape[1]:
            raise StructuralError(f"hamiltonian must be square, got {H.shape}")
        d = H.shape[0]
        if d < 2:
            raise StructuralError("Hilbert-space dimension must be at least 2")
        jumps = tuple(j if isinstance(j, Jump) else Jump(*j) for j in self.jumps)
        for k, jump in enumerate(jumps):
            if jump.matrix.shape != (d, d):
                raise StructuralError(
                    f"jump {k} has shape {jump.matrix.shape}, expected {(d, d)}")
        if len(jumps) > d * d - 1:
            raise StructuralError(f"at most {d * d - 1} jump channels allowed for d={d}")
        object.__setattr__(self, "hamiltonian", H)
        object.__setattr__(self, "jumps", jumps)

    @property
    def d(self):
        return self.hamiltonian.shape[0]

    @property
    def is_autonomous(self):
        return all(j.coupling.is_constant for j in self.jumps)

    @property
    def breakpoints(self):
        return tuple(sorted({b for j in self.jumps for b in j.coupling.breakpoints}))

    def couplings(self, t):
        """Coupling values at time ``t`` as a float array."""
        try:
            return np.array([j.coupling(t) for j in self.jumps], dtype=float)
        except ScheduleError:
            raise
        except Exception as exc:  # user-supplied tables or expressions
            raise ScheduleError(f"coupling evaluation failed at t={t}: {exc}",
                                operation="generators.schedule") from exc

    @cached_property
    def canonical(self):
        return not validate_canonical(self)

    @cached_property
    def jump_stack(self):
        if not self.jumps:
            return np.zeros((0, self.d, self.d), dtype=np.complex128)
        return np.stack([j.matrix for j in self.jumps])

    def with_couplings(self, couplings):
        """Copy with the coupling schedules replaced (same order as ``jumps``)."""
        if len(couplings) != len(self.jumps):
            raise StructuralError("one coupling per jump channel expected")
        return GeneratorSpec(self.hamiltonian,
                             tuple(Jump(j.matrix, c) for j, c in zip(self.jumps, couplings)))


def _hs_norm(M):
    return float(np.linalg.norm(M))


def validate_canonical(spec, tol=TOL_HERM):
    """List the violated canonical-form constraints (empty when canonical)."""
    report = []
    H = spec.hamiltonian
    if np.abs(H - H.conj().T).max() > tol * max(1.0, _hs_norm(H)):
        report.append("H ≠ H†")
    for k, jump in enumerate(spec.jumps):
        L = jump.matrix
        tr = np.trace(L)
        if abs(tr) > tol * max(1.0, _hs_norm(L)):
            report.append(f"jump {k}: Tr(L)={tr:.6g}≠0")
    G = np.einsum("kab,lab->kl", spec.jump_stack.conj(), spec.jump_stack)
    for k in range(len(spec.jumps)):
        if abs(G[k, k] - 1.0) > tol:
            report.append(f"jump {k}: Tr(L†L)={G[k, k].real:.6g}≠1")
        for l in range(k + 1, len(spec.jumps)):
            if abs(G[k, l]) > tol:
                report.append(f"jumps {k},{l}: Tr(L†L')={G[k, l]:.6g}≠0")
    return report


def canonicalize(spec, tol=TOL_ORTH):
    """Rescale jumps to unit Hilbert-Schmidt norm, moving the weight into the couplings.

    Jumps must already be traceless and mutually orthogonal; splitting off
    traces or orthogonalizing would mix couplings and is refused.
    """
    if spec.canonical:
        return spec
    H = spec.hamiltonian
    if np.abs(H - H.conj().T).max() > tol * max(1.0, _hs_norm(H)):
        raise UnsupportedFormError("hamiltonian is not self-adjoint",
                                   operation="generators.canonicalize")
    jumps = []
    for k, jump in enumerate(spec.jumps):
        L = jump.matrix
        norm_sq = float(np.vdot(L, L).real)
        norm = math.sqrt(norm_sq)
        if norm == 0.0:
            raise UnsupportedFormError(f"jump {k} is the zero matrix",
                                       operation="generators.canonicalize")
        if abs(np.trace(L)) > tol * max(1.0, norm):
            raise UnsupportedFormError(f"jump {k} is not traceless",
                                       operation="generators.canonicalize")
        coupling = jump.coupling if abs(norm - 1.0) <= tol else jump.coupling.scaled(norm_sq)
        jumps.append(Jump(L / norm, coupling))
    out = GeneratorSpec(H, tuple(jumps))
    problems = validate_canonical(out, tol)
    if problems:
        raise UnsupportedFormError("jump set is not orthogonal: " + "; ".join(problems),
                                   operation="generators.canonicalize")
    return out


def _check_operand(spec, O):
    O = np.asarray(O, dtype=np.complex128)
    if O.shape != (spec.d, spec.d):
        raise StructuralError(f"operand has shape {O.shape}, expected {(spec.d, spec.d)}")
    return O


def apply_generator(spec, t, O):
    """Evaluate ``L(t)[O]``."""
    O = _check_operand(spec, O)
    H = spec.hamiltonian
    out = -1j * (H @ O - O @ H)
    for c, jump in zip(spec.couplings(t), spec.jumps):
        if c == 0.0:
            continue
        L = jump.matrix
        Ld = L.conj().T
        LdL = Ld @ L
        out += c * (L @ O @ Ld - 0.5 * (LdL @ O + O @ LdL))
    return out


def apply_hs_adjoint(spec, t, O):
    """Evaluate the Hilbert-Schmidt adjoint ``L(t)^‡[O]`` (real couplings)."""
    O = _check_operand(spec, O)
    H = spec.hamiltonian
    out = 1j * (H @ O - O @ H)
    for c, jump in zip(spec.couplings(t), spec.jumps):
        if c == 0.0:
            continue
        L = jump.matrix
        Ld = L.conj().T
        LdL = Ld @ L
        out += c * (Ld @ O @ L - 0.5 * (LdL @ O + O @ LdL))
    return out


def generator_trace(spec, t):
    """Trace of ``L(t)`` as a linear map on d x d matrices.

    Closed form ``sum_l c_l (|Tr L_l|^2 - d ||L_l||^2)``, which is ``-d sum_l c_l``
    in canonical form. The Hamiltonian part is traceless.
    """
    c = spec.couplings(t)
    if not len(c):
        return 0.0
    Ls = spec.jump_stack
    tr = np.abs(np.einsum("kaa->k", Ls)) ** 2
    norms = np.einsum("kab,kab->k", Ls.conj(), Ls).real
    return float(np.dot(c, tr - spec.d * norms))


def generator_trace_from_basis(spec, t, basis=None):
    """Trace of ``L(t)`` summed over the matrix units built from an orthonormal basis.

    ``basis`` holds the vectors ``f_i`` as columns (identity by default); the
    result is ``sum_ij <f_i, L(t)[f_i f_j^dag] f_j>``.
    """
    d = spec.d
    F = np.eye(d, dtype=np.complex128) if basis is None else np.asarray(basis, dtype=np.complex128)
    if F.shape != (d, d):
        raise StructuralError(f"basis must be {d}x{d}")
    total = 0.0 + 0.0j
    for i in range(d):
        for j in range(d):
            E = np.outer(F[:, i], F[:, j].conj())
            total += F[:, i].conj() @ apply_generator(spec, t, E) @ F[:, j]
    return float(total.real)


# --------------------------------------------------------------------------
# JSON documents

_COUPLING_SCHEMA = {
    "type": "object",
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["constant", "periodic-sum", "tabulated", "expression"]},
        "value": {"type": "number"},
        "terms": {"type": "array", "items": {"type": "array", "items": {"type": "number"},
                                             "minItems": 3, "maxItems": 3}},
        "samples": {"type": "array", "minItems": 1,
                    "items": {"type": "array", "items": {"type": "number"},
                              "minItems": 2, "maxItems": 2}},
        "expr": {"type": "string"},
    },
    "allOf": [
        {"if": {"properties": {"kind": {"const": "constant"}}}, "then": {"required": ["value"]}},
        {"if": {"properties": {"kind": {"const": "periodic-sum"}}}, "then": {"required": ["terms"]}},
        {"if": {"properties": {"kind": {"const": "tabulated"}}}, "then": {"required": ["samples"]}},
        {"if": {"properties": {"kind": {"const": "expression"}}}, "then": {"required": ["expr"]}},
    ],
}

_MATRIX_SCHEMA = {
    "type": "array",
    "minItems": 1,
    "items": {"type": "array", "items": {"type": "array", "items": {"type": "number"},
                                         "minItems": 2, "maxItems": 2}},
}

SPEC_SCHEMA = {
    "type": "object",
    "required": ["d", "hamiltonian"],
    "properties": {
        "d": {"type": "integer", "minimum": 2},
        "hamiltonian": _MATRIX_SCHEMA,
        "jumps": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["matrix", "coupling"],
                "properties": {"matrix": _MATRIX_SCHEMA, "coupling": _COUPLING_SCHEMA},
            },
        },
        "canonical": {"type": "boolean"},
    },
}


def _schema_path(error):
    path = ""
    for part in error.absolute_path:
        path += f"[{part}]" if isinstance(part, int) else (f".{part}" if path else str(part))
    return path or "<root>"


def schedule_from_dict(data, path="coupling"):
    kind = data["kind"]
    if kind == "constant":
        return Constant(float(data["value"]))
    if kind == "periodic-sum":
        return PeriodicSum(tuple(tuple(float(x) for x in term) for term in data["terms"]))
    if kind == "tabulated":
        samples = data["samples"]
        try:
            return Tabulated(tuple(float(s[0]) for s in samples), tuple(float(s[1]) for s in samples))
        except ConfigError as exc:
            raise ConfigError(str(exc), f"{path}.samples") from None
    try:
        return ExpressionSchedule.parse(data["expr"])
    except ConfigError as exc:
        raise ConfigError(str(exc), f"{path}.expr") from None


def spec_from_dict(data):
    """Build a :class:`GeneratorSpec` from its JSON document, with path-qualified errors."""
    validator = jsonschema.Draft202012Validator(SPEC_SCHEMA)
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        raise ConfigError(errors[0].message, _schema_path(errors[0]))
    d = data["d"]
    H = matrix_from_json(data["hamiltonian"], "hamiltonian")
    if H.shape != (d, d):
        raise ConfigError(f"expected a {d}x{d} matrix, got {H.shape}", "hamiltonian")
    jumps = []
    for k, item in enumerate(data.get("jumps", [])):
        L = matrix_from_json(item["matrix"], f"jumps[{k}].matrix")
        if L.shape != (d, d):
            raise ConfigError(f"expected a {d}x{d} matrix, got {L.shape}", f"jumps[{k}].matrix")
        jumps.append(Jump(L, schedule_from_dict(item["coupling"], f"jumps[{k}].coupling")))
    try:
        spec = GeneratorSpec(H, tuple(jumps))
    except StructuralError as exc:
        raise ConfigError(str(exc), "jumps") from None
    if data.get("canonical") and not spec.canonical:
        raise ConfigError("declared canonical but violates: " + "; ".join(validate_canonical(spec)),
                          "canonical")
    return spec


def spec_to_dict(spec):
    return {
        "d": spec.d,
        "hamiltonian": matrix_to_json(spec.hamiltonian),
        "jumps": [{"matrix": matrix_to_json(j.matrix), "coupling": j.coupling.to_dict()}
                  for j in spec.jumps],
    }


def load_spec(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read spec file: {exc.strerror}", str(path)) from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg} (line {exc.lineno})", str(path)) from None
    return spec_from_dict(data)
