"""Upper bound on the largest decay rate by the sum of all decay rates.

For a trace-preserving semigroup with decay rates ``Gamma_i = -lambda_i``,

    Gamma_max <= c_d * sum_i Gamma_i,

with ``c_d = 1/d`` for 2-positive, ``2/(d+1)`` for Schwarz and ``1`` for
positive semigroups. The sum runs over all d^2 rates; the zero rate from
trace preservation contributes nothing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import StructuralError, UnsupportedFormError
from .vectorized import integrate_scalar

CLASSES = ("two_positive", "schwarz", "positive")
SAT_TOL = 1e-6


def normalize_class(name):
    key = str(name).replace("-", "_").lower()
    if key not in CLASSES:
        raise ValueError(f"unknown positivity class {name!r}; expected one of {', '.join(CLASSES)}")
    return key


def prefactor(d, cls):
    """Class-dependent constant ``c_d`` as an exact fraction."""
    if d < 2:
        raise StructuralError("dimension must be at least 2")
    cls = normalize_class(cls)
    if cls == "two_positive":
        return Fraction(1, d)
    if cls == "schwarz":
        return Fraction(2, d + 1)
    return Fraction(1)


@dataclass
class BoundReport:
    rates: np.ndarray
    class_assumed: str
    prefactor: Fraction
    lhs: float
    rhs: float
    margin: float
    saturated: bool
    sat_tol: float
    deviation_rate: float | None = None
    ordering: str = "Gamma_max is the largest decay rate, i.e. minus the smallest exponent"

    @property
    def holds(self):
        return self.margin >= -self.sat_tol

    def to_dict(self):
        return {
            "class": self.class_assumed,
            "prefactor": str(self.prefactor),
            "prefactor_value": float(self.prefactor),
            "rates": [float(r) for r in self.rates],
            "gamma_max": self.lhs,
            "rhs": self.rhs,
            "margin": self.margin,
            "saturated": self.saturated,
            "sat_tol": self.sat_tol,
            "deviation_rate": self.deviation_rate,
            "ordering": self.ordering,
        }


def check_bound(spectrum, d, cls, sat_tol=SAT_TOL, deviation_rate=None):
    """Compare ``Gamma_max`` with ``c_d * sum Gamma`` for a spectrum of d^2 exponents."""
    exps = np.asarray(getattr(spectrum, "exponents", spectrum), dtype=float)
    if exps.shape != (d * d,):
        raise StructuralError(f"expected {d * d} exponents for d={d}, got {exps.size}")
    cls = normalize_class(cls)
    c = prefactor(d, cls)
    rates = np.sort(-exps) + 0.0
    lhs = float(rates[-1])
    rhs = float(c) * math.fsum(rates)
    margin = rhs - lhs
    return BoundReport(rates, cls, c, lhs, rhs, margin, abs(margin) < sat_tol, sat_tol, deviation_rate)


def _require_canonical(spec, operation):
    if not spec.canonical:
        raise UnsupportedFormError("spec must be in canonical form (canonicalize it first)",
                                   operation=operation)


def deviation_indicator(spec, T):
    """``I(T) = int_0^T sum_l (|c_l| - c_l) ds`` and its time average ``I(T)/T``."""
    _require_canonical(spec, "bounds.deviation_indicator")
    if T <= 0:
        raise StructuralError("horizon must be positive")

    def integrand(s):
        c = spec.couplings(s)
        return float(np.sum(np.abs(c) - c))

    if spec.is_autonomous:
        total = integrand(0.0) * T
    else:
        total = integrate_scalar(integrand, T, spec.breakpoints, "bounds.deviation_indicator")
    return total, total / T


def coarse_bound(spec, T):
    """Time average of ``sum_l |c_l|``, a class-independent upper bound on ``Gamma_max``."""
    _require_canonical(spec, "bounds.coarse_bound")
    if T <= 0:
        raise StructuralError("horizon must be positive")

    def integrand(s):
        return float(np.sum(np.abs(spec.couplings(s))))

    if spec.is_autonomous:
        return integrand(0.0)
    return integrate_scalar(integrand, T, spec.breakpoints, "bounds.coarse_bound") / T
