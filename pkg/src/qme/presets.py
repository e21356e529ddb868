"""Built-in qubit generators.

Each preset is written the natural way (Pauli or ladder jumps, which are not
all unit-normalized) and then brought to canonical form.
"""

import numpy as np

from .generators import Constant, ExpressionSchedule, GeneratorSpec, PeriodicSum, canonicalize

SIGMA_1 = np.array([[0, 1], [1, 0]], dtype=np.complex128)
SIGMA_2 = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
SIGMA_3 = np.array([[1, 0], [0, -1]], dtype=np.complex128)
SIGMA_PLUS = (SIGMA_1 + 1j * SIGMA_2) / 2
SIGMA_MINUS = (SIGMA_1 - 1j * SIGMA_2) / 2
PAULI = (SIGMA_1, SIGMA_2, SIGMA_3)

_ZERO_H = np.zeros((2, 2), dtype=np.complex128)


def pauli_channels(r1=0.0, r2=0.0, r3=1.0, canonical=True):
    """Unital Pauli channels ``sum_i (r_i/2)(sigma_i rho sigma_i - rho)``."""
    spec = GeneratorSpec(_ZERO_H, tuple((s, Constant(0.5 * float(r))) for s, r in zip(PAULI, (r1, r2, r3))))
    return canonicalize(spec) if canonical else spec


def ladder_with_dephasing(c3, canonical=True):
    """Raising and lowering channels at unit rate plus a ``sigma_3`` channel with coupling ``c3``."""
    spec = GeneratorSpec(_ZERO_H, ((SIGMA_PLUS, Constant(1.0)),
                                   (SIGMA_MINUS, Constant(1.0)),
                                   (SIGMA_3, c3)))
    return canonicalize(spec) if canonical else spec


def transient_dephasing(canonical=True):
    """Ladder channels with ``c3(t) = -tanh(t)/2``: CP maps from a non-LGKS generator."""
    return ladder_with_dephasing(ExpressionSchedule.parse("-tanh(t)/2"), canonical)


def anti_dephasing(canonical=True):
    """Ladder channels with ``c3 = -1/2``: a positive but not 2-positive semigroup."""
    return ladder_with_dephasing(Constant(-0.5), canonical)


def periodic_dephasing(amplitude=1.0, omega=1.0):
    """Canonical pure dephasing with ``c(t) = 1 + amplitude cos(omega t)``."""
    return GeneratorSpec(_ZERO_H, ((SIGMA_3 / np.sqrt(2.0),
                                    PeriodicSum(((1.0, 0.0, 0.0), (amplitude, omega, 0.0)))),))


def example(n, r1=0.0, r2=0.0, r3=1.0):
    """Preset by number: 1 Pauli channels, 2 transient dephasing, 3 anti-dephasing."""
    if n == 1:
        return pauli_channels(r1, r2, r3)
    if n == 2:
        return transient_dephasing()
    if n == 3:
        return anti_dephasing()
    raise ValueError(f"no preset example {n}")


def zero_generator(d=2):
    return GeneratorSpec(np.zeros((d, d), dtype=np.complex128), ())
