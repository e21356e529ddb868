import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qme import presets
from qme.errors import ConditioningError, PeriodicityError, StructuralError, WrongMethodError
from qme.generators import GeneratorSpec, PeriodicSum
from qme.lyapunov import (decay_rates, envelope_rates, log_norm_growth, lozinskii_dahlquist_envelope,
                          matrix_norm, spectrum, spectrum_autonomous, spectrum_floquet, spectrum_gram,
                          vector_norm)
from qme.presets import SIGMA_3
from qme.sampling import random_canonical_spec, random_classical_generator, random_periodic_lgks_spec
from qme.spectral_flow import embedded_W, evolve_trajectory
from qme.vectorized import volume_rate


def _pauli_exponents(r1, r2, r3):
    return sorted([0.0, -(r1 + r2), -(r1 + r3), -(r2 + r3)], reverse=True)


# --- autonomous --------------------------------------------------------------------

@pytest.mark.parametrize("r", [(0.0, 0.0, 1.0), (0.2, 0.5, 1.3), (1.0, 1.0, 1.0)])
def test_autonomous_pauli(r):
    s = spectrum_autonomous(presets.pauli_channels(*r))
    np.testing.assert_allclose(s.exponents, _pauli_exponents(*r), atol=1e-12)
    assert s.method == "autonomous-eigen" and s.residual < 1e-12


def test_autonomous_zero_and_anti_dephasing():
    np.testing.assert_array_equal(spectrum_autonomous(presets.zero_generator(2)).exponents, np.zeros(4))
    np.testing.assert_allclose(spectrum_autonomous(presets.anti_dephasing()).exponents, [0, 0, 0, -2], atol=1e-14)


def test_autonomous_rejects_time_dependence():
    with pytest.raises(WrongMethodError):
        spectrum_autonomous(presets.transient_dephasing())


def test_exponents_sorted_and_rates():
    s = spectrum_autonomous(presets.pauli_channels(0.2, 0.5, 1.3))
    assert np.all(np.diff(s.exponents) <= 0)
    np.testing.assert_allclose(decay_rates(s), [0.0, 0.7, 1.5, 1.8], atol=1e-12)
    assert str(decay_rates([0.0, -1.0])[0]) == "0.0"


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([2, 3]))
def test_positive_semigroup_top_exponent(seed, d):
    s = spectrum_autonomous(random_canonical_spec(d, np.random.default_rng(seed), low=0.0))
    assert abs(s.exponents[0]) < 1e-6
    assert s.exponents.max() <= 1e-6


# --- Floquet -------------------------------------------------------------------------

def test_floquet_constant_spec_matches_autonomous(rng):
    spec = random_canonical_spec(3, rng)
    np.testing.assert_allclose(spectrum_floquet(spec, 1.3).exponents, spectrum_autonomous(spec).exponents,
                               atol=1e-8)


def test_floquet_periodic_dephasing():
    # coherences decay at the period-averaged coupling, populations are untouched
    s = spectrum_floquet(presets.periodic_dephasing(), 2 * math.pi)
    np.testing.assert_allclose(s.exponents, [0, 0, -1, -1], atol=1e-8)
    assert s.residual < 1e-8


def test_floquet_pauli_wrapped_periodic():
    raw = presets.pauli_channels(0.2, 0.4, 1.0)
    wrapped = GeneratorSpec(raw.hamiltonian, tuple((j.matrix, PeriodicSum(((j.coupling(0), 0.0, 0.0),
                                                                             (0.0, 1.0, 0.0))))
                                                   for j in raw.jumps))
    np.testing.assert_allclose(spectrum_floquet(wrapped, 2 * math.pi).exponents,
                               _pauli_exponents(0.2, 0.4, 1.0), atol=1e-8)


def test_floquet_sum_rule(rng):
    spec = random_periodic_lgks_spec(3, rng)
    s = spectrum_floquet(spec, 2 * math.pi)
    assert math.fsum(s.exponents) == pytest.approx(volume_rate(spec, 2 * math.pi), abs=1e-8)


def test_floquet_period_errors():
    with pytest.raises(PeriodicityError):
        spectrum_floquet(presets.periodic_dephasing(), 3.0)
    with pytest.raises(PeriodicityError):
        spectrum_floquet(presets.transient_dephasing(), 1.0)
    with pytest.raises(WrongMethodError):
        spectrum(presets.periodic_dephasing(), method="floquet")


# --- finite-time Gram ---------------------------------------------------------------------

def test_gram_zero_generator():
    s = spectrum_gram(presets.zero_generator(2), 10.0)
    np.testing.assert_array_equal(s.exponents, np.zeros(4))


def test_gram_pauli_agrees_with_autonomous():
    spec = presets.pauli_channels(0.2, 0.4, 1.0)
    np.testing.assert_allclose(spectrum_gram(spec, 50.0).exponents, spectrum_autonomous(spec).exponents, atol=1e-3)


def test_gram_transient_dephasing():
    T = 200.0
    s = spectrum_gram(presets.transient_dephasing(), T)
    g1 = 1 - math.log(math.cosh(T)) / T
    np.testing.assert_allclose(s.exponents, [0.0, -g1, -g1, -2.0], atol=1e-6)
    assert any("not converged" in f for f in s.flags)
    assert math.fsum(s.exponents) == pytest.approx(volume_rate(presets.transient_dephasing(), T), abs=1e-6)


def test_gram_custom_basis_and_running_output(rng):
    spec = random_periodic_lgks_spec(2, rng)
    B = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    a = spectrum_gram(spec, 20.0, basis=B)
    b = spectrum_gram(spec, 20.0)
    # finite-horizon splits depend on the starting frame; the sum and the zero mode do not
    assert math.fsum(a.exponents) == pytest.approx(math.fsum(b.exponents), abs=1e-10)
    assert abs(a.exponents[0]) < 1e-8
    lines = a.running_csv().splitlines()
    assert lines[0] == "time,lambda_0,lambda_1,lambda_2,lambda_3" and len(lines) == 21
    doc = json.loads(a.to_json())
    assert doc["method"] == "gram-finite-time" and doc["horizon"] == 20.0 and len(doc["exponents"]) == 4


@settings(max_examples=8, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([2, 3]))
def test_gram_sum_rule(seed, d):
    spec = random_periodic_lgks_spec(d, np.random.default_rng(seed))
    s = spectrum_gram(spec, 15.0)
    assert math.fsum(s.exponents) == pytest.approx(volume_rate(spec, 15.0), abs=1e-6)


def test_gram_errors():
    with pytest.raises(StructuralError):
        spectrum_gram(presets.pauli_channels(), 0.0)
    with pytest.raises(StructuralError):
        spectrum_gram(presets.pauli_channels(), 5.0, basis=np.ones((4, 4)))
    with pytest.raises(ConditioningError) as info:
        spectrum_gram(presets.pauli_channels(20.0, 20.0, 20.0), 4.0, dt=2.0)
    assert "re-orthonormalize every" in str(info.value)


def test_spectrum_dispatch():
    assert spectrum(presets.pauli_channels()).method == "autonomous-eigen"
    assert spectrum(presets.periodic_dephasing(), period=2 * math.pi).method == "floquet"
    assert spectrum(presets.transient_dephasing(), horizon=5.0).method == "gram-finite-time"
    with pytest.raises(WrongMethodError):
        spectrum(presets.pauli_channels(), method="nope")


# --- norms ---------------------------------------------------------------------------------

def test_matrix_norm_examples():
    for which in ("one", "two", "infinity"):
        assert matrix_norm(np.eye(2), which) == pytest.approx(1.0)
    M = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert matrix_norm(M, "one") == 6.0
    assert matrix_norm(M, "infinity") == 7.0
    assert matrix_norm(np.diag([3.0, -5.0]), "two") == pytest.approx(5.0)
    with pytest.raises(ValueError):
        matrix_norm(M, "three")


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 8))
def test_norm_equivalence(seed, n):
    v = np.random.default_rng(seed).standard_normal(n)
    one, two, inf = (vector_norm(v, w) for w in ("one", "two", "infinity"))
    assert one / math.sqrt(n) <= two * (1 + 1e-12) and two <= one * (1 + 1e-12)
    assert inf <= two * (1 + 1e-12) and two <= math.sqrt(n) * inf * (1 + 1e-12)


# --- Lozinskii-Dahlquist envelope --------------------------------------------------------------

def test_envelope_examples():
    W = np.array([[-1.0, 2.0], [1.0, -2.0]])
    assert lozinskii_dahlquist_envelope(W, 1.0, "infinity") == (-3.0, 2.0)
    assert lozinskii_dahlquist_envelope(np.zeros((3, 3)), 1.0, "one") == (0.0, 0.0)
    # one-norm uses column sums of the off-diagonal magnitudes
    assert envelope_rates(W, "one") == (-4.0, 2.0)
    with pytest.raises(ValueError):
        envelope_rates(W, "two")


def test_envelope_pauli_embedded_generator():
    r1, r2 = 0.3, 0.5
    traj = evolve_trajectory(presets.pauli_channels(r1, r2, 1.0), np.diag([0.8, 0.2]), [0.0])
    W = embedded_W(traj, 0)
    lo, hi = lozinskii_dahlquist_envelope(W, 4.0, "infinity")
    assert lo == pytest.approx(-(r1 + r2)) and hi == pytest.approx((r1 + r2) / 2)
    q0 = np.array([1.0, -0.3])
    assert lo <= log_norm_growth(W, q0, 4.0, "infinity") <= hi


def test_envelope_time_dependent_average():
    A = np.array([[-1.0, 2.0], [1.0, -2.0]])
    lo, hi = lozinskii_dahlquist_envelope(lambda s: (1 + math.sin(s)) * A, 2 * math.pi, "infinity")
    assert lo == pytest.approx(-3.0, abs=1e-10) and hi == pytest.approx(2.0, abs=1e-10)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([2, 3, 4]), st.sampled_from(["one", "infinity"]))
def test_envelope_sandwich(seed, d, which):
    rng = np.random.default_rng(seed)
    A, B = random_classical_generator(d, rng), random_classical_generator(d, rng)
    W = lambda s: A + math.cos(2 * s) * B
    T = float(rng.uniform(0.5, 3.0))
    lo, hi = lozinskii_dahlquist_envelope(W, T, which)
    for _ in range(10):
        q0 = rng.standard_normal(d)
        g = log_norm_growth(W, q0, T, which)
        assert lo - 1e-8 <= g <= hi + 1e-8


def test_envelope_horizon_error():
    with pytest.raises(StructuralError):
        lozinskii_dahlquist_envelope(np.zeros((2, 2)), 0.0)
