import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qme import presets
from qme.bounds import CLASSES, check_bound, coarse_bound, deviation_indicator, normalize_class, prefactor
from qme.errors import StructuralError, UnsupportedFormError
from qme.lyapunov import spectrum_autonomous
from qme.positivity import lgks_sign_test
from qme.sampling import random_canonical_spec, random_periodic_lgks_spec
from qme.vectorized import volume_rate


def test_prefactor_table():
    assert prefactor(2, "two_positive") == Fraction(1, 2)
    assert prefactor(2, "schwarz") == Fraction(2, 3)
    assert prefactor(5, "positive") == 1
    assert prefactor(4, "two-positive") == Fraction(1, 4)
    with pytest.raises(StructuralError):
        prefactor(1, "positive")
    with pytest.raises(ValueError):
        normalize_class("three_positive")


@pytest.mark.parametrize("d", [2, 3, 4, 7])
def test_prefactor_ordering(d):
    a, b, c = (prefactor(d, cls) for cls in CLASSES)
    assert a <= b <= c


def test_check_bound_pauli_saturates():
    rep = check_bound(spectrum_autonomous(presets.pauli_channels(0, 0, 1)), 2, "two_positive")
    assert rep.lhs == pytest.approx(1.0) and rep.rhs == pytest.approx(1.0)
    assert rep.saturated and abs(rep.margin) < 1e-10 and rep.holds
    np.testing.assert_allclose(rep.rates, [0, 0, 1, 1], atol=1e-14)
    doc = rep.to_dict()
    assert doc["prefactor"] == "1/2" and doc["sat_tol"] == 1e-6 and "largest decay rate" in doc["ordering"]


def test_check_bound_pauli_general():
    r = (0.2, 0.5, 1.0)
    rep = check_bound(spectrum_autonomous(presets.pauli_channels(*r)), 2, "two_positive")
    assert rep.rhs == pytest.approx(sum(r))
    assert rep.margin == pytest.approx(sum(r) - 1.5) and not rep.saturated


@pytest.mark.parametrize("spectrum", [[0, 0, 0, -2], [0.0, -0.0, 0.0, -2.0]])
def test_check_bound_positive_class_saturates(spectrum):
    rep = check_bound(spectrum, 2, "positive")
    assert rep.lhs == 2.0 and rep.rhs == 2.0 and rep.saturated
    assert not check_bound(spectrum, 2, "two_positive").holds


def test_check_bound_anti_dephasing():
    rep = check_bound(spectrum_autonomous(presets.anti_dephasing()), 2, "positive")
    assert rep.saturated and abs(rep.margin) < 1e-12


def test_check_bound_length_error():
    with pytest.raises(StructuralError):
        check_bound([0, -1, -1], 2, "positive")


def test_bound_rhs_ordering():
    exps = spectrum_autonomous(random_canonical_spec(3, np.random.default_rng(4), low=0.0)).exponents
    rhs = [check_bound(exps, 3, cls).rhs for cls in CLASSES]
    assert rhs[0] <= rhs[1] <= rhs[2]


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([2, 3]))
def test_lgks_specs_obey_two_positive_bound(seed, d):
    spec = random_canonical_spec(d, np.random.default_rng(seed), low=0.0)
    assert check_bound(spectrum_autonomous(spec), d, "two_positive").margin >= -1e-6


# --- deviation indicator and coarse bound ---------------------------------------------------

def test_deviation_pauli():
    assert deviation_indicator(presets.pauli_channels(0.2, 0.3, 1.0), 5.0) == (0.0, 0.0)
    assert coarse_bound(presets.pauli_channels(0.2, 0.3, 1.0), 5.0) == pytest.approx(1.5)
    assert coarse_bound(presets.pauli_channels(0, 0, 0), 5.0) == 0.0


@pytest.mark.parametrize("T", [1.0, 10.0, 100.0])
def test_deviation_transient_dephasing(T):
    total, rate = deviation_indicator(presets.transient_dephasing(), T)
    assert total == pytest.approx(2 * math.log(math.cosh(T)), rel=1e-10)
    assert rate == pytest.approx(total / T)
    assert coarse_bound(presets.transient_dephasing(), T) == pytest.approx(2 + math.log(math.cosh(T)) / T, rel=1e-10)


def test_deviation_anti_dephasing():
    assert deviation_indicator(presets.anti_dephasing(), 3.0) == pytest.approx((6.0, 2.0))


def test_deviation_requires_canonical():
    with pytest.raises(UnsupportedFormError):
        deviation_indicator(presets.transient_dephasing(canonical=False), 1.0)
    with pytest.raises(UnsupportedFormError):
        coarse_bound(presets.anti_dephasing(canonical=False), 1.0)
    with pytest.raises(StructuralError):
        deviation_indicator(presets.anti_dephasing(), 0.0)


@pytest.mark.parametrize("factory", [presets.transient_dephasing, presets.anti_dephasing,
                                     lambda: presets.pauli_channels(0.1, 0.4, 0.8),
                                     lambda: random_canonical_spec(3, np.random.default_rng(2)),
                                     lambda: random_periodic_lgks_spec(3, np.random.default_rng(3))])
def test_coarse_bound_identity(factory):
    spec = factory()
    T = 7.0
    total_rate = -volume_rate(spec, T)
    assert coarse_bound(spec, T) == pytest.approx(total_rate / spec.d + deviation_indicator(spec, T)[1], abs=1e-8)


def test_deviation_zero_iff_lgks():
    for spec in (random_canonical_spec(2, np.random.default_rng(k)) for k in range(10)):
        zero = deviation_indicator(spec, 2.0)[0] == 0.0
        assert zero == lgks_sign_test(spec, 2.0).holds
