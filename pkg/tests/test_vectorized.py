import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st

from conftest import brute_superoperator, random_matrix
from qme import presets
from qme.errors import IntegrationError, StructuralError
from qme.generators import GeneratorSpec, apply_generator, generator_trace
from qme.presets import SIGMA_1, SIGMA_2, SIGMA_3
from qme.sampling import random_canonical_spec, random_periodic_lgks_spec
from qme.vectorized import (Propagator, build_superoperator, hermitian_basis, log_det, log_det_propagator,
                            pauli_transfer_matrix, propagate, reshape, time_ordered_exp, unreshape,
                            volume_rate)

I2 = np.eye(2)


# --- reshaping ------------------------------------------------------------------

def test_reshape_stacks_rows():
    np.testing.assert_array_equal(reshape(np.array([[1, 2], [3, 4]])), [1, 2, 3, 4])
    np.testing.assert_array_equal(reshape(I2), [1, 0, 0, 1])


def test_reshape_round_trip_and_norm(rng):
    O = random_matrix(3, rng)
    v = reshape(O)
    np.testing.assert_array_equal(unreshape(v), O)
    assert np.linalg.norm(v) == pytest.approx(np.linalg.norm(O, "fro"))
    P = random_matrix(3, rng)
    np.testing.assert_allclose(reshape(2 * O - 1j * P), 2 * v - 1j * reshape(P))


def test_reshape_errors():
    with pytest.raises(StructuralError):
        unreshape(np.zeros(5))
    with pytest.raises(StructuralError):
        reshape(np.zeros((2, 3)))


def test_row_stacking_identity(rng):
    A, O, B = (random_matrix(3, rng) for _ in range(3))
    np.testing.assert_allclose(reshape(A @ O @ B), np.kron(A, B.T) @ reshape(O), atol=1e-12)


def test_hermitian_basis_orthonormal():
    for d in (2, 3, 4):
        B = hermitian_basis(d)
        G = np.einsum("iab,jab->ij", B.conj(), B)
        np.testing.assert_allclose(G, np.eye(d * d), atol=1e-14)
        assert np.abs(B - B.conj().transpose(0, 2, 1)).max() == 0
    np.testing.assert_allclose(hermitian_basis(2) * math.sqrt(2), np.stack([I2, SIGMA_1, SIGMA_2, SIGMA_3]))


# --- superoperator -----------------------------------------------------------------

@pytest.mark.parametrize("r", [(0.0, 0.0, 1.0), (0.3, 0.7, 1.1), (2.0, -0.5, 0.25)])
def test_pauli_superoperator_matches_block_form(r):
    r1, r2, r3 = r
    R = r1 + r2 + r3
    expected = 0.5 * np.block([[r3 * SIGMA_3 - R * I2, r1 * SIGMA_1 + 1j * r2 * SIGMA_2],
                               [r1 * SIGMA_1 - 1j * r2 * SIGMA_2, -r3 * SIGMA_3 - R * I2]])
    np.testing.assert_allclose(build_superoperator(presets.pauli_channels(*r), 0.0), expected, atol=1e-15)


def test_zero_superoperator():
    assert not build_superoperator(presets.zero_generator(3), 0.0).any()


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([2, 3, 4]))
def test_superoperator_matches_generator(seed, d):
    rng = np.random.default_rng(seed)
    spec = random_canonical_spec(d, rng)
    S = build_superoperator(spec, 0.0)
    np.testing.assert_allclose(S, brute_superoperator(spec, 0.0), atol=1e-12)
    assert np.trace(S).real == pytest.approx(generator_trace(spec, 0.0), abs=1e-10)


def test_time_dependent_superoperator():
    spec = presets.transient_dephasing()
    for t in (0.0, 0.8):
        np.testing.assert_allclose(build_superoperator(spec, t), brute_superoperator(spec, t), atol=1e-14)


# --- propagation --------------------------------------------------------------------

def test_zero_generator_propagates_to_identity():
    spec = presets.zero_generator(2)
    np.testing.assert_array_equal(propagate(spec, 0.0, 3.0), np.eye(4))
    np.testing.assert_array_equal(propagate(presets.transient_dephasing(), 1.0, 1.0), np.eye(4))


def test_propagate_rejects_backwards():
    with pytest.raises(StructuralError):
        propagate(presets.pauli_channels(), 1.0, 0.5)


@pytest.mark.parametrize("t", [0.5, 1.0, 2.0])
def test_anti_dephasing_transfer_matrix(t):
    F = pauli_transfer_matrix(propagate(presets.anti_dephasing(), 0.0, t))
    np.testing.assert_allclose(F, np.diag([1, 1, 1, math.exp(-2 * t)]), atol=1e-13)


@pytest.mark.parametrize("t", [0.3, 1.0, 3.0])
def test_transient_dephasing_transfer_matrix(t):
    F = pauli_transfer_matrix(propagate(presets.transient_dephasing(), 0.0, t))
    x = math.exp(-t) * math.cosh(t)
    np.testing.assert_allclose(F, np.diag([1, x, x, math.exp(-2 * t)]), atol=1e-11)


def test_transient_dephasing_non_canonical_form_agrees():
    a = propagate(presets.transient_dephasing(canonical=False), 0.0, 1.3)
    b = propagate(presets.transient_dephasing(), 0.0, 1.3)
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_ladder_populations_follow_lower_triangular_flow():
    # unequal raising/lowering rates drive x3 towards (c+ - c-)/(c+ + c-)
    spec = GeneratorSpec(np.zeros((2, 2)), ((presets.SIGMA_PLUS, 2.0), (presets.SIGMA_MINUS, 1.0)))
    t = 0.7
    F = pauli_transfer_matrix(propagate(spec, 0.0, t))
    assert F[3, 3] == pytest.approx(math.exp(-3 * t), abs=1e-13)
    assert F[3, 0] == pytest.approx((1 - math.exp(-3 * t)) / 3, abs=1e-13)


def test_autonomous_matches_scipy(rng):
    spec = random_canonical_spec(3, rng)
    np.testing.assert_allclose(propagate(spec, 0.0, 1.7),
                               scipy.linalg.expm(1.7 * build_superoperator(spec, 0.0)), atol=1e-11)


def test_time_dependent_against_fine_reference():
    spec = random_periodic_lgks_spec(2, np.random.default_rng(3), omega=2.0)
    F = propagate(spec, 0.0, 2.0)
    # composition of many short midpoint exponentials as an independent reference
    n = 4000
    ref = np.eye(4, dtype=complex)
    for k in range(n):
        ref = scipy.linalg.expm((2.0 / n) * build_superoperator(spec, (k + 0.5) * 2.0 / n)) @ ref
    np.testing.assert_allclose(F, ref, atol=1e-6)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([2, 3]))
def test_semigroup_property(seed, d):
    spec = random_periodic_lgks_spec(d, np.random.default_rng(seed))
    t1, t2, t3 = 0.0, 0.9, 2.3
    F31 = propagate(spec, t1, t3)
    F32F21 = propagate(spec, t2, t3) @ propagate(spec, t1, t2)
    assert np.linalg.norm(F31 - F32F21, 2) <= 10 * 1e-10 * max(1.0, np.linalg.norm(F31, 2)) * 10


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([2, 3]))
def test_trace_and_adjointness_preserved(seed, d):
    rng = np.random.default_rng(seed)
    spec = random_periodic_lgks_spec(d, rng)
    G = random_matrix(d, rng)
    rho = G @ G.conj().T
    rho /= np.trace(rho)
    out = unreshape(propagate(spec, 0.0, 20.0) @ reshape(rho))
    assert abs(np.trace(out) - 1) < 1e-8
    assert np.abs(out - out.conj().T).max() < 1e-8
    assert np.linalg.eigvalsh((out + out.conj().T) / 2).min() >= -1e-8


def test_propagator_steps_compose():
    spec = presets.transient_dephasing()
    prop = Propagator(spec)
    F = np.eye(4)
    for a, b in [(0.0, 0.4), (0.4, 1.0), (1.0, 2.5)]:
        F = prop.step(a, b) @ F
    np.testing.assert_allclose(F, propagate(spec, 0.0, 2.5), atol=1e-11)


def test_breakpoints_split_integration():
    from qme.generators import Tabulated

    spec = GeneratorSpec(np.zeros((2, 2)), ((SIGMA_3 / math.sqrt(2), Tabulated((0.0, 1.0, 2.0), (0.0, 2.0, 0.0))),))
    # integral of the hat function is 2, so the coherence decays by exp(-2)
    F = pauli_transfer_matrix(propagate(spec, 0.0, 2.0))
    assert F[1, 1] == pytest.approx(math.exp(-2.0), abs=1e-11)


def test_integration_failure_is_reported():
    spec = GeneratorSpec(np.zeros((2, 2)), ((SIGMA_3 / math.sqrt(2), "exp(t*t*t)"),))
    with pytest.raises(IntegrationError) as info:
        propagate(spec, 0.0, 10.0, max_steps=50)
    assert info.value.operation == "vectorized.propagate"


def test_time_ordered_exp_non_commuting():
    A = np.array([[0.0, 1.0], [0.0, 0.0]])
    B = np.array([[0.0, 0.0], [1.0, 0.0]])
    # piecewise constant: A on [0,1), B on [1,2]
    F = time_ordered_exp(lambda t: A if t < 1 else B, 0.0, 2.0, breakpoints=(1.0,))
    np.testing.assert_allclose(F, scipy.linalg.expm(B) @ scipy.linalg.expm(A), atol=1e-12)


# --- transfer matrices and volume ---------------------------------------------------

def test_transfer_matrix_identity():
    np.testing.assert_allclose(pauli_transfer_matrix(np.eye(9)), np.eye(9), atol=1e-15)


def test_transfer_matrix_first_row(rng):
    spec = random_canonical_spec(3, rng)
    T = pauli_transfer_matrix(propagate(spec, 0.0, 0.8))
    np.testing.assert_allclose(T[0], np.eye(9)[0], atol=1e-12)


def test_transfer_matrix_rejects_bad_shape():
    with pytest.raises(StructuralError):
        pauli_transfer_matrix(np.eye(5))


@pytest.mark.parametrize("r", [(0.0, 0.0, 1.0), (0.5, 1.0, 0.25)])
def test_volume_rate_pauli(r):
    assert volume_rate(presets.pauli_channels(*r), 7.0) == pytest.approx(-2 * sum(r), abs=1e-14)


def test_volume_rate_without_jumps(rng):
    from qme.sampling import random_hermitian

    assert volume_rate(GeneratorSpec(random_hermitian(2, rng), ()), 3.0) == 0.0


@pytest.mark.parametrize("T", [1.0, 10.0, 60.0])
def test_volume_rate_transient_dephasing(T):
    analytic = -2 - (2 / T) * (T - math.log(math.cosh(T)))
    assert volume_rate(presets.transient_dephasing(), T) == pytest.approx(analytic, rel=1e-10)
    assert log_det_propagator(presets.transient_dephasing(), T) / T == pytest.approx(analytic, rel=1e-6)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([2, 3]), st.floats(1.0, 20.0))
def test_log_det_identity(seed, d, t):
    spec = random_periodic_lgks_spec(d, np.random.default_rng(seed))
    integral = volume_rate(spec, t) * t
    assert log_det_propagator(spec, t) == pytest.approx(integral, rel=1e-6)


def test_log_det_singular():
    assert log_det(np.zeros((3, 3))) == -np.inf
