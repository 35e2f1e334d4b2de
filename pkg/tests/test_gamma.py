import cmath
import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from foxkernel.gamma import PoleError, gamma, log_gamma, reciprocal_gamma, sinpi

# Reference values from mpmath at 30 digits.
GAMMA_REF = [
    (0.5, 1.772453850905516 + 0j),
    (3.7, 4.170651783796604 + 0j),
    (-2.5, -0.9453087204829419 + 0j),
    (1 + 1j, 0.49801566811835607 - 0.15494982830181067j),
    (-3.3 + 2.1j, -0.0015514977601135212 - 0.000643468347883494j),
    (0.25 - 7j, 2.582003509403342e-05 + 1.3703869497676169e-06j),
    (20 + 30j, -1453876687.5534809 + 1163777777.8031573j),
    (-40.5 + 0.3j, -1.801691574228086e-49 - 3.66671813270796e-49j),
    (2 + 120j, -1.142990507017329e-79 - 4.374787983329278e-79j),
]

LOG_GAMMA_REF = [
    (0.5, 0.5723649429247001 + 0j),
    (-2.5, -0.056243716497674054 - 9.42477796076938j),
    (1 + 1j, -0.6509231993018564 - 0.3016403204675332j),
    (-3.3 + 2.1j, -6.389174680395129 - 9.031629528337078j),
    (0.25 - 7j, -10.562953339040002 - 6.230160500529651j),
    (20 + 30j, 21.345074493863446 + 96.71434768953618j),
    (-40.5 + 0.3j, -111.41923729517136 - 127.69121706535712j),
    (2 + 120j, -180.39534834699322 + 456.8461760375457j),
    (-150.3 + 5j, -620.3118045696892 - 448.6714749064734j),
    (300 - 200j, 1346.6682471146933 - 1153.6356245011984j),
]


@pytest.mark.parametrize("z, expected", GAMMA_REF)
def test_gamma_reference_values(z, expected):
    assert abs(gamma(z) - expected) <= 1e-12 * abs(expected)


@pytest.mark.parametrize("z, expected", LOG_GAMMA_REF)
def test_log_gamma_principal_branch(z, expected):
    assert abs(log_gamma(z) - expected) <= 1e-13 * max(1.0, abs(expected))


def test_integers_are_factorials():
    n = np.arange(1, 20)
    expected = np.array([math.factorial(k - 1) for k in n], dtype=float)
    np.testing.assert_allclose(gamma(n).real, expected, rtol=1e-13)


@pytest.mark.parametrize("pole", [0, -1, -7, -30])
def test_poles_raise(pole):
    with pytest.raises(PoleError):
        gamma(pole)
    with pytest.raises(PoleError):
        log_gamma(pole + 1e-14)


@pytest.mark.parametrize("pole", [0, -1, -7, -30])
def test_reciprocal_vanishes_at_poles(pole):
    assert reciprocal_gamma(pole) == 0


def test_near_pole_is_large_not_an_error():
    # 1e-9 away from -3 is well outside the pole tolerance
    val = gamma(-3 + 1e-9)
    assert abs(val) > 1e7


def test_scalar_and_array_shapes():
    assert isinstance(gamma(2.5), complex)
    arr = gamma(np.full((3, 4), 1.5 + 0.5j))
    assert arr.shape == (3, 4)
    assert np.allclose(arr, gamma(1.5 + 0.5j), rtol=0, atol=0)


def test_large_imaginary_part_does_not_overflow():
    vals = gamma(np.array([0.3 + 300j, -5.5 + 400j]))
    assert np.all(np.isfinite(vals))
    assert np.all(np.abs(vals) < 1e-200)


def test_sinpi_reduces_large_arguments():
    assert abs(sinpi(1e6 + 0.5) - 1) < 1e-15
    assert sinpi(-4.0) == 0


complex_points = st.builds(
    complex,
    st.floats(-30, 30, allow_nan=False),
    st.floats(-30, 30, allow_nan=False),
)


def _away_from_poles(z, margin=1e-3):
    return not (z.real <= 0.5 and abs(z - round(z.real)) < margin)


@given(complex_points)
def test_recurrence(z):
    assume(_away_from_poles(z) and _away_from_poles(z + 1))
    lhs, rhs = gamma(z + 1), z * gamma(z)
    assert abs(lhs - rhs) <= 1e-12 * abs(lhs)


@given(complex_points)
def test_reflection(z):
    assume(_away_from_poles(z) and _away_from_poles(1 - z))
    assume(abs(z.imag) < 20)
    lhs = gamma(z) * gamma(1 - z)
    rhs = math.pi / sinpi(z)
    assert abs(lhs - rhs) <= 1e-11 * abs(rhs)


@given(complex_points)
def test_conjugate_symmetry(z):
    assume(_away_from_poles(z))
    assert gamma(z.conjugate()) == gamma(z).conjugate()


@given(complex_points)
def test_log_gamma_matches_gamma_up_to_branch(z):
    assume(_away_from_poles(z))
    g = gamma(z)
    assume(1e-300 < abs(g) < 1e300)
    diff = log_gamma(z) - cmath.log(g)
    turns = diff.imag / (2 * math.pi)
    assert abs(diff.real) <= 1e-11 * max(1.0, abs(log_gamma(z)))
    assert abs(turns - round(turns)) <= 1e-11 * max(1.0, abs(log_gamma(z)))


@given(complex_points)
def test_reciprocal_is_inverse(z):
    assume(_away_from_poles(z))
    g = gamma(z)
    assume(1e-290 < abs(g) < 1e290)
    assert abs(reciprocal_gamma(z) * g - 1) <= 1e-12


@given(st.floats(0.05, 60))
def test_positive_axis_is_real(x):
    assert log_gamma(x).imag == 0
    assert gamma(x).imag == 0
