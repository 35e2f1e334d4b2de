import cmath
import json
import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from foxkernel.errors import (
    DomainError,
    NotApplicableError,
    ParameterError,
    PoleError,
    PreconditionError,
    SeriesDivergenceError,
)
from foxkernel.foxh import (
    EXP_SET,
    HParams,
    SeriesControl,
    beta,
    check_poles_separated,
    chi,
    eval_contour,
    eval_series,
    evaluate,
    is_meijer_g,
    mu,
    series_is_complete,
    transform_invert,
    transform_laplace_lift,
    transform_power_shift,
    transform_reduce,
    transform_scale,
)
from foxkernel.gamma import gamma
from foxkernel.kernels import free_1d_params, laplace_1d_params

# Meijer G values from mpmath at 30 digits.
G11_22 = HParams(1, 1, ((0.4, 1), (0.9, 1)), ((0.2, 1), (0.6, 1)))
G11_22_REF = [
    (0.3, 0.5468515517159982),
    (2.0, -0.23004851067501328),
    (0.7 + 1.1j, -0.09029626564175937 + 0.19211928017613616j),
    (6.0, -0.08649917301784771),
]
G20_02 = HParams(2, 0, (), ((0.5, 1), (0, 1)))
G20_02_REF = [
    (0.5, 0.43091319216749663),
    (1.5, 0.15302946416956298),
    (4 + 2j, 0.0162947004661657 - 0.023866017523838372j),
]


def rel(a, b):
    return abs(a - b) / abs(b)


# --- parameter sets ---------------------------------------------------------


def test_params_accept_complex_triples():
    p = HParams(1, 1, ((0.5, 0.25, 1.0),), ((0, 1),))
    assert p.upper[0] == (0.5 + 0.25j, 1.0)
    assert (p.p, p.q) == (1, 1)


@pytest.mark.parametrize(
    "args",
    [
        (1, 2, ((1, 1),), ((0, 1),)),  # n > p
        (2, 0, (), ((0, 1),)),  # m > q
        (0, 0, (), ((0, 1),)),  # m + n == 0
        (1, 0, (), ((0, 0),)),  # zero slope
        (1, 0, (), ((0, -1),)),  # negative slope among the first m
        (1, 0, (), ((float("nan"), 1),)),
    ],
)
def test_invalid_params_rejected(args):
    with pytest.raises(ParameterError):
        HParams(*args)


def test_json_round_trip():
    p = HParams(1, 2, ((1, 1 / 1.5), (0.5 + 0.5j, -0.5)), ((1, 1), (0.5, 0.5)))
    text = p.to_json()
    assert HParams.from_json(text) == p
    assert json.loads(text)["upper"][1] == [0.5, 0.5, -0.5]


def test_from_dict_missing_key():
    with pytest.raises(ParameterError, match="lower|m"):
        HParams.from_dict({"n": 0, "lower": [[0, 0, 1]]})


def test_mu_and_beta_of_the_kernel_set():
    p = free_1d_params(1.5)
    assert mu(p) == pytest.approx(1 - 1 / 1.5)
    expected = (1 / 1.5) ** (1 / 1.5) * 0.5**0.5 * 1.0**-1 * 0.5**-0.5
    assert beta(p) == pytest.approx(expected)


def test_meijer_detection():
    assert is_meijer_g(G11_22)
    assert not is_meijer_g(free_1d_params(1.5))


def test_colliding_poles_detected():
    # Gamma(0 - s) and Gamma(1 - 2 + s) share the pole s = 0... and onwards.
    p = HParams(1, 1, ((2, 1),), ((0, 1),))
    assert not check_poles_separated(p)
    assert check_poles_separated(G11_22)
    with pytest.raises(PoleError):
        eval_series(0.5, p)


def test_chi_pole_and_value():
    assert chi(0.5, EXP_SET) == pytest.approx(gamma(-0.5))
    with pytest.raises(PoleError):
        chi(2.0, EXP_SET)


def test_chi_removable_singularity():
    # Gamma(-s) / Gamma(-s) is one everywhere, including at the common poles.
    p = HParams(1, 0, ((0, 1),), ((0, 1),))
    assert chi(3.0, p) == pytest.approx(1.0)


# --- residue series ---------------------------------------------------------


def test_series_errors():
    with pytest.raises(DomainError):
        eval_series(0.0, EXP_SET)
    with pytest.raises(NotApplicableError):
        eval_series(1.0, HParams(0, 1, ((0.5, 1),), ((0, 1),)))
    with pytest.raises(DomainError):
        eval_series(1.0, HParams(1, 1, ((0.5, 2),), ((0, 1),)))
    with pytest.raises(DomainError):
        # mu = 0 converges only inside |z| < 1/beta = 1
        eval_series(2.0, HParams(1, 1, ((0.5, 1),), ((0, 1),)))
    with pytest.raises(SeriesDivergenceError):
        eval_series(800.0, EXP_SET)


def test_series_control_validation():
    for kw in ({"tol": 0}, {"max_terms": 0}, {"underflow_floor": -1}):
        with pytest.raises(ParameterError):
            SeriesControl(**kw)


def test_series_reports_terms_and_shape():
    res = eval_series(np.array([[0.5, 1.0], [2.0, 3.0]]), EXP_SET)
    assert res.value.shape == (2, 2)
    assert np.all(res.converged)
    assert np.all(res.terms_used > 5)
    assert res.method == "series"


def test_max_terms_exhaustion_is_flagged():
    res = eval_series(5.0, EXP_SET, SeriesControl(max_terms=8))
    assert not res.converged


@pytest.mark.parametrize("z, expected", G11_22_REF[:1])
def test_meijer_series(z, expected):
    res = eval_series(z, G11_22)
    assert res.converged
    assert rel(res.value, expected) < 1e-12


@pytest.mark.parametrize("z, expected", G20_02_REF)
def test_two_pole_families(z, expected):
    res = eval_series(z, G20_02)
    assert rel(res.value, expected) < 1e-11


def test_closed_form_with_half_slope():
    # H^{1,0}_{0,1}[z | (0, 1/2)] = 2 exp(-z**2)
    z = np.array([0.3, 1.0, 2.0, 1.5 + 0.5j])
    res = eval_series(z, HParams(1, 0, (), ((0, 0.5),)))
    np.testing.assert_allclose(res.value, 2 * np.exp(-(z**2)), rtol=1e-11)


def test_binomial_closed_form_both_sides_of_unit_circle():
    # H^{1,1}_{1,1}[z | (a,1); (b,1)] = Gamma(1-a+b) z**b (1+z)**(a-b-1)
    a, b = 0.3, 0.2
    p = HParams(1, 1, ((a, 1),), ((b, 1),))
    z = np.array([0.2, 0.8, 1.7, 5.0, 2.0 + 1.0j])
    expected = gamma(1 - a + b) * z**b * (1 + z) ** (a - b - 1)
    res = evaluate(z, p)
    assert np.all(res.converged)
    np.testing.assert_allclose(res.value, expected, rtol=1e-10)
    assert list(res.method[:2]) == ["series", "series"]
    assert all(m == "contour" for m in res.method[2:])


exp_args = st.builds(
    lambda r, th: r * cmath.exp(1j * th), st.floats(0.01, 6.0), st.floats(-math.pi, math.pi)
)


@given(exp_args)
def test_exp_series_mixed_accuracy_inside_radius_six(z):
    val = eval_series(z, EXP_SET).value
    assert abs(val - cmath.exp(-z)) <= 1e-12 * max(1.0, abs(cmath.exp(-z)))


@given(st.floats(0.01, 10.0))
def test_exp_series_relative_accuracy_without_cancellation(r):
    # negative real axis: every term has the same sign
    assert abs(eval_series(-r, EXP_SET).value - math.exp(r)) <= 1e-13 * math.exp(r)


@given(st.builds(lambda r, th: r * cmath.exp(1j * th), st.floats(0.01, 10.0), st.floats(-math.pi, math.pi)))
def test_exp_series_error_bounded_by_conditioning(z):
    # Summing alternating terms of size up to e^{|z|} loses accuracy in
    # proportion to that size, not to |exp(-z)|.
    res = eval_series(z, EXP_SET)
    err = abs(res.value - cmath.exp(-z))
    assert err <= 1e-14 * math.exp(abs(z))
    assert err <= 2 * res.abs_error_estimate + 1e-15 * abs(res.value)


# --- contour ----------------------------------------------------------------


@pytest.mark.parametrize("z, expected", G20_02_REF)
def test_meijer_contour(z, expected):
    res = eval_contour(z, G20_02)
    assert res.converged
    assert rel(res.value, expected) < 1e-11


def test_contour_needs_exponential_decay():
    # Equal numerator and denominator slopes: the integrand only decays
    # algebraically along the line, and beyond |z| = 1 nothing applies.
    from foxkernel.errors import ContourError

    with pytest.raises(ContourError):
        evaluate(2.0, G11_22)


@pytest.mark.parametrize("alpha", [1.2, 1.5, 2.0])
def test_contour_and_series_agree(alpha):
    z = np.array([0.3, 1.0, 1.0 * np.exp(-0.5j * np.pi / alpha)])
    p = free_1d_params(alpha)
    s, c = eval_series(z, p), eval_contour(z, p)
    assert np.all(s.converged) and np.all(c.converged)
    np.testing.assert_allclose(c.value, s.value, rtol=1e-10)


def test_series_completeness():
    assert series_is_complete(free_1d_params(1.5))
    assert not series_is_complete(laplace_1d_params(1.5))
    # at alpha = 2 the extra poles are cancelled
    assert series_is_complete(laplace_1d_params(2.0))


def test_real_parameters_give_real_values_on_positive_axis():
    res = evaluate(np.array([0.5, 3.0, 40.0]), free_1d_params(1.5))
    assert np.all(res.value.imag == 0)


# --- identities -------------------------------------------------------------

alphas = st.floats(1.2, 2.0)
moderate = st.builds(
    lambda r, th: r * cmath.exp(1j * th), st.floats(0.2, 4.0), st.floats(-0.8, 0.8)
)


def close(a, b, tol=1e-8):
    return abs(a - b) <= tol * max(abs(a), abs(b))


@given(moderate, alphas, st.floats(0.1, 0.9), st.floats(0.3, 1.5))
def test_reduce_identity(z, alpha, a, slope):
    base = free_1d_params(alpha)
    padded = HParams(base.m, base.n + 1, ((a, slope),) + base.upper, base.lower + ((a, slope),))
    reduced = transform_reduce(padded)
    assert reduced == base
    assert close(evaluate(z, padded).value, evaluate(z, base).value)


def test_reduce_needs_matching_pair():
    with pytest.raises(NotApplicableError):
        transform_reduce(free_1d_params(1.5))


@given(st.floats(0.2, 4.0), st.floats(-1.0, 1.0), alphas)
def test_invert_identity(r, frac, alpha):
    # anywhere in the closed sector |arg z| <= pi / (2 alpha)
    z = r * cmath.exp(1j * frac * math.pi / (2 * alpha))
    p = free_1d_params(alpha)
    assert close(evaluate(z, p).value, evaluate(1 / z, transform_invert(p)).value)


def test_invert_is_an_involution():
    p = free_1d_params(1.7)
    assert transform_invert(transform_invert(p)) == p


@given(moderate, alphas, st.floats(0.5, 2.0))
def test_scale_identity(z, alpha, k):
    p = free_1d_params(alpha)
    assert close(evaluate(z, p).value / k, evaluate(z**k, transform_scale(p, k)).value)


def test_scale_rejects_nonpositive():
    with pytest.raises(ParameterError):
        transform_scale(EXP_SET, 0)


@given(moderate, alphas, st.floats(-0.5, 0.5))
def test_power_shift_identity(z, alpha, shift):
    p = free_1d_params(alpha)
    assert close(z**shift * evaluate(z, p).value, evaluate(z, transform_power_shift(p, shift)).value)


@given(
    st.builds(lambda r, th: r * cmath.exp(1j * th), st.floats(0.1, 3.0), st.floats(-1.2, 1.2)),
    st.floats(0.5, 2.5),
)
def test_laplace_lift_of_exponential(w, a):
    # integral x**(a-1) e^{-x} e^{-w x} dx = Gamma(a) / (1 + w)**a
    lifted = transform_laplace_lift(EXP_SET, a, 1.0)
    assert close(evaluate(w, lifted).value, gamma(a) / (1 + w) ** a)


def test_laplace_lift_precondition():
    with pytest.raises(PreconditionError):
        transform_laplace_lift(EXP_SET, -0.5, 1.0)
    with pytest.raises(PreconditionError):
        transform_laplace_lift(HParams(0, 1, ((0.5, 1),), ((0, 1),)), 1.0, 1.0)
