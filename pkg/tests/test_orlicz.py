import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from orlicz_bounds.errors import NonConvexInput, OverflowRange
from orlicz_bounds.orlicz import (EmpiricalSample, OrliczFunction, conjugate, conjugate_exponent,
                                  inverse, luxemburg_norm, power, secant_concave, secant_convex,
                                  young_gap)

exponents = st.floats(1.2, 8.0)
positives = st.floats(1e-3, 1e3)


@given(exponents, positives)
@settings(max_examples=60, deadline=None)
def test_numeric_conjugate_of_power_is_power(p, x):
    q = conjugate_exponent(p)
    numeric = conjugate(power(p), numeric=True)
    assert float(numeric(x)) == pytest.approx(x ** q / q, rel=1e-8)


def test_numeric_conjugate_of_exp_type(exp_phi):
    numeric = conjugate(exp_phi, numeric=True)
    xs = np.logspace(-2, 2, 20)
    assert np.allclose(numeric(xs), exp_phi.conjugate(xs), rtol=1e-8)


def test_square_half_is_self_conjugate():
    phi = power(2.0)
    xs = np.logspace(-3, 3, 30)
    assert np.allclose(conjugate(phi, numeric=True)(xs), phi(xs), rtol=1e-9)


@given(exponents, positives, positives)
@settings(max_examples=80, deadline=None)
def test_young_gap_nonnegative(p, x, y):
    phi = power(p)
    scale = float(phi(x)) + float(phi.conjugate(y)) + x * y
    assert young_gap(phi, x, y) >= -1e-12 * scale


@given(exponents, positives)
@settings(max_examples=40, deadline=None)
def test_young_equality_at_derivative(p, x):
    phi = power(p)
    y = float(phi.derivative(x))
    scale = float(phi(x)) + x * y
    assert abs(young_gap(phi, x, y)) <= 1e-12 * scale


@given(exponents, st.floats(1e-6, 1e6))
@settings(max_examples=60, deadline=None)
def test_inverse_round_trip(p, y):
    phi = power(p)
    assert float(phi(inverse(phi, y))) == pytest.approx(y, rel=1e-12)
    assert inverse(phi, y, numeric=True) == pytest.approx(inverse(phi, y), rel=1e-12)


def test_inverse_at_zero_and_negative():
    assert inverse(power(3.0), 0.0) == 0.0
    with pytest.raises(ValueError):
        inverse(power(3.0), -1.0)


def _builtin_and_user(exp_phi):
    return [power(p) for p in (1.5, 2.0, 3.0, 6.0)] + [exp_phi]


def test_product_of_inverses_between_x_and_2x(exp_phi):
    xs = np.logspace(-4, 4, 50)
    for phi in _builtin_and_user(exp_phi):
        prod = inverse(phi, xs, numeric=True) * inverse(phi.conjugate, xs, numeric=True)
        assert np.all(prod >= xs * (1 - 1e-10)), phi
        assert np.all(prod <= 2 * xs * (1 + 1e-10)), phi


def test_conjugate_sandwich(exp_phi):
    xs = np.logspace(-3, 3, 50)
    for phi in _builtin_and_user(exp_phi):
        psi = np.asarray(phi.conjugate(xs))
        assert np.all(phi(psi / xs) <= psi * (1 + 1e-10))
        assert np.all(psi <= phi(2 * psi / xs) * (1 + 1e-10))


def test_reciprocal_transforms_shape(exp_phi):
    xs = np.logspace(-2, 2, 60)
    for phi in _builtin_and_user(exp_phi):
        for fn in (phi, phi.conjugate):
            a = xs * fn(1.0 / xs)
            assert secant_convex(xs, a) and np.all(np.diff(a) < 0)
            b = xs * inverse(fn, 1.0 / xs, numeric=True)
            assert secant_concave(xs, b) and np.all(np.diff(b) > 0)


def test_rejects_non_orlicz_inputs():
    with pytest.raises(NonConvexInput):
        OrliczFunction(np.sqrt, lambda x: 0.5 / np.sqrt(x))
    with pytest.raises(NonConvexInput):
        OrliczFunction(lambda x: x * x + 1.0, lambda x: 2 * x)
    with pytest.raises(NonConvexInput):
        OrliczFunction(lambda x: -x, lambda x: -np.ones_like(x))


def test_linear_growth_conjugate_overflows():
    huber = OrliczFunction(lambda x: np.where(x < 1, 0.5 * x * x, x - 0.5),
                           lambda x: np.minimum(x, 1.0), name="huber")
    psi = conjugate(huber, numeric=True)
    assert float(psi(0.5)) == pytest.approx(0.125, rel=1e-10)
    with pytest.raises(OverflowRange):
        psi(2.0)


def test_luxemburg_two_point_oracle():
    # (1/2)(1 + 9) / (2 c^2) = 1
    assert luxemburg_norm(power(2.0), [1.0, 3.0]) == pytest.approx(math.sqrt(10) / 2, rel=1e-9)


@given(exponents, st.floats(1e-3, 1e3))
@settings(max_examples=40, deadline=None)
def test_luxemburg_point_mass(p, v):
    phi = power(p)
    assert luxemburg_norm(phi, [v]) == pytest.approx(v / inverse(phi, 1.0), rel=1e-9)


@given(st.lists(st.floats(-100, 100), min_size=1, max_size=20), st.floats(0.01, 100),
       exponents)
@settings(max_examples=60, deadline=None)
def test_luxemburg_homogeneous(values, lam, p):
    phi = power(p)
    a = luxemburg_norm(phi, values)
    assert luxemburg_norm(phi, np.asarray(values) * lam) == pytest.approx(lam * a, rel=1e-8, abs=1e-300)


@given(st.lists(st.tuples(st.floats(-10, 10), st.floats(-10, 10)), min_size=1, max_size=15),
       exponents)
@settings(max_examples=60, deadline=None)
def test_luxemburg_triangle(pairs, p):
    phi = power(p)
    u = np.array([a for a, _ in pairs])
    v = np.array([b for _, b in pairs])
    assert luxemburg_norm(phi, u + v) <= (luxemburg_norm(phi, u) + luxemburg_norm(phi, v)) * (1 + 1e-8) + 1e-300


def test_weighted_sample_and_validation():
    w = EmpiricalSample(np.array([1.0, 3.0]), np.array([0.5, 0.5]))
    assert luxemburg_norm(power(2.0), w) == pytest.approx(math.sqrt(10) / 2, rel=1e-9)
    with pytest.raises(ValueError):
        EmpiricalSample(np.array([1.0]), np.array([0.3]))
    with pytest.raises(ValueError):
        EmpiricalSample(np.array([]))
    assert luxemburg_norm(power(2.0), [0.0, 0.0]) == 0.0
