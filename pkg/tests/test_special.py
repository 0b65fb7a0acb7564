from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from cqed_backflow.special import X_MAX, bessel_j, j1_over_x

mpmath.mp.dps = 40


def _series_oracle_j0(x: Fraction, terms=60):
    # exact rational partial sums of sum (-x^2/4)^k / (k!)^2
    total, term = Fraction(0), Fraction(1)
    q = -x * x / 4
    for k in range(terms):
        total += term
        term = term * q / ((k + 1) ** 2)
    return total


def _envelope(x):
    return min(1.0, np.sqrt(2.0 / (np.pi * max(x, 1e-300))))


def _check_against_mpmath(order, x):
    ref = float(mpmath.besselj(order, mpmath.mpf(x)))
    got = bessel_j(order, x)
    env = _envelope(x)
    if abs(ref) >= 1e-2 * env:
        assert abs(got - ref) <= 1e-12 * abs(ref), (order, x, got, ref)
    else:
        # next to a zero only an absolute bound on the scale of the envelope is meaningful
        assert abs(got - ref) <= 1e-14 * env, (order, x, got, ref)


def test_trivial_values():
    assert bessel_j(0, 0.0) == 1.0
    assert bessel_j(1, 0.0) == 0.0


def test_j0_of_one_matches_power_series():
    oracle = float(_series_oracle_j0(Fraction(1)))
    assert oracle == pytest.approx(0.76519768655796655, rel=0, abs=1e-17)
    assert bessel_j(0, 1.0) == pytest.approx(oracle, rel=1e-15)


@pytest.mark.parametrize("order", [0, 1])
def test_fixed_points_across_all_regimes(order):
    xs = np.concatenate([np.linspace(0, 2, 21), np.linspace(2.0001, 25, 60),
                         np.geomspace(25.01, X_MAX, 80)])
    for x in xs:
        _check_against_mpmath(order, float(x))


@given(st.sampled_from([0, 1]), st.floats(min_value=0.0, max_value=X_MAX))
def test_random_points_against_mpmath(order, x):
    _check_against_mpmath(order, x)


def test_vectorised_matches_scalar():
    xs = np.array([0.0, 0.5, 3.0, 17.0, 30.0, 900.0])
    vec = bessel_j(0, xs)
    assert vec.shape == xs.shape
    assert np.array_equal(vec, np.array([bessel_j(0, float(x)) for x in xs]))


@pytest.mark.parametrize("bad", [-1e-9, X_MAX * 1.0001, float("nan"), float("inf")])
def test_domain_errors(bad):
    with pytest.raises(ValueError):
        bessel_j(0, bad)


def test_order_restricted():
    with pytest.raises(ValueError):
        bessel_j(2, 1.0)


def test_j1_over_x_limit_and_continuity():
    assert j1_over_x(0.0) == 0.5
    below, above = j1_over_x(0.99999e-4), j1_over_x(1.00001e-4)
    assert abs(below - above) < 1e-12
    x = 0.37
    assert j1_over_x(x) == pytest.approx(float(mpmath.besselj(1, x)) / x, rel=1e-14)
