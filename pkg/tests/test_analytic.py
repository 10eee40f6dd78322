import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bubble_bs.analytic import (ContractSpec, bs_derivative, bs_price, bs_scaled_derivative,
                                price_dilation, price_effective_rate, price_strike_shift,
                                shifted_strike)
from bubble_bs.errors import DegenerateTime, OutOfRange, StrikeShiftUnsupported, ValidationError
from bubble_bs.market import BubbleProfile, MarketParams

from helpers import cancelling_profile, mp_price, profile_with_A

# 40-digit mpmath evaluations of the textbook call formula at S = K = 5, tau = 1, r = 0.1, sigma = 0.3
ATM_CALL = 0.8367066791193328851885818326335237619125
ATM_DELTA = 0.6855704621388224266274372626903930173287
ATM_GAMMA = 0.2366414395212913216562482677842092196478

S_GRID = np.linspace(2.5, 10.0, 25)


def test_atm_call(call):
    assert bs_price(call, 5.0, 1.0, 0.1, 0.3) == pytest.approx(ATM_CALL, rel=1e-14)
    assert bs_derivative(1, call, 5.0, 1.0, 0.1, 0.3) == pytest.approx(ATM_DELTA, rel=1e-14)
    assert bs_derivative(2, call, 5.0, 1.0, 0.1, 0.3) == pytest.approx(ATM_GAMMA, rel=1e-14)
    assert bs_derivative(0, call, 5.0, 1.0, 0.1, 0.3) == bs_price(call, 5.0, 1.0, 0.1, 0.3)


def test_trivial_points(call, put):
    assert bs_price(call, 7.0, 0.0, 0.1, 0.3) == 2.0
    assert bs_price(put, 3.0, 0.0, 0.1, 0.3) == 2.0
    assert bs_price(call, 0.0, 1.0, 0.1, 0.3) == 0.0
    assert bs_price(put, 0.0, 1.0, 0.1, 0.3) == pytest.approx(5 * math.exp(-0.1), rel=1e-15)


@pytest.mark.parametrize("kind", ["call", "put"])
@pytest.mark.parametrize("tau", [0.25, 1.0])
def test_price_against_mpmath(kind, tau):
    c = ContractSpec(kind, 5.0)
    with mpmath.workdps(30):
        exact = np.array([float(mp_price(kind, s, 5.0, tau, 0.1, 0.3)) for s in S_GRID])
    got = bs_price(c, S_GRID, tau, 0.1, 0.3)
    assert np.allclose(got, exact, rtol=1e-12, atol=1e-15)


def test_call_bounds(call):
    for tau in (0.1, 1.0, 3.0):
        v = bs_price(call, S_GRID, tau, 0.1, 0.3)
        assert np.all(v >= np.maximum(0, S_GRID - 5 * math.exp(-0.1 * tau)) - 1e-14)
        assert np.all(v <= S_GRID)


@pytest.mark.parametrize("kind", ["call", "put"])
@pytest.mark.parametrize("tau", [0.25, 1.0])
@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_ladder_against_central_differences(kind, tau, n):
    # one central difference of the (n-1)-th derivative, h = 1e-4 S; order 0 is the plain price
    c = ContractSpec(kind, 5.0)
    h = 1e-4 * S_GRID
    lower = lambda s: bs_derivative(n - 1, c, s, tau, 0.1, 0.3)
    fd = (lower(S_GRID + h) - lower(S_GRID - h)) / (2 * h)
    an = bs_derivative(n, c, S_GRID, tau, 0.1, 0.3)
    # odd orders cross zero inside the grid; measure relative to the grid's scale there
    scale = np.maximum(np.abs(an), 1e-3 * np.max(np.abs(an)))
    assert np.max(np.abs(fd - an) / scale) <= 1e-5


@pytest.mark.parametrize("n", [2, 3, 5, 8])
@pytest.mark.parametrize("S", [3.0, 5.0, 8.5])
def test_ladder_against_mpmath_diff(call, n, S):
    with mpmath.workdps(40):
        exact = mpmath.diff(lambda s: mp_price("call", s, 5.0, 0.5, 0.1, 0.3), mpmath.mpf(S), n)
    assert bs_derivative(n, call, S, 0.5, 0.1, 0.3) == pytest.approx(float(exact), rel=1e-10, abs=1e-13)


def test_high_orders_and_scaling(call, put):
    for n in (2, 10, 30, 64):
        d = bs_derivative(n, call, 5.5, 1.0, 0.1, 0.3)
        assert math.isfinite(d)
        assert bs_derivative(n, put, 5.5, 1.0, 0.1, 0.3) == d
        assert bs_scaled_derivative(n, call, 5.5, 1.0, 0.1, 0.3) == pytest.approx(5.5 ** n * d, rel=1e-12)
    assert bs_derivative(1, put, 5.0, 1.0, 0.1, 0.3) == pytest.approx(ATM_DELTA - 1, rel=1e-14)
    assert bs_derivative(3, call, 0.0, 1.0, 0.1, 0.3) == 0.0


def test_derivative_errors(call):
    with pytest.raises(DegenerateTime):
        bs_derivative(1, call, 5.0, 0.0, 0.1, 0.3)
    with pytest.raises(OutOfRange):
        bs_derivative(65, call, 5.0, 1.0, 0.1, 0.3)
    with pytest.raises(OutOfRange):
        bs_price(call, -1.0, 1.0, 0.1, 0.3)
    with pytest.raises(ValidationError):
        ContractSpec("straddle", 5.0)
    with pytest.raises(ValidationError):
        ContractSpec.call(0.0)


def test_effective_rate_examples(call, params):
    zero = BubbleProfile.zero(1.0)
    assert price_effective_rate(call, 5.0, 1.0, zero, params) == bs_price(call, 5.0, 1.0, 0.1, 0.3)
    single = BubbleProfile.from_triples(1.0, [(0.4, 0.5, 0.285)])
    assert price_effective_rate(call, 5.0, 1.0, single, params) == pytest.approx(
        bs_price(call, 5.0, 1.0, -0.09, 0.3), rel=1e-13)


def test_piecewise_solution(call, params, fig1_profile):
    # r, then r + v0 (tau - tau1)/tau inside the first bubble, then the accumulated level after it
    v0, v1 = -1.9, 1.8964071856287426
    cases = [
        (0.3, 0.1),
        (0.45, 0.1 + v0 * (0.45 - 0.4) / 0.45),
        (0.55, 0.1 + (0.1 * v0 + v1 * 0.05) / 0.55),
        (0.8, 0.1 + 0.1 * (v0 + v1) / 0.8),
    ]
    for tau, rate in cases:
        assert price_effective_rate(call, S_GRID, tau, fig1_profile, params) == pytest.approx(
            bs_price(call, S_GRID, tau, rate, 0.3), rel=1e-11)


def test_strike_shift_examples(call, put, params):
    prof = profile_with_A(0.1, params)
    assert shifted_strike(call, 1.0, prof, params) == pytest.approx(4.524187090179798, rel=1e-12)
    assert price_strike_shift(call, 5.0, 1.0, BubbleProfile.zero(1.0), params) == bs_price(call, 5.0, 1.0, 0.1, 0.3)
    with pytest.raises(StrikeShiftUnsupported):
        price_strike_shift(put, 5.0, 1.0, prof, params)
    # huge positive arbitrage number: zero-strike call, worth S
    big = profile_with_A(40.0, params)
    assert price_strike_shift(call, 5.0, 1.0, big, params) == pytest.approx(5.0, rel=1e-12)
    assert price_strike_shift(call, 5.0, 1.0, profile_with_A(-40.0, params), params) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("A", [-0.3, -0.19, 0.0, 0.05, 0.3, 1.5])
@pytest.mark.parametrize("kind", ["call", "put"])
def test_three_way_agreement(A, kind, params):
    c = ContractSpec(kind, 5.0)
    prof = profile_with_A(A, params)
    eff = price_effective_rate(c, S_GRID, 1.0, prof, params)
    dil = price_dilation(c, S_GRID, 1.0, prof, params)
    assert np.max(np.abs(eff - dil) / np.abs(eff)) <= 1e-12
    if kind == "call":
        ks = price_strike_shift(c, S_GRID, 1.0, prof, params)
        assert np.max(np.abs(ks - eff) / np.abs(eff)) <= 1e-12


def test_dilation_identity_at_zero(call, params):
    assert price_dilation(call, 5.0, 1.0, BubbleProfile.zero(1.0), params) == bs_price(call, 5.0, 1.0, 0.1, 0.3)


def test_exact_cancellation(call, put, params):
    prof = cancelling_profile(params)
    for c in (call, put):
        free = bs_price(c, S_GRID, 1.0, 0.1, 0.3)
        for fn in (price_effective_rate, price_dilation):
            assert np.max(np.abs(fn(c, S_GRID, 1.0, prof, params) - free) / free) <= 1e-12


def test_call_monotone_in_arbitrage_number(call, params):
    values = [price_strike_shift(call, S_GRID, 1.0, profile_with_A(A, params), params)
              for A in np.linspace(-1.0, 1.0, 21)]
    assert np.all(np.diff(np.array(values), axis=0) >= 0)


@settings(max_examples=40, deadline=None)
@given(st.floats(-1, 1), st.floats(0.5, 2.0), st.floats(0.05, 2.0), st.sampled_from(["call", "put"]))
def test_effective_rate_equals_dilation_property(A, moneyness, tau, kind):
    p = MarketParams(0.1, 0.2, 0.3)
    c = ContractSpec(kind, 5.0)
    prof = profile_with_A(A, p, T=tau)
    eff = price_effective_rate(c, 5.0 * moneyness, tau, prof, p)
    dil = price_dilation(c, 5.0 * moneyness, tau, prof, p)
    assert dil == pytest.approx(eff, rel=1e-10, abs=1e-14)
