from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from bubble_bs.errors import OutOfRange, PoleProximity, ValidationError
from bubble_bs.market import (BubbleProfile, BubbleSegment, MarketParams, amplitude_for_potential,
                              arbitrage_number, effective_rate, potential_of_amplitude,
                              potential_profile)


def exact_potential(r, alpha, sigma, f):
    r, alpha, sigma, f = (Fraction(str(x)) for x in (r, alpha, sigma, f))
    return (r - alpha) * f / (sigma - f)


def test_zero_bubble_has_zero_potential(params):
    assert potential_of_amplitude(0.0, params) == 0.0
    assert potential_of_amplitude(0.0, MarketParams(0.03, -0.5, 2.0)) == 0.0


@pytest.mark.parametrize("f, expected", [
    (0.285, -1.9),
    (0.3167, 1.8964071856287426),
])
def test_figure1_levels(params, f, expected):
    assert float(exact_potential(0.1, 0.2, 0.3, f)) == pytest.approx(expected, rel=1e-15)
    assert potential_of_amplitude(f, params) == pytest.approx(expected, rel=1e-12)


def test_pole_guard(params):
    with pytest.raises(PoleProximity):
        potential_of_amplitude(0.3, params)
    with pytest.raises(PoleProximity):
        potential_of_amplitude(0.3 + 5e-10, params)
    potential_of_amplitude(0.3 + 2e-9, params)


def test_potential_profile(params, fig1_profile):
    assert potential_profile(BubbleProfile.zero(1.0), params).pieces == ()
    pot = potential_profile(fig1_profile, params)
    assert [(a, b) for a, b, _ in pot.pieces] == [(0.4, 0.5), (0.5, 0.6)]
    assert pot.pieces[0][2] == pytest.approx(-1.9, rel=1e-12)
    assert pot.pieces[1][2] == pytest.approx(1.8964071856287426, rel=1e-12)
    assert pot.level_at(0.2) == 0.0 and pot.level_at(0.8) == 0.0


def test_pole_error_names_segment(params):
    prof = BubbleProfile.from_triples(1.0, [(0.1, 0.2, 0.1), (0.3, 0.4, 0.3)])
    with pytest.raises(PoleProximity) as info:
        potential_profile(prof, params)
    assert info.value.segment_index == 1
    assert info.value.issues[0].path == "segments[1].amplitude"


def test_positive_bubble_when_r_above_alpha():
    p = MarketParams(0.2, 0.1, 0.3)
    prof = BubbleProfile.from_triples(1.0, [(0.2, 0.4, 0.25)])
    assert potential_profile(prof, p).pieces[0][2] > 0


def test_arbitrage_number_examples(params, fig1_profile):
    assert arbitrage_number(BubbleProfile.zero(1.0), params, 0.7) == 0.0
    single = BubbleProfile.from_triples(1.0, [(0.4, 0.5, 0.285)])
    assert arbitrage_number(single, params, 1.0) == pytest.approx(-0.19, rel=1e-12)
    exact = Fraction(1, 10) * (exact_potential(0.1, 0.2, 0.3, 0.285) + exact_potential(0.1, 0.2, 0.3, 0.3167))
    assert arbitrage_number(fig1_profile, params, 1.0) == pytest.approx(float(exact), rel=1e-9)
    assert arbitrage_number(fig1_profile, params, 1.0) == pytest.approx(-3.59e-4, abs=1e-6)
    # mid-segment
    assert arbitrage_number(single, params, 0.45) == pytest.approx(-0.095, rel=1e-12)


def test_arbitrage_number_range(params, fig1_profile):
    with pytest.raises(OutOfRange):
        arbitrage_number(fig1_profile, params, 1.5)
    with pytest.raises(OutOfRange):
        arbitrage_number(fig1_profile, params, -0.1)


def test_effective_rate(params, fig1_profile):
    assert effective_rate(BubbleProfile.zero(1.0), params, 0.5) == params.r
    single = BubbleProfile.from_triples(1.0, [(0.4, 0.5, 0.285)])
    assert effective_rate(single, params, 1.0) == pytest.approx(-0.09, rel=1e-12)
    # inside the first segment: r + v0 (tau - tau1) / tau
    tau = 0.47
    assert effective_rate(single, params, tau) == pytest.approx(0.1 + (-1.9) * (tau - 0.4) / tau, rel=1e-12)
    for bad in (0.0, -1.0, 1.01):
        with pytest.raises(OutOfRange):
            effective_rate(single, params, bad)


def test_profile_validation():
    with pytest.raises(ValidationError) as info:
        BubbleProfile.from_triples(1.0, [(0.4, 0.6, 0.2), (0.5, 0.7, 0.2)])
    assert info.value.issues[0].code == "overlap"
    with pytest.raises(ValidationError):
        BubbleProfile.from_triples(1.0, [(0.5, 0.7, 0.2), (0.1, 0.2, 0.2)])
    with pytest.raises(ValidationError):
        BubbleProfile.from_triples(1.0, [(0.5, 1.2, 0.2)])
    with pytest.raises(ValidationError):
        BubbleSegment(0.5, 0.5, 0.1)
    with pytest.raises(ValidationError):
        MarketParams(0.1, 0.2, 0.0)
    with pytest.raises(ValidationError):
        MarketParams(float("nan"), 0.2, 0.3)
    # touching segments are fine
    BubbleProfile.from_triples(1.0, [(0.4, 0.5, 0.2), (0.5, 0.6, 0.25)])


def test_amplitude_inverse(params):
    for v in (-1.9, -0.4, 0.15, 3.15):
        assert potential_of_amplitude(amplitude_for_potential(v, params), params) == pytest.approx(v, rel=1e-12)


# -- properties --------------------------------------------------------------

amps = st.floats(-0.25, 0.25).map(lambda x: 0.3 + x).filter(lambda f: abs(f - 0.3) > 1e-3)


@st.composite
def profiles(draw):
    n = draw(st.integers(0, 4))
    cuts = sorted(draw(st.lists(st.floats(0.0, 1.0), min_size=2 * n, max_size=2 * n, unique=True)))
    segs = [(cuts[2 * i], cuts[2 * i + 1], draw(amps)) for i in range(n)]
    return BubbleProfile.from_triples(1.0, segs)


@settings(max_examples=60, deadline=None)
@given(profiles(), st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_accumulated_potential_is_lipschitz(prof, t1, t2):
    p = MarketParams(0.1, 0.2, 0.3)
    pot = potential_profile(prof, p)
    vmax = max([abs(v) for _, _, v in pot.pieces], default=0.0)
    gap = abs(arbitrage_number(prof, p, t1) - arbitrage_number(prof, p, t2))
    assert gap <= vmax * abs(t1 - t2) + 1e-12


@settings(max_examples=60, deadline=None)
@given(profiles(), st.floats(0.0, 1.0), st.floats(0.01, 0.99))
def test_splitting_a_segment_leaves_arbitrage_number_unchanged(prof, tau, frac):
    p = MarketParams(0.1, 0.2, 0.3)
    if not prof.segments:
        return
    seg = prof.segments[0]
    mid = seg.tau_start + frac * seg.duration
    if not seg.tau_start < mid < seg.tau_end:
        return
    split = BubbleProfile(1.0, (BubbleSegment(seg.tau_start, mid, seg.amplitude),
                                BubbleSegment(mid, seg.tau_end, seg.amplitude)) + prof.segments[1:])
    assert arbitrage_number(split, p, tau) == pytest.approx(arbitrage_number(prof, p, tau), rel=1e-12, abs=1e-15)


@settings(max_examples=60, deadline=None)
@given(profiles())
def test_constant_between_segments(prof):
    p = MarketParams(0.1, 0.2, 0.3)
    pts = prof.breakpoints()
    for a, b in zip(pts[:-1], pts[1:]):
        if prof.amplitude_at(0.5 * (a + b)) == 0.0 and b - a > 1e-9:
            assert arbitrage_number(prof, p, a) == pytest.approx(arbitrage_number(prof, p, b), abs=1e-15)


@given(st.floats(-0.5, 0.5), st.floats(-0.5, 0.5), st.floats(0.05, 1.0), st.floats(1e-6, 2.0))
def test_sign_law(r, alpha, sigma, f):
    p = MarketParams(r, alpha, sigma)
    # subnormal amplitudes underflow to v = 0 and carry no sign, hence the 1e-6 floor on f
    if abs(sigma - f) < 1e-6 or r == alpha:
        return
    v = potential_of_amplitude(f, p)
    expected = 1 if (r - alpha) * (sigma - f) > 0 else -1  # f > 0 here
    assert (v > 0) == (expected > 0)


@given(st.floats(0.0, 0.2999), st.floats(0.0, 0.2999))
def test_monotone_below_pole(f1, f2):
    p = MarketParams(0.1, 0.2, 0.3)
    lo, hi = sorted((f1, f2))
    # r < alpha: v decreases in f on each side of the pole
    assert potential_of_amplitude(hi, p) <= potential_of_amplitude(lo, p)


@given(st.floats(0.3001, 2.0), st.floats(0.3001, 2.0))
def test_monotone_above_pole(f1, f2):
    p = MarketParams(0.1, 0.2, 0.3)
    lo, hi = sorted((f1, f2))
    assert potential_of_amplitude(hi, p) <= potential_of_amplitude(lo, p)
