import mpmath
import numpy as np

from bubble_bs.market import BubbleProfile, amplitude_for_potential, potential_of_amplitude


def profile_with_A(A, params, T=1.0):
    """Single square bubble with arbitrage number A at T.

    v = alpha - r needs an infinite amplitude, so the segment is shortened to dodge it.
    """
    for length in (T, 0.5 * T, 0.25 * T):
        v = A / length
        if abs(v - (params.alpha - params.r)) > 1e-3:
            return BubbleProfile.from_triples(T, [(0.0, length, amplitude_for_potential(v, params))])
    raise AssertionError("unreachable")


def cancelling_profile(params, level=0.2, T=1.0):
    """Levels +v0 and -v0 (v0 ~ level) over equal quarters of [0, T].

    Neighbouring float amplitudes are searched until the two computed levels
    are exact negatives, so A_N(T) is zero with no rounding residue.
    """
    f = amplitude_for_potential(-level, params)
    for _ in range(200):
        v = potential_of_amplitude(f, params)
        g = amplitude_for_potential(-v, params)
        for k in range(-32, 33):
            h = g + k * np.spacing(g)
            if potential_of_amplitude(h, params) == -v:
                return BubbleProfile.from_triples(T, [(0.25 * T, 0.5 * T, f), (0.5 * T, 0.75 * T, h)])
        f = float(np.nextafter(f, np.inf))
    raise AssertionError("no exactly cancelling pair found")


def mp_price(kind, S, K, tau, r, sigma):
    S, K, r, sigma = (mpmath.mpf(x) for x in (S, K, r, sigma))
    sd = sigma * mpmath.sqrt(tau)
    d1 = (mpmath.log(S / K) + (r + sigma ** 2 / 2) * tau) / sd
    d2 = d1 - sd
    if kind == "call":
        return S * mpmath.ncdf(d1) - K * mpmath.exp(-r * tau) * mpmath.ncdf(d2)
    return K * mpmath.exp(-r * tau) * mpmath.ncdf(-d2) - S * mpmath.ncdf(-d1)
