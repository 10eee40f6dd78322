"""Closed-form prices: the free Black-Scholes value, its S-derivative ladder, and
three exact ways of pricing under a pure time-dependent bubble.

All three interacting closed forms reduce to a free price: with an effective
rate r + A/tau, by scaling the spot (e^{A P} acting on C), or for calls by
shifting the strike to K e^{-A}.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import ndtr

from .errors import DegenerateTime, OutOfRange, StrikeShiftUnsupported, ValidationError, Issue
from .market import BubbleProfile, MarketParams, arbitrage_number, effective_rate

MAX_DERIVATIVE_ORDER = 64
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


class OptionKind(str, enum.Enum):
    CALL = "call"
    PUT = "put"


@dataclass(frozen=True)
class ContractSpec:
    kind: OptionKind
    strike: float

    def __post_init__(self):
        try:
            object.__setattr__(self, "kind", OptionKind(self.kind))
        except ValueError:
            raise ValidationError(Issue("bad_kind", "kind", f"kind must be 'call' or 'put', got {self.kind!r}")) from None
        if not (math.isfinite(self.strike) and self.strike > 0):
            raise ValidationError(Issue("non_positive", "strike", f"strike must be > 0, got {self.strike}"))

    @classmethod
    def call(cls, strike: float) -> "ContractSpec":
        return cls(OptionKind.CALL, strike)

    @classmethod
    def put(cls, strike: float) -> "ContractSpec":
        return cls(OptionKind.PUT, strike)

    def payoff(self, S):
        S = np.asarray(S, dtype=float)
        if self.kind is OptionKind.CALL:
            out = np.maximum(S - self.strike, 0.0)
        else:
            out = np.maximum(self.strike - S, 0.0)
        return _unwrap(out)


@dataclass(frozen=True)
class PricePoint:
    S: float
    tau: float
    value: float


def _unwrap(x):
    return float(x) if np.ndim(x) == 0 else x


def _check_inputs(S, tau, sigma):
    if tau < 0:
        raise OutOfRange(f"tau must be >= 0, got {tau}")
    if sigma <= 0:
        raise OutOfRange(f"sigma must be > 0, got {sigma}")
    S = np.asarray(S, dtype=float)
    if np.any(S < 0):
        raise OutOfRange("spot must be >= 0")
    return S


def _d1(S, K, tau, r, sigma):
    vol = sigma * math.sqrt(tau)
    with np.errstate(divide="ignore"):
        return (np.log(S / K) + (r + 0.5 * sigma * sigma) * tau) / vol


def bs_price(contract: ContractSpec, S, tau: float, r: float, sigma: float):
    """Free Black-Scholes value C(S, tau, r); the raw payoff at tau = 0."""
    S = _check_inputs(S, tau, sigma)
    if tau == 0:
        return contract.payoff(S)
    K = contract.strike
    d1 = _d1(S, K, tau, r, sigma)
    d2 = d1 - sigma * math.sqrt(tau)
    disc = K * math.exp(-r * tau)
    if contract.kind is OptionKind.CALL:
        value = S * ndtr(d1) - disc * ndtr(d2)
    else:
        value = disc * ndtr(-d2) - S * ndtr(-d1)
    return _unwrap(value)


@lru_cache(maxsize=None)
def _ladder_poly(n: int) -> tuple[tuple[tuple[int, int, int], ...], int]:
    """Integer coefficients of q_n(y) as terms (power of a, power of y, coeff).

    q_2 = a, q_{n+1}(y) = a (q_n'(y) - y q_n(y)) - (n - 1) q_n(y).
    Returns the terms and the degree in y.
    """
    if n == 2:
        return ((1, 0, 1),), 0
    prev, _ = _ladder_poly(n - 1)
    k = n - 1
    acc: dict[tuple[int, int], int] = {}
    for i, j, c in prev:
        if j > 0:
            acc[(i + 1, j - 1)] = acc.get((i + 1, j - 1), 0) + c * j
        acc[(i + 1, j + 1)] = acc.get((i + 1, j + 1), 0) - c
        acc[(i, j)] = acc.get((i, j), 0) - (k - 1) * c
    terms = tuple(sorted((i, j, c) for (i, j), c in acc.items() if c))
    return terms, max(j for _, j, _ in terms)


def ladder_coefficients(n: int, a: float) -> np.ndarray:
    """Coefficients of q_n in powers of y (lowest first) for a given a = 1/(sigma sqrt(tau))."""
    terms, deg = _ladder_poly(n)
    coeffs = np.zeros(deg + 1)
    for i, j, c in terms:
        coeffs[j] += c * a ** i
    return coeffs


def _ladder_factor(n: int, d1, a: float):
    """phi(d1) q_n(d1); S^n d^n C / dS^n equals S times this for n >= 2."""
    phi = _INV_SQRT_2PI * np.exp(-0.5 * np.square(d1))
    with np.errstate(invalid="ignore"):
        poly = np.polynomial.polynomial.polyval(d1, ladder_coefficients(n, a))
        out = phi * poly
    # phi underflows to 0 where |d1| is infinite (S = 0); the product is 0 there
    return np.where(phi == 0.0, 0.0, out)


def _check_order(n: int, tau: float) -> None:
    if not 0 <= n <= MAX_DERIVATIVE_ORDER:
        raise OutOfRange(f"derivative order must lie in 0..{MAX_DERIVATIVE_ORDER}, got {n}")
    if n >= 1 and tau == 0:
        raise DegenerateTime(f"derivative of order {n} is singular at tau = 0")


def bs_derivative(n: int, contract: ContractSpec, S, tau: float, r: float, sigma: float):
    """n-th partial derivative of the free price with respect to S."""
    _check_order(n, tau)
    S = _check_inputs(S, tau, sigma)
    if n == 0:
        return bs_price(contract, S, tau, r, sigma)
    d1 = _d1(S, contract.strike, tau, r, sigma)
    if n == 1:
        delta = ndtr(d1)
        return _unwrap(delta if contract.kind is OptionKind.CALL else delta - 1.0)
    a = 1.0 / (sigma * math.sqrt(tau))
    # calls and puts differ by a linear function of S, so n >= 2 coincide
    with np.errstate(divide="ignore", invalid="ignore"):
        out = _ladder_factor(n, d1, a) / S ** (n - 1)
    return _unwrap(np.where(S == 0, 0.0, out))


def bs_scaled_derivative(n: int, contract: ContractSpec, S, tau: float, r: float, sigma: float):
    """S^n times the n-th S-derivative; avoids forming S^{n-1} at high order."""
    _check_order(n, tau)
    S = _check_inputs(S, tau, sigma)
    if n == 0:
        return bs_price(contract, S, tau, r, sigma)
    if n == 1:
        return _unwrap(S * bs_derivative(1, contract, S, tau, r, sigma))
    d1 = _d1(S, contract.strike, tau, r, sigma)
    a = 1.0 / (sigma * math.sqrt(tau))
    return _unwrap(S * _ladder_factor(n, d1, a))


def price_effective_rate(contract: ContractSpec, S, tau: float, profile: BubbleProfile, params: MarketParams):
    """Interacting price as the free price at the effective rate r + A_N(tau)/tau."""
    if tau == 0:
        return contract.payoff(S)
    rate = effective_rate(profile, params, tau)
    return bs_price(contract, S, tau, rate, params.sigma)


def shifted_strike(contract: ContractSpec, T: float, profile: BubbleProfile, params: MarketParams) -> float:
    return contract.strike * math.exp(-arbitrage_number(profile, params, T))


def price_strike_shift(contract: ContractSpec, S, T: float, profile: BubbleProfile, params: MarketParams):
    """Call under a bubble priced as a free call with strike K e^{-A_N(T)}.

    ``T`` is the horizon (time to expiry) at which A_N is accumulated; no extra
    e^{-A_N} discount is applied.
    """
    if contract.kind is not OptionKind.CALL:
        raise StrikeShiftUnsupported("the strike-shift identity is only established for calls")
    if T <= 0:
        raise OutOfRange(f"strike shift needs T > 0, got {T}")
    shifted = ContractSpec(OptionKind.CALL, shifted_strike(contract, T, profile, params))
    return bs_price(shifted, S, T, params.r, params.sigma)


def price_dilation(contract: ContractSpec, S, tau: float, profile: BubbleProfile, params: MarketParams):
    """e^{A P} applied to the free price: e^{-A} C(S e^{A}, tau, r)."""
    if tau < 0:
        raise OutOfRange(f"tau must be >= 0, got {tau}")
    A = arbitrage_number(profile, params, tau)
    S = np.asarray(S, dtype=float)
    return _unwrap(math.exp(-A) * np.asarray(bs_price(contract, S * math.exp(A), tau, params.r, params.sigma)))
