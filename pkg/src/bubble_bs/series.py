"""Greeks-series pricer: sum_n e^{-A} Q_n(A) S^n d^n C / dS^n.

The expansion is a Taylor series of C(S e^A) about S in the increment
S (e^A - 1); it converges geometrically for |e^A - 1| < 1 and is meant for
moderate arbitrage numbers. Larger ones belong to the closed forms.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .analytic import ContractSpec, bs_price, bs_scaled_derivative
from .errors import BubbleTooStrong, OutOfRange, TruncationNotConverged
from .market import BubbleProfile, MarketParams, arbitrage_number
from .qpoly import series_weights

MAX_ORDER = 64
A_CAP = 2.0


@dataclass(frozen=True)
class SeriesResult:
    value: float
    terms: tuple[float, ...]
    order_used: int
    tail_estimate: float


def _guard(tau: float, order: int, A: float) -> None:
    if tau <= 0:
        raise OutOfRange(f"series pricing needs tau > 0, got {tau}")
    if not 0 <= order <= MAX_ORDER:
        raise OutOfRange(f"order must lie in 0..{MAX_ORDER}, got {order}")
    if abs(A) > A_CAP:
        raise BubbleTooStrong(
            f"|A_N| = {abs(A):.3g} exceeds {A_CAP}; use price_effective_rate or price_dilation instead"
        )


def series_terms(contract: ContractSpec, S: float, tau: float, A: float, r: float, sigma: float,
                 order: int) -> list[float]:
    """Per-order contributions w_n S^n d^n C for n = 0..order."""
    _guard(tau, order, A)
    weights = series_weights(A, order)
    terms = [weights[0] * bs_price(contract, S, tau, r, sigma)]
    for n in range(1, order + 1):
        w = weights[n]
        terms.append(0.0 if w == 0.0 else w * bs_scaled_derivative(n, contract, S, tau, r, sigma))
    return terms


def truncated_series(contract: ContractSpec, S: float, tau: float, profile: BubbleProfile,
                     params: MarketParams, order: int) -> SeriesResult:
    """Fixed-order truncation, no stopping rule."""
    A = arbitrage_number(profile, params, tau)
    terms = series_terms(contract, S, tau, A, params.r, params.sigma, order)
    return SeriesResult(math.fsum(terms), tuple(terms), order, abs(terms[-1]))


def price_series(contract: ContractSpec, S: float, tau: float, profile: BubbleProfile,
                 params: MarketParams, max_order: int = 40, rel_tol: float = 1e-12,
                 abs_tol: float = 0.0) -> SeriesResult:
    """Sum orders until two consecutive terms fall below rel_tol of the partial sum.

    ``abs_tol`` optionally accepts terms below an absolute size as well, for
    deep out-of-the-money points whose value is itself negligible. Raises
    TruncationNotConverged (carrying the truncated result) if max_order is
    reached first.
    """
    if not 0 < rel_tol <= 1e-2:
        raise OutOfRange(f"rel_tol must lie in (0, 1e-2], got {rel_tol}")
    A = arbitrage_number(profile, params, tau)
    _guard(tau, max_order, A)
    weights = series_weights(A, max_order)
    terms = [weights[0] * bs_price(contract, S, tau, params.r, params.sigma)]
    partial = terms[0]
    quiet = 0
    for n in range(1, max_order + 1):
        w = weights[n]
        term = 0.0 if w == 0.0 else w * bs_scaled_derivative(n, contract, S, tau, params.r, params.sigma)
        terms.append(term)
        partial += term
        if abs(term) <= max(rel_tol * abs(partial), abs_tol):
            quiet += 1
            if quiet == 2:
                return SeriesResult(math.fsum(terms), tuple(terms), n, abs(term))
        else:
            quiet = 0
    result = SeriesResult(math.fsum(terms), tuple(terms), max_order, abs(terms[-1]))
    raise TruncationNotConverged(
        f"series not converged to rel_tol={rel_tol} by order {max_order} (A_N={A:.4g})", result
    )


def rate_identity_residual(contract: ContractSpec, S: float, tau: float, profile: BubbleProfile,
                           params: MarketParams, order: int) -> float:
    """Relative gap between the order-N series and C(S, tau, r + A_N/tau)."""
    A = arbitrage_number(profile, params, tau)
    exact = bs_price(contract, S, tau, params.r + A / tau, params.sigma)
    approx = truncated_series(contract, S, tau, profile, params, order).value
    return abs(approx - exact) / abs(exact)
