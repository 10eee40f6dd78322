"""Feynman-Kac Monte Carlo under a pure time-dependent bubble.

Only A_N(T) enters the terminal law, so S_T is sampled in one shot:
S_T = S exp((r - sigma^2/2) T + A_N(T) + sigma sqrt(T) Z).

Normal draw i is a pure function of (seed, i): it is the inverse-CDF image of
the i-th 64-bit output of a Philox counter generator keyed by the seed. Any
chunking or worker count therefore reproduces the same sample set.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .analytic import ContractSpec, OptionKind
from .errors import Issue, OutOfRange, StrikeShiftUnsupported, ValidationError
from .market import BubbleProfile, MarketParams, arbitrage_number

DEFAULT_CHUNK = 1 << 16


@dataclass(frozen=True)
class McConfig:
    paths: int = 200_000
    seed: int = 12345
    antithetic: bool = True
    chunk_size: int = DEFAULT_CHUNK
    workers: int = 1

    def __post_init__(self):
        if self.paths < 2:
            raise ValidationError(Issue("too_few_paths", "paths", f"paths must be >= 2, got {self.paths}"))
        if self.antithetic and self.paths % 2:
            raise ValidationError(Issue("odd_paths", "paths", "paths must be even with antithetic variates"))
        if not 0 <= self.seed < 2 ** 64:
            raise ValidationError(Issue("bad_seed", "seed", "seed must be a 64-bit unsigned integer"))
        if self.chunk_size < 1 or self.workers < 1:
            raise ValidationError(Issue("bad_chunking", "chunk_size", "chunk_size and workers must be >= 1"))

    @property
    def units(self) -> int:
        """Number of i.i.d. units (antithetic pairs count once)."""
        return self.paths // 2 if self.antithetic else self.paths


@dataclass(frozen=True)
class McEstimate:
    value: float
    std_error: float
    paths_used: int

    def covers(self, target: float, z: float = 1.959963984540054) -> bool:
        return abs(self.value - target) <= z * self.std_error


def standard_normals(seed: int, start: int, count: int) -> np.ndarray:
    """Normals for indices start .. start+count-1 of the stream keyed by ``seed``."""
    block, skip = divmod(start, 4)
    gen = np.random.Philox(key=seed, counter=block)
    raw = gen.random_raw(count + skip)[skip:]
    u = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53
    return ndtri(u)


def _chunks(n: int, size: int):
    return [(lo, min(n, lo + size)) for lo in range(0, n, size)]


def _log_drift(S: float, T: float, A: float, params: MarketParams) -> float:
    return math.log(S) + (params.r - 0.5 * params.sigma ** 2) * T + A


def _check(S: float, T: float) -> None:
    if T <= 0:
        raise OutOfRange(f"Monte Carlo needs T > 0, got {T}")
    if S < 0:
        raise OutOfRange("spot must be >= 0")


def terminal_samples(S: float, T: float, profile: BubbleProfile, params: MarketParams,
                     cfg: McConfig) -> np.ndarray:
    """All cfg.paths terminal prices; antithetic partners sit at 2i and 2i+1."""
    _check(S, T)
    A = arbitrage_number(profile, params, T)
    z = standard_normals(cfg.seed, 0, cfg.units)
    if cfg.antithetic:
        z = np.column_stack([z, -z]).ravel()
    if S == 0:
        return np.zeros_like(z)
    return np.exp(_log_drift(S, T, A, params) + params.sigma * math.sqrt(T) * z)


def _combine(stats):
    """Chan et al. pairwise merge of (n, mean, M2), applied in list order."""
    n, mean, m2 = 0, 0.0, 0.0
    for nb, mb, m2b in stats:
        if nb == 0:
            continue
        tot = n + nb
        delta = mb - mean
        mean += delta * nb / tot
        m2 += m2b + delta * delta * n * nb / tot
        n = tot
    return n, mean, m2


def _estimate(unit_fn, cfg: McConfig, discount: float) -> McEstimate:
    def chunk_stats(bounds):
        lo, hi = bounds
        units = unit_fn(standard_normals(cfg.seed, lo, hi - lo))
        mean = float(np.mean(units))
        return hi - lo, mean, float(np.sum((units - mean) ** 2))

    chunks = _chunks(cfg.units, cfg.chunk_size)
    if cfg.workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(cfg.workers) as pool:
            stats = list(pool.map(chunk_stats, chunks))
    else:
        stats = [chunk_stats(c) for c in chunks]
    n, mean, m2 = _combine(stats)
    var = m2 / (n - 1) if n > 1 else 0.0
    return McEstimate(discount * mean, discount * math.sqrt(var / n), cfg.paths)


def _payoff_units(contract: ContractSpec, log_center: float, vol: float, strike: float, antithetic: bool):
    call = contract.kind is OptionKind.CALL

    def payoff(x):
        S_T = np.exp(log_center + vol * x)
        return np.maximum(S_T - strike, 0.0) if call else np.maximum(strike - S_T, 0.0)

    if antithetic:
        return lambda z: 0.5 * (payoff(z) + payoff(-z))
    return payoff


def mc_price(contract: ContractSpec, S: float, T: float, profile: BubbleProfile, params: MarketParams,
             cfg: McConfig) -> McEstimate:
    """e^{-rT - A_N(T)} E[payoff(S_T)] with S_T carrying the A_N(T) drift shift."""
    _check(S, T)
    A = arbitrage_number(profile, params, T)
    if S == 0:
        # degenerate lognormal: S_T = 0 on every path
        value = 0.0 if contract.kind is OptionKind.CALL else contract.strike * math.exp(-params.r * T - A)
        return McEstimate(value, 0.0, cfg.paths)
    units = _payoff_units(contract, _log_drift(S, T, A, params), params.sigma * math.sqrt(T),
                          contract.strike, cfg.antithetic)
    return _estimate(units, cfg, math.exp(-params.r * T - A))


def mc_price_shifted_strike(contract: ContractSpec, S: float, T: float, profile: BubbleProfile,
                            params: MarketParams, cfg: McConfig) -> McEstimate:
    """Call priced as e^{-rT} E[max(0, S_T^free - K e^{-A_N(T)})] on the same draws as :func:`mc_price`."""
    if contract.kind is not OptionKind.CALL:
        raise StrikeShiftUnsupported("the strike-shift form is only established for calls")
    _check(S, T)
    A = arbitrage_number(profile, params, T)
    if S == 0:
        return McEstimate(0.0, 0.0, cfg.paths)
    units = _payoff_units(contract, _log_drift(S, T, 0.0, params), params.sigma * math.sqrt(T),
                          contract.strike * math.exp(-A), cfg.antithetic)
    return _estimate(units, cfg, math.exp(-params.r * T))
