"""Market parameters, square-bubble profiles and the quantities derived from them.

Everything here works in backward time ``tau = T - t``. A bubble profile is
piecewise constant, so the accumulated potential (the arbitrage number) is
computed by exact overlap arithmetic rather than quadrature.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import Issue, OutOfRange, PoleProximity, ValidationError

POLE_GUARD_REL = 1e-9


def pole_guard(sigma: float) -> float:
    return POLE_GUARD_REL * max(1.0, abs(sigma))


@dataclass(frozen=True)
class MarketParams:
    r: float
    alpha: float
    sigma: float

    def __post_init__(self):
        for name in ("r", "alpha", "sigma"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ValidationError(Issue("not_finite", name, f"{name} must be a finite number, got {value!r}"))
        if self.sigma <= 0:
            raise ValidationError(Issue("non_positive", "sigma", f"sigma must be > 0, got {self.sigma}"))


@dataclass(frozen=True)
class BubbleSegment:
    tau_start: float
    tau_end: float
    amplitude: float

    def __post_init__(self):
        if not all(math.isfinite(x) for x in (self.tau_start, self.tau_end, self.amplitude)):
            raise ValidationError(Issue("not_finite", "segment", "segment fields must be finite"))
        if not 0.0 <= self.tau_start < self.tau_end:
            raise ValidationError(
                Issue("bad_interval", "segment", f"need 0 <= tau_start < tau_end, got ({self.tau_start}, {self.tau_end})")
            )

    @property
    def duration(self) -> float:
        return self.tau_end - self.tau_start


def segment_issues(maturity: float, segments: Sequence[BubbleSegment], prefix: str = "segments") -> list[Issue]:
    """Collect ordering/containment problems without raising."""
    issues = []
    if not (math.isfinite(maturity) and maturity > 0):
        issues.append(Issue("non_positive", "maturity", f"maturity must be > 0, got {maturity}"))
        return issues
    prev = None
    for i, seg in enumerate(segments):
        if seg.tau_end > maturity:
            issues.append(Issue("out_of_range", f"{prefix}[{i}]", f"segment ends at {seg.tau_end} > maturity {maturity}"))
        if prev is not None:
            if seg.tau_start < prev.tau_start:
                issues.append(Issue("unsorted", f"{prefix}[{i}]", "segments must be sorted by tau_start"))
            elif seg.tau_start < prev.tau_end:
                issues.append(
                    Issue("overlap", f"{prefix}[{i}]",
                          f"segment ({seg.tau_start}, {seg.tau_end}) overlaps ({prev.tau_start}, {prev.tau_end})")
                )
        prev = seg
    return issues


@dataclass(frozen=True)
class BubbleProfile:
    """Piecewise-constant bubble amplitude on [0, maturity]; gaps mean f = 0."""

    maturity: float
    segments: tuple[BubbleSegment, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        issues = segment_issues(self.maturity, self.segments)
        if issues:
            raise ValidationError(issues)

    @classmethod
    def from_triples(cls, maturity: float, triples: Iterable[tuple[float, float, float]]) -> "BubbleProfile":
        return cls(maturity, tuple(BubbleSegment(a, b, f) for a, b, f in triples))

    @classmethod
    def zero(cls, maturity: float) -> "BubbleProfile":
        return cls(maturity, ())

    def amplitude_at(self, tau: float) -> float:
        # segments are open intervals; boundaries carry f = 0
        for seg in self.segments:
            if seg.tau_start < tau < seg.tau_end:
                return seg.amplitude
        return 0.0

    def breakpoints(self) -> list[float]:
        pts = {0.0, float(self.maturity)}
        for seg in self.segments:
            pts.add(seg.tau_start)
            pts.add(seg.tau_end)
        return sorted(pts)


@dataclass(frozen=True)
class PotentialProfile:
    maturity: float
    pieces: tuple[tuple[float, float, float], ...] = field(default_factory=tuple)

    def level_at(self, tau: float) -> float:
        for a, b, v in self.pieces:
            if a < tau < b:
                return v
        return 0.0

    def accumulated(self, tau: float) -> float:
        """Exact integral of the potential over [0, tau]."""
        return math.fsum(v * (min(b, tau) - a) for a, b, v in self.pieces if tau > a)


def potential_of_amplitude(f: float, params: MarketParams) -> float:
    """Potential level (r - alpha) f / (sigma - f) induced by a bubble of height f."""
    gap = params.sigma - f
    if abs(gap) < pole_guard(params.sigma):
        raise PoleProximity(
            Issue("pole_proximity", "amplitude", f"|sigma - f| = {abs(gap):.3g} is inside the pole guard (f={f}, sigma={params.sigma})")
        )
    return (params.r - params.alpha) * f / gap


def amplitude_for_potential(v: float, params: MarketParams) -> float:
    """Inverse of :func:`potential_of_amplitude`."""
    denom = params.r - params.alpha + v
    if denom == 0:
        raise OutOfRange(f"potential level {v} is the asymptote -(r - alpha); no finite amplitude produces it")
    return params.sigma * v / denom


def pole_issues(profile: BubbleProfile, params: MarketParams, prefix: str = "segments") -> list[Issue]:
    guard = pole_guard(params.sigma)
    return [
        Issue("pole_proximity", f"{prefix}[{i}].amplitude",
              f"amplitude {seg.amplitude} is within {guard:.1e} of sigma={params.sigma}")
        for i, seg in enumerate(profile.segments)
        if abs(params.sigma - seg.amplitude) < guard
    ]


def potential_profile(profile: BubbleProfile, params: MarketParams) -> PotentialProfile:
    guard = pole_guard(params.sigma)
    for i, seg in enumerate(profile.segments):
        if abs(params.sigma - seg.amplitude) < guard:
            raise PoleProximity(pole_issues(profile, params), segment_index=i)
    pieces = tuple(
        (seg.tau_start, seg.tau_end, potential_of_amplitude(seg.amplitude, params))
        for seg in profile.segments
    )
    return PotentialProfile(profile.maturity, pieces)


def _check_tau(profile: BubbleProfile, tau: float) -> None:
    if not (0.0 <= tau <= profile.maturity):
        raise OutOfRange(f"tau={tau} outside [0, {profile.maturity}]")


def arbitrage_number(profile: BubbleProfile, params: MarketParams, tau: float) -> float:
    _check_tau(profile, tau)
    return potential_profile(profile, params).accumulated(tau)


def effective_rate(profile: BubbleProfile, params: MarketParams, tau: float) -> float:
    """Constant rate r + A_N(tau)/tau reproducing the bubble's effect up to tau. May be negative."""
    if tau <= 0:
        raise OutOfRange(f"effective rate needs tau > 0, got {tau}")
    _check_tau(profile, tau)
    return params.r + arbitrage_number(profile, params, tau) / tau
