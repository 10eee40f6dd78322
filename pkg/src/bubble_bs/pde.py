"""Theta-scheme finite differences for the bubble-interacting Black-Scholes PDE

    d(pi)/d(tau) = 1/2 sigma^2 S^2 pi_SS + (r + v(tau)) (S pi_S - pi)

on a uniform S grid containing S = 0, marching forward in tau from the payoff.
Steps are split at every bubble boundary so each sub-step sees one constant
potential level. Boundaries: Dirichlet at S = 0, pi_SS = 0 at S_max.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded

from .analytic import ContractSpec, OptionKind
from .errors import Issue, UnstableConfig, ValidationError
from .market import BubbleProfile, MarketParams, potential_profile

_MERGE_TOL = 1e-12


@dataclass(frozen=True)
class GridConfig:
    s_max: float = 25.0
    n_space: int = 800
    n_time: int = 800
    theta: float = 0.5
    # fully implicit half-steps taken first to damp the payoff kink (0 = pure theta scheme)
    smoothing_steps: int = 0

    def __post_init__(self):
        issues = []
        if not (math.isfinite(self.s_max) and self.s_max > 0):
            issues.append(Issue("non_positive", "s_max", f"s_max must be > 0, got {self.s_max}"))
        if self.n_space < 50:
            issues.append(Issue("too_coarse", "n_space", f"n_space must be >= 50, got {self.n_space}"))
        if self.n_time < 50:
            issues.append(Issue("too_coarse", "n_time", f"n_time must be >= 50, got {self.n_time}"))
        if not 0.0 <= self.theta <= 1.0:
            issues.append(Issue("out_of_range", "theta", f"theta must lie in [0, 1], got {self.theta}"))
        if self.smoothing_steps < 0:
            issues.append(Issue("out_of_range", "smoothing_steps", "smoothing_steps must be >= 0"))
        if issues:
            raise ValidationError(issues)


@dataclass(frozen=True)
class PriceSurface:
    """values[i, j] = pi(S_grid[i], tau_grid[j])."""

    s_grid: np.ndarray
    tau_grid: np.ndarray
    values: np.ndarray
    method_tag: str
    meta: dict = field(default_factory=dict)

    def tau_index(self, tau: float) -> int:
        j = int(np.argmin(np.abs(self.tau_grid - tau)))
        if abs(self.tau_grid[j] - tau) > 1e-9 * max(1.0, abs(tau)):
            raise KeyError(f"tau={tau} is not a node of this surface")
        return j

    def slice_at(self, tau: float) -> np.ndarray:
        return self.values[:, self.tau_index(tau)]

    def interpolate(self, S, tau: float):
        return np.interp(S, self.s_grid, self.slice_at(tau))


def _time_nodes(T: float, n_time: int, extra) -> np.ndarray:
    nodes = np.linspace(0.0, T, n_time + 1)
    cuts = [x for x in extra if 0.0 < x < T]
    if cuts:
        nodes = np.union1d(nodes, cuts)
        keep = np.concatenate([[True], np.diff(nodes) > _MERGE_TOL * T])
        nodes = nodes[keep]
        # a dropped near-duplicate may have been the requested cut; snap to it
        for x in cuts:
            j = int(np.argmin(np.abs(nodes - x)))
            nodes[j] = x
        nodes[-1] = T
    return nodes


def _check_stability(grid: GridConfig, sigma: float, max_rate: float, min_dt_bound: float) -> None:
    if grid.theta >= 0.5:
        return
    # positivity bound for the explicit part at the far node
    n = grid.n_space
    bound = 1.0 / ((1.0 - grid.theta) * (sigma ** 2 * n ** 2 + abs(max_rate)))
    if min_dt_bound > bound:
        raise UnstableConfig(
            f"theta={grid.theta} needs dtau <= {bound:.3g} on this grid, got {min_dt_bound:.3g}; "
            f"raise n_time or use theta >= 0.5"
        )


def solve_pde(contract: ContractSpec, profile: BubbleProfile, params: MarketParams, grid: GridConfig,
              tau_samples=()) -> PriceSurface:
    """Solve on [0, S_max] x [0, T]; ``tau_samples`` are added as exact time nodes."""
    pot = potential_profile(profile, params)
    T = profile.maturity
    K = contract.strike
    sigma2 = params.sigma ** 2
    n = grid.n_space
    S = np.linspace(0.0, grid.s_max, n + 1)
    idx = np.arange(1, n, dtype=float)  # interior nodes 1..n-1

    cuts = list(profile.breakpoints()) + [float(t) for t in tau_samples]
    nodes = _time_nodes(T, grid.n_time, cuts)
    steps = np.diff(nodes)
    levels = np.array([pot.level_at(0.5 * (a + b)) for a, b in zip(nodes[:-1], nodes[1:])])
    _check_stability(grid, params.sigma, float(np.max(np.abs(params.r + levels))), float(np.max(steps)))

    call = contract.kind is OptionKind.CALL
    u = np.maximum(S - K, 0.0) if call else np.maximum(K - S, 0.0)
    out = np.empty((n + 1, len(nodes)))
    out[:, 0] = u

    diff = 0.5 * sigma2 * idx ** 2

    def boundary_zero(tau: float) -> float:
        if call:
            return 0.0
        return K * math.exp(-params.r * tau - pot.accumulated(tau))

    def step(u, dt, rho, theta, tau_new):
        lo = diff - 0.5 * rho * idx
        di = -2.0 * diff - rho
        up = diff + 0.5 * rho * idx
        rhs = u[1:n].copy()
        if theta < 1.0:
            Lu = lo * u[0:n - 1] + di * u[1:n] + up * u[2:n + 1]
            rhs += (1.0 - theta) * dt * Lu
        b0 = boundary_zero(tau_new)
        rhs[0] += theta * dt * lo[0] * b0
        a_lo = -theta * dt * lo
        a_di = 1.0 - theta * dt * di
        a_up = -theta * dt * up
        # far boundary: u_n = 2 u_{n-1} - u_{n-2}
        a_lo = a_lo.copy(); a_di = a_di.copy()
        a_lo[-1] -= a_up[-1]
        a_di[-1] += 2.0 * a_up[-1]
        ab = np.zeros((3, n - 1))
        ab[0, 1:] = a_up[:-1]
        ab[1] = a_di
        ab[2, :-1] = a_lo[1:]
        new = np.empty_like(u)
        new[1:n] = solve_banded((1, 1), ab, rhs, overwrite_ab=True, overwrite_b=True, check_finite=False)
        new[0] = b0
        new[n] = 2.0 * new[n - 1] - new[n - 2]
        return new

    smoothing_left = grid.smoothing_steps
    for j, (dt, v) in enumerate(zip(steps, levels)):
        rho = params.r + v
        tau_new = nodes[j + 1]
        if smoothing_left > 0:
            half = 0.5 * dt
            u = step(u, half, rho, 1.0, nodes[j] + half)
            u = step(u, half, rho, 1.0, tau_new)
            smoothing_left -= 1
        else:
            u = step(u, dt, rho, grid.theta, tau_new)
        out[:, j + 1] = u

    if not np.all(np.isfinite(out)):
        raise UnstableConfig("non-finite values produced; refine the grid")
    tag = "pde" if grid.smoothing_steps == 0 else f"pde+smooth{grid.smoothing_steps}"
    return PriceSurface(S, nodes, out, tag, {"grid": grid})
