"""Scenario files, the multi-method runner and its CSV outputs.

Scenario files are TOML. Bubble segment times and the ``times`` sample list
are read in the convention named by ``time_convention``: ``"tau"`` (time to
maturity, the default) or ``"t"`` (calendar time, t = T - tau).
"""
from __future__ import annotations

import csv
import io
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
import tomli_w

from . import analytic, montecarlo, pde, series
from .analytic import ContractSpec
from .errors import (BubbleError, Issue, ParseError, PoleProximity, TruncationNotConverged,
                     ValidationError)
from .market import (BubbleProfile, BubbleSegment, MarketParams, arbitrage_number, pole_issues,
                     potential_profile, segment_issues)

log = logging.getLogger(__name__)

METHODS = ("effective_rate", "series", "strike_shift", "dilation", "mc", "pde")
OUTPUT_DIR_ENV = "BUBBLE_BS_OUTPUT_DIR"
REL_FLOOR = 1e-6  # relative discrepancies only where max(|a|, |b|) >= REL_FLOOR * K
# z-scores need a trustworthy standard error; rare-event points with a handful of
# in-the-money paths are skipped
Z_MAX_REL_SE = 0.05


def normalize_method(name: str) -> str:
    key = name.strip().lower().replace("-", "_")
    if key not in METHODS:
        raise ValidationError(Issue("unknown_method", "methods", f"unknown method {name!r}; choose from {', '.join(METHODS)}"))
    return key


@dataclass(frozen=True)
class SeriesConfig:
    max_order: int = 40
    rel_tol: float = 1e-12
    abs_tol: float = 1e-14


@dataclass(frozen=True)
class Scenario:
    name: str
    params: MarketParams
    contract: ContractSpec
    profile: BubbleProfile
    methods: tuple[str, ...] = METHODS
    s_min: float = 0.0
    s_max: float = 10.0
    s_count: int = 41
    tau_samples: tuple[float, ...] = (0.0, 1.0)
    series: SeriesConfig = SeriesConfig()
    mc: montecarlo.McConfig = montecarlo.McConfig()
    grid: pde.GridConfig = pde.GridConfig()
    description: str = ""
    trace_points: int = 1001

    @property
    def maturity(self) -> float:
        return self.profile.maturity

    def s_grid(self) -> np.ndarray:
        return np.linspace(self.s_min, self.s_max, self.s_count)

    def with_methods(self, methods) -> "Scenario":
        return replace(self, methods=tuple(normalize_method(m) for m in methods))


# -- loading ----------------------------------------------------------------

_MISSING = object()


class _Reader:
    """Pull typed fields out of nested tables, collecting issues instead of raising."""

    def __init__(self):
        self.issues: list[Issue] = []

    def get(self, table: dict, key: str, kind, path: str, default: Any = _MISSING):
        full = f"{path}.{key}" if path else key
        if not isinstance(table, dict) or key not in table:
            if default is _MISSING:
                self.issues.append(Issue("missing_field", full, "required field is missing"))
                return None
            return default
        value = table[key]
        if kind is float and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
        if (kind is not None and not isinstance(value, kind)) or (isinstance(value, bool) and kind is not bool):
            self.issues.append(Issue("bad_type", full, f"expected {getattr(kind, '__name__', kind)}, got {type(value).__name__}"))
            return None
        return value

    def build(self, path: str, factory, *args, **kwargs):
        try:
            return factory(*args, **kwargs)
        except ValidationError as exc:
            for issue in exc.issues:
                self.issues.append(Issue(issue.code, f"{path}.{issue.path}" if path else issue.path, issue.message))
        except (TypeError, ValueError) as exc:
            self.issues.append(Issue("invalid", path, str(exc)))
        return None


def _raise_issues(issues: list[Issue]) -> None:
    if not issues:
        return
    pole = [i for i in issues if i.code == "pole_proximity"]
    if pole:
        raise PoleProximity(issues)
    raise ValidationError(issues)


def scenario_from_dict(doc: dict) -> Scenario:
    rd = _Reader()
    name = rd.get(doc, "name", str, "")
    description = rd.get(doc, "description", str, "", default="")
    convention = rd.get(doc, "time_convention", str, "", default="tau")
    if convention not in ("tau", "t"):
        rd.issues.append(Issue("bad_value", "time_convention", f"must be 'tau' or 't', got {convention!r}"))
        convention = "tau"

    market = rd.get(doc, "market", dict, "")
    r = rd.get(market or {}, "r", float, "market")
    alpha = rd.get(market or {}, "alpha", float, "market")
    sigma = rd.get(market or {}, "sigma", float, "market")
    params = None
    if None not in (r, alpha, sigma):
        params = rd.build("market", MarketParams, r, alpha, sigma)

    ct = rd.get(doc, "contract", dict, "")
    kind = rd.get(ct or {}, "kind", str, "contract")
    strike = rd.get(ct or {}, "strike", float, "contract")
    contract = None
    if None not in (kind, strike):
        contract = rd.build("contract", ContractSpec, kind, strike)

    bub = rd.get(doc, "bubble", dict, "")
    maturity = rd.get(bub or {}, "maturity", float, "bubble")
    raw_segments = rd.get(bub or {}, "segments", list, "bubble", default=[])
    segments = []
    for i, seg in enumerate(raw_segments or []):
        path = f"bubble.segments[{i}]"
        if not isinstance(seg, dict):
            rd.issues.append(Issue("bad_type", path, "segment must be a table"))
            continue
        start = rd.get(seg, "start", float, path)
        end = rd.get(seg, "end", float, path)
        amp = rd.get(seg, "amplitude", float, path)
        if None in (start, end, amp) or maturity is None:
            continue
        if convention == "t":
            start, end = maturity - end, maturity - start
        built = rd.build(path, BubbleSegment, start, end, amp)
        if built is not None:
            segments.append(built)
    if convention == "t":
        segments.sort(key=lambda s: s.tau_start)
    profile = None
    if maturity is not None:
        seg_issues = segment_issues(maturity, segments, "bubble.segments")
        rd.issues.extend(seg_issues)
        if not seg_issues:
            profile = BubbleProfile(maturity, tuple(segments))
    if profile is not None and params is not None:
        rd.issues.extend(pole_issues(profile, params, "bubble.segments"))

    methods = rd.get(doc, "methods", list, "", default=list(METHODS))
    norm_methods = []
    for m in methods or []:
        try:
            key = normalize_method(str(m))
        except ValidationError as exc:
            rd.issues.extend(exc.issues)
            continue
        if key in norm_methods:
            rd.issues.append(Issue("duplicate", "methods", f"method {key!r} listed twice"))
        else:
            norm_methods.append(key)

    grid = rd.get(doc, "grid", dict, "", default={})
    s_min = rd.get(grid, "s_min", float, "grid", default=0.0)
    s_max = rd.get(grid, "s_max", float, "grid", default=2.0 * (strike or 1.0))
    s_count = rd.get(grid, "s_count", int, "grid", default=41)
    times = rd.get(grid, "times", list, "grid", default=None)
    trace_points = rd.get(grid, "trace_points", int, "grid", default=1001)
    if s_min is not None and s_max is not None and not (0 <= s_min < s_max):
        rd.issues.append(Issue("bad_interval", "grid", f"need 0 <= s_min < s_max, got ({s_min}, {s_max})"))
    if s_count is not None and s_count < 2:
        rd.issues.append(Issue("too_coarse", "grid.s_count", "s_count must be >= 2"))
    if trace_points is not None and trace_points < 2:
        rd.issues.append(Issue("too_coarse", "grid.trace_points", "trace_points must be >= 2"))
    tau_samples: list[float] = []
    if times is None:
        if maturity is not None:
            tau_samples = [0.0, maturity]
    else:
        for i, x in enumerate(times):
            if isinstance(x, bool) or not isinstance(x, (int, float)):
                rd.issues.append(Issue("bad_type", f"grid.times[{i}]", "times must be numbers"))
                continue
            tau = float(x) if convention == "tau" or maturity is None else maturity - float(x)
            if maturity is not None and not (0.0 <= tau <= maturity):
                rd.issues.append(Issue("out_of_range", f"grid.times[{i}]", f"time {x} outside [0, {maturity}]"))
                continue
            tau_samples.append(tau)
        if not tau_samples:
            rd.issues.append(Issue("empty", "grid.times", "at least one time sample is required"))
    tau_samples = sorted(set(tau_samples))

    sr = rd.get(doc, "series", dict, "", default={})
    series_cfg = SeriesConfig(
        rd.get(sr, "max_order", int, "series", default=SeriesConfig.max_order),
        rd.get(sr, "rel_tol", float, "series", default=SeriesConfig.rel_tol),
        rd.get(sr, "abs_tol", float, "series", default=SeriesConfig.abs_tol),
    )
    if series_cfg.max_order is not None and not 0 <= series_cfg.max_order <= series.MAX_ORDER:
        rd.issues.append(Issue("out_of_range", "series.max_order", f"must lie in 0..{series.MAX_ORDER}"))
    if series_cfg.rel_tol is not None and not 0 < series_cfg.rel_tol <= 1e-2:
        rd.issues.append(Issue("out_of_range", "series.rel_tol", "must lie in (0, 1e-2]"))
    if series_cfg.abs_tol is not None and series_cfg.abs_tol < 0:
        rd.issues.append(Issue("out_of_range", "series.abs_tol", "must be >= 0"))

    mc_t = rd.get(doc, "mc", dict, "", default={})
    mc_defaults = montecarlo.McConfig()
    mc_cfg = rd.build(
        "mc", montecarlo.McConfig,
        paths=rd.get(mc_t, "paths", int, "mc", default=mc_defaults.paths),
        seed=rd.get(mc_t, "seed", int, "mc", default=mc_defaults.seed),
        antithetic=rd.get(mc_t, "antithetic", bool, "mc", default=mc_defaults.antithetic),
    )

    pde_t = rd.get(doc, "pde", dict, "", default={})
    g_defaults = pde.GridConfig()
    grid_cfg = rd.build(
        "pde", pde.GridConfig,
        s_max=rd.get(pde_t, "s_max", float, "pde", default=g_defaults.s_max),
        n_space=rd.get(pde_t, "n_space", int, "pde", default=g_defaults.n_space),
        n_time=rd.get(pde_t, "n_time", int, "pde", default=g_defaults.n_time),
        theta=rd.get(pde_t, "theta", float, "pde", default=g_defaults.theta),
        smoothing_steps=rd.get(pde_t, "smoothing_steps", int, "pde", default=g_defaults.smoothing_steps),
    )

    _raise_issues(rd.issues)
    return Scenario(
        name=name, params=params, contract=contract, profile=profile,
        methods=tuple(norm_methods), s_min=s_min, s_max=s_max, s_count=s_count,
        tau_samples=tuple(tau_samples), series=series_cfg, mc=mc_cfg, grid=grid_cfg,
        description=description, trace_points=trace_points,
    )


def parse_scenario(text: str, source: str = "<string>") -> Scenario:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ParseError(f"{source}: {exc}") from exc
    return scenario_from_dict(doc)


def bundled_scenarios() -> list[str]:
    root = resources.files("bubble_bs") / "scenarios"
    return sorted(p.name[: -len(".scenario")] for p in root.iterdir() if p.name.endswith(".scenario"))


def bundled_scenario_text(name: str) -> str:
    return (resources.files("bubble_bs") / "scenarios" / f"{name}.scenario").read_text(encoding="utf-8")


def load_scenario(path) -> Scenario:
    """Read and validate a scenario file; bare names fall back to the bundled set."""
    p = Path(path)
    if p.is_file():
        text = p.read_text(encoding="utf-8")
    elif str(path) in bundled_scenarios():
        text = bundled_scenario_text(str(path))
    else:
        raise ParseError(f"{path}: no such scenario file")
    return parse_scenario(text, str(path))


def scenario_to_dict(s: Scenario) -> dict:
    return {
        "name": s.name,
        "description": s.description,
        "time_convention": "tau",
        "methods": list(s.methods),
        "market": {"r": s.params.r, "alpha": s.params.alpha, "sigma": s.params.sigma},
        "contract": {"kind": s.contract.kind.value, "strike": s.contract.strike},
        "bubble": {
            "maturity": s.profile.maturity,
            "segments": [
                {"start": seg.tau_start, "end": seg.tau_end, "amplitude": seg.amplitude}
                for seg in s.profile.segments
            ],
        },
        "grid": {"s_min": s.s_min, "s_max": s.s_max, "s_count": s.s_count,
                 "times": list(s.tau_samples), "trace_points": s.trace_points},
        "series": {"max_order": s.series.max_order, "rel_tol": s.series.rel_tol, "abs_tol": s.series.abs_tol},
        "mc": {"paths": s.mc.paths, "seed": s.mc.seed, "antithetic": s.mc.antithetic},
        "pde": {"s_max": s.grid.s_max, "n_space": s.grid.n_space, "n_time": s.grid.n_time,
                "theta": s.grid.theta, "smoothing_steps": s.grid.smoothing_steps},
    }


def save_scenario(s: Scenario, path) -> None:
    Path(path).write_text(tomli_w.dumps(scenario_to_dict(s)), encoding="utf-8")


# -- running ----------------------------------------------------------------

@dataclass(frozen=True)
class Discrepancy:
    max_abs: float
    max_rel: float
    max_z: float | None = None


@dataclass
class ComparisonReport:
    scenario: str
    surfaces: dict[str, pde.PriceSurface]
    discrepancies: dict[tuple[str, str], Discrepancy]
    failures: dict[str, str]
    an_trace: list[tuple[float, float]]
    files: list[Path] = field(default_factory=list)

    @property
    def methods(self) -> list[str]:
        return list(self.surfaces)


def _closed_form_surface(fn, s: Scenario, S: np.ndarray) -> np.ndarray:
    cols = []
    for tau in s.tau_samples:
        if tau == 0:
            cols.append(np.asarray(s.contract.payoff(S), dtype=float))
        else:
            cols.append(np.asarray(fn(s.contract, S, tau, s.profile, s.params), dtype=float))
    return np.column_stack(cols)


def _series_surface(s: Scenario, S: np.ndarray) -> np.ndarray:
    out = np.empty((len(S), len(s.tau_samples)))
    for j, tau in enumerate(s.tau_samples):
        for i, x in enumerate(S):
            if tau == 0:
                out[i, j] = s.contract.payoff(x)
                continue
            out[i, j] = series.price_series(s.contract, float(x), tau, s.profile, s.params,
                                            s.series.max_order, s.series.rel_tol, s.series.abs_tol).value
    return out


def _mc_surface(s: Scenario, S: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    vals = np.empty((len(S), len(s.tau_samples)))
    errs = np.zeros_like(vals)
    for j, tau in enumerate(s.tau_samples):
        for i, x in enumerate(S):
            if tau == 0:
                vals[i, j] = s.contract.payoff(x)
                continue
            est = montecarlo.mc_price(s.contract, float(x), tau, s.profile, s.params, s.mc)
            vals[i, j], errs[i, j] = est.value, est.std_error
    return vals, errs


def _pde_surface(s: Scenario, S: np.ndarray) -> np.ndarray:
    surf = pde.solve_pde(s.contract, s.profile, s.params, s.grid, tau_samples=s.tau_samples)
    return np.column_stack([surf.interpolate(S, tau) for tau in s.tau_samples])


def _compute(method: str, s: Scenario, S: np.ndarray) -> pde.PriceSurface:
    tau = np.asarray(s.tau_samples, dtype=float)
    meta: dict = {}
    if method == "effective_rate":
        values = _closed_form_surface(analytic.price_effective_rate, s, S)
    elif method == "dilation":
        values = _closed_form_surface(analytic.price_dilation, s, S)
    elif method == "strike_shift":
        values = _closed_form_surface(analytic.price_strike_shift, s, S)
    elif method == "series":
        values = _series_surface(s, S)
    elif method == "mc":
        values, meta["std_error"] = _mc_surface(s, S)
    elif method == "pde":
        values = _pde_surface(s, S)
    else:
        raise ValueError(method)
    if not np.all(np.isfinite(values)):
        raise ArithmeticError(f"{method} produced non-finite values")
    return pde.PriceSurface(S, tau, values, method, meta)


def _discrepancy(a: pde.PriceSurface, b: pde.PriceSurface, floor: float) -> Discrepancy:
    diff = np.abs(a.values - b.values)
    scale = np.maximum(np.abs(a.values), np.abs(b.values))
    mask = scale >= floor
    max_rel = float(np.max(diff[mask] / scale[mask])) if mask.any() else 0.0
    max_z = None
    mc = [x for x in (a, b) if "std_error" in x.meta]
    if mc:
        se = np.sqrt(sum(x.meta["std_error"] ** 2 for x in mc))
        ok = se > 0
        for x in mc:
            ok &= x.meta["std_error"] <= Z_MAX_REL_SE * np.abs(x.values)
        max_z = float(np.max(diff[ok] / se[ok])) if ok.any() else 0.0
    return Discrepancy(float(np.max(diff)), max_rel, max_z)


def arbitrage_trace(s: Scenario, points: int | None = None) -> list[tuple[float, float, float, float]]:
    """(t, f, v, A_N) on a uniform calendar-time grid."""
    points = points or s.trace_points
    pot = potential_profile(s.profile, s.params)
    T = s.maturity
    rows = []
    for t in np.linspace(0.0, T, points):
        tau = max(0.0, min(T, T - float(t)))
        rows.append((float(t), s.profile.amplitude_at(tau), pot.level_at(tau), pot.accumulated(tau)))
    return rows


def _fmt(x: float) -> str:
    return format(x, ".17g")


def _write_csv(path: Path, header: list[str], rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    path.write_text(buf.getvalue(), encoding="utf-8", newline="")


def default_output_dir(s: Scenario) -> Path:
    base = os.environ.get(OUTPUT_DIR_ENV)
    return Path(base) / s.name if base else Path("out") / s.name


def run_scenario(s: Scenario, out_dir=None, workers: int = 1) -> ComparisonReport:
    """Price the S x tau grid with every requested method and write the CSV set.

    A failing method is recorded in ``failures`` and the others still run.
    """
    out = Path(out_dir) if out_dir is not None else default_output_dir(s)
    out.mkdir(parents=True, exist_ok=True)
    S = s.s_grid()

    def attempt(method):
        try:
            return method, _compute(method, s, S), None
        except TruncationNotConverged as exc:
            return method, None, f"{exc.code}: {exc}"
        except (BubbleError, ArithmeticError, ValueError) as exc:
            code = getattr(exc, "code", type(exc).__name__)
            return method, None, f"{code}: {exc}"

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(attempt, s.methods))
    else:
        results = [attempt(m) for m in s.methods]

    surfaces = {m: surf for m, surf, err in results if surf is not None}
    failures = {m: err for m, surf, err in results if err is not None}
    for m, err in failures.items():
        log.warning("method %s failed: %s", m, err)

    floor = REL_FLOOR * s.contract.strike
    disc = {}
    for a in surfaces:
        for b in surfaces:
            if a == b:
                has_mc = "std_error" in surfaces[a].meta
                disc[(a, b)] = Discrepancy(0.0, 0.0, 0.0 if has_mc else None)
            elif (b, a) in disc:
                disc[(a, b)] = disc[(b, a)]
            else:
                disc[(a, b)] = _discrepancy(surfaces[a], surfaces[b], floor)

    trace = [(tau, arbitrage_number(s.profile, s.params, tau)) for tau in s.tau_samples]
    report = ComparisonReport(s.name, surfaces, disc, failures, trace)

    T = s.maturity
    for m, surf in surfaces.items():
        rows = []
        for j, tau in enumerate(surf.tau_grid):
            for i, x in enumerate(surf.s_grid):
                rows.append([_fmt(x), _fmt(tau), _fmt(T - tau), _fmt(surf.values[i, j]), m])
        path = out / f"{m}.csv"
        _write_csv(path, ["S", "tau", "t", "value", "method"], rows)
        report.files.append(path)

    path = out / "bubble.csv"
    _write_csv(path, ["t", "f", "v", "A_N"], [[_fmt(x) for x in row] for row in arbitrage_trace(s)])
    report.files.append(path)

    rows = []
    for (a, b), d in disc.items():
        rows.append([a, b, _fmt(d.max_abs), _fmt(d.max_rel), "" if d.max_z is None else _fmt(d.max_z), "ok"])
    for m, err in failures.items():
        rows.append([m, "", "", "", "", f"failed: {err}"])
    path = out / "report.csv"
    _write_csv(path, ["method_a", "method_b", "max_abs", "max_rel", "max_z", "status"], rows)
    report.files.append(path)
    return report
