"""Command-line entry point: ``bubble-bs price | scenario run | scenario validate | compare``.

Exit codes: 0 success, 2 invalid input, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import logging
import sys

from . import analytic, montecarlo, pde, series
from .analytic import ContractSpec
from .errors import InputError, NumericalError, TruncationNotConverged
from .market import BubbleProfile, BubbleSegment, MarketParams, arbitrage_number
from .scenario import METHODS, OUTPUT_DIR_ENV, load_scenario, run_scenario

EXIT_OK, EXIT_INPUT, EXIT_NUMERICAL = 0, 2, 3
PRICE_METHODS = ("effective-rate", "series", "strike-shift", "dilation", "mc", "pde", "free")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_INPUT)


def _bubble(text: str) -> tuple[float, float, float]:
    try:
        a, b, f = (float(x) for x in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected start:end:amplitude, got {text!r}") from None
    return a, b, f


def _emit(rows: list[tuple[str, object]]) -> None:
    width = max(len(k) for k, _ in rows)
    for key, value in rows:
        if isinstance(value, float):
            value = format(value, ".12g")
        print(f"{key:<{width}}  {value}")


def cmd_price(args) -> int:
    params = MarketParams(args.r, args.alpha, args.sigma)
    contract = ContractSpec(args.kind, args.strike)
    maturity = args.maturity if args.maturity is not None else args.tau
    segments = sorted((BubbleSegment(*t) for t in args.bubble), key=lambda s: s.tau_start)
    profile = BubbleProfile(maturity, tuple(segments))
    A = arbitrage_number(profile, params, args.tau)
    rows: list[tuple[str, object]] = [("method", args.method)]
    m = args.method
    if m == "free":
        price = analytic.bs_price(contract, args.spot, args.tau, args.r, args.sigma)
    elif m == "effective-rate":
        price = analytic.price_effective_rate(contract, args.spot, args.tau, profile, params)
        if args.tau > 0:
            rows.append(("effective_rate", args.r + A / args.tau))
    elif m == "dilation":
        price = analytic.price_dilation(contract, args.spot, args.tau, profile, params)
    elif m == "strike-shift":
        price = analytic.price_strike_shift(contract, args.spot, args.tau, profile, params)
        rows.append(("shifted_strike", analytic.shifted_strike(contract, args.tau, profile, params)))
    elif m == "series":
        res = series.price_series(contract, args.spot, args.tau, profile, params, args.order, args.rel_tol)
        price = res.value
        rows += [("order_used", res.order_used), ("tail_estimate", res.tail_estimate)]
    elif m == "mc":
        cfg = montecarlo.McConfig(args.paths, args.seed, not args.no_antithetic)
        est = montecarlo.mc_price(contract, args.spot, args.tau, profile, params, cfg)
        price = est.value
        rows += [("std_error", est.std_error), ("paths", est.paths_used)]
    else:
        grid = pde.GridConfig(args.s_max, args.n_space, args.n_time, args.theta)
        surf = pde.solve_pde(contract, profile, params, grid, tau_samples=[args.tau])
        price = float(surf.interpolate(args.spot, args.tau))
    rows.insert(1, ("price", float(price)))
    rows.append((f"A_N({args.tau:g})", A))
    _emit(rows)
    return EXIT_OK


def _run(args, methods=None) -> int:
    s = load_scenario(args.file)
    if methods is not None:
        s = s.with_methods(methods)
    report = run_scenario(s, args.out, workers=args.workers)
    print(f"scenario {s.name}: A_N(T) = {format(arbitrage_number(s.profile, s.params, s.maturity), '.12g')}")
    names = report.methods
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            d = report.discrepancies[(a, b)]
            z = "" if d.max_z is None else f"  max_z={d.max_z:.3g}"
            print(f"  {a:>14} vs {b:<14} max_abs={d.max_abs:.3e}  max_rel={d.max_rel:.3e}{z}")
    for m, err in report.failures.items():
        print(f"  {m}: FAILED ({err})", file=sys.stderr)
    for path in report.files:
        print(f"wrote {path}")
    if report.failures and args.strict:
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_validate(args) -> int:
    s = load_scenario(args.file)
    print(f"{args.file}: ok ({s.name}, {len(s.profile.segments)} segments, "
          f"A_N(T) = {format(arbitrage_number(s.profile, s.params, s.maturity), '.12g')})")
    return EXIT_OK


def _run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("file", help="scenario file, or the name of a bundled scenario (e.g. fig1)")
    p.add_argument("--out", default=None, help=f"output directory (default: ${OUTPUT_DIR_ENV}/<name> or ./out/<name>)")
    p.add_argument("--workers", type=int, default=1, help="methods run concurrently")
    p.add_argument("--strict", action="store_true", help="exit 3 if any method failed")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bubble-bs", description="Option pricing under time-dependent arbitrage bubbles")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("price", help="price a single point")
    p.add_argument("--method", choices=PRICE_METHODS, default="effective-rate")
    p.add_argument("--kind", choices=("call", "put"), default="call")
    p.add_argument("--spot", type=float, required=True)
    p.add_argument("--strike", type=float, required=True)
    p.add_argument("--tau", type=float, required=True, help="time to maturity")
    p.add_argument("--maturity", type=float, default=None, help="bubble profile horizon (default: --tau)")
    p.add_argument("--r", type=float, required=True)
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--bubble", type=_bubble, action="append", default=[],
                   metavar="START:END:F", help="square bubble on (START, END) in tau; repeatable")
    p.add_argument("--order", type=int, default=40, help="series max order")
    p.add_argument("--rel-tol", type=float, default=1e-12, help="series stopping tolerance")
    p.add_argument("--paths", type=int, default=200_000)
    p.add_argument("--seed", type=int, default=12345)
    p.add_argument("--no-antithetic", action="store_true")
    p.add_argument("--s-max", type=float, default=None)
    p.add_argument("--n-space", type=int, default=800)
    p.add_argument("--n-time", type=int, default=800)
    p.add_argument("--theta", type=float, default=0.5)
    p.set_defaults(func=cmd_price)

    sc = sub.add_parser("scenario", help="run or validate scenario files")
    scs = sc.add_subparsers(dest="action", required=True, parser_class=_Parser)
    r = scs.add_parser("run", help="run the methods listed in a scenario")
    _run_flags(r)
    r.set_defaults(func=_run)
    v = scs.add_parser("validate", help="check a scenario file without pricing")
    v.add_argument("file")
    v.set_defaults(func=cmd_validate)

    c = sub.add_parser("compare", help="run a scenario with every method")
    _run_flags(c)
    c.set_defaults(func=lambda a: _run(a, METHODS))
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if getattr(args, "s_max", None) is None and args.command == "price":
        args.s_max = 5.0 * args.strike
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error [{exc.code}]: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except TruncationNotConverged as exc:
        print(f"error [{exc.code}]: {exc}; truncated value {exc.result.value!r}", file=sys.stderr)
        return EXIT_NUMERICAL
    except NumericalError as exc:
        print(f"error [{exc.code}]: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
