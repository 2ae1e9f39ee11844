"""Command-line entry point.

Exit codes: 0 all expected verdicts, 1 verdict or invariant mismatch,
2 configuration or usage error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from pathlib import Path

from . import verifier
from .errors import ConfigError, PolyharmError
from .rationals import EXACT, FLOAT
from .residuals import DEFAULT_FLOAT_TOL

OUT_DIR_ENV = "POLYHARM_OUT_DIR"


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--mode", choices=(EXACT, FLOAT), default=EXACT)
    parser.add_argument("--seed", type=int, default=None, help="override the sampling seed")
    parser.add_argument("--points", type=int, default=None, help="sample points per instance")
    parser.add_argument("--out", type=Path, default=None, help="write the report to this file")
    parser.add_argument("--format", choices=("json", "csv", "table"), default=None)
    parser.add_argument(
        "--tol", type=float, default=None, help="relative zero threshold (float mode only)"
    )
    parser.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="polyharm",
        description=(
            "Exact verification of conformal biharmonic and polyharmonic "
            "classifications between space forms"
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_check = sub.add_parser("check", help="evaluate residuals for configured instances")
    p_check.add_argument("config", type=Path)
    _add_common(p_check)

    p_bh = sub.add_parser("sweep-biharmonic", help="verdict table over (m, curvatures, branch)")
    p_bh.add_argument("--m-min", type=int, default=3)
    p_bh.add_argument("--m-max", type=int, default=8)
    p_bh.add_argument("--trials", type=int, default=3)
    _add_common(p_bh)

    p_ph = sub.add_parser("sweep-polyharmonic", help="iterated-Laplacian table over (order, m)")
    p_ph.add_argument("--k-min", type=int, default=1)
    p_ph.add_argument("--k-max", type=int, default=5)
    p_ph.add_argument("--m-min", type=int, default=3)
    p_ph.add_argument("--m-max", type=int, default=12)
    p_ph.add_argument("--trials", type=int, default=1)
    _add_common(p_ph)

    p_self = sub.add_parser("selftest", help="run the invariant suites")
    _add_common(p_self)

    return parser


def _resolve_tol(args) -> float:
    if args.tol is not None and args.mode != FLOAT:
        raise ConfigError("--tol only applies to --mode float")
    return DEFAULT_FLOAT_TOL if args.tol is None else args.tol


def _finish(args, report: verifier.ResidualReport) -> int:
    fmt = args.format or (args.out.suffix.lstrip(".") if args.out and args.out.suffix in (".json", ".csv") else None)
    if args.out is not None:
        out = args.out
        if not out.is_absolute() and os.environ.get(OUT_DIR_ENV):
            out = Path(os.environ[OUT_DIR_ENV]) / out
        out.parent.mkdir(parents=True, exist_ok=True)
        verifier.emit_report(report, fmt or "json", out)
        print(f"report written to {out}")
    else:
        print(verifier.render_report(report, fmt or "table"), end="")
    return report.exit_code


def _cmd_check(args) -> int:
    tol = _resolve_tol(args)
    configured, plan = verifier.load_config(args.config)
    plan = plan.with_overrides(seed=args.seed, count=args.points)
    t0 = time.perf_counter()
    body = verifier.check_report_body(configured, plan, mode=args.mode, tol=tol)
    exit_code = 0 if body["all_match"] else 1
    report = verifier.ResidualReport(
        kind="check",
        mode=args.mode,
        seed=plan.seed,
        body=body,
        exit_code=exit_code,
        timing=time.perf_counter() - t0,
        tol=tol if args.mode == FLOAT else None,
    )
    return _finish(args, report)


def _cmd_sweep_biharmonic(args) -> int:
    tol = _resolve_tol(args)
    seed = args.seed if args.seed is not None else 0
    points = args.points if args.points is not None else 5
    t0 = time.perf_counter()
    body = verifier.sweep_biharmonic(
        m_values=range(args.m_min, args.m_max + 1),
        trials=args.trials,
        seed=seed,
        points=points,
        mode=args.mode,
        tol=tol,
    )
    report = verifier.ResidualReport(
        kind="sweep-biharmonic",
        mode=args.mode,
        seed=seed,
        body=body,
        exit_code=0 if body["all_match"] else 1,
        timing=time.perf_counter() - t0,
        tol=tol if args.mode == FLOAT else None,
    )
    return _finish(args, report)


def _cmd_sweep_polyharmonic(args) -> int:
    tol = _resolve_tol(args)
    seed = args.seed if args.seed is not None else 0
    t0 = time.perf_counter()
    body = verifier.sweep_polyharmonic(
        orders=range(args.k_min, args.k_max + 1),
        m_values=range(args.m_min, args.m_max + 1),
        trials=args.trials,
        seed=seed,
        points=args.points if args.points is not None else 1,
        mode=args.mode,
        tol=tol,
    )
    report = verifier.ResidualReport(
        kind="sweep-polyharmonic",
        mode=args.mode,
        seed=seed,
        body=body,
        exit_code=0 if body["all_match"] else 1,
        timing=time.perf_counter() - t0,
        tol=tol if args.mode == FLOAT else None,
    )
    return _finish(args, report)


def _cmd_selftest(args) -> int:
    tol = _resolve_tol(args)
    t0 = time.perf_counter()
    body = verifier.selftest(mode=args.mode, tol=tol)
    report = verifier.ResidualReport(
        kind="selftest",
        mode=args.mode,
        seed=None,
        body=body,
        exit_code=0 if body["all_ok"] else 1,
        timing=time.perf_counter() - t0,
        tol=tol if args.mode == FLOAT else None,
    )
    return _finish(args, report)


_HANDLERS = {
    "check": _cmd_check,
    "sweep-biharmonic": _cmd_sweep_biharmonic,
    "sweep-polyharmonic": _cmd_sweep_polyharmonic,
    "selftest": _cmd_selftest,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return _HANDLERS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except PolyharmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
