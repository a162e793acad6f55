"""Command-line entry points.

    roughmass run <config>            run the pipeline, write reports
    roughmass check <config>          validate a config without running
    roughmass scenario-list           list scenario kinds
    roughmass bounds N P C1 FNORM VOL standalone inequality calculator

Exit codes: 0 pass, 1 acceptance failure, 2 config error,
3 numerical breakdown.
"""

from __future__ import annotations

import argparse
import sys

from .bounds import moser_bounds, moser_breakdown
from .conformal import structural_constants
from .errors import ConfigError, GateError
from .pipeline import (
    EXIT_CONFIG,
    EXIT_PASS,
    emit_report,
    parse_config,
    run_pipeline,
    validate_config,
)
from .scenarios import scenario_catalog


def _cmd_run(args) -> int:
    try:
        cfg = parse_config(args.config)
        validate_config(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    result = run_pipeline(cfg)
    files = emit_report(result, args.out or cfg.out_dir)
    for name, ok, detail in result.verdicts:
        print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    print(f"wrote {len(files)} files to {args.out or cfg.out_dir}")
    return result.status


def _cmd_check(args) -> int:
    try:
        cfg = parse_config(args.config)
        disc = validate_config(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"config ok: {cfg.scenario.kind} on {disc.kind} grid, "
          f"{disc.npts} nodes/axis (h = {disc.h:g}), "
          f"{len(cfg.eps_list)} eps branches")
    return EXIT_PASS


def _cmd_scenario_list(_args) -> int:
    for kind, desc in scenario_catalog().items():
        print(f"{kind:16s} {desc}")
    return EXIT_PASS


def _cmd_bounds(args) -> int:
    n, p = args.n, args.p
    sc = structural_constants(n, p if p > 1 else None)
    print(f"n = {n}, p = {p}")
    print(f"a_n = {sc.a_n:.17g}")
    print(f"n_star = {sc.n_star:.17g}")
    if sc.two_p_star is not None:
        print(f"(2p)_star = {sc.two_p_star:.17g}")
    if sc.critical:
        print("regime: critical/subcritical (p <= n/2); "
              "sup bounds unavailable, reporting the iteration breakdown")
        bd = moser_breakdown(n, args.c1, args.fnorm)
        print(f"beta_max = {bd.beta_max}")
        print(f"p_max = {bd.p_max:.17g}")
        gates = ", ".join(f"{v:.6g}" for v in bd.step_gates)
        print(f"step gates c1*beta^2*||f||: {gates}")
        return EXIT_PASS
    print(f"chi = {sc.chi:.17g}, sigma = {sc.sigma:.17g}, tau = {sc.tau:.17g}")
    A_p = args.c1 * args.fnorm * args.vol ** (2.0 / n - 1.0 / p)
    print(f"A_p = {A_p:.17g} (gate A_p < 1: {'pass' if A_p < 1 else 'FAIL'})")
    try:
        lo, hi = moser_bounds(n, p, args.c1, args.fnorm, args.vol)
        print(f"sup bracket: {lo:.17g} <= v <= {hi:.17g}")
    except GateError as exc:
        print(f"sup bracket unavailable: {exc}")
    bd = moser_breakdown(n, args.c1, args.fnorm)
    print(f"(if ||f||_(n/2) were {args.fnorm:g}: iteration breakdown at "
          f"beta_max = {bd.beta_max}, p_max = {bd.p_max:.17g})")
    return EXIT_PASS


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="roughmass",
        description="mass and curvature-correction numerics for "
                    "low-regularity asymptotically flat metrics")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a pipeline config")
    p_run.add_argument("config")
    p_run.add_argument("--out", default=None, help="override output directory")
    p_run.set_defaults(func=_cmd_run)

    p_check = sub.add_parser("check", help="validate a config without running")
    p_check.add_argument("config")
    p_check.set_defaults(func=_cmd_check)

    p_list = sub.add_parser("scenario-list", help="list scenario kinds")
    p_list.set_defaults(func=_cmd_scenario_list)

    p_b = sub.add_parser("bounds", help="standalone inequality calculator")
    p_b.add_argument("n", type=int)
    p_b.add_argument("p", type=float)
    p_b.add_argument("c1", type=float)
    p_b.add_argument("fnorm", type=float)
    p_b.add_argument("vol", type=float)
    p_b.set_defaults(func=_cmd_bounds)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
