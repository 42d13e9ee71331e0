"""Command line front end: solve, generate, validate, oracle and stats.

Exit codes: 0 proven optimal (or success), 1 input error, 2 limit reached,
3 oracle budget exceeded.  ``LOTGEN_LOG`` sets the log level.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Any

from lotdesign.controller import Conclusion, SolverConfig, SolveReport, solve
from lotdesign.generate import PRESETS, generate, generate_preset
from lotdesign.heuristic import InfeasibleError
from lotdesign.model import (
    Instance,
    LotTypeParams,
    check_instance,
    complete_ilp_dimensions,
    count_applicable_lot_types,
    fmt_scaled,
    instance_to_dict,
)
from lotdesign.rmp import DEFAULT_EPS
from lotdesign.subsolver import OracleBudgetExceeded, brute_force_oracle

logger = logging.getLogger("lotdesign")

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_LIMIT = 2
EXIT_BUDGET = 3


class InputError(Exception):
    pass


# -- instance files -------------------------------------------------------------


def dumps_instance(inst: Instance) -> str:
    return json.dumps(instance_to_dict(inst), indent=2) + "\n"


def parse_instance(text: str, source: str = "<string>") -> Instance:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{source}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(raw, dict):
        raise InputError(f"{source}: top level must be a JSON object")
    report, inst = check_instance(raw)
    for w in report.warnings:
        logger.warning("%s: %s", source, w)
    if inst is None:
        raise InputError(f"{source}: invalid instance\n" + "\n".join(f"  - {e}" for e in report.errors))
    return inst


def load_instance(path: str | Path) -> Instance:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None
    return parse_instance(text, str(path))


# -- reports ---------------------------------------------------------------------


def summary(inst: Instance, report: SolveReport, name: str = "") -> str:
    """Human-readable result with the counters of a column generation run."""
    c, cert = report.counters, report.certificate
    count = count_applicable_lot_types(inst.params)
    variables, constraints = complete_ilp_dimensions(inst.num_branches, count, len(inst.multiplicities))
    rows: list[tuple[str, Any]] = [
        ("instance", name or "-"),
        ("|B| / |S| / k / |M|", f"{inst.num_branches} / {inst.num_sizes} / {inst.k} / {len(inst.multiplicities)}"),
        ("applicable lot-types", count),
        ("complete ILP variables", variables),
        ("complete ILP constraints", constraints),
        ("CPU time [s]", f"{c.wall_time:.2f}"),
        ("variables (initial LP)", c.initial_lp_variables),
        ("constraints (initial LP)", c.initial_lp_constraints),
        ("variables (final LP)", c.final_lp_variables),
        ("constraints (final LP)", c.final_lp_constraints),
        ("# cover cuts", c.cover_cuts),
        ("# pricing steps", c.pricing_rounds),
        ("# dives", c.dives),
        ("LP solves / iterations", f"{c.lp_solves} / {c.lp_iterations}"),
        ("peak lot-type pool", c.peak_pool),
        ("conclusion", cert.conclusion.value),
        ("cost", fmt_scaled(cert.incumbent_cost, inst.scale_exp)),
        ("lower bound", fmt_scaled(cert.lower_bound, inst.scale_exp)),
        ("gap", fmt_scaled(cert.gap, inst.scale_exp)),
        ("selected lot-types", " ".join("(" + ",".join(map(str, l)) + ")" for l in report.assignment.selected)),
    ]
    width = max(len(k) for k, _ in rows)
    return "\n".join(f"{k:<{width}}  {v}" for k, v in rows) + "\n"


def _exit_for(conclusion: Conclusion) -> int:
    return EXIT_OK if conclusion is Conclusion.PROVEN_OPTIMAL else EXIT_LIMIT


# -- commands -------------------------------------------------------------------


def cmd_solve(args: argparse.Namespace) -> int:
    inst = load_instance(args.instance)
    config = SolverConfig(
        eps=args.eps,
        tol_rc=args.tol_rc,
        max_rounds=args.max_rounds,
        time_limit=args.time_limit,
        threads=args.threads,
        seed=args.seed,
    )
    try:
        report = solve(inst, config)
    except InfeasibleError as exc:
        raise InputError(f"{args.instance}: {exc}") from None
    out = Path(args.report)
    out.write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    text = summary(inst, report, str(args.instance))
    out.with_suffix(".txt").write_text(text)
    sys.stdout.write(text)
    return _exit_for(report.conclusion)


def _params_from(args: argparse.Namespace) -> dict:
    missing = [f for f in ("branches", "sizes", "k", "min_c", "max_c", "min_t", "max_t") if getattr(args, f) is None]
    if missing:
        raise InputError("without --preset these options are required: " + ", ".join("--" + m.replace("_", "-") for m in missing))
    return dict(
        num_branches=args.branches,
        num_sizes=args.sizes,
        k=args.k,
        min_c=args.min_c,
        max_c=args.max_c,
        min_t=args.min_t,
        max_t=args.max_t,
        supply=tuple(args.supply) if args.supply else None,
        multiplicities=tuple(args.multiplicities),
    )


def cmd_generate(args: argparse.Namespace) -> int:
    try:
        if args.preset:
            inst = generate_preset(args.preset, seed=args.seed)
        else:
            inst = generate(**_params_from(args), seed=args.seed)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    text = dumps_instance(inst)
    if args.output == "-":
        sys.stdout.write(text)
    else:
        Path(args.output).write_text(text)
        logger.info("wrote %s", args.output)
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    try:
        text = Path(args.instance).read_text()
        raw = json.loads(text)
    except OSError as exc:
        raise InputError(f"{args.instance}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{args.instance}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    report, inst = check_instance(raw if isinstance(raw, dict) else {})
    print(report)
    if inst is None:
        return EXIT_INPUT
    print(f"ok: {inst.num_branches} branches, {inst.num_sizes} sizes, scale 10^{inst.scale_exp}")
    return EXIT_OK


def cmd_oracle(args: argparse.Namespace) -> int:
    inst = load_instance(args.instance)
    try:
        best = brute_force_oracle(inst, max_lot_types=args.max_lot_types, budget=args.budget)
    except OracleBudgetExceeded as exc:
        print(f"oracle budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    if best is None:
        print("infeasible: no selection meets the supply window")
        return EXIT_OK
    print(f"optimal cost {fmt_scaled(best.total_cost, inst.scale_exp)} (scaled {best.total_cost})")
    print("selected lot-types", " ".join("(" + ",".join(map(str, l)) + ")" for l in best.selected))
    if args.json:
        Path(args.json).write_text(json.dumps(best.to_dict(), indent=2) + "\n")
    return EXIT_OK


def cmd_stats(args: argparse.Namespace) -> int:
    if args.params:
        num_sizes, min_c, max_c, min_t, max_t = args.params
        params = LotTypeParams(num_sizes, min_c, max_c, min_t, max_t)
        num_b, num_m = args.branches, args.num_multiplicities
    else:
        if args.preset:
            p = PRESETS[args.preset]
            params = LotTypeParams(p.num_sizes, p.min_c, p.max_c, p.min_t, p.max_t)
            num_b, num_m = p.num_branches, len(p.multiplicities)
        elif args.instance:
            inst = load_instance(args.instance)
            params, num_b, num_m = inst.params, inst.num_branches, len(inst.multiplicities)
        else:
            raise InputError("stats needs an instance file, --preset or --params")
    problems = params.problems()
    if problems:
        raise InputError("; ".join(problems))
    count = count_applicable_lot_types(params)
    print(f"applicable lot-types  {count}")
    if num_b is not None and count > 0:
        variables, constraints = complete_ilp_dimensions(num_b, count, num_m)
        print(f"complete ILP variables    {variables}")
        print(f"complete ILP constraints  {constraints}")
    return EXIT_OK


# -- parser ------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lotdesign", description="Exact lot-type design by branch-and-price-and-cut.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve an instance to proven optimality")
    p.add_argument("instance")
    p.add_argument("--eps", type=float, default=DEFAULT_EPS, help="support threshold for dives (default %(default)s)")
    p.add_argument("--tol-rc", type=float, default=SolverConfig.tol_rc, help="reduced-cost tolerance in scaled units")
    p.add_argument("--max-rounds", type=int, default=SolverConfig.max_rounds, help="limit on RMP solves")
    p.add_argument("--time-limit", type=float, default=None, help="wall-clock limit in seconds")
    p.add_argument("--threads", type=int, default=1, help="worker threads for pricing")
    p.add_argument("--seed", type=int, default=0, help="recorded in the report; the solve is deterministic")
    p.add_argument("--report", default="report.json", help="JSON report path; the text summary goes next to it")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("generate", help="write a synthetic instance")
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--branches", type=int)
    p.add_argument("--sizes", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--min-c", type=int)
    p.add_argument("--max-c", type=int)
    p.add_argument("--min-t", type=int)
    p.add_argument("--max-t", type=int)
    p.add_argument("--supply", type=int, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--multiplicities", type=int, nargs="+", default=[1, 2, 3])
    p.add_argument("-o", "--output", default="-", help="output path, '-' for stdout")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("validate", help="check an instance file and list every problem")
    p.add_argument("instance")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("oracle", help="brute-force optimum for small instances")
    p.add_argument("instance")
    p.add_argument("--max-lot-types", type=int, default=1000)
    p.add_argument("--budget", type=float, default=5e9, help="work estimate limit")
    p.add_argument("--json", help="also write the assignment as JSON")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("stats", help="lot-type count and complete-ILP dimensions")
    p.add_argument("instance", nargs="?")
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--params", type=int, nargs=5, metavar=("S", "MIN_C", "MAX_C", "MIN_T", "MAX_T"))
    p.add_argument("--branches", type=int, help="|B| for the ILP dimensions with --params")
    p.add_argument("--num-multiplicities", type=int, default=3)
    p.set_defaults(func=cmd_stats)
    return parser


def main(argv: list[str] | None = None) -> int:
    level = os.environ.get("LOTGEN_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as exc:  # configuration errors
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
