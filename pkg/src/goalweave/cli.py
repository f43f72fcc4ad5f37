"""Command line front end.

Three commands:

  run          simulate a scenario under one or both policies and write
               turn logs, comparison reports, and figures to a directory
  verify       run the self-check suites (exit 1 if any check fails)
  cache-trace  Monte-Carlo the context cost model and write the trace

Exit codes: 0 success, 1 a checked property failed, 2 usage error.
All outputs are deterministic: rerunning a command with the same
arguments produces byte-identical files.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import plots, report
from .context import CostModel, simulate_cache_trace
from .errors import GoalweaveError
from .sim.engine import run_scenario
from .sim.metrics import TheoremViolation, compare_policies
from .sim.scenario import ScenarioInvalid, load_scenario, shipped_scenario_path, shipped_scenarios
from .values import format_fraction
from .verify import SUITES

SUITE_ORDER = (
    "stability",
    "composition",
    "wiring",
    "dominance",
    "coordination",
    "quality",
    "votes",
    "hierarchy",
)

ENV_SEED = "GOALWEAVE_SEED"


def _fallback_seed(explicit, default):
    if explicit is not None:
        return explicit
    env = os.environ.get(ENV_SEED)
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise SystemExit(f"{ENV_SEED} must be an integer, got {env!r}")
    return default


def _resolve_scenario(token: str) -> Path:
    path = Path(token)
    if path.suffix == ".toml":
        if path.exists():
            return path
        raise ScenarioInvalid(f"no such scenario file: {token}")
    names = shipped_scenarios()
    if token in names:
        return shipped_scenario_path(token)
    raise ScenarioInvalid(f"unknown scenario {token!r}; shipped: {', '.join(names)}")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="goalweave",
        description="Goal-stream agent runtime and reactive-vs-proactive simulator.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="simulate a scenario and write reports")
    p_run.add_argument("--scenario", required=True, help="shipped scenario name or a TOML path")
    p_run.add_argument(
        "--policy", choices=("reactive", "proactive", "both"), default="both"
    )
    p_run.add_argument("--runs", type=int, default=1)
    p_run.add_argument("--seed", type=int, default=None, help=f"default: ${ENV_SEED} or the scenario's seed")
    p_run.add_argument("--output", default="out", help="directory for reports and figures")
    p_run.add_argument("--format", choices=("json", "csv", "both"), default="both")
    p_run.add_argument("--no-plot", action="store_true", help="skip figure rendering")

    p_verify = sub.add_parser("verify", help="run self-check suites")
    p_verify.add_argument(
        "suites",
        nargs="*",
        metavar="suite",
        help=f"suites to run (default: all). Available: {', '.join(SUITE_ORDER)}",
    )

    p_trace = sub.add_parser("cache-trace", help="simulate the context cache cost model")
    p_trace.add_argument("--turns", type=int, default=1000)
    p_trace.add_argument("--change-rate", type=float, default=0.1)
    p_trace.add_argument("--ttl", type=float, default=1e9)
    p_trace.add_argument("--seed", type=int, default=None)
    p_trace.add_argument("--k-perm", type=int, default=1000)
    p_trace.add_argument("--k-sess", type=int, default=2000)
    p_trace.add_argument("--k-dyn", type=int, default=500)
    p_trace.add_argument("--k-cold", type=int, default=4000)
    p_trace.add_argument("--turn-interval", type=float, default=1.0)
    p_trace.add_argument("--price-ratio", type=float, default=0.1)
    p_trace.add_argument("--output", default="out")
    p_trace.add_argument("--format", choices=("json", "csv", "both"), default="both")
    p_trace.add_argument("--no-plot", action="store_true")
    return parser


def _want(fmt: str, kind: str) -> bool:
    return fmt in (kind, "both")


def _cmd_run(args) -> int:
    scenario_path = _resolve_scenario(args.scenario)
    scenario = load_scenario(scenario_path)
    if args.runs < 1:
        print("--runs must be >= 1", file=sys.stderr)
        return 2
    seed = _fallback_seed(args.seed, scenario.seed)
    out_dir = Path(args.output)
    name = scenario.name

    policies = ("reactive", "proactive") if args.policy == "both" else (args.policy,)
    first_runs = {}
    for policy in policies:
        results = [run_scenario(scenario, policy=policy, seed=seed + r) for r in range(args.runs)]
        first_runs[policy] = results[0]
        for result in results:
            print(report.summary_line(result))
        if _want(args.format, "json"):
            report.write_json(report.run_doc(results[0]), out_dir / f"{name}_{policy}_turns.json")
        if _want(args.format, "csv"):
            report.write_turns_csv(results[0], out_dir / f"{name}_{policy}_turns.csv")
            report.write_runs_csv(results, out_dir / f"{name}_{policy}_runs.csv")

    if args.policy == "both":
        try:
            rep = compare_policies(scenario, runs=args.runs, base_seed=seed)
        except TheoremViolation as exc:
            print(f"THEOREM VIOLATION: {exc}", file=sys.stderr)
            return 1
        print(report.comparison_line(rep))
        if _want(args.format, "json"):
            report.write_json(report.report_doc(rep), out_dir / f"{name}_report.json")
        if _want(args.format, "csv"):
            report.write_report_csv(rep, out_dir / f"{name}_report.csv")

    if not args.no_plot:
        plots.plot_all_for_run(
            [first_runs[p] for p in policies], out_dir, name
        )
    return 0


def _cmd_verify(args) -> int:
    chosen = args.suites or list(SUITE_ORDER)
    unknown = [s for s in chosen if s not in SUITES]
    if unknown:
        print(
            f"unknown suite{'s' if len(unknown) > 1 else ''}: {', '.join(unknown)}",
            file=sys.stderr,
        )
        print(f"available: {', '.join(SUITE_ORDER)}", file=sys.stderr)
        return 2
    failed = 0
    for suite in chosen:
        for check in SUITES[suite]():
            mark = "ok" if check.ok else "FAIL"
            detail = f" ({check.detail})" if check.detail else ""
            print(f"{mark:4s} {suite}: {check.name}{detail}")
            if not check.ok:
                failed += 1
    if failed:
        print(f"{failed} check{'s' if failed > 1 else ''} failed", file=sys.stderr)
        return 1
    return 0


def _cmd_trace(args) -> int:
    if args.turns < 1:
        print("--turns must be >= 1", file=sys.stderr)
        return 2
    if not 0 <= args.change_rate <= 1:
        print("--change-rate must be in [0, 1]", file=sys.stderr)
        return 2
    seed = _fallback_seed(args.seed, 7)
    try:
        model = CostModel(cache_price_ratio=args.price_ratio)
        trace = simulate_cache_trace(
            args.turns,
            args.change_rate,
            args.ttl,
            model,
            seed,
            k_perm=args.k_perm,
            k_sess=args.k_sess,
            k_dyn=args.k_dyn,
            k_cold=args.k_cold,
            turn_interval=args.turn_interval,
        )
    except GoalweaveError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    out_dir = Path(args.output)
    if _want(args.format, "json"):
        report.write_json(report.trace_doc(trace), out_dir / "cache_trace.json")
    if _want(args.format, "csv"):
        report.write_trace_csv(trace, out_dir / "cache_trace.csv")
    if not args.no_plot:
        plots.plot_trace(trace, out_dir / "cache_trace.png")
    hit = "n/a" if trace.hit_rate is None else format_fraction(trace.hit_rate)
    print(
        f"cache-trace turns={args.turns} seed={seed}: hit_rate={hit} "
        f"mean_cost={format_fraction(trace.mean_cost)} "
        f"steady_cost={format_fraction(trace.steady_cost)}"
    )
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "verify":
            return _cmd_verify(args)
        return _cmd_trace(args)
    except ScenarioInvalid as exc:
        print(str(exc), file=sys.stderr)
        return 2
    except TheoremViolation as exc:
        print(f"THEOREM VIOLATION: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
