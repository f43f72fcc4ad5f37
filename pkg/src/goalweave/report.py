"""Delimited and JSON output for runs, comparisons, and cache traces.

Numbers that the engine keeps as exact rationals are serialized through
format_fraction, so a value like 1/3 round-trips as "1/3" rather than a
rounded float and reruns stay byte-identical. All writers emit "\n" line
endings and sorted JSON keys for the same reason.
"""

from __future__ import annotations

import csv
import json
from fractions import Fraction
from pathlib import Path
from typing import Any, Iterable

from .context import TraceReport
from .sim.engine import RunResult
from .sim.metrics import ClassCounts, EfficiencyReport, classify_turns
from .values import format_fraction

TURN_COLUMNS = (
    "index",
    "tick",
    "actor",
    "class",
    "routing",
    "category",
    "marker",
    "stream",
    "state_after",
    "dyn_tokens",
    "cost",
    "text",
)

RUN_COLUMNS = (
    "scenario",
    "policy",
    "seed",
    "turns",
    "user_turns",
    "agent_turns",
    "progress",
    "coordination",
    "governance",
    "exploratory",
    "total_cost",
    "quality",
    "final_state",
    "capped",
    "stalled",
)

PAIRED_COLUMNS = (
    "seed",
    "n_r",
    "n_p",
    "delta_n",
    "omega_r",
    "omega_p",
    "q_r",
    "q_p",
    "cost_r",
    "cost_p",
    "capped",
    "stalled",
)

TRACE_COLUMNS = ("turn", "cold", "session_hit", "cost")


def scalar(value: Any) -> Any:
    """JSON-safe scalar: exact rationals become strings, None passes through."""
    if isinstance(value, bool) or value is None:
        return value
    if isinstance(value, Fraction):
        return format_fraction(value)
    return value


def cell(value: Any) -> str:
    """CSV cell text; None renders empty, booleans lowercase."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    value = scalar(value)
    return str(value)


def turn_row(turn) -> dict:
    return {
        "index": turn.index,
        "tick": turn.tick,
        "actor": turn.actor,
        "class": turn.klass,
        "routing": turn.routing,
        "category": turn.category,
        "marker": turn.marker,
        "stream": turn.stream,
        "state_after": turn.state_after,
        "dyn_tokens": turn.dyn_tokens,
        "cost": turn.cost,
        "text": turn.text,
    }


def counts_doc(counts: ClassCounts) -> dict:
    return {
        "progress": counts.progress,
        "coordination": counts.coordination,
        "governance": counts.governance,
        "exploratory": counts.exploratory,
        "per_category": dict(counts.per_category),
        "user_turns": counts.user_turns,
        "agent_turns": counts.agent_turns,
    }


def run_doc(result: RunResult) -> dict:
    counts = classify_turns(result.turns)
    return {
        "scenario": result.scenario,
        "policy": result.policy,
        "seed": result.seed,
        "final_state": result.final_state,
        "capped": result.capped,
        "stalled": result.stalled,
        "total_cost": scalar(result.total_cost),
        "quality": scalar(result.quality),
        "counts": counts_doc(counts),
        "turns": [
            {k: scalar(v) for k, v in turn_row(t).items()} for t in result.turns
        ],
        "affordances": list(result.affordances),
        "errors": list(result.errors),
    }


def run_row(result: RunResult) -> dict:
    counts = classify_turns(result.turns)
    return {
        "scenario": result.scenario,
        "policy": result.policy,
        "seed": result.seed,
        "turns": len(result.turns),
        "user_turns": counts.user_turns,
        "agent_turns": counts.agent_turns,
        "progress": counts.progress,
        "coordination": counts.coordination,
        "governance": counts.governance,
        "exploratory": counts.exploratory,
        "total_cost": result.total_cost,
        "quality": result.quality,
        "final_state": result.final_state,
        "capped": result.capped,
        "stalled": result.stalled,
    }


def report_doc(report: EfficiencyReport) -> dict:
    doc = {
        "scenario": report.scenario,
        "runs": report.runs,
        "n_r_mean": scalar(report.n_r_mean),
        "n_p_mean": scalar(report.n_p_mean),
        "delta_n_mean": scalar(report.delta_n_mean),
        "delta_n_min": report.delta_n_min,
        "expected_savings": scalar(report.expected_savings),
        "omega_r": scalar(report.omega_r),
        "omega_p": scalar(report.omega_p),
        "c_elim": scalar(report.c_elim),
        "omega_bound": scalar(report.omega_bound),
        "omega_bound_holds": report.omega_bound_holds,
        "q_r": scalar(report.q_r),
        "q_p": scalar(report.q_p),
        "cost_r_mean": scalar(report.cost_r_mean),
        "cost_p_mean": scalar(report.cost_p_mean),
        "e_w": report.e_w,
        "cost_bound_rhs": scalar(report.cost_bound_rhs),
        "cost_bound_holds": report.cost_bound_holds,
        "user_turns_r": scalar(report.user_turns_r),
        "agent_turns_r": scalar(report.agent_turns_r),
        "user_turns_p": scalar(report.user_turns_p),
        "agent_turns_p": scalar(report.agent_turns_p),
        "capped_any": report.capped_any,
        "stalled_any": report.stalled_any,
        "per_run": [
            {
                "seed": r.seed,
                "n_r": r.n_r,
                "n_p": r.n_p,
                "delta_n": r.delta_n,
                "omega_r": scalar(r.omega_r),
                "omega_p": scalar(r.omega_p),
                "q_r": scalar(r.q_r),
                "q_p": scalar(r.q_p),
                "cost_r": scalar(r.cost_r),
                "cost_p": scalar(r.cost_p),
                "capped": r.capped,
                "stalled": r.stalled,
            }
            for r in report.per_run
        ],
    }
    return doc


def trace_doc(trace: TraceReport) -> dict:
    return {
        "hit_rate": scalar(trace.hit_rate),
        "mean_cost": scalar(trace.mean_cost),
        "steady_cost": scalar(trace.steady_cost),
        "predicted_hit_rate": scalar(trace.predicted_hit_rate),
        "rows": [
            {
                "turn": r.turn,
                "cold": r.cold,
                "session_hit": r.session_hit,
                "cost": scalar(r.cost),
            }
            for r in trace.rows
        ],
    }


def write_json(doc: dict, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return path


def _write_csv(rows: Iterable[dict], columns: tuple, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(columns), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: cell(row.get(k)) for k in columns})
    return path


def write_turns_csv(result: RunResult, path: Path) -> Path:
    return _write_csv((turn_row(t) for t in result.turns), TURN_COLUMNS, path)


def write_runs_csv(results: Iterable[RunResult], path: Path) -> Path:
    return _write_csv((run_row(r) for r in results), RUN_COLUMNS, path)


def write_report_csv(report: EfficiencyReport, path: Path) -> Path:
    rows = (
        {
            "seed": r.seed,
            "n_r": r.n_r,
            "n_p": r.n_p,
            "delta_n": r.delta_n,
            "omega_r": r.omega_r,
            "omega_p": r.omega_p,
            "q_r": r.q_r,
            "q_p": r.q_p,
            "cost_r": r.cost_r,
            "cost_p": r.cost_p,
            "capped": r.capped,
            "stalled": r.stalled,
        }
        for r in report.per_run
    )
    return _write_csv(rows, PAIRED_COLUMNS, path)


def write_trace_csv(trace: TraceReport, path: Path) -> Path:
    rows = (
        {"turn": r.turn, "cold": r.cold, "session_hit": r.session_hit, "cost": r.cost}
        for r in trace.rows
    )
    return _write_csv(rows, TRACE_COLUMNS, path)


def summary_line(result: RunResult) -> str:
    counts = classify_turns(result.turns)
    return (
        f"{result.scenario} {result.policy} seed={result.seed}: "
        f"{len(result.turns)} turns "
        f"(prog {counts.progress}, coord {counts.coordination}, "
        f"gov {counts.governance}, expl {counts.exploratory}), "
        f"cost {format_fraction(result.total_cost)}, "
        f"final={result.final_state}"
        + (" CAPPED" if result.capped else "")
        + (" STALLED" if result.stalled else "")
    )


def comparison_line(report: EfficiencyReport) -> str:
    return (
        f"{report.scenario}: N_R={format_fraction(report.n_r_mean)} "
        f"N_P={format_fraction(report.n_p_mean)} "
        f"dN={format_fraction(report.delta_n_mean)} "
        f"omega_R={format_fraction(report.omega_r)} "
        f"omega_P={format_fraction(report.omega_p)} "
        f"Q_P-Q_R={format_fraction(report.q_p - report.q_r)} "
        f"runs={report.runs}"
    )
