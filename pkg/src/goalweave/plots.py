"""Matplotlib figures for run reports and cache traces.

Rendering is pinned for reproducibility: Agg backend, fixed figure
geometry, and a constant Software tag in the PNG metadata so reruns of
the same scenario produce byte-identical files.
"""

from __future__ import annotations

from pathlib import Path
from typing import Iterable, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .context import TraceReport
from .sim.engine import RunResult
from .sim.metrics import classify_turns

FIGSIZE = (8.0, 4.5)
DPI = 120
PNG_METADATA = {"Software": "goalweave"}

CLASS_ORDER = ("progress", "coordination", "governance", "exploratory")
POLICY_COLORS = {"reactive": "#b4553c", "proactive": "#3c6eb4"}


def _save(fig, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=DPI, metadata=PNG_METADATA)
    plt.close(fig)
    return path


def plot_turn_classes(results: Sequence[RunResult], path: Path) -> Path:
    """Grouped bars: turn count per class, one group color per policy."""
    fig, ax = plt.subplots(figsize=FIGSIZE)
    width = 0.8 / max(1, len(results))
    for i, result in enumerate(results):
        counts = classify_turns(result.turns)
        values = [getattr(counts, name) for name in CLASS_ORDER]
        offsets = [j + i * width for j in range(len(CLASS_ORDER))]
        ax.bar(
            offsets,
            values,
            width=width,
            label=f"{result.policy} (seed {result.seed})",
            color=POLICY_COLORS.get(result.policy),
        )
    ax.set_xticks([j + 0.4 - width / 2 for j in range(len(CLASS_ORDER))])
    ax.set_xticklabels(CLASS_ORDER)
    ax.set_ylabel("turns")
    ax.set_title(results[0].scenario if results else "run")
    ax.legend()
    fig.tight_layout()
    return _save(fig, path)


def plot_cumulative_cost(results: Sequence[RunResult], path: Path) -> Path:
    """Cumulative reply cost against turn index, one line per policy."""
    fig, ax = plt.subplots(figsize=FIGSIZE)
    for result in results:
        xs = [0]
        ys = [0.0]
        running = 0.0
        for turn in result.turns:
            if turn.cost is None:
                continue
            running += float(turn.cost)
            xs.append(turn.index)
            ys.append(running)
        ax.step(
            xs,
            ys,
            where="post",
            label=f"{result.policy} (total {running:g})",
            color=POLICY_COLORS.get(result.policy),
        )
    ax.set_xlabel("turn")
    ax.set_ylabel("cumulative cost (token units)")
    ax.set_title(results[0].scenario if results else "run")
    ax.legend()
    fig.tight_layout()
    return _save(fig, path)


def plot_trace(trace: TraceReport, path: Path) -> Path:
    """Per-turn context cost with cold turns marked and the all-hit floor."""
    fig, ax = plt.subplots(figsize=FIGSIZE)
    turns = [r.turn for r in trace.rows]
    costs = [float(r.cost) for r in trace.rows]
    ax.plot(turns, costs, color="#3c6eb4", linewidth=1.0, label="turn cost")
    cold_turns = [r.turn for r in trace.rows if r.cold]
    cold_costs = [float(r.cost) for r in trace.rows if r.cold]
    if cold_turns:
        ax.scatter(cold_turns, cold_costs, color="#b4553c", s=12, zorder=3, label="cold turn")
    ax.axhline(
        float(trace.steady_cost),
        color="#777777",
        linestyle="--",
        linewidth=1.0,
        label="all-hit steady cost",
    )
    hit = "n/a" if trace.hit_rate is None else f"{float(trace.hit_rate):.3f}"
    ax.set_xlabel("turn")
    ax.set_ylabel("cost (token units)")
    ax.set_title(f"cache trace (hit rate {hit})")
    ax.legend()
    fig.tight_layout()
    return _save(fig, path)


def plot_all_for_run(results: Iterable[RunResult], out_dir: Path, scenario: str) -> list:
    """The standard pair of figures for a run directory."""
    results = list(results)
    out_dir = Path(out_dir)
    written = [
        plot_turn_classes(results, out_dir / f"{scenario}_turns.png"),
        plot_cumulative_cost(results, out_dir / f"{scenario}_cost.png"),
    ]
    return written
