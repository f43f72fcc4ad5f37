"""Turn classification, coordination ratio, quality, and paired-policy reports.

Hard guarantees (dominance N_P <= N_R and quality Q_P >= Q_R) are
asserted per paired run and raise TheoremViolation when broken. The
combined cost bound is reported with its factors but never asserted:
it is an approximation whose slack depends on scenario shape, so the
report carries (lhs, rhs, holds) for inspection instead of gating.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

from ..errors import GoalweaveError, TheoremViolation
from ..values import to_fraction
from .engine import RunResult, run_scenario, turn_quality
from .scenario import CATEGORIES, Scenario


class EmptyDenominator(GoalweaveError):
    pass


@dataclass(frozen=True)
class ClassCounts:
    progress: int
    coordination: int
    governance: int
    exploratory: int
    per_category: dict
    user_turns: int
    agent_turns: int

    @property
    def total(self) -> int:
        return self.progress + self.coordination + self.governance + self.exploratory


def classify_turns(turns: Sequence) -> ClassCounts:
    """Count every turn exactly once by its class; coordination turns
    also count under their C1..C4 category."""
    counts = {"progress": 0, "coordination": 0, "governance": 0, "exploratory": 0}
    per_category = {c: 0 for c in CATEGORIES}
    user = agent = 0
    for t in turns:
        counts[t.klass] += 1
        if t.klass == "coordination" and t.category:
            per_category[t.category] += 1
        if t.actor == "agent":
            agent += 1
        else:
            user += 1
    return ClassCounts(
        progress=counts["progress"],
        coordination=counts["coordination"],
        governance=counts["governance"],
        exploratory=counts["exploratory"],
        per_category=per_category,
        user_turns=user,
        agent_turns=agent,
    )


def coordination_ratio(counts: ClassCounts) -> Fraction:
    """Omega = coordination / (progress + governance); exploratory turns
    stay out of both sides."""
    denom = counts.progress + counts.governance
    if denom == 0:
        raise EmptyDenominator("no progress or governance turns to normalize by")
    return Fraction(counts.coordination, denom)


def quality(turns: Sequence) -> Fraction:
    """Q: summed content scores of pass-routed turns only; mechanical
    coordination cannot move it by construction."""
    return sum(
        (turn_quality(t.text) for t in turns if t.routing == "pass"), Fraction(0)
    )


def measured_c_elim(reactive_counts: ClassCounts, coverage: Sequence[str]) -> Fraction:
    """c_elim = sum of observed category weights over covered categories."""
    total = sum(reactive_counts.per_category.values())
    if total == 0:
        return Fraction(0)
    covered = sum(reactive_counts.per_category[c] for c in coverage)
    return Fraction(covered, total)


@dataclass(frozen=True)
class PairedRun:
    seed: int
    n_r: int
    n_p: int
    delta_n: int
    omega_r: Fraction
    omega_p: Fraction
    q_r: Fraction
    q_p: Fraction
    cost_r: Fraction
    cost_p: Fraction
    capped: bool
    stalled: bool


@dataclass(frozen=True)
class EfficiencyReport:
    scenario: str
    runs: int
    n_r_mean: Fraction
    n_p_mean: Fraction
    delta_n_mean: Fraction
    delta_n_min: int
    expected_savings: Fraction  # n_P * (1 - p_user) from the scenario params
    omega_r: Fraction
    omega_p: Fraction
    c_elim: Fraction
    omega_bound: Fraction  # omega_r * (1 - c_elim)
    omega_bound_holds: bool
    q_r: Fraction
    q_p: Fraction
    cost_r_mean: Fraction
    cost_p_mean: Fraction
    e_w: float
    cost_bound_rhs: Optional[Fraction]
    cost_bound_holds: Optional[bool]
    user_turns_r: Fraction
    agent_turns_r: Fraction
    user_turns_p: Fraction
    agent_turns_p: Fraction
    capped_any: bool
    stalled_any: bool
    per_run: tuple


def _mean(values) -> Fraction:
    vals = list(values)
    if not vals:
        return Fraction(0)
    total = Fraction(0)
    for v in vals:
        total += v if isinstance(v, Fraction) else Fraction(v)
    return total / len(vals)


def compare_policies(
    scenario: Scenario, runs: int = 1, base_seed: Optional[int] = None
) -> EfficiencyReport:
    """Paired reactive/proactive simulations over shared seeds.

    Asserts, per instance: N_P <= N_R and Q_P >= Q_R. Everything else
    (turn savings, coordination bound, cost bound) lands in the report.
    """
    if runs < 1:
        raise GoalweaveError("runs must be >= 1")
    seed0 = scenario.seed if base_seed is None else base_seed
    rows = []
    dyn_samples = []
    c_elim = Fraction(0)
    for r in range(runs):
        seed = seed0 + r
        reactive = run_scenario(scenario, "reactive", seed)
        proactive = run_scenario(scenario, "proactive", seed)
        n_r, n_p = len(reactive.turns), len(proactive.turns)
        if n_p > n_r:
            raise TheoremViolation(
                f"{scenario.name} seed {seed}: proactive used more turns "
                f"({n_p}) than reactive ({n_r})"
            )
        q_r, q_p = quality(reactive.turns), quality(proactive.turns)
        if q_p < q_r:
            raise TheoremViolation(
                f"{scenario.name} seed {seed}: quality dropped under the "
                f"proactive policy ({q_p} < {q_r})"
            )
        counts_r = classify_turns(reactive.turns)
        counts_p = classify_turns(proactive.turns)
        c_elim = measured_c_elim(counts_r, scenario.coverage)
        rows.append(
            (
                reactive,
                proactive,
                PairedRun(
                    seed=seed,
                    n_r=n_r,
                    n_p=n_p,
                    delta_n=n_r - n_p,
                    omega_r=coordination_ratio(counts_r),
                    omega_p=coordination_ratio(counts_p),
                    q_r=q_r,
                    q_p=q_p,
                    cost_r=reactive.total_cost,
                    cost_p=proactive.total_cost,
                    capped=reactive.capped or proactive.capped,
                    stalled=reactive.stalled or proactive.stalled,
                ),
            )
        )
        dyn_samples.extend(
            t.dyn_tokens
            for t in reactive.turns
            if t.dyn_tokens is not None and t.stream == "main"
        )
    paired = tuple(row[2] for row in rows)

    omega_r = _mean(p.omega_r for p in paired)
    omega_p = _mean(p.omega_p for p in paired)
    omega_bound = omega_r * (1 - c_elim)
    cost_r_mean = _mean(p.cost_r for p in paired)
    cost_p_mean = _mean(p.cost_p for p in paired)

    costs = scenario.costs
    e_w = scenario.e_w
    prefix = costs.k_perm + costs.k_sess
    ratio = to_fraction(costs.price_ratio)
    bound_rhs: Optional[Fraction] = None
    bound_holds: Optional[bool] = None
    if dyn_samples:
        k_dyn = _mean(dyn_samples)
        if k_dyn + prefix > 0:
            bound_rhs = (
                cost_r_mean
                * (1 - c_elim)
                * (1 - to_fraction(e_w))
                * (k_dyn + ratio * prefix)
                / (k_dyn + prefix)
            )
            bound_holds = cost_p_mean <= bound_rhs

    return EfficiencyReport(
        scenario=scenario.name,
        runs=runs,
        n_r_mean=_mean(p.n_r for p in paired),
        n_p_mean=_mean(p.n_p for p in paired),
        delta_n_mean=_mean(p.delta_n for p in paired),
        delta_n_min=min(p.delta_n for p in paired),
        expected_savings=scenario.n_p * (1 - to_fraction(scenario.p_user)),
        omega_r=omega_r,
        omega_p=omega_p,
        c_elim=c_elim,
        omega_bound=omega_bound,
        omega_bound_holds=omega_p <= omega_bound,
        q_r=_mean(p.q_r for p in paired),
        q_p=_mean(p.q_p for p in paired),
        cost_r_mean=cost_r_mean,
        cost_p_mean=cost_p_mean,
        e_w=e_w,
        cost_bound_rhs=bound_rhs,
        cost_bound_holds=bound_holds,
        user_turns_r=_mean(classify_turns(row[0].turns).user_turns for row in rows),
        agent_turns_r=_mean(classify_turns(row[0].turns).agent_turns for row in rows),
        user_turns_p=_mean(classify_turns(row[1].turns).user_turns for row in rows),
        agent_turns_p=_mean(classify_turns(row[1].turns).agent_turns for row in rows),
        capped_any=any(p.capped for p in paired),
        stalled_any=any(p.stalled for p in paired),
        per_run=paired,
    )


@dataclass(frozen=True)
class ThreadSavings:
    formula: int  # n_E * mean thread length * tokens per thread turn
    measured: Optional[int]
    matches: bool


def _final_main_dyn(run: RunResult) -> Optional[int]:
    for t in reversed(run.turns):
        if t.stream == "main" and t.dyn_tokens is not None:
            return t.dyn_tokens
    return None


def thread_isolation_savings(
    scenario: Scenario, seed: Optional[int] = None
) -> ThreadSavings:
    """Main-context token savings from isolating exploratory threads:
    the dynamic-block difference between the inlined (reactive) and
    isolated (proactive) runs at the last main-dialog LM call, checked
    against n_E * thread length * tokens per turn."""
    cfg = scenario.threads
    formula = 0 if cfg is None else cfg.count * cfg.length * cfg.tokens_per_turn
    reactive = run_scenario(scenario, "reactive", seed)
    proactive = run_scenario(scenario, "proactive", seed)
    dyn_r = _final_main_dyn(reactive)
    dyn_p = _final_main_dyn(proactive)
    if dyn_r is None or dyn_p is None:
        return ThreadSavings(formula=formula, measured=None, matches=formula == 0)
    measured = dyn_r - dyn_p
    return ThreadSavings(formula=formula, measured=measured, matches=measured == formula)
