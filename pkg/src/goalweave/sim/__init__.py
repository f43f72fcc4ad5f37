from .scenario import (
    BackgroundJob,
    CostParams,
    HandlerSpec,
    Participant,
    Scenario,
    ScenarioInvalid,
    ScriptEntry,
    ThreadConfig,
    load_scenario,
    scenario_from_doc,
    shipped_scenario_path,
    shipped_scenarios,
)
from .engine import RunResult, TurnRecord, run_scenario, stub_reply, turn_quality
from .metrics import (
    ClassCounts,
    EfficiencyReport,
    EmptyDenominator,
    PairedRun,
    ThreadSavings,
    classify_turns,
    compare_policies,
    coordination_ratio,
    quality,
    thread_isolation_savings,
)

__all__ = [
    "BackgroundJob",
    "ClassCounts",
    "CostParams",
    "EfficiencyReport",
    "EmptyDenominator",
    "HandlerSpec",
    "PairedRun",
    "Participant",
    "RunResult",
    "Scenario",
    "ScenarioInvalid",
    "ScriptEntry",
    "ThreadConfig",
    "ThreadSavings",
    "TurnRecord",
    "classify_turns",
    "compare_policies",
    "coordination_ratio",
    "load_scenario",
    "quality",
    "run_scenario",
    "scenario_from_doc",
    "shipped_scenario_path",
    "shipped_scenarios",
    "stub_reply",
    "thread_isolation_savings",
    "turn_quality",
]
