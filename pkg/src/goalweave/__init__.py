"""goalweave: goal-stream state machines, sandboxed wisdom pipelines,
declarative event wiring, cached context costing, cross-platform vote
governance, and a deterministic reactive-vs-proactive chat simulator.

The public surface below is what the CLI and the test suite build on;
submodules stay importable for anything narrower.
"""

from .errors import GoalweaveError, TheoremViolation
from .values import (
    TYPE_NAMES,
    canonical_json,
    deep_equal,
    format_fraction,
    to_fraction,
)
from .streams import Event, Snapshot, StreamGraph, StreamId
from .goals import (
    AmbiguousTransition,
    AttributeCondition,
    GoalMachine,
    Transition,
    check_advancement,
    machine_from_doc,
    position,
    step,
    validate_machine,
)
from .wiring import Handler, PolicyGraph, build_policy_graph, route_event
from .context import (
    Block,
    CacheState,
    ContextBlockSet,
    CostModel,
    cache_hit_probability,
    generation_cost,
    simulate_cache_trace,
    token_count,
    turn_cost,
)
from .governance import (
    PLATFORMS,
    Tally,
    cast_vote,
    evaluate_promotion,
    render,
    tally,
)
from .wisdom import (
    Phase,
    WisdomLibrary,
    WisdomProgram,
    execute_sandboxed,
    phase_precedes,
    validate_phase_correct,
)
from .sim import (
    EfficiencyReport,
    RunResult,
    Scenario,
    compare_policies,
    load_scenario,
    run_scenario,
    shipped_scenarios,
    thread_isolation_savings,
)

__version__ = "0.1.0"

__all__ = [
    "AmbiguousTransition",
    "AttributeCondition",
    "Block",
    "CacheState",
    "ContextBlockSet",
    "CostModel",
    "EfficiencyReport",
    "Event",
    "GoalMachine",
    "GoalweaveError",
    "Handler",
    "PLATFORMS",
    "Phase",
    "PolicyGraph",
    "RunResult",
    "Scenario",
    "Snapshot",
    "StreamGraph",
    "StreamId",
    "TYPE_NAMES",
    "Tally",
    "TheoremViolation",
    "Transition",
    "WisdomLibrary",
    "WisdomProgram",
    "build_policy_graph",
    "cache_hit_probability",
    "canonical_json",
    "cast_vote",
    "check_advancement",
    "compare_policies",
    "deep_equal",
    "evaluate_promotion",
    "execute_sandboxed",
    "format_fraction",
    "generation_cost",
    "load_scenario",
    "machine_from_doc",
    "phase_precedes",
    "position",
    "render",
    "route_event",
    "run_scenario",
    "shipped_scenarios",
    "simulate_cache_trace",
    "step",
    "tally",
    "thread_isolation_savings",
    "to_fraction",
    "token_count",
    "turn_cost",
    "validate_machine",
    "validate_phase_correct",
    "__version__",
]
