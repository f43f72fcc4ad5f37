"""Goal state machines and proactive advancement.

A machine is (Q, q0, F, delta, Lambda, Pi).  Transitions are
edge-triggered: a transition fires when its attribute condition is
false under the attributes before an event's delta and true after it,
so replaying a history through `step` is a pure fold.  Terminal states
are absorbing and carry no outgoing transitions (the validator
enforces this).  Advancement conditions (q, gamma, mu) emit structured
messages from graph state alone; deduplication against already-emitted
messages is the harness's job, keyed by (stream, condition,
state-entry).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Optional

from .errors import GoalweaveError
from .values import deep_equal
from .wisdom import dsl

OPS = ("=", "!=", ">", ">=", "<", "<=")
_OP_ALIASES = {"≠": "!=", "≥": ">=", "≤": "<="}

INPUT_MODES = ("free_text", "option_select", "vote", "none")

MESSAGE_KINDS = (
    "options",
    "governance_affordance",
    "clarification",
    "state_announcement",
)

GAMMA_TIME_LIMIT_MS = 50.0
GAMMA_MEMORY_LIMIT = 64 * 1024 * 1024


class GoalError(GoalweaveError):
    pass


class AmbiguousTransition(GoalError):
    pass


@dataclass(frozen=True)
class AttributeCondition:
    field: str
    op: str
    value: Any

    def __post_init__(self) -> None:
        op = _OP_ALIASES.get(self.op, self.op)
        object.__setattr__(self, "op", op)
        if op not in OPS:
            raise GoalError(f"unknown condition operator {self.op!r}")
        if op not in ("=", "!=") and (
            isinstance(self.value, bool) or not isinstance(self.value, (int, float))
        ):
            raise GoalError(f"ordering operator {op!r} requires a numeric value")

    def holds(self, attributes: Mapping[str, Any]) -> bool:
        if self.field not in attributes:
            return False
        actual = attributes[self.field]
        if self.op == "=":
            return deep_equal(actual, self.value)
        if self.op == "!=":
            return not deep_equal(actual, self.value)
        if isinstance(actual, bool) or not isinstance(actual, (int, float)):
            return False
        if self.op == ">":
            return actual > self.value
        if self.op == ">=":
            return actual >= self.value
        if self.op == "<":
            return actual < self.value
        return actual <= self.value


@dataclass(frozen=True)
class Transition:
    source: str
    condition: AttributeCondition
    target: str


@dataclass(frozen=True)
class ProactiveCondition:
    target_state: str
    gamma_source: str
    mu_source: str
    gamma_ast: tuple = field(compare=False, repr=False, default=())
    mu_ast: tuple = field(compare=False, repr=False, default=())
    name: str = ""
    preempts: str = ""  # coordination category this condition covers, if any

    def __post_init__(self) -> None:
        if not self.gamma_ast:
            object.__setattr__(self, "gamma_ast", dsl.parse_program(self.gamma_source))
        if not self.mu_ast:
            object.__setattr__(self, "mu_ast", dsl.parse_program(self.mu_source))


@dataclass(frozen=True)
class ProactiveMessage:
    kind: str
    body: Mapping[str, Any]
    condition_index: int
    options: Optional[tuple] = None


@dataclass(frozen=True)
class GoalMachine:
    stream_type: str
    states: tuple
    initial: str
    terminal: frozenset
    transitions: tuple
    input_modes: Mapping[str, frozenset] = field(default_factory=dict)
    advancement: tuple = ()

    def outgoing(self, state: str) -> tuple:
        return tuple(t for t in self.transitions if t.source == state)


def validate_machine(machine: GoalMachine) -> list:
    """Report well-formedness problems; an empty report means well-formed."""
    report = []
    states = set(machine.states)
    if machine.initial not in states:
        report.append(f"initial state {machine.initial!r} not in state set")
    for s in machine.terminal:
        if s not in states:
            report.append(f"terminal state {s!r} not in state set")
    for t in machine.transitions:
        if t.source not in states:
            report.append(f"transition source {t.source!r} not in state set")
        if t.target not in states:
            report.append(f"transition target {t.target!r} not in state set")
        if t.source in machine.terminal:
            report.append(f"terminal state {t.source!r} has an outgoing transition")
    seen = {}
    for t in machine.transitions:
        key = (t.source, t.condition.field, t.condition.op, repr(t.condition.value))
        if key in seen:
            report.append(
                f"ambiguous transitions from {t.source!r} on identical condition "
                f"({t.condition.field} {t.condition.op} {t.condition.value!r})"
            )
        seen[key] = t
    for mode_state, modes in machine.input_modes.items():
        if mode_state not in states:
            report.append(f"input modes declared for unknown state {mode_state!r}")
        for mode in modes:
            if mode not in INPUT_MODES:
                report.append(f"unknown input mode {mode!r} for state {mode_state!r}")
    for pc in machine.advancement:
        if pc.target_state not in states:
            report.append(f"advancement condition targets unknown state {pc.target_state!r}")

    reachable = {machine.initial}
    frontier = [machine.initial]
    while frontier:
        current = frontier.pop()
        for t in machine.transitions:
            if t.source == current and t.target not in reachable:
                reachable.add(t.target)
                frontier.append(t.target)
    for s in sorted(states - reachable):
        report.append(f"state {s!r} unreachable from the initial state")
    if machine.terminal and not (machine.terminal & reachable):
        report.append("no terminal state is reachable from the initial state")
    return report


def step(
    machine: GoalMachine,
    state: str,
    event,
    attributes_before: Mapping[str, Any],
) -> str:
    """Advance one event: the unique outgoing condition that flips
    unsatisfied -> satisfied under the event's delta moves the machine.

    Takes the attributes before the delta (the after-image is derived
    by overwrite-merge); an event that flips no condition, or any event
    in a terminal state, leaves the state unchanged.
    """
    if state in machine.terminal:
        return state
    after = dict(attributes_before)
    after.update(event.delta)
    fired = [
        t
        for t in machine.outgoing(state)
        if t.condition.holds(after) and not t.condition.holds(attributes_before)
    ]
    if not fired:
        return state
    if len(fired) > 1:
        raise AmbiguousTransition(
            f"state {state!r}: event {event.seq} satisfies "
            + " and ".join(f"->{t.target}" for t in fired)
        )
    return fired[0].target


def position(
    machine: GoalMachine,
    history: Iterable,
    initial_attrs: Optional[Mapping[str, Any]] = None,
) -> str:
    """delta*(q0, history): fold `step` over the update-event sequence."""
    state = machine.initial
    attrs = dict(initial_attrs or {})
    for event in history:
        state = step(machine, state, event, attrs)
        attrs.update(event.delta)
    return state


def check_advancement(
    machine: GoalMachine,
    snapshot,
    errors: Optional[list] = None,
) -> list:
    """Evaluate every (q, gamma, mu) whose state matches the current position.

    Returns messages in declaration order; a pure function of (machine,
    snapshot) — re-invocation on an unchanged snapshot returns equal
    messages. Sandbox failures in gamma or mu are reported per
    condition through `errors` and do not affect other conditions.
    """
    pos = position(machine, snapshot.history, snapshot.initial_attributes)
    graph_input = {
        "attributes": dict(snapshot.attributes),
        "neighborhood": [
            {
                "relation_type": n.relation_type,
                "direction": n.direction,
                "publisher": n.id.publisher,
                "name": n.id.name,
                "stream_type": n.stream_type,
                "attributes": dict(n.attributes),
            }
            for n in snapshot.neighborhood
        ],
        "state": pos,
    }
    messages = []
    for index, pc in enumerate(machine.advancement):
        if pc.target_state != pos:
            continue
        try:
            fired, _ = dsl.evaluate(
                pc.gamma_ast, graph_input, GAMMA_TIME_LIMIT_MS, GAMMA_MEMORY_LIMIT
            )
            if not isinstance(fired, bool):
                raise dsl.EvalRuntimeError(
                    f"advancement {pc.name or index}: gamma returned {fired!r}"
                )
            if not fired:
                continue
            body, _ = dsl.evaluate(
                pc.mu_ast, graph_input, GAMMA_TIME_LIMIT_MS, GAMMA_MEMORY_LIMIT
            )
            if not isinstance(body, dict) or "kind" not in body:
                raise dsl.EvalRuntimeError(
                    f"advancement {pc.name or index}: mu must return a record with a kind"
                )
            kind = body["kind"]
            if kind not in MESSAGE_KINDS:
                raise dsl.EvalRuntimeError(
                    f"advancement {pc.name or index}: unknown message kind {kind!r}"
                )
            messages.append(
                ProactiveMessage(kind=kind, body=body, condition_index=index)
            )
        except dsl.SandboxError as exc:
            if errors is not None:
                errors.append((index, pc.name, exc))
    return messages


# -- loading ------------------------------------------------------------------


def condition_from_doc(doc: Mapping[str, Any]) -> AttributeCondition:
    return AttributeCondition(field=doc["field"], op=doc["op"], value=doc["value"])


def machine_from_doc(
    doc: Mapping[str, Any],
    source_loader=None,
) -> GoalMachine:
    """Build a machine from a parsed declarative document.

    Advancement conditions reference DSL program files; `source_loader`
    maps a reference to program text (defaults to reading a file path
    relative to the document, supplied by the caller).
    """

    def load(ref: str) -> str:
        if source_loader is None:
            raise GoalError(f"cannot resolve program reference {ref!r} without a loader")
        return source_loader(ref)

    transitions = tuple(
        Transition(
            source=t["from"],
            condition=condition_from_doc(t),
            target=t["to"],
        )
        for t in doc.get("transitions", ())
    )
    advancement = []
    for adv in doc.get("advancement", ()):
        gamma_src = adv["condition_src"] if "condition_src" in adv else load(adv["condition"])
        mu_src = adv["message_src"] if "message_src" in adv else load(adv["message"])
        advancement.append(
            ProactiveCondition(
                target_state=adv["state"],
                gamma_source=gamma_src,
                mu_source=mu_src,
                name=adv.get("name", ""),
                preempts=adv.get("preempts", ""),
            )
        )
    input_modes = {
        state: frozenset(modes)
        for state, modes in dict(doc.get("input_modes", {})).items()
    }
    machine = GoalMachine(
        stream_type=doc["stream_type"],
        states=tuple(doc["states"]),
        initial=doc["initial"],
        terminal=frozenset(doc.get("terminal", ())),
        transitions=transitions,
        input_modes=input_modes,
        advancement=tuple(advancement),
    )
    return machine


@dataclass(frozen=True)
class StateTracker:
    """Incremental position tracking for an engine applying deltas one by one."""

    machine: GoalMachine

    def advance(self, state: str, event, attrs_before: Mapping[str, Any]) -> str:
        return step(self.machine, state, event, attrs_before)
