"""Declarative event router.

Handlers are not registered imperatively: a handler is a stream carrying
reserved attributes (pattern, event_type, condition) and a
Safebox/subscribes relation to each stream it watches.  A policy graph
is derived purely from those declarations, and routing an event returns
every matching handler exactly once, ordered by handler id.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .errors import GoalweaveError
from .streams import Event, StreamGraph, StreamId
from .wisdom import dsl

SUBSCRIBES = "Safebox/subscribes"

CONDITION_TIME_LIMIT_MS = 50.0
CONDITION_MEMORY_LIMIT = 64 * 1024 * 1024


class WiringError(GoalweaveError):
    pass


class MalformedHandler(WiringError):
    pass


class UnknownOverrideTarget(WiringError):
    pass


class ConditionEvaluationError(WiringError):
    def __init__(self, handler_id: str, cause: Exception):
        self.handler_id = handler_id
        self.cause = cause
        super().__init__(f"handler {handler_id}: condition failed: {cause}")


@dataclass(frozen=True)
class Handler:
    id: str
    type_pattern: str
    event_type: str
    condition_source: str
    condition_ast: tuple = field(compare=False, repr=False)
    action: str = ""
    config: dict = field(default_factory=dict, compare=False)


@dataclass(frozen=True)
class PolicyGraph:
    publisher: str
    handlers: dict  # handler id -> Handler
    subscriptions: frozenset  # of (handler id, StreamId)
    parent: Optional[str] = None
    overrides: dict = field(default_factory=dict)


@dataclass(frozen=True)
class HandlerInvocation:
    handler_id: str
    handler: Handler
    event: Event


RESERVED_ATTRS = ("pattern", "event_type", "condition")


def make_handler(handler_id: str, attrs: dict) -> Handler:
    missing = [a for a in RESERVED_ATTRS if a not in attrs]
    if missing:
        raise MalformedHandler(f"handler {handler_id}: missing attributes {missing}")
    source = attrs["condition"]
    if not isinstance(source, str):
        raise MalformedHandler(f"handler {handler_id}: condition must be source text")
    try:
        ast = dsl.parse_program(source)
    except dsl.SandboxError as exc:
        raise MalformedHandler(f"handler {handler_id}: bad condition: {exc}") from exc
    config = {
        k: v for k, v in attrs.items() if k not in RESERVED_ATTRS and k != "action"
    }
    return Handler(
        id=handler_id,
        type_pattern=attrs["pattern"],
        event_type=attrs["event_type"],
        condition_source=source,
        condition_ast=ast,
        action=attrs.get("action", ""),
        config=config,
    )


def build_policy_graph(publisher: str, graph: StreamGraph) -> PolicyGraph:
    """Derive handlers and subscriptions from Safebox/subscribes relations."""
    handlers: dict = {}
    subscriptions = set()
    for relation in graph.iter_relations():
        if relation.relation_type != SUBSCRIBES:
            continue
        source = relation.source
        if source.publisher != publisher:
            continue
        handler_id = source.name
        if handler_id not in handlers:
            handlers[handler_id] = make_handler(handler_id, graph.attributes(source))
        subscriptions.add((handler_id, relation.target))
    return PolicyGraph(
        publisher=publisher,
        handlers=handlers,
        subscriptions=frozenset(subscriptions),
    )


def pattern_matches(pattern: str, stream_type: str) -> bool:
    """Exact name, or prefix wildcard like "Safebots/*" (bare "*" matches all)."""
    if pattern.endswith("*"):
        return stream_type.startswith(pattern[:-1])
    return stream_type == pattern


def condition_holds(handler: Handler, attributes: dict) -> bool:
    result, _ = dsl.evaluate(
        handler.condition_ast,
        {"attributes": attributes},
        CONDITION_TIME_LIMIT_MS,
        CONDITION_MEMORY_LIMIT,
    )
    if not isinstance(result, bool):
        raise dsl.EvalRuntimeError(
            f"handler {handler.id}: condition returned {result!r}, expected a boolean"
        )
    return result


def route_event(
    pg: PolicyGraph,
    event: Event,
    graph: StreamGraph,
    errors: Optional[list] = None,
) -> list:
    """All handlers due for this event, each exactly once, ordered by id.

    A handler is due iff it is subscribed to the event's stream, its type
    pattern matches the stream's type, its event type equals the event's,
    and its condition holds on the stream's attributes as of the event.
    Condition failures skip the handler and are reported through
    `errors`, never delivered.
    """
    candidates = sorted(
        hid for hid, sid in pg.subscriptions if sid == event.stream
    )
    if not candidates:
        return []
    stream_type = graph.stream(event.stream).stream_type
    attributes = None
    invocations = []
    seen = set()
    for handler_id in candidates:
        if handler_id in seen:
            continue
        seen.add(handler_id)
        handler = pg.handlers[handler_id]
        if not pattern_matches(handler.type_pattern, stream_type):
            continue
        if handler.event_type != event.event_type:
            continue
        if attributes is None:
            attributes = graph.snapshot(event.stream, until=event.seq).attributes
        try:
            if condition_holds(handler, attributes):
                invocations.append(HandlerInvocation(handler_id, handler, event))
        except dsl.SandboxError as exc:
            if errors is not None:
                errors.append(ConditionEvaluationError(handler_id, exc))
    return invocations


def inherit_publisher(child: str, parent: PolicyGraph, overrides: dict) -> PolicyGraph:
    """Child publisher graph: parent handlers with overridden entries replaced."""
    unknown = set(overrides) - set(parent.handlers)
    if unknown:
        raise UnknownOverrideTarget(f"overrides for unknown handlers: {sorted(unknown)}")
    handlers = dict(parent.handlers)
    handlers.update(overrides)
    return PolicyGraph(
        publisher=child,
        handlers=handlers,
        subscriptions=parent.subscriptions,
        parent=parent.publisher,
        overrides=dict(overrides),
    )
