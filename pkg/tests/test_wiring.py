"""Declarative event routing: policy graphs, matching, inheritance."""

import pytest
from hypothesis import given, settings, strategies as st

from goalweave.streams import StreamGraph
from goalweave.wiring import (
    ConditionEvaluationError,
    MalformedHandler,
    SUBSCRIBES,
    UnknownOverrideTarget,
    build_policy_graph,
    inherit_publisher,
    make_handler,
    pattern_matches,
    route_event,
)


def add_handler(graph, name, pattern, event_type, condition, targets):
    sid = graph.create_stream(
        "Safebox",
        "policy.handler",
        {"pattern": pattern, "event_type": event_type, "condition": condition},
        name=name,
    )
    for target in targets:
        graph.relate(SUBSCRIBES, sid, target)
    return sid


def test_one_subscribes_relation_yields_one_subscription():
    g = StreamGraph()
    goal = g.create_stream("p1", "goal.doc", {}, name="goal")
    add_handler(g, "h1", "goal.*", "stream.updated", "true", [goal])
    pg = build_policy_graph("Safebox", g)
    assert len(pg.subscriptions) == 1
    assert set(pg.handlers) == {"h1"}


def test_missing_reserved_attribute_is_malformed():
    g = StreamGraph()
    goal = g.create_stream("p1", "goal.doc", {}, name="goal")
    sid = g.create_stream(
        "Safebox", "policy.handler", {"pattern": "goal.*", "condition": "true"}, name="h1"
    )
    g.relate(SUBSCRIBES, sid, goal)
    with pytest.raises(MalformedHandler):
        build_policy_graph("Safebox", g)
    with pytest.raises(MalformedHandler):
        make_handler("x", {"pattern": "*", "event_type": "vote.cast", "condition": "((("})


def test_two_handlers_on_one_goal_are_two_subscriptions():
    g = StreamGraph()
    goal = g.create_stream("p1", "goal.doc", {}, name="goal")
    add_handler(g, "h1", "goal.*", "stream.updated", "true", [goal])
    add_handler(g, "h2", "goal.doc", "stream.updated", "true", [goal])
    pg = build_policy_graph("Safebox", g)
    assert len(pg.subscriptions) == 2


def test_other_publishers_handlers_are_out_of_scope():
    g = StreamGraph()
    goal = g.create_stream("p1", "goal.doc", {}, name="goal")
    sid = g.create_stream(
        "OtherBox",
        "policy.handler",
        {"pattern": "*", "event_type": "stream.updated", "condition": "true"},
        name="foreign",
    )
    g.relate(SUBSCRIBES, sid, goal)
    pg = build_policy_graph("Safebox", g)
    assert pg.handlers == {}


def test_rebuilding_from_the_same_graph_is_stable():
    g = StreamGraph()
    goal = g.create_stream("p1", "goal.doc", {}, name="goal")
    add_handler(g, "h1", "goal.*", "stream.updated", "true", [goal])
    assert build_policy_graph("Safebox", g) == build_policy_graph("Safebox", g)


def test_no_subscribed_handlers_routes_to_nothing():
    g = StreamGraph()
    goal = g.create_stream("p1", "goal.doc", {}, name="goal")
    pg = build_policy_graph("Safebox", g)
    event = g.apply_delta(goal, "stream.updated", {"x": 1})
    assert route_event(pg, event, g) == []


def test_false_condition_suppresses_delivery():
    g = StreamGraph()
    goal = g.create_stream("p1", "goal.doc", {}, name="goal")
    add_handler(g, "h1", "goal.*", "stream.updated", "false", [goal])
    pg = build_policy_graph("Safebox", g)
    event = g.apply_delta(goal, "stream.updated", {"x": 1})
    assert route_event(pg, event, g) == []


def test_matching_handlers_deliver_exactly_once_in_id_order():
    g = StreamGraph()
    goal = g.create_stream("p1", "goal.doc", {}, name="goal")
    add_handler(g, "h2", "goal.*", "stream.updated", "true", [goal])
    add_handler(g, "h1", "goal.doc", "stream.updated", "true", [goal])
    pg = build_policy_graph("Safebox", g)
    event = g.apply_delta(goal, "stream.updated", {"x": 1})
    got = route_event(pg, event, g)
    assert [i.handler_id for i in got] == ["h1", "h2"]


def test_event_type_and_pattern_both_filter():
    g = StreamGraph()
    goal = g.create_stream("p1", "goal.doc", {}, name="goal")
    add_handler(g, "votes_only", "goal.*", "vote.cast", "true", [goal])
    add_handler(g, "wrong_type", "job.*", "stream.updated", "true", [goal])
    pg = build_policy_graph("Safebox", g)
    event = g.apply_delta(goal, "stream.updated", {"x": 1})
    assert route_event(pg, event, g) == []


def test_condition_sees_attributes_as_of_the_event():
    g = StreamGraph()
    goal = g.create_stream("p1", "goal.doc", {"n": 0}, name="goal")
    add_handler(
        g,
        "gate",
        "goal.*",
        "stream.updated",
        '(> (get-or (get input "attributes") "n" 0) 2)',
        [goal],
    )
    pg = build_policy_graph("Safebox", g)
    low = g.apply_delta(goal, "stream.updated", {"n": 1})
    high = g.apply_delta(goal, "stream.updated", {"n": 5})
    assert route_event(pg, low, g) == []
    assert [i.handler_id for i in route_event(pg, high, g)] == ["gate"]
    # routing the old event later still sees the old attribute value
    assert route_event(pg, low, g) == []


def test_condition_crash_is_reported_not_delivered():
    g = StreamGraph()
    goal = g.create_stream("p1", "goal.doc", {}, name="goal")
    add_handler(
        g,
        "crash",
        "goal.*",
        "stream.updated",
        '(get (get input "attributes") "missing")',
        [goal],
    )
    add_handler(g, "fine", "goal.*", "stream.updated", "true", [goal])
    pg = build_policy_graph("Safebox", g)
    event = g.apply_delta(goal, "stream.updated", {"x": 1})
    errors = []
    got = route_event(pg, event, g, errors=errors)
    assert [i.handler_id for i in got] == ["fine"]
    assert len(errors) == 1
    assert isinstance(errors[0], ConditionEvaluationError)
    assert errors[0].handler_id == "crash"


def test_non_boolean_condition_result_is_an_error():
    g = StreamGraph()
    goal = g.create_stream("p1", "goal.doc", {}, name="goal")
    add_handler(g, "numeric", "goal.*", "stream.updated", "42", [goal])
    pg = build_policy_graph("Safebox", g)
    event = g.apply_delta(goal, "stream.updated", {})
    errors = []
    assert route_event(pg, event, g, errors=errors) == []
    assert len(errors) == 1


def test_pattern_language():
    assert pattern_matches("goal.doc", "goal.doc")
    assert not pattern_matches("goal.doc", "goal.docx")
    assert pattern_matches("goal.*", "goal.doc")
    assert pattern_matches("*", "anything")
    assert not pattern_matches("job*", "goal.doc")


def test_empty_overrides_inherit_identical_routing():
    g = StreamGraph()
    goal = g.create_stream("p1", "goal.doc", {}, name="goal")
    add_handler(g, "h1", "goal.*", "stream.updated", "true", [goal])
    parent = build_policy_graph("Safebox", g)
    child = inherit_publisher("ChildBox", parent, {})
    event = g.apply_delta(goal, "stream.updated", {"x": 1})
    assert [i.handler_id for i in route_event(child, event, g)] == [
        i.handler_id for i in route_event(parent, event, g)
    ]


def test_override_can_silence_a_handler_in_the_child_only():
    g = StreamGraph()
    goal = g.create_stream("p1", "goal.doc", {}, name="goal")
    add_handler(g, "h1", "goal.*", "stream.updated", "true", [goal])
    parent = build_policy_graph("Safebox", g)
    silenced = make_handler(
        "h1",
        {"pattern": "goal.*", "event_type": "stream.updated", "condition": "false"},
    )
    child = inherit_publisher("ChildBox", parent, {"h1": silenced})
    event = g.apply_delta(goal, "stream.updated", {"x": 1})
    assert route_event(child, event, g) == []
    assert [i.handler_id for i in route_event(parent, event, g)] == ["h1"]


def test_override_of_unknown_id_rejected():
    g = StreamGraph()
    parent = build_policy_graph("Safebox", g)
    stray = make_handler(
        "ghost", {"pattern": "*", "event_type": "vote.cast", "condition": "true"}
    )
    with pytest.raises(UnknownOverrideTarget):
        inherit_publisher("ChildBox", parent, {"ghost": stray})


# random instances checked against an independent brute-force filter

STREAM_TYPES = ("goal.doc", "goal.vote", "job", "chat.main", "chat.side")
PATTERNS = ("goal.*", "goal.doc", "job", "chat.*", "*", "nope")
EVENTS = ("stream.updated", "vote.cast", "job.completed", "message.posted")
CONDITIONS = (
    "true",
    "false",
    '(get-or (get input "attributes") "flag" false)',
    '(> (get-or (get input "attributes") "n" 0) 2)',
)


def oracle(handlers, subscriptions, stream_idx, stream_type, etype, attrs):
    """Brute-force filter over the handler table."""
    due = []
    for hid, (pattern, h_etype, cond) in sorted(handlers.items()):
        if (hid, stream_idx) not in subscriptions:
            continue
        if pattern.endswith("*"):
            if not stream_type.startswith(pattern[:-1]):
                continue
        elif stream_type != pattern:
            continue
        if h_etype != etype:
            continue
        if cond == "true":
            holds = True
        elif cond == "false":
            holds = False
        elif cond.startswith("(get-or"):
            holds = attrs.get("flag", False) is True
        else:
            holds = isinstance(attrs.get("n", 0), int) and attrs.get("n", 0) > 2
        if holds:
            due.append(hid)
    return due


@settings(max_examples=120, deadline=None)
@given(st.data())
def test_routing_agrees_with_the_brute_force_filter(data):
    n_streams = data.draw(st.integers(min_value=1, max_value=4), label="streams")
    stream_specs = [
        data.draw(st.sampled_from(STREAM_TYPES), label=f"stype{i}")
        for i in range(n_streams)
    ]
    n_handlers = data.draw(st.integers(min_value=0, max_value=5), label="handlers")
    handler_specs = {}
    subs = set()
    for h in range(n_handlers):
        handler_specs[f"h{h}"] = (
            data.draw(st.sampled_from(PATTERNS), label=f"pat{h}"),
            data.draw(st.sampled_from(EVENTS), label=f"etype{h}"),
            data.draw(st.sampled_from(CONDITIONS), label=f"cond{h}"),
        )
        for s in data.draw(
            st.sets(st.integers(min_value=0, max_value=n_streams - 1), max_size=n_streams),
            label=f"subs{h}",
        ):
            subs.add((f"h{h}", s))

    g = StreamGraph()
    stream_ids = [
        g.create_stream("p1", stype, {}, name=f"s{i}")
        for i, stype in enumerate(stream_specs)
    ]
    for hid, (pattern, etype, cond) in handler_specs.items():
        targets = [stream_ids[s] for h, s in subs if h == hid]
        if targets:
            add_handler(g, hid, pattern, etype, cond, targets)
    pg = build_policy_graph("Safebox", g)

    n_events = data.draw(st.integers(min_value=1, max_value=6), label="events")
    folds = {i: {} for i in range(n_streams)}
    for _ in range(n_events):
        target = data.draw(st.integers(min_value=0, max_value=n_streams - 1), label="target")
        etype = data.draw(st.sampled_from(EVENTS), label="etype")
        delta = data.draw(
            st.sampled_from(
                [{}, {"flag": True}, {"flag": False}, {"n": 1}, {"n": 5}]
            ),
            label="delta",
        )
        event = g.apply_delta(stream_ids[target], etype, delta)
        folds[target].update(delta)
        got = [i.handler_id for i in route_event(pg, event, g)]
        expect = oracle(
            handler_specs, subs, target, stream_specs[target], etype, folds[target]
        )
        assert got == expect
        assert len(got) == len(set(got))  # multiplicity one
