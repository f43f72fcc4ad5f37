"""Weighted votes, promotion firing, and platform-native option rendering."""

import itertools
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from goalweave.governance import (
    PLATFORMS,
    AdapterOutputInvalid,
    DuplicateVoter,
    GovernanceError,
    MissingThreshold,
    NoAdapterForPlatform,
    NonPositiveWeight,
    build_options,
    cast_vote,
    evaluate_promotion,
    extract_labels,
    make_adapter,
    platform_schema,
    promotion_events,
    render,
    tally,
)
from goalweave.sim.scenario import load_scenario, shipped_scenario_path
from goalweave.streams import StreamGraph
from goalweave.values import canonical_bytes
from goalweave.wisdom.programs import Schema, WisdomProgram


def proposal_stream(graph, threshold=3):
    return graph.create_stream(
        "gov", "proposal", {"threshold": threshold, "title": "demo"}
    )


def test_votes_accumulate_weight():
    g = StreamGraph()
    sid = proposal_stream(g)
    for voter in ("ana", "bo", "cy"):
        cast_vote(g, sid, voter, 1, "telegram")
    t = tally(g, sid)
    assert t.total_weight == Fraction(3)
    assert [v.voter for v in t.votes] == ["ana", "bo", "cy"]
    assert [v.seq for v in t.votes] == [1, 2, 3]


def test_revoting_is_rejected():
    g = StreamGraph()
    sid = proposal_stream(g)
    cast_vote(g, sid, "ana", 1, "web")
    with pytest.raises(DuplicateVoter):
        cast_vote(g, sid, "ana", 2, "email")


def test_nonpositive_and_boolean_weights_are_rejected():
    g = StreamGraph()
    sid = proposal_stream(g)
    for bad in (0, -1, 0.0, True, False):
        with pytest.raises(NonPositiveWeight):
            cast_vote(g, sid, "ana", bad, "web")
    assert tally(g, sid).total_weight == Fraction(0)


def test_fractional_weights_tally_exactly():
    g = StreamGraph()
    sid = proposal_stream(g)
    cast_vote(g, sid, "a", 1, "web")
    cast_vote(g, sid, "b", 2, "web")
    cast_vote(g, sid, "c", 0.5, "web")
    assert tally(g, sid).total_weight == Fraction(7, 2)


def test_tally_prefix_is_nondecreasing():
    g = StreamGraph()
    sid = proposal_stream(g)
    for i in range(5):
        cast_vote(g, sid, f"v{i}", i + 1, "web")
    last = g.snapshot(sid).history[-1].seq
    totals = [tally(g, sid, until=k).total_weight for k in range(last + 1)]
    assert totals == sorted(totals)
    assert totals[-1] == Fraction(15)


def test_tally_requires_a_threshold():
    g = StreamGraph()
    sid = g.create_stream("gov", "proposal", {"title": "bare"})
    with pytest.raises(MissingThreshold):
        tally(g, sid)


def test_promotion_fires_exactly_once_for_every_cast_order():
    casts = [("ana", 1), ("bo", 1), ("cy", 1)]
    for order in itertools.permutations(casts):
        g = StreamGraph()
        sid = proposal_stream(g, threshold=3)
        for voter, w in order:
            cast_vote(g, sid, voter, w, "web")
            evaluate_promotion(g, sid)
        events = promotion_events(g, sid)
        assert len(events) == 1
        t = tally(g, sid)
        assert t.promotion_fired
        assert t.total_weight == Fraction(3)


def test_below_threshold_never_promotes():
    g = StreamGraph()
    sid = proposal_stream(g, threshold=3)
    cast_vote(g, sid, "ana", 1, "web")
    cast_vote(g, sid, "bo", 1, "web")
    assert not evaluate_promotion(g, sid)
    assert promotion_events(g, sid) == ()
    assert not tally(g, sid).promotion_fired


def test_votes_after_promotion_do_not_refire():
    g = StreamGraph()
    sid = proposal_stream(g, threshold=2)
    cast_vote(g, sid, "ana", 2, "web")
    assert evaluate_promotion(g, sid)
    cast_vote(g, sid, "bo", 5, "web")
    assert not evaluate_promotion(g, sid)
    assert len(promotion_events(g, sid)) == 1


def test_promotion_flag_is_monotone_over_the_log():
    g = StreamGraph()
    sid = proposal_stream(g, threshold=2)
    for i, voter in enumerate(("a", "b", "c")):
        cast_vote(g, sid, voter, 1, "web")
        evaluate_promotion(g, sid)
    last = g.snapshot(sid).history[-1].seq
    flags = [
        bool(g.snapshot(sid, until=k).attributes.get("promotionFired", False))
        for k in range(last + 1)
    ]
    assert flags == sorted(flags)  # once true, stays true


def test_tally_is_platform_blind():
    weights = [("a", 1, "telegram"), ("b", 2, "apple"), ("c", 3, "email")]
    totals = set()
    for perm in itertools.permutations(weights):
        g = StreamGraph()
        sid = proposal_stream(g, threshold=10)
        for voter, w, platform in perm:
            cast_vote(g, sid, voter, w, platform)
        totals.add(tally(g, sid).total_weight)
    assert totals == {Fraction(6)}


@settings(max_examples=60, deadline=None)
@given(
    st.lists(
        st.tuples(
            st.integers(min_value=1, max_value=5),
            st.sampled_from(PLATFORMS),
        ),
        min_size=0,
        max_size=6,
    ),
    st.integers(min_value=1, max_value=8),
)
def test_promotion_matches_the_threshold_predicate(votes, threshold):
    g = StreamGraph()
    sid = proposal_stream(g, threshold=threshold)
    for i, (w, platform) in enumerate(votes):
        cast_vote(g, sid, f"v{i}", w, platform)
        evaluate_promotion(g, sid)
    total = sum(w for w, _ in votes)
    assert len(promotion_events(g, sid)) == (1 if total >= threshold else 0)


# -- option building ----------------------------------------------------------

OPTION_BUILDER = """
(record "options"
  (list
    (record "type" "transition" "label" "Approve" "payload" (record "to" "approved"))
    (record "type" "transition" "label" "Reject" "payload" (record "to" "rejected"))))
"""


def builder_program(name="opts", source=OPTION_BUILDER, phase="post"):
    from goalweave.wisdom.phases import parse_phase

    return WisdomProgram(
        name=name,
        phase=parse_phase(phase),
        input_schema=Schema(
            required={},
            optional={"attributes": "record", "neighborhood": "list", "state": "string"},
        ),
        output_schema=Schema(required={"options": "list"}, optional={}),
        fitness=0.5,
        source=source,
    )


def demo_snapshot():
    g = StreamGraph()
    sid = g.create_stream("gov", "proposal", {"threshold": 3})
    return g.snapshot(sid)


def test_option_builders_emit_validated_arrays():
    opts = build_options(demo_snapshot(), "draft", [builder_program()])
    assert [o["label"] for o in opts] == ["Approve", "Reject"]
    assert all(o["type"] == "transition" for o in opts)


def test_no_builders_no_options():
    assert build_options(demo_snapshot(), "draft", []) == ()


def test_builders_run_in_name_order():
    a = builder_program(
        "a_first",
        '(record "options" (list (record "type" "t" "label" "A" "payload" (record))))',
    )
    z = builder_program(
        "z_last",
        '(record "options" (list (record "type" "t" "label" "Z" "payload" (record))))',
    )
    opts = build_options(demo_snapshot(), "draft", [z, a])
    assert [o["label"] for o in opts] == ["A", "Z"]


def test_non_post_builders_are_rejected():
    with pytest.raises(GovernanceError):
        build_options(demo_snapshot(), "draft", [builder_program(phase="pre")])


def test_malformed_options_are_rejected():
    empty_label = builder_program(
        "bad", '(record "options" (list (record "type" "t" "label" "" "payload" (record))))'
    )
    with pytest.raises(GovernanceError):
        build_options(demo_snapshot(), "draft", [empty_label])
    missing_payload = builder_program(
        "bad2", '(record "options" (list (record "type" "t" "label" "x")))'
    )
    with pytest.raises(GovernanceError):
        build_options(demo_snapshot(), "draft", [missing_payload])


def test_option_arrays_are_deterministic():
    progs = [builder_program()]
    a = build_options(demo_snapshot(), "draft", progs)
    b = build_options(demo_snapshot(), "draft", progs)
    assert canonical_bytes(list(a)) == canonical_bytes(list(b))


# -- platform rendering --------------------------------------------------------


def shipped_adapters():
    scenario = load_scenario(shipped_scenario_path("full_coverage"))
    return {
        platform: make_adapter(f"adapt_{platform}", source)
        for platform, source in scenario.adapters.items()
    }


def sample_options():
    return (
        {"type": "transition", "label": "Approve", "payload": {"to": "approved"}},
        {"type": "transition", "label": "Hold", "payload": {"to": "held"}},
    )


@pytest.mark.parametrize("platform", PLATFORMS)
def test_every_platform_renders_option_labels_faithfully(platform):
    adapters = shipped_adapters()
    assert platform in adapters
    payload = render(sample_options(), {"platform": platform}, adapters)
    assert payload.platform == platform
    assert sorted(extract_labels(platform, payload.document)) == ["Approve", "Hold"]


@pytest.mark.parametrize("platform", PLATFORMS)
def test_empty_option_arrays_still_validate(platform):
    payload = render((), {"platform": platform}, shipped_adapters())
    assert extract_labels(platform, payload.document) == []


def test_unknown_platform_has_no_adapter():
    with pytest.raises(NoAdapterForPlatform):
        render(sample_options(), {"platform": "fax"}, shipped_adapters())


def test_schema_breaking_adapters_are_rejected():
    bad = make_adapter("broken", '(record "document" (record "nonsense" 1))')
    with pytest.raises(AdapterOutputInvalid):
        render(sample_options(), {"platform": "telegram"}, {"telegram": bad})


def test_label_dropping_adapters_are_rejected():
    # structurally valid telegram payload that silently discards options
    lossy = make_adapter(
        "lossy",
        '(record "document" (record "inline_keyboard" (list)))',
    )
    with pytest.raises(AdapterOutputInvalid):
        render(sample_options(), {"platform": "telegram"}, {"telegram": lossy})


def test_platform_schemas_load_and_unknowns_fail():
    for platform in PLATFORMS:
        schema = platform_schema(platform)
        assert schema.get("type") == "object"
    with pytest.raises(GovernanceError):
        platform_schema("pager")


def test_rendering_is_deterministic_per_platform():
    adapters = shipped_adapters()
    opts = sample_options()
    for platform in PLATFORMS:
        a = render(opts, {"platform": platform}, adapters).document
        b = render(opts, {"platform": platform}, adapters).document
        assert canonical_bytes(a) == canonical_bytes(b)
