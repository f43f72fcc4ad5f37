"""Weighted voting, threshold promotion, and platform payload rendering.

Votes from any platform land in one ledger: each cast appends a
vote.cast event to the goal stream inside that stream's serialized
section, so the running total is order-independent and exact (tallies
sum event weights as rationals, never floats). Promotion fires exactly
once, when the accumulated weight first reaches the threshold; the
check-and-set runs inside the publisher's exclusive section so
concurrent casts cannot double-fire it.

Option sets are built by post-phase library programs from graph state
and rendered per platform by render-phase adapter programs into fixed
payload shapes validated against the schemas shipped in
platform_schemas/.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from importlib import resources
from typing import Any, Mapping, Optional, Sequence

import jsonschema

from .errors import GoalweaveError
from .streams import StreamGraph, StreamId
from .values import to_fraction
from .wisdom.phases import Phase
from .wisdom.programs import (
    DEFAULT_BUDGET,
    SandboxBudget,
    WisdomProgram,
    execute_sandboxed,
)
from .wisdom.schema import Schema

PLATFORMS = ("telegram", "apple", "google", "email", "web")

ADAPTS = "Safebox/adapts"

PROMOTION_FLAG = "promotionFired"
THRESHOLD_ATTR = "threshold"


class GovernanceError(GoalweaveError):
    pass


class DuplicateVoter(GovernanceError):
    pass


class NonPositiveWeight(GovernanceError):
    pass


class MissingThreshold(GovernanceError):
    pass


class NoAdapterForPlatform(GovernanceError):
    pass


class AdapterOutputInvalid(GovernanceError):
    pass


@dataclass(frozen=True)
class VoteRecord:
    voter: str
    weight: Fraction
    platform: str
    seq: int


@dataclass(frozen=True)
class Tally:
    total_weight: Fraction
    threshold: Fraction
    promotion_fired: bool
    votes: tuple


@dataclass(frozen=True)
class PlatformPayload:
    platform: str
    document: Mapping[str, Any]


def cast_vote(
    graph: StreamGraph,
    stream: StreamId,
    voter: str,
    weight,
    platform: str,
):
    """Append one weighted vote; read-modify-write of the running total
    happens inside the stream's serialized section."""
    if isinstance(weight, bool) or weight <= 0:
        raise NonPositiveWeight(f"vote weight must be positive, got {weight!r}")
    with graph.exclusive(stream):
        seen = _Sum()
        for event in graph.log(stream):
            if event.event_type != "vote.cast":
                continue
            vote = event.delta["vote"]
            if vote["voter"] == voter:
                raise DuplicateVoter(f"{voter!r} already voted on {stream}")
            seen.add(vote["weight"])
        seen.add(weight)
        total = seen.value()
        delta = {
            "w": float(total),
            "vote": {"voter": voter, "weight": weight, "platform": platform},
        }
        return graph.apply_delta(stream, "vote.cast", delta, origin=platform)


class _Sum:
    """Exact rational accumulator: integer numerator/denominator pairs,
    normalized once at the end. Same value as summing Fractions, far
    fewer gcd passes on the hot vote-scan paths."""

    __slots__ = ("num", "den")

    def __init__(self) -> None:
        self.num = 0
        self.den = 1

    def add(self, weight) -> None:
        if type(weight) is int:
            self.num += weight * self.den
            return
        fr = to_fraction(weight)
        self.num = self.num * fr.denominator + fr.numerator * self.den
        self.den *= fr.denominator

    def value(self) -> Fraction:
        return Fraction(self.num, self.den)


def _vote_total(events) -> Fraction:
    acc = _Sum()
    for event in events:
        if event.event_type == "vote.cast":
            acc.add(event.delta["vote"]["weight"])
    return acc.value()


def tally(graph: StreamGraph, stream: StreamId, until: Optional[int] = None) -> Tally:
    """Pure read: exact weight sum over vote events up to `until`."""
    events = graph.log(stream)
    if until is not None:
        events = tuple(e for e in events if e.seq <= until)
    votes = tuple(
        VoteRecord(
            voter=e.delta["vote"]["voter"],
            weight=to_fraction(e.delta["vote"]["weight"]),
            platform=e.delta["vote"]["platform"],
            seq=e.seq,
        )
        for e in events
        if e.event_type == "vote.cast"
    )
    attrs: dict = {}
    for e in events:
        attrs.update(e.delta)
    if THRESHOLD_ATTR not in attrs:
        raise MissingThreshold(f"{stream} has no {THRESHOLD_ATTR} attribute")
    return Tally(
        total_weight=sum((v.weight for v in votes), Fraction(0)),
        threshold=to_fraction(attrs[THRESHOLD_ATTR]),
        promotion_fired=bool(attrs.get(PROMOTION_FLAG, False)),
        votes=votes,
    )


def evaluate_promotion(graph: StreamGraph, stream: StreamId) -> bool:
    """Fire the promotion event iff weight has reached the threshold
    and it never fired before. Check and set are atomic under the
    publisher's section, so any interleaving of casts yields exactly
    one promotion event when the final weight qualifies."""
    with graph.publisher_section(stream.publisher):
        attrs = graph.attributes(stream)
        if bool(attrs.get(PROMOTION_FLAG, False)):
            return False
        if THRESHOLD_ATTR not in attrs:
            raise MissingThreshold(f"{stream} has no {THRESHOLD_ATTR} attribute")
        if _vote_total(graph.log(stream)) < to_fraction(attrs[THRESHOLD_ATTR]):
            return False
        graph.apply_delta(
            stream, "stream.updated", {PROMOTION_FLAG: True}, origin="governance"
        )
        return True


def promotion_events(graph: StreamGraph, stream: StreamId) -> tuple:
    return tuple(
        e
        for e in graph.log(stream)
        if e.event_type == "stream.updated" and e.delta.get(PROMOTION_FLAG) is True
    )


# -- options ------------------------------------------------------------------


def graph_state_input(snapshot, state: str) -> dict:
    """The (attributes, neighborhood, state) record option builders and
    advancement conditions evaluate over."""
    return {
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
        "state": state,
    }


def _check_option(entry, index: int) -> None:
    if not isinstance(entry, dict):
        raise GovernanceError(f"option {index} is not a record: {entry!r}")
    for key in ("type", "label", "payload"):
        if key not in entry:
            raise GovernanceError(f"option {index} missing field {key!r}")
    if not isinstance(entry["label"], str) or not entry["label"]:
        raise GovernanceError(f"option {index} label must be a nonempty string")
    if not isinstance(entry["payload"], dict):
        raise GovernanceError(f"option {index} payload must be a record")


def build_options(
    snapshot,
    state: str,
    programs: Sequence[WisdomProgram],
    budget: SandboxBudget = DEFAULT_BUDGET,
) -> tuple:
    """Run the post-phase option builders over graph state; results
    concatenate in program-name order. Deterministic: equal snapshots
    give equal arrays."""
    record = graph_state_input(snapshot, state)
    options: list = []
    for program in sorted(programs, key=lambda p: p.name):
        if program.phase is not Phase.POST:
            raise GovernanceError(
                f"option builder {program.name} is {program.phase.value}-phase, not post"
            )
        result = execute_sandboxed(program, record, budget)
        produced = result.output.get("options", [])
        if not isinstance(produced, list):
            raise GovernanceError(f"{program.name} options output is not a list")
        for index, entry in enumerate(produced):
            _check_option(entry, index)
            options.append(entry)
    return tuple(options)


# -- platform rendering -------------------------------------------------------

_ADAPTER_INPUT = Schema(
    required={"options": "list", "session": "record"},
    optional={},
)
_ADAPTER_OUTPUT = Schema(required={"document": "record"}, optional={})

_SCHEMA_CACHE: dict = {}


def platform_schema(platform: str) -> Mapping[str, Any]:
    if platform not in PLATFORMS:
        raise GovernanceError(f"unknown platform {platform!r}")
    if platform not in _SCHEMA_CACHE:
        text = (
            resources.files("goalweave")
            .joinpath("platform_schemas", f"{platform}.json")
            .read_text(encoding="utf-8")
        )
        _SCHEMA_CACHE[platform] = json.loads(text)
    return _SCHEMA_CACHE[platform]


def extract_labels(platform: str, document: Mapping[str, Any]) -> list:
    """Recover the option labels from a rendered payload (used to check
    that renderings preserve the option set)."""
    if platform == "telegram":
        return [b["text"] for row in document["inline_keyboard"] for b in row]
    if platform == "apple":
        return [i["title"] for i in document["interactive_message"]["items"]]
    if platform == "google":
        return [s["reply"]["text"] for s in document["suggestions"]]
    if platform == "email":
        return [a["label"] for a in document["actions"]]
    if platform == "web":
        return [c["label"] for c in document["chip_bar"]["chips"]]
    raise GovernanceError(f"unknown platform {platform!r}")


def make_adapter(name: str, source: str, fitness: float = 0.5) -> WisdomProgram:
    """Wrap adapter DSL source in the fixed render-phase schema."""
    return WisdomProgram(
        name=name,
        phase=Phase.RENDER,
        input_schema=_ADAPTER_INPUT,
        output_schema=_ADAPTER_OUTPUT,
        fitness=fitness,
        source=source,
    )


def discover_adapters(graph: StreamGraph, target: StreamId) -> dict:
    """Adapters attach to a goal-type stream via Safebox/adapts
    relations; the source stream carries the platform tag and program
    source."""
    adapters: dict = {}
    for relation in graph.iter_relations():
        if relation.relation_type != ADAPTS or relation.target != target:
            continue
        attrs = graph.attributes(relation.source)
        platform = attrs.get("platform")
        source = attrs.get("source")
        if not isinstance(platform, str) or not isinstance(source, str):
            raise GovernanceError(
                f"adapter stream {relation.source} needs platform and source attributes"
            )
        adapters[platform] = make_adapter(relation.source.name, source)
    return adapters


def render(
    options: Sequence[Mapping[str, Any]],
    session: Mapping[str, Any],
    adapters: Mapping[str, WisdomProgram],
    budget: SandboxBudget = DEFAULT_BUDGET,
) -> PlatformPayload:
    """Render an options array to the session platform's native payload
    shape; the document must validate against the platform schema and
    carry every option label exactly once."""
    platform = session.get("platform")
    if platform not in adapters:
        raise NoAdapterForPlatform(f"no adapter registered for {platform!r}")
    program = adapters[platform]
    result = execute_sandboxed(
        program,
        {"options": [dict(o) for o in options], "session": dict(session)},
        budget,
    )
    document = result.output["document"]
    try:
        jsonschema.validate(instance=document, schema=platform_schema(platform))
    except jsonschema.ValidationError as exc:
        raise AdapterOutputInvalid(
            f"{platform} payload rejected: {exc.message}"
        ) from exc
    rendered = sorted(extract_labels(platform, document))
    expected = sorted(o["label"] for o in options)
    if rendered != expected:
        raise AdapterOutputInvalid(
            f"{platform} payload drops or duplicates options: "
            f"rendered {rendered!r}, expected {expected!r}"
        )
    return PlatformPayload(platform=platform, document=document)
