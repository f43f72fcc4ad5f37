"""Typed-stream substrate: streams, relations, append-only event logs.

Every stream carries a map of typed attributes and an append-only event
log.  Attributes are always the fold of the delta events over the initial
attributes; deltas merge last-writer-wins per field.  Deltas to one stream
are applied under a per-stream exclusive section, so concurrent
submissions serialize into a single total order.  Timestamps are a
process-wide logical clock, not wall time.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from typing import Any, Iterator, Mapping, Optional

from .errors import GoalweaveError
from .values import deep_equal, matches_type, type_name, validate_value

EVENT_TYPES = (
    "stream.created",
    "stream.updated",
    "vote.cast",
    "job.completed",
    "message.posted",
    "relation.added",
)


class StreamError(GoalweaveError):
    pass


class DuplicateStream(StreamError):
    pass


class UnknownStream(StreamError):
    pass


class TypeMismatch(StreamError):
    pass


class DuplicateRelation(StreamError):
    pass


class SeqOutOfRange(StreamError):
    pass


class UnknownEventType(StreamError):
    pass


@dataclass(frozen=True)
class StreamId:
    publisher: str
    name: str

    def __str__(self) -> str:
        return f"{self.publisher}/{self.name}"


@dataclass(frozen=True)
class Relation:
    relation_type: str
    source: StreamId
    target: StreamId


@dataclass
class Event:
    __slots__ = ("stream", "seq", "timestamp", "event_type", "delta", "origin")
    stream: StreamId
    seq: int
    timestamp: int
    event_type: str
    delta: dict
    origin: Optional[str]


@dataclass
class Stream:
    id: StreamId
    stream_type: str
    attributes: dict = field(default_factory=dict)
    field_types: dict = field(default_factory=dict)
    relations: list = field(default_factory=list)
    log: list = field(default_factory=list)

    def __post_init__(self) -> None:
        self._lock = threading.RLock()


@dataclass(frozen=True)
class Neighbor:
    relation_type: str
    direction: str  # "out": this stream is the relation source; "in": the target
    id: StreamId
    stream_type: str
    attributes: Mapping[str, Any]


@dataclass(frozen=True)
class Snapshot:
    """Consistent read of one stream: folded attributes, neighborhood, history.

    ``history`` is the update-event prefix (seq 1..until); the seq-0
    creation event is represented by ``initial_attributes`` instead, so an
    empty history means "as created".
    """

    id: StreamId
    stream_type: str
    attributes: Mapping[str, Any]
    initial_attributes: Mapping[str, Any]
    neighborhood: tuple
    history: tuple


class StreamGraph:
    """In-memory typed stream graph with a logical clock."""

    def __init__(self) -> None:
        self._streams: dict[StreamId, Stream] = {}
        self._clock = 0
        self._graph_lock = threading.RLock()
        self._publisher_locks: dict[str, threading.RLock] = {}
        self._anon = 0

    # -- internals ---------------------------------------------------------

    def _tick(self) -> int:
        with self._graph_lock:
            self._clock += 1
            return self._clock

    def _get(self, stream_id: StreamId) -> Stream:
        try:
            return self._streams[stream_id]
        except KeyError:
            raise UnknownStream(f"no such stream: {stream_id}") from None

    def _check_delta_types(self, stream: Stream, delta: Mapping[str, Any]) -> None:
        for fname, value in delta.items():
            validate_value(value)
            declared = stream.field_types.get(fname)
            if declared is None:
                continue
            if not matches_type(value, declared):
                raise TypeMismatch(
                    f"{stream.id}: field {fname!r} is {declared}, got "
                    f"{type_name(value)} value {value!r}"
                )

    def _append(self, stream: Stream, event_type: str, delta: dict, origin: Optional[str]) -> Event:
        event = Event(
            stream=stream.id,
            seq=len(stream.log),
            timestamp=self._tick(),
            event_type=event_type,
            delta=delta,
            origin=origin,
        )
        stream.log.append(event)
        for fname, value in delta.items():
            stream.field_types.setdefault(fname, type_name(value))
            stream.attributes[fname] = value
        return event

    # -- operations ---------------------------------------------------------

    def create_stream(
        self,
        publisher: str,
        stream_type: str,
        initial_attrs: Mapping[str, Any] | None = None,
        name: Optional[str] = None,
    ) -> StreamId:
        initial = dict(initial_attrs or {})
        for value in initial.values():
            validate_value(value)
        with self._graph_lock:
            if name is None:
                self._anon += 1
                name = f"s{self._anon}"
            stream_id = StreamId(publisher, name)
            if stream_id in self._streams:
                raise DuplicateStream(f"stream already exists: {stream_id}")
            stream = Stream(id=stream_id, stream_type=stream_type)
            self._streams[stream_id] = stream
        with stream._lock:
            self._append(stream, "stream.created", initial, None)
        return stream_id

    def apply_delta(
        self,
        stream_id: StreamId,
        event_type: str,
        delta: Mapping[str, Any],
        origin: Optional[str] = None,
    ) -> Event:
        if event_type not in EVENT_TYPES:
            raise UnknownEventType(f"unknown event type: {event_type}")
        stream = self._get(stream_id)
        with stream._lock:
            self._check_delta_types(stream, delta)
            return self._append(stream, event_type, dict(delta), origin)

    def relate(self, relation_type: str, source: StreamId, target: StreamId) -> Relation:
        src = self._get(source)
        self._get(target)
        relation = Relation(relation_type, source, target)
        with self._graph_lock:
            if relation in src.relations:
                raise DuplicateRelation(f"duplicate relation: {relation}")
            src.relations.append(relation)
        with src._lock:
            self._append(
                src,
                "relation.added",
                {},
                None,
            )
        return relation

    def snapshot(self, stream_id: StreamId, until: Optional[int] = None) -> Snapshot:
        stream = self._get(stream_id)
        with stream._lock:
            last = len(stream.log) - 1
            if until is None:
                until = last
            if until < 0 or until > last:
                raise SeqOutOfRange(f"{stream_id}: seq {until} outside 0..{last}")
            initial = dict(stream.log[0].delta)
            attrs = dict(initial)
            history = tuple(stream.log[1 : until + 1])
            for event in history:
                attrs.update(event.delta)
            return Snapshot(
                id=stream.id,
                stream_type=stream.stream_type,
                attributes=attrs,
                initial_attributes=initial,
                neighborhood=self.neighborhood(stream_id),
                history=history,
            )

    def neighborhood(self, stream_id: StreamId) -> tuple:
        """Directly related streams, one hop, both directions."""
        self._get(stream_id)
        found = []
        with self._graph_lock:
            for stream in self._streams.values():
                for rel in stream.relations:
                    if rel.source == stream_id:
                        other = self._streams[rel.target]
                        found.append(Neighbor(rel.relation_type, "out", other.id, other.stream_type, dict(other.attributes)))
                    elif rel.target == stream_id:
                        other = self._streams[rel.source]
                        found.append(Neighbor(rel.relation_type, "in", other.id, other.stream_type, dict(other.attributes)))
        found.sort(key=lambda n: (n.relation_type, n.direction, str(n.id)))
        return tuple(found)

    # -- access helpers ------------------------------------------------------

    def __contains__(self, stream_id: StreamId) -> bool:
        return stream_id in self._streams

    def stream(self, stream_id: StreamId) -> Stream:
        return self._get(stream_id)

    def attributes(self, stream_id: StreamId) -> dict:
        stream = self._get(stream_id)
        with stream._lock:
            return dict(stream.attributes)

    def attribute(self, stream_id: StreamId, name: str, default: Any = None) -> Any:
        """One attribute's current value, without copying the whole dict."""
        stream = self._get(stream_id)
        with stream._lock:
            return stream.attributes.get(name, default)

    def log(self, stream_id: StreamId) -> tuple:
        stream = self._get(stream_id)
        with stream._lock:
            return tuple(stream.log)

    def iter_streams(self) -> Iterator[Stream]:
        return iter(list(self._streams.values()))

    def iter_relations(self) -> Iterator[Relation]:
        with self._graph_lock:
            rels = [r for s in self._streams.values() for r in s.relations]
        return iter(rels)

    def exclusive(self, stream_id: StreamId) -> threading.RLock:
        """Per-stream lock for read-modify-write sections (e.g. vote casts)."""
        return self._get(stream_id)._lock

    def publisher_section(self, publisher: str) -> threading.RLock:
        """Per-publisher lock; promotion checks serialize under it."""
        with self._graph_lock:
            return self._publisher_locks.setdefault(publisher, threading.RLock())

    # -- serialization -------------------------------------------------------

    def copy(self) -> "StreamGraph":
        """Independent in-memory copy for what-if evaluation.

        Logs are append-only and events never mutate after append, so the
        copy shares Event objects with the original; per-stream containers
        (log, attributes, field_types, relations) are fresh, and the copy
        gets its own locks. Much faster than a dump/load round trip.
        """
        new = StreamGraph()
        with self._graph_lock:
            new._clock = self._clock
            new._anon = self._anon
            for sid, stream in self._streams.items():
                with stream._lock:
                    dup = Stream(id=sid, stream_type=stream.stream_type)
                    dup.log = list(stream.log)
                    dup.attributes = dict(stream.attributes)
                    dup.field_types = dict(stream.field_types)
                    dup.relations = list(stream.relations)
                new._streams[sid] = dup
        return new

    def dump(self) -> str:
        """Canonical JSON of the whole graph (stable key ordering)."""
        doc = {"streams": [], "clock": self._clock}
        for sid in sorted(self._streams, key=str):
            stream = self._streams[sid]
            doc["streams"].append(
                {
                    "publisher": sid.publisher,
                    "name": sid.name,
                    "stream_type": stream.stream_type,
                    "field_types": dict(sorted(stream.field_types.items())),
                    "relations": [
                        {
                            "relation_type": r.relation_type,
                            "source": str(r.source),
                            "target": str(r.target),
                        }
                        for r in stream.relations
                    ],
                    "log": [
                        {
                            "seq": e.seq,
                            "timestamp": e.timestamp,
                            "event_type": e.event_type,
                            "delta": e.delta,
                            "origin": e.origin,
                        }
                        for e in stream.log
                    ],
                }
            )
        return json.dumps(doc, sort_keys=True, separators=(",", ":"))

    @classmethod
    def load(cls, text: str) -> "StreamGraph":
        doc = json.loads(text)
        graph = cls()
        by_id: dict[str, StreamId] = {}
        for sdoc in doc["streams"]:
            sid = StreamId(sdoc["publisher"], sdoc["name"])
            by_id[str(sid)] = sid
            stream = Stream(id=sid, stream_type=sdoc["stream_type"])
            stream.field_types = dict(sdoc["field_types"])
            for edoc in sdoc["log"]:
                stream.log.append(
                    Event(
                        stream=sid,
                        seq=edoc["seq"],
                        timestamp=edoc["timestamp"],
                        event_type=edoc["event_type"],
                        delta=edoc["delta"],
                        origin=edoc["origin"],
                    )
                )
                stream.attributes.update(edoc["delta"])
            graph._streams[sid] = stream
        for sdoc in doc["streams"]:
            stream = graph._streams[by_id[f"{sdoc['publisher']}/{sdoc['name']}"]]
            for rdoc in sdoc["relations"]:
                pub, _, nm = rdoc["source"].partition("/")
                tpub, _, tnm = rdoc["target"].partition("/")
                stream.relations.append(
                    Relation(rdoc["relation_type"], StreamId(pub, nm), StreamId(tpub, tnm))
                )
        graph._clock = doc["clock"]
        return graph


def replay_attributes(stream: Stream) -> dict:
    """Independent fold oracle: recompute attributes from the full log."""
    attrs: dict = {}
    for event in stream.log:
        attrs.update(event.delta)
    return attrs


def logs_prefix_related(before: list, after: list) -> bool:
    """True when ``before`` is a prefix of ``after`` (log immutability check)."""
    if len(before) > len(after):
        return False
    for old, new in zip(before, after):
        same = (
            old.seq == new.seq
            and old.timestamp == new.timestamp
            and old.event_type == new.event_type
            and deep_equal(old.delta, new.delta)
            and old.origin == new.origin
        )
        if not same:
            return False
    return True
