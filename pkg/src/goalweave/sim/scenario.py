"""Declarative scenario files for the chat simulator.

A scenario is one TOML document bundling the goal machine, an inline
wisdom library, router handlers, scheduled background events, scripted
participants, optional exploratory-thread generation, and the cost and
coverage parameters the efficiency report needs. The full grammar is
documented in docs/formats.md; loading validates eagerly so a bad file
fails before any simulation starts.

Script entries are condition-reactive. Each participant holds a cursor
into its entry list; every simulated tick the participant first
discards entries whose `unless` condition holds (they are consumed
without producing a turn), then fires the current entry if its `when`
condition holds. Conditions:

    state = "s"          the machine has entered state s at least once
    after_turns = n      at least n turns have been emitted so far
    at_tick = t          the simulation clock reads t or later
    prompted = "marker"  a message carrying this marker was posted
    (empty)              always holds
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Optional

import tomli

from ..errors import GoalweaveError
from ..goals import GoalMachine, machine_from_doc, validate_machine
from ..wisdom.pipeline import WisdomLibrary
from ..wisdom.programs import parse_program_doc

TURN_CLASSES = ("progress", "coordination", "governance", "exploratory")
CATEGORIES = ("C1", "C2", "C3", "C4")
ROUTINGS = ("pass", "mechanical")

_CONDITION_KEYS = frozenset({"state", "after_turns", "at_tick", "prompted"})


class ScenarioInvalid(GoalweaveError):
    pass


@dataclass(frozen=True)
class ScriptEntry:
    when: Mapping[str, Any]
    unless: Mapping[str, Any]
    klass: str
    routing: str
    text: str
    category: str = ""
    marker: str = ""
    delta: Mapping[str, Any] = field(default_factory=dict)
    vote: Mapping[str, Any] = field(default_factory=dict)
    thread: int = -1  # >= 0 places the turn on that exploratory thread


@dataclass(frozen=True)
class Participant:
    id: str
    platform: str
    script: tuple


@dataclass(frozen=True)
class BackgroundJob:
    stream: str
    at: int
    jitter: int
    delta: Mapping[str, Any]


@dataclass(frozen=True)
class HandlerSpec:
    id: str
    pattern: str
    event_type: str
    condition: str
    action: str
    subscribes: tuple
    programs: tuple = ()


@dataclass(frozen=True)
class ThreadConfig:
    count: int
    length: int
    tokens_per_turn: int


@dataclass(frozen=True)
class CostParams:
    k_perm: int = 40
    k_sess: int = 20
    k_cold: int = 30
    price_ratio: float = 0.1


@dataclass(frozen=True)
class Scenario:
    name: str
    seed: int
    machine: GoalMachine
    library: WisdomLibrary
    goal_publisher: str
    goal_name: str
    goal_type: str
    goal_attributes: Mapping[str, Any]
    handlers: tuple
    jobs: tuple
    participants: tuple
    adapters: Mapping[str, str]  # platform -> adapter DSL source
    threads: Optional[ThreadConfig]
    costs: CostParams
    n_p: int = 0
    p_user: float = 0.0
    e_w: float = 0.0
    coverage: tuple = ()


def _check_condition(doc: Mapping[str, Any], where: str) -> Mapping[str, Any]:
    extra = set(doc) - _CONDITION_KEYS
    if extra:
        raise ScenarioInvalid(f"{where}: unknown condition keys {sorted(extra)}")
    return dict(doc)


def _entry_from_doc(doc: Mapping[str, Any], where: str) -> ScriptEntry:
    say = doc.get("say")
    if not isinstance(say, dict):
        raise ScenarioInvalid(f"{where}: entry needs a say table")
    klass = say.get("class")
    if klass not in TURN_CLASSES:
        raise ScenarioInvalid(f"{where}: say.class must be one of {TURN_CLASSES}")
    routing = say.get("routing", "mechanical")
    if routing not in ROUTINGS:
        raise ScenarioInvalid(f"{where}: say.routing must be one of {ROUTINGS}")
    if klass == "coordination" and say.get("category") not in CATEGORIES:
        raise ScenarioInvalid(f"{where}: coordination turns need a category C1..C4")
    if klass in ("coordination", "exploratory", "governance") and routing != "mechanical":
        raise ScenarioInvalid(f"{where}: {klass} turns are mechanical")
    thread = say.get("thread", -1)
    if klass == "exploratory" and thread < 0:
        raise ScenarioInvalid(f"{where}: exploratory turns need a thread index")
    return ScriptEntry(
        when=_check_condition(doc.get("when", {}), where),
        unless=_check_condition(doc.get("unless", {}), where),
        klass=klass,
        routing=routing,
        text=say.get("text", ""),
        category=say.get("category", ""),
        marker=say.get("marker", ""),
        delta=dict(say.get("delta", {})),
        vote=dict(say.get("vote", {})),
        thread=thread,
    )


def _thread_entries(threads: ThreadConfig) -> tuple:
    """Synthesized exploratory chatter: fixed length, exact token count."""
    entries = []
    for i in range(threads.count):
        for j in range(threads.length):
            words = " ".join(
                f"t{i}n{j}w{k}" for k in range(threads.tokens_per_turn)
            )
            entries.append(
                ScriptEntry(
                    when={},
                    unless={},
                    klass="exploratory",
                    routing="mechanical",
                    text=words,
                    thread=i,
                )
            )
    return tuple(entries)


def scenario_from_doc(doc: Mapping[str, Any], name: str = "") -> Scenario:
    try:
        machine = machine_from_doc(doc["machine"])
        problems = validate_machine(machine)
        if problems:
            raise ScenarioInvalid(
                "machine is not well-formed:\n  " + "\n  ".join(problems)
            )

        library = WisdomLibrary()
        for pdoc in doc.get("programs", ()):
            program = parse_program_doc(pdoc)
            if program.name in library.programs:
                raise ScenarioInvalid(f"duplicate program {program.name!r}")
            library.programs[program.name] = program
        report = library.validation_report()
        if report:
            raise ScenarioInvalid(
                "library is not phase-correct:\n  "
                + "\n  ".join(str(v) for v in report)
            )

        goal = doc["goal"]
        handlers = tuple(
            HandlerSpec(
                id=h["id"],
                pattern=h["pattern"],
                event_type=h["event_type"],
                condition=h.get("condition", "true"),
                action=h["action"],
                subscribes=tuple(h.get("subscribes", ())),
                programs=tuple(h.get("programs", ())),
            )
            for h in doc.get("handlers", ())
        )
        for h in handlers:
            for pname in h.programs:
                if pname not in library.programs:
                    raise ScenarioInvalid(
                        f"handler {h.id!r} references unknown program {pname!r}"
                    )
        jobs = tuple(
            BackgroundJob(
                stream=j["stream"],
                at=int(j["at"]),
                jitter=int(j.get("jitter", 0)),
                delta=dict(j.get("delta", {"done": True})),
            )
            for j in doc.get("jobs", ())
        )
        for j in jobs:
            if j.at < 1 or j.jitter < 0:
                raise ScenarioInvalid(f"job on {j.stream!r}: at must be >= 1, jitter >= 0")

        threads = None
        if "threads" in doc:
            t = doc["threads"]
            threads = ThreadConfig(
                count=int(t["count"]),
                length=int(t["length"]),
                tokens_per_turn=int(t["tokens_per_turn"]),
            )
            if min(threads.count, threads.length, threads.tokens_per_turn) < 0:
                raise ScenarioInvalid("thread config values must be non-negative")

        participants = []
        for p in doc.get("participants", ()):
            where = f"participant {p.get('id', '?')}"
            entries = tuple(
                _entry_from_doc(e, where) for e in p.get("script", ())
            )
            participants.append(
                Participant(
                    id=p["id"], platform=p.get("platform", "web"), script=entries
                )
            )
        if threads is not None and threads.count > 0:
            participants.insert(
                0,
                Participant(
                    id="explorers", platform="web", script=_thread_entries(threads)
                ),
            )

        params = doc.get("params", {})
        costs_doc = doc.get("costs", {})
        costs = CostParams(
            k_perm=int(costs_doc.get("k_perm", 40)),
            k_sess=int(costs_doc.get("k_sess", 20)),
            k_cold=int(costs_doc.get("k_cold", 30)),
            price_ratio=float(costs_doc.get("price_ratio", 0.1)),
        )
        coverage = tuple(params.get("coverage", ()))
        for c in coverage:
            if c not in CATEGORIES:
                raise ScenarioInvalid(f"coverage lists unknown category {c!r}")
        p_user = float(params.get("p_user", 0.0))
        if not 0.0 <= p_user <= 1.0:
            raise ScenarioInvalid("p_user must be in [0, 1]")
        e_w = float(params.get("e_w", 0.0))
        if not 0.0 <= e_w < 1.0:
            raise ScenarioInvalid("e_w must be in [0, 1)")

        return Scenario(
            name=doc.get("name", name),
            seed=int(doc.get("seed", 0)),
            machine=machine,
            library=library,
            goal_publisher=goal.get("publisher", "Safebox"),
            goal_name=goal["name"],
            goal_type=machine.stream_type,
            goal_attributes=dict(goal.get("attributes", {})),
            handlers=handlers,
            jobs=jobs,
            participants=tuple(participants),
            adapters=dict(doc.get("adapters", {})),
            threads=threads,
            costs=costs,
            n_p=int(params.get("n_p", 0)),
            p_user=p_user,
            e_w=e_w,
            coverage=coverage,
        )
    except ScenarioInvalid:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioInvalid(f"malformed scenario document: {exc!r}") from exc


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            doc = tomli.load(fh)
    except FileNotFoundError:
        raise ScenarioInvalid(f"no such scenario file: {path}")
    except tomli.TOMLDecodeError as exc:
        # tomli reports line and column in the message
        raise ScenarioInvalid(f"{path}: {exc}") from exc
    return scenario_from_doc(doc, name=path.stem)


def shipped_scenario_path(name: str) -> Path:
    return Path(__file__).resolve().parent.parent / "scenarios" / f"{name}.toml"


def shipped_scenarios() -> list:
    base = Path(__file__).resolve().parent.parent / "scenarios"
    return sorted(p.stem for p in base.glob("*.toml"))
