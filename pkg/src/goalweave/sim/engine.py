"""Deterministic tick-loop simulator for reactive vs. proactive agents.

One run builds a fresh stream graph (goal, dialog, job, thread, handler
and adapter streams), then advances logical ticks until the goal
machine reaches a terminal state, the turn cap trips, or nothing can
ever happen again. Each tick:

  1. due background events are applied and routed (the router cascade
     may run handler pipelines, whose proposals land as goal deltas,
     and promotion checks);
  2. under the proactive policy, advancement conditions are swept and
     un-emitted messages are posted, each recorded in the goal stream's
     pi_ledger attribute keyed by (condition, state, entry count) so a
     condition fires once per state entry;
  3. at most one scripted participant turn fires (participants are
     scanned in order; entries whose `unless` holds are consumed
     silently), followed by the agent's reply when one is due.

Reply and cost rules: a pass-routed user turn on the main dialog gets
one deterministic stub reply, itself pass-routed; the reply carries the
context cost of the LM call that produced it (prefix blocks priced by
the cache model, dynamic block at full price). A coordination turn
gets a mechanical state echo inheriting its category. Governance and
exploratory turns get no reply. No reply is emitted once the machine
is terminal. Exploratory turns land on their thread stream under the
proactive policy and are inlined into the main dialog under the
reactive one; that placement difference is the whole of the thread
isolation measurement.

Both policies run the identical machine, handlers, scripts, and seeded
background timings, so paired runs differ only in agent emissions.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from hashlib import sha256
from typing import Any, Mapping, Optional

from ..context import (
    Block,
    CacheState,
    ContextBlockSet,
    CostModel,
    token_count,
    turn_cost,
)
from ..goals import check_advancement, position
from ..governance import (
    ADAPTS,
    build_options,
    cast_vote,
    discover_adapters,
    evaluate_promotion,
    graph_state_input,
    render,
)
from ..values import deep_equal
from ..streams import StreamGraph, StreamId
from ..wiring import build_policy_graph, route_event
from ..wisdom.phases import Phase
from ..wisdom.pipeline import compose_pipeline, run_pipeline
from .scenario import Participant, Scenario, ScenarioInvalid, ScriptEntry

POLICIES = ("reactive", "proactive")

HANDLER_ACTIONS = ("pipeline", "promotion")

_QUALITY_DENOM = 16**8


def stub_reply(text: str) -> str:
    """The deterministic LM stand-in: a fixed-form echo of the turn it
    answers, so paired policies produce identical replies to identical
    prompts."""
    tag = sha256(text.encode("utf-8")).hexdigest()[:8]
    return f"ack {tag} {text}"


def turn_quality(text: str) -> Fraction:
    """Content-only quality score in [0, 1): a hash of what was said,
    nothing else, so coordination placement cannot move it."""
    return Fraction(int(sha256(text.encode("utf-8")).hexdigest()[:8], 16), _QUALITY_DENOM)


@dataclass(frozen=True)
class TurnRecord:
    index: int
    tick: int
    actor: str
    klass: str
    routing: str
    text: str
    stream: str
    state_after: str
    category: str = ""
    marker: str = ""
    dyn_tokens: Optional[int] = None
    cost: Optional[Fraction] = None


@dataclass(frozen=True)
class RunResult:
    scenario: str
    policy: str
    seed: int
    turns: tuple
    final_state: str
    capped: bool
    stalled: bool
    total_cost: Fraction
    quality: Fraction
    affordances: tuple = ()
    errors: tuple = ()
    graph: StreamGraph = field(default=None, compare=False, repr=False)

    def pass_turns(self) -> tuple:
        return tuple(t for t in self.turns if t.routing == "pass")


class _Cursor:
    __slots__ = ("participant", "at")

    def __init__(self, participant: Participant):
        self.participant = participant
        self.at = 0

    @property
    def exhausted(self) -> bool:
        return self.at >= len(self.participant.script)

    @property
    def entry(self) -> ScriptEntry:
        return self.participant.script[self.at]


class _Run:
    def __init__(self, scenario: Scenario, policy: str, seed: Optional[int]):
        if policy not in POLICIES:
            raise ScenarioInvalid(f"unknown policy {policy!r}")
        self.sc = scenario
        self.policy = policy
        self.seed = scenario.seed if seed is None else seed
        self.graph = StreamGraph()
        self.machine = scenario.machine
        self.turns: list = []
        self.errors: list = []
        self.affordances: list = []
        self.markers: set = set()
        self.main_texts: list = []
        self.main_tokens = 0
        self.entered: dict = {scenario.machine.initial: 1}
        self.pos = scenario.machine.initial
        self.terminal = False
        self.capped = False
        self.stalled = False
        self.pi_keys: set = set()
        self.tick = 0

        rng_setup = random.Random(self.seed)
        self.rng_user = random.Random(self.seed + 1)

        self.cache = CacheState(ttl=float(10**12))
        self.model = CostModel(cache_price_ratio=scenario.costs.price_ratio)
        self.perm_block = Block.from_text(
            " ".join(f"perm{i}" for i in range(scenario.costs.k_perm))
        )
        self.sess_block = Block.from_text(
            " ".join(f"sess{i}" for i in range(scenario.costs.k_sess))
        )

        # graph setup: goal, dialog, threads, jobs, handlers, adapters
        self.goal_id = self.graph.create_stream(
            scenario.goal_publisher,
            scenario.goal_type,
            scenario.goal_attributes,
            name=scenario.goal_name,
        )
        self.dialog_id = self.graph.create_stream("Chats", "dialog", {}, name="main")
        self.streams_by_ref = {"goal": self.goal_id, "main": self.dialog_id}
        self.thread_ids: list = []
        if scenario.threads is not None:
            for i in range(scenario.threads.count):
                tid = self.graph.create_stream("Chats", "thread", {}, name=f"thread{i}")
                self.graph.relate("Safebox/thread", self.dialog_id, tid)
                self.thread_ids.append(tid)
                self.streams_by_ref[f"thread{i}"] = tid
        for job in scenario.jobs:
            if job.stream not in self.streams_by_ref:
                jid = self.graph.create_stream(
                    "Jobs", "job", {"done": False}, name=job.stream
                )
                self.graph.relate("Safebox/depends", self.goal_id, jid)
                self.streams_by_ref[job.stream] = jid
        self.pipelines: dict = {}
        for spec in scenario.handlers:
            if spec.action not in HANDLER_ACTIONS:
                raise ScenarioInvalid(
                    f"handler {spec.id!r}: unknown action {spec.action!r}"
                )
            hid = self.graph.create_stream(
                "Safebox",
                "handler",
                {
                    "pattern": spec.pattern,
                    "event_type": spec.event_type,
                    "condition": spec.condition,
                    "action": spec.action,
                },
                name=spec.id,
            )
            for ref in spec.subscribes:
                if ref not in self.streams_by_ref:
                    raise ScenarioInvalid(
                        f"handler {spec.id!r} subscribes to unknown stream {ref!r}"
                    )
                self.graph.relate("Safebox/subscribes", hid, self.streams_by_ref[ref])
            if spec.action == "pipeline":
                self.pipelines[spec.id] = compose_pipeline(
                    [scenario.library.get(n) for n in spec.programs]
                )
        for platform in sorted(scenario.adapters):
            aid = self.graph.create_stream(
                "Safebox",
                "wisdom-program",
                {"platform": platform, "source": scenario.adapters[platform]},
                name=f"adapter-{platform}",
            )
            self.graph.relate(ADAPTS, aid, self.goal_id)
        self.adapters = discover_adapters(self.graph, self.goal_id)
        self.option_programs = tuple(
            p
            for p in scenario.library.by_phase(Phase.POST)
            if "options" in p.output_keys()
        )
        self.pg = build_policy_graph("Safebox", self.graph)

        # background schedule: jitter drawn in declaration order from the
        # setup rng, so both policies of a paired seed see identical timings
        schedule = []
        for order, job in enumerate(scenario.jobs):
            jitter = rng_setup.randint(0, job.jitter) if job.jitter else 0
            schedule.append((job.at + jitter, order, job))
        self.schedule = sorted(schedule, key=lambda item: (item[0], item[1]))
        self.next_job = 0

        self.cursors = [_Cursor(p) for p in scenario.participants]
        self.turn_cap = 10 * len(self.machine.states) * max(1, len(self.cursors))
        last_job = max((t for t, _, _ in self.schedule), default=0)
        total_entries = sum(len(p.script) for p in scenario.participants)
        self.tick_cap = last_job + 10 * (total_entries + 5)

    # -- graph plumbing --------------------------------------------------

    def refresh_position(self) -> None:
        snap = self.graph.snapshot(self.goal_id)
        pos = position(self.machine, snap.history, snap.initial_attributes)
        if pos != self.pos:
            self.pos = pos
            self.entered[pos] = self.entered.get(pos, 0) + 1
            if pos in self.machine.terminal:
                self.terminal = True

    def deliver(self, event) -> None:
        """Route one event and every event its handlers generate."""
        queue = [event]
        while queue:
            ev = queue.pop(0)
            for inv in route_event(self.pg, ev, self.graph, self.errors):
                if inv.handler.action == "pipeline":
                    queue.extend(self.run_handler_pipeline(inv.handler_id))
                elif inv.handler.action == "promotion":
                    if evaluate_promotion(self.graph, self.goal_id):
                        queue.append(self.graph.log(self.goal_id)[-1])
            self.refresh_position()

    def run_handler_pipeline(self, handler_id: str) -> list:
        snap = self.graph.snapshot(self.goal_id)
        base = _graph_record(snap, self.pos)
        result = run_pipeline(self.pipelines[handler_id], base)
        produced = []
        attrs = self.graph.attributes(self.goal_id)
        for proposal in result.proposals:
            if proposal.field in attrs and deep_equal(attrs[proposal.field], proposal.value):
                continue  # idempotent re-proposal; applying would loop the router
            ev = self.graph.apply_delta(
                self.goal_id,
                "stream.updated",
                {proposal.field: proposal.value},
                origin=f"handler:{handler_id}",
            )
            produced.append(ev)
            attrs = self.graph.attributes(self.goal_id)
        return produced

    def post(self, author: str, text: str, marker: str, stream_id: StreamId):
        ev = self.graph.apply_delta(
            stream_id,
            "message.posted",
            {"author": author, "text": text, "marker": marker},
            origin=author,
        )
        if stream_id == self.dialog_id:
            self.main_texts.append(text)
            self.main_tokens += token_count(text)
            if marker:
                self.markers.add(marker)
        return ev

    def context_cost(self) -> tuple:
        """(cost, dyn tokens) of an LM call made right now."""
        blocks = ContextBlockSet(
            permanent=self.perm_block,
            session=self.sess_block,
            cold=None,
            dynamic=Block.from_text("\n".join(self.main_texts)),
        )
        now = float(len(self.turns))
        cost = turn_cost(blocks, self.cache, self.model, now)
        self.cache.observe(blocks, now)
        return cost, blocks.dynamic.tokens

    def record(self, **kw) -> TurnRecord:
        turn = TurnRecord(index=len(self.turns) + 1, tick=self.tick, **kw)
        self.turns.append(turn)
        return turn

    # -- proactive sweep -------------------------------------------------

    def sweep(self) -> None:
        if not self.machine.advancement:
            return
        snap = self.graph.snapshot(self.goal_id)
        sandbox_errors: list = []
        messages = check_advancement(self.machine, snap, errors=sandbox_errors)
        for idx, name, exc in sandbox_errors:
            self.errors.append(f"advancement {name or idx}: {exc}")
        for msg in messages:
            key = f"{msg.condition_index}@{self.pos}#{self.entered.get(self.pos, 0)}"
            if key in self.pi_keys:
                continue
            if self.sc.p_user > 0 and self.rng_user.random() < self.sc.p_user:
                # the user raised it in the same breath; the reactive
                # exchange covers this firing, so only the ledger advances
                self.write_pi_ledger(key)
                continue
            self.emit_advancement(msg, key)
            if self.terminal:
                return

    def write_pi_ledger(self, key: str) -> None:
        self.pi_keys.add(key)
        ledger = dict(self.graph.attributes(self.goal_id).get("pi_ledger", {}))
        ledger[key] = True
        ev = self.graph.apply_delta(
            self.goal_id, "stream.updated", {"pi_ledger": ledger}, origin="advancement"
        )
        self.deliver(ev)

    def emit_advancement(self, msg, key: str) -> None:
        pc = self.machine.advancement[msg.condition_index]
        # the ledger write is a goal-stream mutation: advancement turns
        # move graph state, which is what makes them progress turns
        self.write_pi_ledger(key)
        body = dict(msg.body)
        text = str(body.get("text", ""))
        marker = str(body.get("marker", "")) or pc.name or f"pi{msg.condition_index}"
        ev = self.post("agent", text, marker, self.dialog_id)
        self.deliver(ev)
        turn = self.record(
            actor="agent",
            klass="progress",
            routing="mechanical",
            text=text,
            stream="main",
            state_after=self.pos,
            marker=marker,
        )
        if msg.kind == "governance_affordance" and self.adapters:
            self.render_affordances(turn.index)

    def render_affordances(self, turn_index: int) -> None:
        snap = self.graph.snapshot(self.goal_id)
        options = build_options(snap, self.pos, self.option_programs)
        for p in sorted(self.sc.participants, key=lambda p: p.id):
            if p.id == "explorers":
                continue
            payload = render(
                options,
                {"platform": p.platform, "user": p.id, "locale": "en"},
                self.adapters,
            )
            self.affordances.append(
                {
                    "turn": turn_index,
                    "user": p.id,
                    "platform": p.platform,
                    "document": payload.document,
                }
            )

    # -- scripted turns ---------------------------------------------------

    def condition_holds(self, cond: Mapping[str, Any]) -> bool:
        for key, value in cond.items():
            if key == "state":
                if self.entered.get(value, 0) < 1:
                    return False
            elif key == "after_turns":
                if len(self.turns) < value:
                    return False
            elif key == "at_tick":
                if self.tick < value:
                    return False
            elif key == "prompted":
                if value not in self.markers:
                    return False
        return True

    def script_phase(self) -> bool:
        for cursor in self.cursors:
            while not cursor.exhausted:
                entry = cursor.entry
                if entry.unless and self.condition_holds(entry.unless):
                    cursor.at += 1
                    continue
                if self.condition_holds(entry.when):
                    cursor.at += 1
                    self.emit_user_turn(cursor.participant, entry)
                    return True
                break
        return False

    def emit_user_turn(self, participant: Participant, entry: ScriptEntry) -> None:
        if entry.thread >= 0 and self.policy == "proactive":
            stream_id = self.thread_ids[entry.thread]
            stream_name = f"thread{entry.thread}"
        else:
            # the reactive policy inlines exploratory chatter into the
            # main dialog; everything else always lands there
            stream_id = self.dialog_id
            stream_name = "main"
        self.post(participant.id, entry.text, entry.marker, stream_id)
        if entry.vote:
            ev = cast_vote(
                self.graph,
                self.goal_id,
                voter=participant.id,
                weight=entry.vote["weight"],
                platform=entry.vote.get("platform", participant.platform),
            )
            self.deliver(ev)
        if entry.delta:
            ev = self.graph.apply_delta(
                self.goal_id, "stream.updated", dict(entry.delta), origin=participant.id
            )
            self.deliver(ev)
        self.record(
            actor=participant.id,
            klass=entry.klass,
            routing=entry.routing,
            text=entry.text,
            stream=stream_name,
            state_after=self.pos,
            category=entry.category,
            marker=entry.marker,
        )
        if self.terminal:
            return
        if entry.routing == "pass" and stream_name == "main":
            reply = stub_reply(entry.text)
            cost, dyn = self.context_cost()
            self.post("agent", reply, "", self.dialog_id)
            self.record(
                actor="agent",
                klass=entry.klass,
                routing="pass",
                text=reply,
                stream="main",
                state_after=self.pos,
                cost=cost,
                dyn_tokens=dyn,
            )
        elif entry.klass == "coordination":
            echo = f"state: {self.pos}"
            self.post("agent", echo, "", self.dialog_id)
            self.record(
                actor="agent",
                klass="coordination",
                routing="mechanical",
                text=echo,
                stream="main",
                state_after=self.pos,
                category=entry.category,
            )

    # -- main loop ---------------------------------------------------------

    def run(self) -> RunResult:
        while not self.terminal:
            self.tick += 1
            if self.tick > self.tick_cap:
                self.stalled = True
                break
            if len(self.turns) >= self.turn_cap:
                self.capped = True
                break
            while (
                self.next_job < len(self.schedule)
                and self.schedule[self.next_job][0] <= self.tick
                and not self.terminal
            ):
                _, _, job = self.schedule[self.next_job]
                self.next_job += 1
                ev = self.graph.apply_delta(
                    self.streams_by_ref[job.stream],
                    "job.completed",
                    dict(job.delta),
                    origin="jobs",
                )
                self.deliver(ev)
            if self.terminal:
                break
            if self.policy == "proactive":
                self.sweep()
            if self.terminal:
                break
            emitted = self.script_phase()
            if self.terminal:
                break
            if (
                not emitted
                and self.next_job >= len(self.schedule)
                and all(c.exhausted for c in self.cursors)
            ):
                self.stalled = True
                break
        total_cost = sum(
            (t.cost for t in self.turns if t.cost is not None), Fraction(0)
        )
        q = sum(
            (turn_quality(t.text) for t in self.turns if t.routing == "pass"),
            Fraction(0),
        )
        return RunResult(
            scenario=self.sc.name,
            policy=self.policy,
            seed=self.seed,
            turns=tuple(self.turns),
            final_state=self.pos,
            capped=self.capped,
            stalled=self.stalled,
            total_cost=total_cost,
            quality=q,
            affordances=tuple(self.affordances),
            errors=tuple(self.errors),
            graph=self.graph,
        )


def _graph_record(snapshot, state: str) -> dict:
    return graph_state_input(snapshot, state)


def run_scenario(scenario: Scenario, policy: str, seed: Optional[int] = None) -> RunResult:
    """One deterministic simulation; same (scenario, policy, seed) reruns
    are event-identical."""
    return _Run(scenario, policy, seed).run()
