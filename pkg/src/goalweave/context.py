"""Context blocks and the cache cost model.

Four blocks make up an LM call's input: PERMANENT (derived from the
goal type alone), SESSION (the stream's attributes and neighborhood),
COLD (a supplied resume summary, present only for cold sessions), and
DYNAMIC (per-turn selected context).  Blocks are canonical bytes;
digest equality is byte equality, so a block whose digest is already
cached bills at the reduced cache price.  All cost arithmetic is exact
(fractions), floats appear only in report formatting.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterable, Mapping, Optional, Sequence

from .errors import GoalweaveError
from .values import canonical_json, to_fraction

DEFAULT_TTL = 300.0
DEFAULT_PRICE_RATIO = 0.1


class NonPositiveChangeInterval(GoalweaveError):
    pass


def _digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def token_count(text: str) -> int:
    """Whitespace-delimited unit count of the canonical serialization.

    The theorems only need a consistent count, not tokenizer fidelity.
    """
    return len(text.split())


@dataclass(frozen=True)
class Block:
    text: str
    data: bytes = field(repr=False)
    tokens: int
    digest: str

    @classmethod
    def from_text(cls, text: str) -> "Block":
        data = text.encode("utf-8")
        return cls(text=text, data=data, tokens=token_count(text), digest=_digest(data))


EMPTY_BLOCK = Block.from_text("")


@dataclass(frozen=True)
class ContextBlockSet:
    permanent: Block
    session: Block
    cold: Optional[Block]
    dynamic: Block

    def concat_bytes(self) -> bytes:
        parts = [self.permanent.data, self.session.data]
        if self.cold is not None:
            parts.append(self.cold.data)
        parts.append(self.dynamic.data)
        return b"\n".join(parts)

    def digests(self) -> dict:
        out = {
            "permanent": self.permanent.digest,
            "session": self.session.digest,
            "dynamic": self.dynamic.digest,
        }
        if self.cold is not None:
            out["cold"] = self.cold.digest
        return out

    def token_counts(self) -> dict:
        return {
            "permanent": self.permanent.tokens,
            "session": self.session.tokens,
            "cold": self.cold.tokens if self.cold is not None else 0,
            "dynamic": self.dynamic.tokens,
        }


@dataclass
class CacheState:
    cached_digests: set = field(default_factory=set)
    last_activity: float = 0.0
    ttl: float = DEFAULT_TTL

    def __post_init__(self) -> None:
        if self.ttl <= 0:
            raise GoalweaveError("cache ttl must be positive")

    def expired(self, now: Optional[float]) -> bool:
        if now is None:
            return False
        return (now - self.last_activity) > self.ttl

    def observe(self, blocks: ContextBlockSet, now: Optional[float] = None) -> None:
        """Record the prefix blocks as cached and refresh the activity clock."""
        if self.expired(now):
            self.cached_digests.clear()
        self.cached_digests.add(blocks.permanent.digest)
        self.cached_digests.add(blocks.session.digest)
        if now is not None:
            self.last_activity = now


@dataclass(frozen=True)
class CostModel:
    cache_price_ratio: float = DEFAULT_PRICE_RATIO

    def __post_init__(self) -> None:
        if not 0 < self.cache_price_ratio <= 1:
            raise GoalweaveError("cache price ratio must be in (0, 1]")

    def ratio_fraction(self) -> Fraction:
        return to_fraction(self.cache_price_ratio)


@dataclass(frozen=True)
class SessionInfo:
    """Inputs for one assembly: enrichment text, per-turn dynamic context, resume summary."""

    dynamic_messages: tuple = ()
    cold_summary: str = ""
    enrichment: Mapping[str, Any] = field(default_factory=dict)


def render_goal_type(machine_doc: Mapping[str, Any]) -> str:
    """Deterministic plain-text rendering of a goal type definition."""
    lines = [f"goal-type {machine_doc.get('stream_type', '?')}"]
    states = machine_doc.get("states", ())
    lines.append("states " + " ".join(states))
    lines.append(f"initial {machine_doc.get('initial', '?')}")
    lines.append("terminal " + " ".join(machine_doc.get("terminal", ())))
    for tr in machine_doc.get("transitions", ()):
        lines.append(
            f"transition {tr['from']} -> {tr['to']} when {tr['field']} {tr['op']} "
            + canonical_json(tr["value"])
        )
    for name, modes in sorted(dict(machine_doc.get("input_modes", {})).items()):
        lines.append(f"input-modes {name}: " + " ".join(sorted(modes)))
    for adv in machine_doc.get("advancement", ()):
        lines.append(f"advancement at {adv['state']}: {adv.get('name', adv['state'])}")
    return "\n".join(lines)


def render_session(attributes: Mapping[str, Any], neighborhood: Sequence, enrichment: Mapping[str, Any]) -> str:
    lines = []
    for key in sorted(attributes):
        lines.append(f"attr {key} = {canonical_json(attributes[key])}")
    for n in neighborhood:
        lines.append(
            f"rel {n.relation_type} {n.direction} {n.id} type {n.stream_type} "
            + canonical_json(dict(sorted(n.attributes.items())))
        )
    for key in sorted(enrichment):
        lines.append(f"session {key} = {canonical_json(enrichment[key])}")
    return "\n".join(lines)


def assemble_context(
    machine_doc: Mapping[str, Any],
    snapshot,
    session: SessionInfo,
    cold: bool,
) -> ContextBlockSet:
    """Pure assembly: equal inputs yield byte-equal blocks and equal digests."""
    permanent = Block.from_text(render_goal_type(machine_doc))
    session_block = Block.from_text(
        render_session(snapshot.attributes, snapshot.neighborhood, session.enrichment)
    )
    cold_block = Block.from_text(session.cold_summary) if cold else None
    dynamic = Block.from_text("\n".join(session.dynamic_messages))
    return ContextBlockSet(
        permanent=permanent,
        session=session_block,
        cold=cold_block,
        dynamic=dynamic,
    )


def turn_cost(
    blocks: ContextBlockSet,
    cache: CacheState,
    model: CostModel,
    now: Optional[float] = None,
) -> Fraction:
    """Exact token cost of one LM call under the cache model.

    Cached prefix blocks bill at the ratio, missed blocks at full price;
    the cold block (present only on cold resumes) and the dynamic block
    always bill in full.
    """
    ratio = model.ratio_fraction()
    expired = cache.expired(now)
    cost = Fraction(0)
    for block in (blocks.permanent, blocks.session):
        hit = not expired and block.digest in cache.cached_digests
        cost += ratio * block.tokens if hit else Fraction(block.tokens)
    if blocks.cold is not None:
        cost += Fraction(blocks.cold.tokens)
    cost += Fraction(blocks.dynamic.tokens)
    return cost


def cache_hit_probability(t_change: float, t_turn: float) -> Fraction:
    """max(0, 1 - T_t/T_c): chance the session block survived since last turn."""
    if t_change <= 0:
        raise NonPositiveChangeInterval(f"mean change interval must be positive, got {t_change}")
    if t_turn < 0:
        raise GoalweaveError(f"mean inter-turn interval cannot be negative, got {t_turn}")
    p = 1 - to_fraction(t_turn) / to_fraction(t_change)
    return max(Fraction(0), p)


def generation_cost(
    levels: Iterable[tuple],
    model: CostModel,
) -> tuple:
    """Per-level hierarchy generation cost: (cached, uncached, savings ratio).

    Each level is (leaf count, cached-prefix tokens, dynamic tokens);
    cached cost sums N*(ratio*k_cached + k_dyn), uncached sums
    N*(k_cached + k_dyn). With no dynamic tokens the savings ratio is
    exactly 1/ratio.
    """
    ratio = model.ratio_fraction()
    cached = Fraction(0)
    uncached = Fraction(0)
    for count, k_cached, k_dyn in levels:
        if count < 0 or k_cached < 0 or k_dyn < 0:
            raise GoalweaveError("level counts must be non-negative")
        cached += count * (ratio * k_cached + Fraction(k_dyn))
        uncached += count * (Fraction(k_cached) + Fraction(k_dyn))
    savings = uncached / cached if cached > 0 else Fraction(1)
    return cached, uncached, savings


@dataclass(frozen=True)
class TraceRow:
    turn: int
    cold: bool
    session_hit: bool
    cost: Fraction


@dataclass(frozen=True)
class TraceReport:
    rows: tuple
    hit_rate: Optional[Fraction]  # over turns after the first; None for 1-turn traces
    mean_cost: Fraction
    steady_cost: Fraction  # all-hit closed form 0.1(k_perm+k_sess)+k_dyn
    predicted_hit_rate: Fraction


def simulate_cache_trace(
    turns: int,
    change_rate: float,
    ttl: float,
    model: CostModel,
    seed: int,
    k_perm: int = 1000,
    k_sess: int = 2000,
    k_dyn: int = 500,
    k_cold: int = 4000,
    turn_interval: float = 1.0,
) -> TraceReport:
    """Monte-Carlo trace of the per-turn cost model.

    change_rate is the per-turn probability that the session content
    changed since the previous turn (the discretization of T_t/T_c);
    the empirical hit rate converges to 1 - change_rate.  A ttl shorter
    than the turn interval makes every turn a cold resume.
    """
    import random

    if turns < 1:
        raise GoalweaveError("turns must be >= 1")
    if not 0 <= change_rate <= 1:
        raise GoalweaveError("change rate must be in [0, 1]")
    rng = random.Random(seed)
    ratio = model.ratio_fraction()

    perm = Block.from_text(" ".join(f"p{i}" for i in range(k_perm)))
    cold_block = Block.from_text(" ".join(f"c{i}" for i in range(k_cold)))
    dyn = Block.from_text(" ".join(f"d{i}" for i in range(k_dyn)))

    def session_block(version: int) -> Block:
        head = f"v{version}"
        return Block.from_text(" ".join([head] + [f"s{i}" for i in range(k_sess - 1)]))

    # The gap between consecutive turns is turn_interval; the cache
    # survives the gap iff turn_interval <= ttl. A degenerate ttl (0, or
    # anything below the gap) makes every turn a cold resume.
    expires_each_turn = turn_interval > ttl
    cached: set = set()
    rows = []
    hits = 0
    total_cost = Fraction(0)
    version = 0
    for turn in range(1, turns + 1):
        if turn > 1 and rng.random() < change_rate:
            version += 1
        if expires_each_turn or turn == 1:
            cached.clear()
        is_cold = expires_each_turn or turn == 1
        blocks = ContextBlockSet(
            permanent=perm,
            session=session_block(version),
            cold=cold_block if is_cold else None,
            dynamic=dyn,
        )
        session_hit = blocks.session.digest in cached
        cost = Fraction(0)
        for block in (blocks.permanent, blocks.session):
            cost += ratio * block.tokens if block.digest in cached else Fraction(block.tokens)
        if blocks.cold is not None:
            cost += Fraction(blocks.cold.tokens)
        cost += Fraction(blocks.dynamic.tokens)
        cached.add(blocks.permanent.digest)
        cached.add(blocks.session.digest)
        rows.append(TraceRow(turn=turn, cold=is_cold, session_hit=session_hit, cost=cost))
        if turn > 1:
            hits += 1 if session_hit else 0
        total_cost += cost

    steady = ratio * (k_perm + k_sess) + Fraction(k_dyn)
    return TraceReport(
        rows=tuple(rows),
        hit_rate=Fraction(hits, turns - 1) if turns > 1 else None,
        mean_cost=total_cost / turns,
        steady_cost=steady,
        predicted_hit_rate=Fraction(1) - to_fraction(change_rate),
    )
