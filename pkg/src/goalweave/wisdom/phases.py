"""Phase algebra: the partial order that governs program composition.

Declared order: pre < ctx < agg < post < render, rel < agg, post < auto,
idx incomparable to everything.  phase_precedes answers against the
transitive closure.  PHASE_SEQUENCE is the one linear extension used for
pipeline staging; any valid extension would do, a fixed one keeps
pipelines reproducible.
"""

from __future__ import annotations

import enum


class Phase(enum.Enum):
    PRE = "pre"
    CTX = "ctx"
    REL = "rel"
    AGG = "agg"
    POST = "post"
    AUTO = "auto"
    RENDER = "render"
    IDX = "idx"

    def __str__(self) -> str:
        return self.value


PHASE_SEQUENCE = (
    Phase.PRE,
    Phase.CTX,
    Phase.REL,
    Phase.AGG,
    Phase.POST,
    Phase.AUTO,
    Phase.RENDER,
    Phase.IDX,
)

_COVER_EDGES = (
    (Phase.PRE, Phase.CTX),
    (Phase.CTX, Phase.AGG),
    (Phase.AGG, Phase.POST),
    (Phase.POST, Phase.RENDER),
    (Phase.REL, Phase.AGG),
    (Phase.POST, Phase.AUTO),
)

PRECEDES = "precedes"
SUCCEEDS = "succeeds"
INCOMPARABLE_OR_EQUAL = "incomparable-or-equal"


def _transitive_closure() -> frozenset:
    pairs = set(_COVER_EDGES)
    changed = True
    while changed:
        changed = False
        for a, b in list(pairs):
            for c, d in list(pairs):
                if b is c and (a, d) not in pairs:
                    pairs.add((a, d))
                    changed = True
    return frozenset(pairs)


_STRICTLY_BEFORE = _transitive_closure()


def phase_precedes(a: Phase, b: Phase) -> str:
    """Tri-state comparison in the transitive closure of the declared order."""
    if (a, b) in _STRICTLY_BEFORE:
        return PRECEDES
    if (b, a) in _STRICTLY_BEFORE:
        return SUCCEEDS
    return INCOMPARABLE_OR_EQUAL


def parse_phase(name: str) -> Phase:
    for phase in Phase:
        if phase.value == name:
            return phase
    raise ValueError(f"unknown phase: {name!r}")


def _check_sequence_is_linear_extension() -> None:
    # Defensive: a reordering of PHASE_SEQUENCE that flips a closure pair
    # would silently break compose_pipeline's staging.
    index = {p: i for i, p in enumerate(PHASE_SEQUENCE)}
    for a, b in _STRICTLY_BEFORE:
        assert index[a] < index[b], f"{a} must stage before {b}"


_check_sequence_is_linear_extension()
