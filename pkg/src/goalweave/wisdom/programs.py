"""Wisdom programs: schema-typed sandboxed units with a fitness score.

A program document is TOML: name, phase, fitness, input/output schema
tables, and an s-expression body (see dsl.py for the grammar):

    name = "score"
    phase = "ctx"
    fitness = 0.5
    body = '''
    (record "y" (+ (get input "x") 1))
    '''

    [input.required]
    x = "integer"

    [output.required]
    y = "integer"

(body stays above the first table header: in TOML a bare key after
[output.required] would belong to that table.)
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping, Optional

import tomli

from . import dsl
from .phases import Phase, parse_phase
from .schema import Schema, SchemaError, schema_from_doc


class InputSchemaViolation(dsl.SandboxError):
    pass


class OutputSchemaViolation(dsl.SandboxError):
    """The program produced a record its declared output schema rejects.

    Surfacing a program bug; callers typically count it against fitness.
    """


@dataclass(frozen=True)
class SandboxBudget:
    time_limit_ms: float = 50.0
    memory_limit: int = 64 * 1024 * 1024
    network_allowlist: frozenset = frozenset()

    def __post_init__(self) -> None:
        if self.time_limit_ms <= 0 or self.memory_limit <= 0:
            raise ValueError("budget limits must be strictly positive")


DEFAULT_BUDGET = SandboxBudget()


@dataclass(frozen=True)
class WisdomProgram:
    name: str
    phase: Phase
    input_schema: Schema
    output_schema: Schema
    fitness: float
    source: str
    ast: tuple = field(repr=False, compare=False, default=())

    def __post_init__(self) -> None:
        if not 0.0 <= self.fitness <= 1.0:
            raise ValueError(f"fitness must be in [0,1], got {self.fitness}")
        if not self.ast:
            object.__setattr__(self, "ast", dsl.parse_program(self.source))

    def output_keys(self) -> frozenset:
        return frozenset(self.output_schema.declared())

    def with_fitness(self, fitness: float) -> "WisdomProgram":
        return replace(self, fitness=fitness, ast=self.ast)


@dataclass(frozen=True)
class ExecutionResult:
    output: Mapping[str, Any]
    proposals: tuple


def execute_sandboxed(
    program: WisdomProgram,
    input_record: Mapping[str, Any],
    budget: Optional[SandboxBudget] = None,
) -> ExecutionResult:
    """Run one program under budget; returns its output record and proposals.

    The input record is never mutated: the language has no mutation
    forms, so purity holds by construction. Identical inputs produce
    identical outputs and identical proposal lists.
    """
    budget = budget or DEFAULT_BUDGET
    problems = program.input_schema.check_input(input_record)
    if problems:
        raise InputSchemaViolation(f"{program.name}: " + "; ".join(problems))
    result, proposals = dsl.evaluate(
        program.ast,
        dict(input_record),
        budget.time_limit_ms,
        budget.memory_limit,
        budget.network_allowlist,
    )
    if not isinstance(result, dict):
        raise OutputSchemaViolation(f"{program.name}: body did not produce a record")
    problems = program.output_schema.check_output(result)
    if problems:
        raise OutputSchemaViolation(f"{program.name}: " + "; ".join(problems))
    return ExecutionResult(output=result, proposals=proposals)


def parse_program_doc(doc: Mapping[str, Any], origin: str = "<doc>") -> WisdomProgram:
    try:
        name = doc["name"]
        phase = parse_phase(doc["phase"])
        body = doc["body"]
    except KeyError as exc:
        raise SchemaError(f"{origin}: missing program field {exc}") from None
    except ValueError as exc:
        raise SchemaError(f"{origin}: {exc}") from None
    fitness = float(doc.get("fitness", 0.5))
    input_schema = schema_from_doc(doc.get("input", {}))
    output_schema = schema_from_doc(doc.get("output", {}))
    return WisdomProgram(
        name=name,
        phase=phase,
        input_schema=input_schema,
        output_schema=output_schema,
        fitness=fitness,
        source=body,
    )


def load_program(path: Path) -> WisdomProgram:
    with open(path, "rb") as fh:
        doc = tomli.load(fh)
    return parse_program_doc(doc, origin=str(path))
