"""Composition: phase-correctness validation, pipelines, the library.

Phase-correctness is checked pairwise exactly as defined: for any two
programs p, q with phase(p) strictly before phase(q), every field q
requires must be provided by p's required inputs (guaranteed present in
any record p accepted) or p's required outputs (guaranteed present in
p's result).  Optional fields never satisfy a requirement.  The
aggregation program must additionally declare every field any earlier
phase can output, and render programs must accept the aggregation
output on its own.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Optional, Sequence

import tomli

from ..errors import GoalweaveError
from ..values import deep_equal
from . import dsl
from .phases import PHASE_SEQUENCE, PRECEDES, Phase, phase_precedes
from .programs import (
    ExecutionResult,
    SandboxBudget,
    WisdomProgram,
    execute_sandboxed,
    load_program,
)
from .schema import type_flows

FITNESS_STEP = 0.1  # EMA weight for update_fitness


class CompositionError(GoalweaveError):
    pass


class OutputKeyConflict(CompositionError):
    pass


class MergeConflict(CompositionError):
    pass


class DuplicateName(CompositionError):
    pass


class UnknownProgram(CompositionError):
    pass


class PhaseCorrectnessViolation(CompositionError):
    def __init__(self, report: Sequence["Violation"]):
        self.report = tuple(report)
        super().__init__("; ".join(str(v) for v in self.report))


class PipelineStageError(GoalweaveError):
    """A sandbox error inside run_pipeline, tagged with its stage index."""

    def __init__(self, stage_index: int, program: str, cause: Exception):
        self.stage_index = stage_index
        self.program = program
        self.cause = cause
        super().__init__(f"stage {stage_index} ({program}): {cause}")


@dataclass(frozen=True)
class Violation:
    condition: str  # "a", "b", or "c"
    subject: str  # program whose schema is unsatisfied
    provider: str  # program (or base input) expected to provide the field
    field: str
    detail: str

    def __str__(self) -> str:
        return (
            f"({self.condition}) {self.subject}: field {self.field!r} "
            f"[{self.provider}] {self.detail}"
        )


@dataclass(frozen=True)
class Pipeline:
    stages: tuple  # each stage is a tuple of WisdomProgram (len 1 = single)

    def programs(self) -> tuple:
        return tuple(p for stage in self.stages for p in stage)


def _guaranteed_after(p: WisdomProgram) -> dict:
    """Fields certainly present after p ran on any accepted input, with types."""
    fields = dict(p.input_schema.required)
    fields.update(p.output_schema.required)
    return fields


def _possible_outputs(p: WisdomProgram) -> dict:
    return p.output_schema.declared()


def validate_phase_correct(
    library: Iterable[WisdomProgram],
    agg_program: WisdomProgram,
    render_programs: Iterable[WisdomProgram],
) -> list:
    """Return every violated condition; an empty report means phase-correct."""
    progs = list(library)
    renders = list(render_programs)
    report: list = []

    def check_coverage(cond: str, p: WisdomProgram, q: WisdomProgram) -> None:
        available = _guaranteed_after(p)
        for fname, ftype in q.input_schema.required.items():
            if fname not in available:
                report.append(
                    Violation(cond, q.name, p.name, fname, "never provided")
                )
            elif not type_flows(available[fname], ftype):
                report.append(
                    Violation(
                        cond,
                        q.name,
                        p.name,
                        fname,
                        f"provided as {available[fname]}, needs {ftype}",
                    )
                )

    # (a) pairwise: after any strictly earlier program ran, each later
    # program's requirements are met. agg participates as a consumer;
    # render programs are covered by (c) against the agg output.
    consumers = progs + [agg_program]
    for p in progs:
        for q in consumers:
            if p is q:
                continue
            if phase_precedes(p.phase, q.phase) == PRECEDES:
                check_coverage("a", p, q)

    # (b) the aggregation program declares every field an earlier-phase
    # program can output (required or optional), type-compatibly.
    agg_declared = agg_program.input_schema.declared()
    for p in progs:
        if phase_precedes(p.phase, Phase.AGG) != PRECEDES:
            continue
        for fname, ftype in _possible_outputs(p).items():
            if fname not in agg_declared:
                report.append(
                    Violation("b", agg_program.name, p.name, fname, "not declared by agg input")
                )
            elif not type_flows(ftype, agg_declared[fname]):
                report.append(
                    Violation(
                        "b",
                        agg_program.name,
                        p.name,
                        fname,
                        f"output as {ftype}, agg declares {agg_declared[fname]}",
                    )
                )

    # (c) each render program accepts the aggregation output alone:
    # its requirements are met by agg's guaranteed outputs, and it
    # declares every field agg can emit.
    agg_guaranteed = dict(agg_program.output_schema.required)
    agg_possible = _possible_outputs(agg_program)
    for r in renders:
        for fname, ftype in r.input_schema.required.items():
            if fname not in agg_guaranteed:
                report.append(
                    Violation("c", r.name, agg_program.name, fname, "not guaranteed by agg output")
                )
            elif not type_flows(agg_guaranteed[fname], ftype):
                report.append(
                    Violation(
                        "c",
                        r.name,
                        agg_program.name,
                        fname,
                        f"provided as {agg_guaranteed[fname]}, needs {ftype}",
                    )
                )
        r_declared = r.input_schema.declared()
        for fname, ftype in agg_possible.items():
            if fname not in r_declared:
                report.append(
                    Violation("c", r.name, agg_program.name, fname, "agg output not declared by render input")
                )
            elif not type_flows(ftype, r_declared[fname]):
                report.append(
                    Violation(
                        "c",
                        r.name,
                        agg_program.name,
                        fname,
                        f"agg outputs {ftype}, render declares {r_declared[fname]}",
                    )
                )
    return report


def compose_pipeline(programs: Sequence[WisdomProgram]) -> Pipeline:
    """Group by phase along the fixed linear extension; parallel within a group.

    Programs sharing a group must have pairwise-disjoint output key sets;
    group members run over the same input snapshot and merge by sorted
    program name, so permuting them cannot change the result.
    """
    if not programs:
        raise CompositionError("cannot compose an empty program list")
    groups: dict = {phase: [] for phase in PHASE_SEQUENCE}
    for p in programs:
        groups[p.phase].append(p)
    stages = []
    for phase in PHASE_SEQUENCE:
        group = sorted(groups[phase], key=lambda p: p.name)
        if not group:
            continue
        seen: dict = {}
        for p in group:
            for key in p.output_keys():
                if key in seen:
                    raise OutputKeyConflict(
                        f"programs {seen[key]!r} and {p.name!r} both output key {key!r}"
                    )
                seen[key] = p.name
        stages.append(tuple(group))
    return Pipeline(stages=tuple(stages))


def _merge_into(record: dict, addition: Mapping[str, Any], stage_index: int, name: str) -> None:
    for key, value in addition.items():
        if key in record and not deep_equal(record[key], value):
            raise MergeConflict(
                f"stage {stage_index} ({name}): field {key!r} already set to a different value"
            )
        record[key] = value


def run_pipeline(
    pipeline: Pipeline,
    base_input: Mapping[str, Any],
    budget: Optional[SandboxBudget] = None,
) -> ExecutionResult:
    """Fold stages over the base input; returns (merged record, proposals).

    Each stage sees the base input plus everything earlier stages added;
    prior fields are preserved, and re-emitting an equal value is
    allowed while a differing value is a MergeConflict.
    """
    record = dict(base_input)
    proposals: list = []
    for idx, stage in enumerate(pipeline.stages):
        results = []
        for program in stage:
            try:
                results.append((program, execute_sandboxed(program, record, budget)))
            except dsl.SandboxError as exc:
                raise PipelineStageError(idx, program.name, exc) from exc
        for program, result in results:
            _merge_into(record, result.output, idx, program.name)
            proposals.extend(result.proposals)
    return ExecutionResult(output=record, proposals=tuple(proposals))


@dataclass
class WisdomLibrary:
    """A named program set plus the designated aggregation and render programs."""

    programs: dict = field(default_factory=dict)
    agg: Optional[WisdomProgram] = None
    renders: tuple = ()

    def all_programs(self) -> tuple:
        extra = tuple(r for r in self.renders)
        return tuple(self.programs.values()) + ((self.agg,) if self.agg else ()) + extra

    def by_phase(self, phase: Phase) -> tuple:
        return tuple(p for p in self.programs.values() if p.phase is phase)

    def get(self, name: str) -> WisdomProgram:
        for p in self.all_programs():
            if p.name == name:
                return p
        raise UnknownProgram(f"no such program: {name!r}")

    def validation_report(self) -> list:
        if self.agg is None:
            return []
        return validate_phase_correct(self.programs.values(), self.agg, self.renders)


def add_program(library: WisdomLibrary, candidate: WisdomProgram) -> None:
    """Accept the candidate only if the extended library stays phase-correct."""
    existing = {p.name for p in library.all_programs()}
    if candidate.name in existing:
        raise DuplicateName(f"program name already in use: {candidate.name!r}")
    if library.agg is None:
        raise CompositionError("library has no aggregation program to validate against")
    trial = list(library.programs.values()) + [candidate]
    report = validate_phase_correct(trial, library.agg, library.renders)
    if report:
        raise PhaseCorrectnessViolation(report)
    library.programs[candidate.name] = candidate


def update_fitness(library: WisdomLibrary, name: str, success: bool) -> float:
    """EMA update: fitness <- (1-0.1)*fitness + 0.1*outcome. Returns the new value."""
    if name not in library.programs:
        raise UnknownProgram(f"no such program: {name!r}")
    program = library.programs[name]
    outcome = 1.0 if success else 0.0
    new_fitness = (1.0 - FITNESS_STEP) * program.fitness + FITNESS_STEP * outcome
    new_fitness = min(1.0, max(0.0, new_fitness))
    library.programs[name] = program.with_fitness(new_fitness)
    return new_fitness


def load_library(manifest_path: Path) -> WisdomLibrary:
    """Load a library from a manifest listing program files.

    Manifest format:
        programs = ["sync.toml", "scan.toml"]
        agg = "merge.toml"
        renders = ["render_text.toml"]
    Paths are relative to the manifest file.
    """
    manifest_path = Path(manifest_path)
    with open(manifest_path, "rb") as fh:
        doc = tomli.load(fh)
    base = manifest_path.parent
    library = WisdomLibrary()
    if "agg" in doc:
        library.agg = load_program(base / doc["agg"])
    library.renders = tuple(load_program(base / rel) for rel in doc.get("renders", []))
    for rel in doc.get("programs", []):
        program = load_program(base / rel)
        if program.name in library.programs:
            raise DuplicateName(f"{manifest_path}: duplicate program {program.name!r}")
        library.programs[program.name] = program
    report = library.validation_report()
    if report:
        raise PhaseCorrectnessViolation(report)
    return library
