"""Wisdom library: phase algebra, sandboxed programs, pipeline composition."""

from .phases import (
    PHASE_SEQUENCE,
    INCOMPARABLE_OR_EQUAL,
    PRECEDES,
    SUCCEEDS,
    Phase,
    phase_precedes,
)
from .schema import Schema, SchemaError
from .dsl import (
    EvalRuntimeError,
    ForbiddenForm,
    MemoryBudgetExceeded,
    NetworkDenied,
    SandboxError,
    TimeBudgetExceeded,
    parse_program,
    register_protocol,
    registered_protocols,
)
from .programs import (
    InputSchemaViolation,
    OutputSchemaViolation,
    SandboxBudget,
    WisdomProgram,
    execute_sandboxed,
    load_program,
    parse_program_doc,
)
from .pipeline import (
    DuplicateName,
    MergeConflict,
    OutputKeyConflict,
    PhaseCorrectnessViolation,
    Pipeline,
    PipelineStageError,
    UnknownProgram,
    Violation,
    WisdomLibrary,
    add_program,
    compose_pipeline,
    load_library,
    run_pipeline,
    update_fitness,
    validate_phase_correct,
)

__all__ = [
    "PHASE_SEQUENCE",
    "INCOMPARABLE_OR_EQUAL",
    "PRECEDES",
    "SUCCEEDS",
    "Phase",
    "phase_precedes",
    "Schema",
    "SchemaError",
    "EvalRuntimeError",
    "ForbiddenForm",
    "MemoryBudgetExceeded",
    "NetworkDenied",
    "SandboxError",
    "TimeBudgetExceeded",
    "parse_program",
    "register_protocol",
    "registered_protocols",
    "InputSchemaViolation",
    "OutputSchemaViolation",
    "SandboxBudget",
    "WisdomProgram",
    "execute_sandboxed",
    "load_program",
    "parse_program_doc",
    "DuplicateName",
    "MergeConflict",
    "OutputKeyConflict",
    "PhaseCorrectnessViolation",
    "Pipeline",
    "PipelineStageError",
    "UnknownProgram",
    "Violation",
    "WisdomLibrary",
    "add_program",
    "compose_pipeline",
    "load_library",
    "run_pipeline",
    "update_fitness",
    "validate_phase_correct",
]
