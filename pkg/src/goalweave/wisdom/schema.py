"""Input/output schemas for wisdom programs."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping

from ..errors import GoalweaveError
from ..values import TYPE_NAMES, matches_type, type_name


class SchemaError(GoalweaveError):
    pass


def type_flows(source: str, target: str) -> bool:
    """Whether a field declared `source` can be consumed where `target` is expected."""
    return source == target or (source == "integer" and target == "decimal")


@dataclass(frozen=True)
class Schema:
    required: Mapping[str, str] = field(default_factory=dict)
    optional: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        overlap = set(self.required) & set(self.optional)
        if overlap:
            raise SchemaError(f"fields both required and optional: {sorted(overlap)}")
        for fname, tname in {**self.required, **self.optional}.items():
            if tname not in TYPE_NAMES:
                raise SchemaError(f"field {fname!r}: unknown type {tname!r}")

    def declared(self) -> dict:
        """All declared fields, required first."""
        return {**self.required, **self.optional}

    def check_input(self, record: Mapping[str, Any]) -> list:
        """Required fields present and typed; declared present fields typed.

        Extra fields are allowed on input: pipeline stages receive the
        accumulated record and read what they declare.
        """
        problems = []
        for fname, tname in self.required.items():
            if fname not in record:
                problems.append(f"missing required field {fname!r}")
            elif not matches_type(record[fname], tname):
                problems.append(
                    f"field {fname!r}: expected {tname}, got {type_name(record[fname])}"
                )
        for fname, tname in self.optional.items():
            if fname in record and not matches_type(record[fname], tname):
                problems.append(
                    f"field {fname!r}: expected {tname}, got {type_name(record[fname])}"
                )
        return problems

    def check_output(self, record: Mapping[str, Any]) -> list:
        """Strict: required present, nothing undeclared, everything typed.

        Undeclared output keys are rejected because downstream merge and
        disjointness reasoning is done on declared keys only.
        """
        problems = []
        declared = self.declared()
        for fname, tname in self.required.items():
            if fname not in record:
                problems.append(f"missing required field {fname!r}")
        for fname, value in record.items():
            if fname not in declared:
                problems.append(f"undeclared output field {fname!r}")
            elif not matches_type(value, declared[fname]):
                problems.append(
                    f"field {fname!r}: expected {declared[fname]}, got {type_name(value)}"
                )
        return problems


def schema_from_doc(doc: Mapping[str, Any]) -> Schema:
    """Build a Schema from a parsed document section ({required: {...}, optional: {...}})."""
    required = dict(doc.get("required", {}))
    optional = dict(doc.get("optional", {}))
    unknown = set(doc) - {"required", "optional"}
    if unknown:
        raise SchemaError(f"unknown schema sections: {sorted(unknown)}")
    return Schema(required=required, optional=optional)
