"""Attribute value model and canonical serialization.

Attribute values are drawn from a closed set: booleans, integers,
decimals (floats), strings, lists of values, and records (string-keyed
maps of values).  Canonical serialization sorts record keys and uses
repr-based numeric formatting, so equal values always produce identical
bytes; digests and byte-identity checks throughout the package rely on
this.
"""

from __future__ import annotations

import hashlib
import json
from fractions import Fraction
from typing import Any

from .errors import GoalweaveError

BOOLEAN = "boolean"
INTEGER = "integer"
DECIMAL = "decimal"
STRING = "string"
LIST = "list"
RECORD = "record"

TYPE_NAMES = (BOOLEAN, INTEGER, DECIMAL, STRING, LIST, RECORD)


class InvalidValue(GoalweaveError):
    """Value is outside the supported attribute value set."""


_EXACT_TYPES = {
    bool: BOOLEAN,
    int: INTEGER,
    float: DECIMAL,
    str: STRING,
    list: LIST,
    dict: RECORD,
}


def type_name(value: Any) -> str:
    """Name of the attribute type of ``value``.

    Booleans are checked before integers (bool is an int subclass in
    Python but a distinct attribute type here).
    """
    exact = _EXACT_TYPES.get(type(value))
    if exact is not None:
        return exact
    if isinstance(value, bool):
        return BOOLEAN
    if isinstance(value, int):
        return INTEGER
    if isinstance(value, float):
        return DECIMAL
    if isinstance(value, str):
        return STRING
    if isinstance(value, list):
        return LIST
    if isinstance(value, dict):
        return RECORD
    raise InvalidValue(f"unsupported attribute value: {value!r} ({type(value).__name__})")


def matches_type(value: Any, tname: str) -> bool:
    """True when ``value`` inhabits the named type.

    Integers inhabit ``decimal`` as well as ``integer``; booleans inhabit
    only ``boolean``.
    """
    actual = type_name(value)
    if actual == tname:
        return True
    return tname == DECIMAL and actual == INTEGER


def validate_value(value: Any) -> None:
    """Raise InvalidValue if ``value`` (recursively) leaves the value set."""
    tname = type_name(value)
    if tname == LIST:
        for item in value:
            validate_value(item)
    elif tname == RECORD:
        for key, item in value.items():
            if not isinstance(key, str):
                raise InvalidValue(f"record keys must be strings, got {key!r}")
            validate_value(item)


def canonical_json(value: Any) -> str:
    """Compact canonical JSON: sorted keys, no whitespace, repr floats."""
    validate_value(value)
    return json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def canonical_bytes(value: Any) -> bytes:
    return canonical_json(value).encode("ascii")


def content_digest(data: bytes | str) -> str:
    if isinstance(data, str):
        data = data.encode("utf-8")
    return hashlib.sha256(data).hexdigest()


def value_digest(value: Any) -> str:
    return content_digest(canonical_bytes(value))


def deep_equal(a: Any, b: Any) -> bool:
    """Structural equality that keeps bool and int values apart."""
    if isinstance(a, bool) != isinstance(b, bool):
        return False
    if isinstance(a, list) and isinstance(b, list):
        return len(a) == len(b) and all(deep_equal(x, y) for x, y in zip(a, b))
    if isinstance(a, dict) and isinstance(b, dict):
        return a.keys() == b.keys() and all(deep_equal(v, b[k]) for k, v in a.items())
    return a == b


# repr-parse results for floats; hot in the exhaustive vote suites and
# the set of distinct float literals in any run is tiny
_FLOAT_FRACTIONS: dict = {}


def to_fraction(x: Any) -> Fraction:
    """Exact rational conversion with decimal-literal semantics for floats.

    ``0.1`` converts to 1/10 (the decimal the author wrote), not to the
    underlying binary expansion: the shortest round-trip repr of the float
    is re-read as a decimal string.
    """
    if isinstance(x, bool):
        raise InvalidValue("booleans are not numbers")
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        cached = _FLOAT_FRACTIONS.get(x)
        if cached is None:
            cached = _FLOAT_FRACTIONS[x] = Fraction(repr(x))
        return cached
    if isinstance(x, str):
        return Fraction(x)
    raise InvalidValue(f"cannot convert {x!r} to a rational")


def format_fraction(fr: Fraction) -> str:
    """Exact decimal string when the denominator is 2^a*5^b, else ``p/q``."""
    fr = Fraction(fr)
    if fr.denominator == 1:
        return str(fr.numerator)
    den = fr.denominator
    twos = 0
    while den % 2 == 0:
        den //= 2
        twos += 1
    fives = 0
    while den % 5 == 0:
        den //= 5
        fives += 1
    if den != 1:
        return f"{fr.numerator}/{fr.denominator}"
    shift = max(twos, fives)
    scaled = fr.numerator * 10**shift // fr.denominator
    sign = "-" if scaled < 0 else ""
    digits = str(abs(scaled)).rjust(shift + 1, "0")
    whole, frac = digits[:-shift], digits[-shift:]
    return f"{sign}{whole}.{frac}"
