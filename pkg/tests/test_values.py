"""Value typing, canonical serialization, and exact rational helpers."""

from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from goalweave.values import (
    InvalidValue,
    TYPE_NAMES,
    canonical_bytes,
    canonical_json,
    deep_equal,
    format_fraction,
    matches_type,
    to_fraction,
    type_name,
    validate_value,
    value_digest,
)


def test_type_names_cover_the_value_set():
    assert type_name(True) == "boolean"
    assert type_name(0) == "integer"
    assert type_name(2.5) == "decimal"
    assert type_name("x") == "string"
    assert type_name([1, 2]) == "list"
    assert type_name({"a": 1}) == "record"


def test_bool_is_not_an_integer():
    # bool subclasses int in Python; the attribute types keep them apart
    assert type_name(True) == "boolean"
    assert not matches_type(True, "integer")
    assert not matches_type(True, "decimal")
    assert not matches_type(1, "boolean")


def test_integers_inhabit_decimal():
    assert matches_type(3, "decimal")
    assert matches_type(3, "integer")
    assert not matches_type(2.5, "integer")


def test_unsupported_values_rejected():
    with pytest.raises(InvalidValue):
        type_name(None)
    with pytest.raises(InvalidValue):
        type_name({1, 2})
    with pytest.raises(InvalidValue):
        validate_value([1, (2, 3)])
    with pytest.raises(InvalidValue):
        validate_value({"ok": {"bad": object()}})
    with pytest.raises(InvalidValue):
        validate_value({1: "non-string key"})


def test_canonical_json_sorts_keys():
    assert canonical_json({"b": 1, "a": 2}) == '{"a":2,"b":1}'
    assert canonical_json([1, "x", True]) == '[1,"x",true]'
    assert canonical_bytes({}) == b"{}"


def test_canonical_json_is_insertion_order_independent():
    left = {"a": 1, "b": [{"y": 2, "x": 3}]}
    right = {"b": [{"x": 3, "y": 2}], "a": 1}
    assert canonical_bytes(left) == canonical_bytes(right)
    assert value_digest(left) == value_digest(right)


def test_deep_equal_separates_bool_from_int():
    assert not deep_equal(True, 1)
    assert not deep_equal({"a": [0]}, {"a": [False]})
    assert deep_equal({"a": [1, "x"]}, {"a": [1, "x"]})
    assert not deep_equal([1], [1, 1])


def test_to_fraction_reads_floats_as_decimal_literals():
    # 0.1 means the decimal 1/10, not the binary float expansion
    assert to_fraction(0.1) == Fraction(1, 10)
    assert to_fraction(2.5) == Fraction(5, 2)
    assert to_fraction(3) == Fraction(3)
    assert to_fraction("7/2") == Fraction(7, 2)
    assert to_fraction(Fraction(1, 3)) == Fraction(1, 3)


def test_to_fraction_rejects_bools():
    with pytest.raises(InvalidValue):
        to_fraction(True)


def test_format_fraction_exact_decimals():
    assert format_fraction(Fraction(1, 2)) == "0.5"
    assert format_fraction(Fraction(1, 10)) == "0.1"
    assert format_fraction(Fraction(1, 8)) == "0.125"
    assert format_fraction(Fraction(3)) == "3"
    assert format_fraction(Fraction(-3, 4)) == "-0.75"
    assert format_fraction(Fraction(0)) == "0"


def test_format_fraction_falls_back_to_ratio():
    assert format_fraction(Fraction(1, 3)) == "1/3"
    assert format_fraction(Fraction(22, 7)) == "22/7"


values = st.recursive(
    st.booleans()
    | st.integers(min_value=-10**6, max_value=10**6)
    | st.floats(allow_nan=False, allow_infinity=False, width=32)
    | st.text(max_size=8),
    lambda children: st.lists(children, max_size=4)
    | st.dictionaries(st.text(max_size=6), children, max_size=4),
    max_leaves=12,
)


@given(values)
def test_every_generated_value_validates_and_serializes(v):
    validate_value(v)
    assert type_name(v) in TYPE_NAMES
    assert canonical_json(v) == canonical_json(v)


@given(values)
def test_deep_equal_is_reflexive(v):
    assert deep_equal(v, v)


@given(st.fractions())
def test_format_fraction_round_trips(fr):
    text = format_fraction(fr)
    assert Fraction(text) == fr
