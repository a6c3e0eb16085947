"""
Tests for command-line and file validators.
"""

from fractions import Fraction

import pytest

from utils.exceptions import InvalidInputError
from utils.validators import (
    TOWER_FORMAT,
    format_rational,
    parse_budget,
    parse_rational,
    validate_input_path,
    validate_tower_payload,
)


@pytest.mark.parametrize("text, expected", [
    ("1/6", Fraction(1, 6)),
    ("2/12", Fraction(1, 6)),
    (" 3 ", Fraction(3)),
    ("-1/2", Fraction(-1, 2)),
])
def test_parse_rational(text, expected):
    assert parse_rational(text) == expected


@pytest.mark.parametrize("text", ["", "1/0", "1.5", "a/b", "1/-2", None])
def test_parse_rational_rejects_malformed(text):
    with pytest.raises(InvalidInputError):
        parse_rational(text)


def test_parse_rational_ranges():
    assert parse_rational("1/20", open_unit_interval=True) == Fraction(1, 20)
    for text in ("0", "1", "3/2"):
        with pytest.raises(InvalidInputError):
            parse_rational(text, open_unit_interval=True)
    with pytest.raises(InvalidInputError):
        parse_rational("0", positive=True)
    assert parse_rational(Fraction(1, 3), positive=True) == Fraction(1, 3)


def test_format_rational():
    assert format_rational(Fraction(63, 809)) == "63/809"
    assert format_rational(Fraction(2)) == "2/1"


def test_parse_budget():
    assert parse_budget("3,4") == (3, 4)
    assert parse_budget(" 0 , 2 ") == (0, 2)
    assert parse_budget([2, 2]) == (2, 2)
    for bad in ("3", "3,-1", "a,b", [1], [1, -1], 5):
        with pytest.raises(InvalidInputError):
            parse_budget(bad)


def test_validate_input_path(tmp_path):
    path = tmp_path / "group.txt"
    path.write_text("gens: a b\n", encoding='utf-8')
    assert validate_input_path(str(path)) == path
    with pytest.raises(InvalidInputError):
        validate_input_path("")
    with pytest.raises(InvalidInputError):
        validate_input_path(str(tmp_path / "missing.txt"))
    with pytest.raises(InvalidInputError):
        validate_input_path(str(tmp_path))


def valid_payload():
    return {"format": TOWER_FORMAT, "alphabet": ["a", "b"], "stages": [{}], "ledger": {}}


def test_validate_tower_payload_accepts_minimal_tower():
    validate_tower_payload(valid_payload())


@pytest.mark.parametrize("field, value", [
    ("format", "forge-tower/0"),
    ("alphabet", ["a"]),
    ("stages", []),
    ("ledger", []),
])
def test_validate_tower_payload_rejects(field, value):
    payload = valid_payload()
    payload[field] = value
    with pytest.raises(InvalidInputError):
        validate_tower_payload(payload)


def test_validate_tower_payload_missing_field():
    payload = valid_payload()
    del payload["ledger"]
    with pytest.raises(InvalidInputError, match="ledger"):
        validate_tower_payload(payload)
    with pytest.raises(InvalidInputError):
        validate_tower_payload([])
