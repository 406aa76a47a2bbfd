import json
import math

import pytest

from glassboost.serialize import (
    canonical_json,
    payload_digest,
    read_json,
    strip_timing,
    write_json,
)


def test_canonical_json_sorts_keys():
    text = canonical_json({"b": 1, "a": {"z": 2, "y": 3}})
    assert text.index('"a"') < text.index('"b"')
    assert text.index('"y"') < text.index('"z"')


def test_canonical_json_rejects_nan():
    with pytest.raises(ValueError):
        canonical_json({"x": math.nan})


def test_strip_timing_recursive():
    doc = {
        "timing": {"fit_seconds": 1.0},
        "keep": [{"timing": 4, "v": 1}, 2],
        "nested": {"timing": None, "inner": {"timing": 0}},
    }
    out = strip_timing(doc)
    assert out == {"keep": [{"v": 1}, 2], "nested": {"inner": {}}}
    # input untouched
    assert "timing" in doc


def test_digest_ignores_timing_and_key_order():
    a = {"x": 1, "timing": {"s": 0.2}, "y": [1, 2]}
    b = {"y": [1, 2], "x": 1, "timing": {"s": 99.0}}
    assert payload_digest(a) == payload_digest(b)
    assert payload_digest(a) != payload_digest({"x": 2, "y": [1, 2]})


def test_write_read_round_trip(tmp_path):
    path = tmp_path / "doc.json"
    payload = {"k": [1, 2.5, "s"], "m": {"a": True, "b": None}}
    write_json(path, payload)
    assert read_json(path) == payload
    text = path.read_text()
    assert text.endswith("\n")
    json.loads(text)


def test_write_json_is_byte_stable(tmp_path):
    p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
    write_json(p1, {"b": 1, "a": 2})
    write_json(p2, {"a": 2, "b": 1})
    assert p1.read_bytes() == p2.read_bytes()
