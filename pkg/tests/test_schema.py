"""Schema parsing, validation, pruning, and the column-set codec."""

import math
import random
import struct

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tesserflow.errors import SyntaxError_
from tesserflow.schema import (
    AnnotationMismatch,
    CardinalityMismatch,
    Record,
    TypeMismatch,
    UnknownColset,
    UnknownField,
    UnknownPath,
    decode_record,
    empty_record,
    encode_record,
    parse_path,
    parse_schema,
    prune_schema,
    validate_record,
)

OBS_SCHEMA = """
message Obs {
  id: uint [index_tag, colset=keys];
  name: string [index_text];
  score: double [index_range];
  flag: bool;
  small: float;
  count: int [index_range, colset=metrics];
  repeated tags: string [index_tag];
  repeated vals: int;
  loc: message { lat: double; lng: double; } [index_location];
  meta: message { note: string; repeated ids: uint [colset=keys]; };
  virtual near: area = circle(loc, 25.0) [index_area(max_level=6)];
}
"""


@pytest.fixture(scope="module")
def obs():
    return parse_schema(OBS_SCHEMA)


def test_parse_basic_shape(obs):
    assert obs.name == "Obs"
    assert obs.resolve(("loc", "lat")).type == "double"
    anns = {a.kind for a in obs.resolve(("loc",)).annotations}
    assert anns == {"location"}
    near = obs.resolve(("near",))
    assert near.is_virtual() and near.type == "area"
    assert near.virtual_expr == "circle(loc, 25.0)"
    assert near.annotations[0].param("max_level") == 6
    assert obs.colsets == ["keys", "default", "metrics"]
    assert obs.leaf_colset(("meta", "ids")) == "keys"
    assert obs.leaf_colset(("meta", "note")) == "default"


def test_empty_message():
    s = parse_schema("message Nothing {}")
    assert s.node_count() == 1
    assert s.colsets == ["default"]


def test_print_parse_fixpoint(obs):
    printed = obs.print()
    again = parse_schema(printed)
    assert again.print() == printed
    assert again == obs
    assert again.digest() == obs.digest()


def test_annotation_mismatches():
    with pytest.raises(AnnotationMismatch):
        parse_schema("message M { x: double [index_text]; }")
    with pytest.raises(AnnotationMismatch):
        parse_schema("message M { x: string [index_range]; }")
    with pytest.raises(AnnotationMismatch):
        parse_schema("message M { x: double [index_tag]; }")
    with pytest.raises(AnnotationMismatch):
        parse_schema("message M { loc: message { lat: double; } [index_location]; }")
    with pytest.raises(AnnotationMismatch):
        parse_schema(
            "message M { repeated loc: message { lat: double; lng: double; } [index_location]; }"
        )
    with pytest.raises(AnnotationMismatch):
        parse_schema("message M { virtual v: area = f(x); }")  # no index
    with pytest.raises(AnnotationMismatch):
        parse_schema("message M { virtual v: area = f(x) [colset=a, index_area]; }")
    with pytest.raises(AnnotationMismatch):
        parse_schema("message M { virtual v: int = x [index_area]; }")


def test_area_requires_virtual():
    with pytest.raises(SyntaxError_):
        parse_schema("message M { v: area; }")


def test_syntax_error_positions():
    try:
        parse_schema("message M {\n  x: double\n}")
        assert False
    except SyntaxError_ as e:
        assert e.line == 3  # missing ';' detected at the brace
    try:
        parse_schema("message M { x: nosuch; }")
        assert False
    except SyntaxError_ as e:
        assert e.line == 1 and e.col == 16


def test_duplicate_field_rejected():
    from tesserflow.schema import SchemaError

    with pytest.raises(SchemaError):
        parse_schema("message M { a: int; a: double; }")


def test_virtual_expr_with_brackets():
    s = parse_schema("message M { repeated xs: int; virtual v: int = xs[0] [index_range]; }")
    assert s.resolve(("v",)).virtual_expr == "xs[0]"
    assert s.resolve(("v",)).annotations[0].kind == "range"


@settings(max_examples=150, deadline=None)
@given(st.text(max_size=60))
def test_parser_totality(text):
    from tesserflow.schema import SchemaError

    try:
        parse_schema(text)
    except (SyntaxError_, SchemaError):
        pass


# --- validation ---


def test_validate_empty_is_all_null(obs):
    r = validate_record(obs, {})
    assert r.fields["id"] is None
    assert r.fields["tags"] == []
    assert r.fields["loc"] is None
    assert "near" not in r.fields


def test_validate_type_errors(obs):
    with pytest.raises(TypeMismatch) as e:
        validate_record(obs, {"count": "three"})
    assert "count" in str(e.value)
    with pytest.raises(TypeMismatch):
        validate_record(obs, {"flag": 1})
    with pytest.raises(TypeMismatch):
        validate_record(obs, {"id": -1})
    with pytest.raises(TypeMismatch):
        validate_record(obs, {"count": 1 << 63})
    with pytest.raises(CardinalityMismatch):
        validate_record(obs, {"id": [1]})
    with pytest.raises(CardinalityMismatch):
        validate_record(obs, {"tags": "x"})
    with pytest.raises(UnknownField):
        validate_record(obs, {"bogus": 1})
    with pytest.raises(UnknownField):
        validate_record(obs, {"near": 1})
    with pytest.raises(TypeMismatch) as e:
        validate_record(obs, {"loc": {"lat": "north"}})
    assert "loc.lat" in str(e.value)


def test_validate_quantizes_float(obs):
    r = validate_record(obs, {"small": 0.1})
    assert r.fields["small"] == struct.unpack("<f", struct.pack("<f", 0.1))[0]
    assert r.fields["small"] != 0.1


# --- pruning ---


def test_prune_empty(obs):
    p = prune_schema(obs, set())
    assert p.node_count() == 1


def test_prune_keeps_ancestors(obs):
    p = prune_schema(obs, {parse_path("loc.lat")})
    assert p.node_count() == 3  # root, loc, lat
    assert p.resolve(("loc", "lat")).field_id == obs.resolve(("loc", "lat")).field_id
    with pytest.raises(UnknownPath):
        p.resolve(("name",))


def test_prune_all_is_identity(obs):
    p = prune_schema(obs, set(obs.by_path))
    assert p.print() == obs.print()


def test_prune_unknown_path(obs):
    with pytest.raises(UnknownPath):
        prune_schema(obs, {("nope",)})


def test_prune_counting_oracle():
    rng = random.Random(42)
    fields = "\n".join(f"  f{i}: int;" for i in range(1000))
    s = parse_schema("message Big {\n%s\n}" % fields)
    assert s.node_count() == 1001
    used = {(f"f{rng.randrange(1000)}",) for _ in range(3)}
    p = prune_schema(s, used)
    ancestors = set()
    for path in used:
        for i in range(1, len(path) + 1):
            ancestors.add(path[:i])
    assert p.node_count() == 1 + len(ancestors)


# --- codec ---


def rand_record(rng: random.Random, depth=0) -> dict:
    raw = {}
    if rng.random() < 0.9:
        raw["id"] = rng.getrandbits(64)
    if rng.random() < 0.8:
        raw["name"] = "".join(rng.choice("ab é中") for _ in range(rng.randrange(6)))
    if rng.random() < 0.8:
        raw["score"] = rng.uniform(-1e6, 1e6)
    if rng.random() < 0.5:
        raw["flag"] = rng.random() < 0.5
    if rng.random() < 0.5:
        raw["small"] = struct.unpack("<f", struct.pack("<f", rng.uniform(-10, 10)))[0]
    if rng.random() < 0.8:
        raw["count"] = rng.randint(-(1 << 63), (1 << 63) - 1)
    if rng.random() < 0.6:
        raw["tags"] = [rng.choice(["a", "b", "c\x00d", ""]) for _ in range(rng.randrange(4))]
    if rng.random() < 0.6:
        raw["vals"] = [rng.randint(-100, 100) for _ in range(rng.randrange(4))]
    if rng.random() < 0.6:
        raw["loc"] = {"lat": rng.uniform(-80, 80), "lng": rng.uniform(-180, 179)}
    if rng.random() < 0.5:
        meta = {}
        if rng.random() < 0.7:
            meta["note"] = rng.choice(["", "hello", "x" * 50])
        if rng.random() < 0.7:
            meta["ids"] = [rng.getrandbits(32) for _ in range(rng.randrange(3))]
        raw["meta"] = meta
    return raw


def roundtrip(schema, rec):
    out = empty_record(schema)
    for colset in schema.colsets:
        data = encode_record(schema, rec, colset)
        decode_record(schema, data, colset, into=out)
    return out


def test_all_null_encodes_empty(obs):
    r = validate_record(obs, {})
    for colset in obs.colsets:
        assert encode_record(obs, r, colset) == b""


def test_repeated_roundtrip_order(obs):
    r = validate_record(obs, {"vals": [3, 1, 2]})
    data = encode_record(obs, r, "default")
    back = decode_record(obs, data, "default")
    assert back.fields["vals"] == [3, 1, 2]


def test_random_roundtrip_sweep(obs):
    rng = random.Random(1234)
    for _ in range(10000):
        r = validate_record(obs, rand_record(rng))
        assert roundtrip(obs, r) == r


def test_distinct_records_distinct_encodings(obs):
    rng = random.Random(99)
    seen = {}
    for _ in range(2000):
        r = validate_record(obs, rand_record(rng))
        key = tuple(encode_record(obs, r, c) for c in obs.colsets)
        if key in seen:
            assert seen[key] == r
        seen[key] = r


def test_colset_isolation(obs):
    r = validate_record(obs, {"id": 7, "score": 1.5, "count": -2})
    keys_only = decode_record(obs, encode_record(obs, r, "keys"), "keys")
    assert keys_only.fields["id"] == 7
    assert keys_only.fields["score"] is None
    assert keys_only.fields["count"] is None


def test_pruned_decode_agrees(obs):
    rng = random.Random(5)
    pruned = prune_schema(obs, {("loc", "lat"), ("name",)})
    for _ in range(300):
        r = validate_record(obs, rand_record(rng))
        data = encode_record(obs, r, "default")
        full = decode_record(obs, data, "default")
        part = decode_record(pruned, data, "default")
        assert part.fields["name"] == full.fields["name"]
        f_loc, p_loc = full.fields["loc"], part.fields["loc"]
        if f_loc is None:
            assert p_loc is None
        else:
            assert p_loc.fields["lat"] == f_loc.fields["lat"]
            assert "lng" not in p_loc.fields


def test_nan_roundtrip_bit_exact(obs):
    r = validate_record(obs, {"score": float("nan")})
    back = decode_record(obs, encode_record(obs, r, "default"), "default")
    assert math.isnan(back.fields["score"])


def test_unknown_colset(obs):
    r = validate_record(obs, {})
    with pytest.raises(UnknownColset):
        encode_record(obs, r, "nope")
    with pytest.raises(UnknownColset):
        decode_record(obs, b"", "nope")


def test_empty_message_value_roundtrip(obs):
    r = validate_record(obs, {"meta": {}})
    back = roundtrip(obs, r)
    assert isinstance(back.fields["meta"], Record)
    assert back.fields["meta"].fields["note"] is None
    r2 = validate_record(obs, {})
    assert roundtrip(obs, r2).fields["meta"] is None
