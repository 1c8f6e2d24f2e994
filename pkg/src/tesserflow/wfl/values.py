"""Runtime value utilities shared by the evaluator and the engine.

Flow values are plain Python objects: None, bool, int, float, str,
list (vector), Record, dict, set, plus the geo and sketch handle
types.  Two jobs live here: producing stable bytes for hashing a
value (sketches, shuffle partitioning) and normalizing values into
hashable keys (grouping, distinct).
"""

from __future__ import annotations

import struct

from tesserflow.errors import TesserflowError, TypeError_


def stable_key_bytes(v) -> bytes:
    """Type-tagged bytes, equal iff the values compare equal.

    Ints that happen to equal a float hash differently from it on
    purpose: grouping keys keep their arithmetic type.
    """
    from tesserflow.geo.mercator import GeoPoint
    from tesserflow.schema.model import Record

    if v is None:
        return b"n"
    if isinstance(v, bool):
        return b"b1" if v else b"b0"
    if isinstance(v, int):
        return b"i" + v.to_bytes(16, "big", signed=True)
    if isinstance(v, float):
        return b"d" + struct.pack(">d", v)
    if isinstance(v, str):
        return b"s" + v.encode("utf-8")
    if isinstance(v, GeoPoint):
        return b"p" + struct.pack(">dd", v.lat, v.lng)
    if isinstance(v, list):
        out = [b"v", len(v).to_bytes(4, "big")]
        for x in v:
            item = stable_key_bytes(x)
            out.append(len(item).to_bytes(4, "big"))
            out.append(item)
        return b"".join(out)
    if isinstance(v, Record):
        out = [b"r", len(v.fields).to_bytes(4, "big")]
        for name, x in v.fields.items():
            out.append(name.encode("utf-8") + b"\x00")
            item = stable_key_bytes(x)
            out.append(len(item).to_bytes(4, "big"))
            out.append(item)
        return b"".join(out)
    raise TypeError_(f"value of type {type(v).__name__} cannot be a key")


def group_key(v):
    """Hashable, equality-preserving form of a value."""
    from tesserflow.schema.model import Record

    if isinstance(v, list):
        return ("v", tuple(group_key(x) for x in v))
    if isinstance(v, Record):
        return ("r", tuple((n, group_key(x)) for n, x in v.fields.items()))
    if isinstance(v, dict):
        return ("d", tuple(sorted((k, group_key(x)) for k, x in v.items())))
    if isinstance(v, (set, frozenset)):
        return ("s", frozenset(group_key(x) for x in v))
    if isinstance(v, bool):
        return ("b", v)
    return v


_RANK = {"bool": 0, "num": 1, "str": 2}


def sort_key(v):
    """Total order for sort stages: nulls first, then by type rank.

    Mixed-type sort keys order by type rank instead of raising; a
    column that is sometimes null sorts those rows first either way.
    """
    if v is None:
        return (0, 0, 0)
    if isinstance(v, bool):
        return (1, _RANK["bool"], v)
    if isinstance(v, (int, float)):
        return (1, _RANK["num"], v)
    if isinstance(v, str):
        return (1, _RANK["str"], v)
    if isinstance(v, list):
        return (2, 0, tuple(sort_key(x) for x in v))
    raise TypeError_(f"cannot sort by {type(v).__name__}")


# ints live in the union of signed and unsigned 64-bit ranges
INT_MIN = -(1 << 63)
INT_MAX = (1 << 64) - 1


class Overflow(TesserflowError):
    pass


def check_int(v: int, where: str) -> int:
    if not INT_MIN <= v <= INT_MAX:
        raise Overflow(f"{where}: integer result {v} out of 64-bit range")
    return v


def is_vector(v) -> bool:
    return isinstance(v, list)


def truthy(v) -> bool:
    """Filter predicate result: null counts as false."""
    if v is None:
        return False
    if isinstance(v, bool):
        return v
    raise TypeError_(f"predicate returned {type(v).__name__}, expected bool")
