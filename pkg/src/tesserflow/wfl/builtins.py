"""Builtin function table and the extension registry.

Functions live in their own namespace, resolved at call sites only;
a variable may share a builtin's name without shadowing it.  Most
builtins propagate null (any null scalar argument yields null) and
the scalar math functions broadcast elementwise over vectors.
"""

from __future__ import annotations

import datetime
import math
from dataclasses import dataclass
from typing import Callable, Optional

from tesserflow.bytesutil import tokenize
from tesserflow.errors import TesserflowError, TypeError_
from tesserflow.wfl import sketches, types
from tesserflow.wfl.values import check_int, group_key

AGG_FUNCS = frozenset(["count", "sum", "avg", "min", "max", "stddev", "hll_count"])

EARTH_RADIUS_M = 6371008.8  # mean radius


class LengthMismatch(TesserflowError):
    pass


class DuplicateNamespace(TesserflowError):
    pass


class ParseError(TesserflowError):
    pass


@dataclass
class Builtin:
    name: str
    fn: Callable
    type_fn: Callable  # list[FlowType] -> FlowType
    broadcast: bool = False  # map elementwise over vector arguments
    null_prop: bool = True  # any null argument yields null
    pure: bool = True  # safe to evaluate at plan time


BUILTINS: dict = {}
EXTENSIONS: dict = {}


def _register(name, fn, type_fn, **kw):
    BUILTINS[name] = Builtin(name, fn, type_fn, **kw)


def _fixed(t):
    return lambda args: t


def lookup_extension(namespace: str, name: str) -> Optional[Builtin]:
    table = EXTENSIONS.get(namespace)
    return table.get(name) if table else None


def register_extension(namespace: str, table: dict):
    """Install `namespace.name(...)` functions.

    Table values are callables or (callable, type_fn) pairs.  A
    namespace can only be registered once.
    """
    if namespace in EXTENSIONS:
        raise DuplicateNamespace(f"extension namespace {namespace} already registered")
    if namespace in BUILTINS:
        raise DuplicateNamespace(f"{namespace} collides with a builtin")
    built = {}
    for name, entry in table.items():
        if isinstance(entry, Builtin):
            built[name] = entry
        elif isinstance(entry, tuple):
            fn, type_fn = entry
            built[name] = Builtin(f"{namespace}.{name}", fn, type_fn, null_prop=False)
        else:
            built[name] = Builtin(f"{namespace}.{name}", entry, _fixed(types.ANY), null_prop=False)
    EXTENSIONS[namespace] = built


def unregister_extension(namespace: str):
    EXTENSIONS.pop(namespace, None)


def lookup_builtin_type(call, infer):
    """Resolve a Call node's type given an `infer(expr)` callback."""
    from tesserflow.wfl import ast

    fn = None
    if isinstance(call.func, ast.Var):
        name = call.func.name
        if name in AGG_FUNCS and name not in BUILTINS:
            raise TypeError_(f"{name} is an aggregate function, only valid inside aggregate()")
        fn = BUILTINS.get(name)
        if fn is None:
            raise TypeError_(f"unknown function {name}")
    elif isinstance(call.func, ast.Member) and isinstance(call.func.obj, ast.Var):
        fn = lookup_extension(call.func.obj.name, call.func.name)
        if fn is None:
            raise TypeError_(f"unknown function {call.func.obj.name}.{call.func.name}")
    else:
        raise TypeError_("only named functions can be called")
    arg_types = [types.ANY if isinstance(a, ast.Lambda) else infer(a) for a in call.args]
    return fn.type_fn(arg_types)


# --- coercions ---------------------------------------------------------


def _num(v, where):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise TypeError_(f"{where}: expected a number, got {type(v).__name__}")
    return v


def _str(v, where):
    if not isinstance(v, str):
        raise TypeError_(f"{where}: expected a string, got {type(v).__name__}")
    return v


def _vec(v, where):
    if not isinstance(v, list):
        raise TypeError_(f"{where}: expected a vector, got {type(v).__name__}")
    return v


def _int(v, where):
    if isinstance(v, bool) or not isinstance(v, int):
        raise TypeError_(f"{where}: expected an integer, got {type(v).__name__}")
    return v


def as_point(v, where="point"):
    """Coerce a point value: point literal, {lat, lng} record, or
    [lat, lng] pair."""
    from tesserflow.geo.mercator import GeoPoint
    from tesserflow.schema.model import Record

    if isinstance(v, GeoPoint):
        return v
    if isinstance(v, Record):
        lat, lng = v.fields.get("lat"), v.fields.get("lng")
        if isinstance(lat, float) and isinstance(lng, float):
            return GeoPoint(lat, lng)
    if isinstance(v, list) and len(v) == 2:
        return GeoPoint(_num(v[0], where), _num(v[1], where))
    raise TypeError_(f"{where}: expected a point, got {type(v).__name__}")


def _points(v, where):
    return [as_point(p, where) for p in _vec(v, where)]


# --- math --------------------------------------------------------------


def _abs(x):
    v = abs(_num(x, "abs"))
    return check_int(v, "abs") if isinstance(v, int) else v


def _floor(x):
    return check_int(math.floor(_num(x, "floor")), "floor")


def _ceil(x):
    return check_int(math.ceil(_num(x, "ceil")), "ceil")


def _round(x):
    # half away from zero, so round(2.5) == 3 and round(-2.5) == -3
    v = _num(x, "round")
    if isinstance(v, int):
        return v
    if not math.isfinite(v):
        raise TypeError_(f"round: non-finite value {v}")
    out = math.floor(v + 0.5) if v >= 0 else -math.floor(-v + 0.5)
    return check_int(out, "round")


def _sqrt(x):
    v = _num(x, "sqrt")
    if v < 0:
        raise TypeError_(f"sqrt: negative value {v}")
    return math.sqrt(v)


def _ln(x):
    v = _num(x, "ln")
    if v <= 0:
        raise TypeError_(f"ln: non-positive value {v}")
    return math.log(v)


def _pow(x, y):
    b, e = _num(x, "pow"), _num(y, "pow")
    if isinstance(b, int) and isinstance(e, int) and e >= 0:
        return check_int(b**e, "pow")
    try:
        r = math.pow(b, e)
    except (OverflowError, ValueError) as exc:
        raise TypeError_(f"pow: {exc}") from None
    return r


def _min2(a, b):
    _num(a, "min")
    _num(b, "min")
    return a if a <= b else b


def _max2(a, b):
    _num(a, "max")
    _num(b, "max")
    return a if a >= b else b


def _numeric_join_type(args):
    kinds = {t.kind for t in args}
    if "any" in kinds:
        return types.ANY
    if kinds & {"double", "float"}:
        return types.DOUBLE
    if kinds == {"uint"}:
        return types.UINT
    return types.INT


_register("abs", _abs, lambda a: _numeric_join_type(a), broadcast=True)
_register("floor", _floor, _fixed(types.INT), broadcast=True)
_register("ceil", _ceil, _fixed(types.INT), broadcast=True)
_register("round", _round, _fixed(types.INT), broadcast=True)
_register("sqrt", _sqrt, _fixed(types.DOUBLE), broadcast=True)
_register("exp", lambda x: math.exp(_num(x, "exp")), _fixed(types.DOUBLE), broadcast=True)
_register("ln", _ln, _fixed(types.DOUBLE), broadcast=True)
_register("pow", _pow, lambda a: _numeric_join_type(a), broadcast=True)
_register("min", _min2, lambda a: _numeric_join_type(a), broadcast=True)
_register("max", _max2, lambda a: _numeric_join_type(a), broadcast=True)


# --- casts and null ----------------------------------------------------


def _to_string(x):
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, str)):
        return str(x)
    if isinstance(x, float):
        return repr(x)
    raise TypeError_(f"to_string: cannot convert {type(x).__name__}")


def _to_int(x):
    if isinstance(x, bool):
        return int(x)
    if isinstance(x, int):
        return x
    if isinstance(x, float):
        if not math.isfinite(x):
            raise TypeError_(f"to_int: non-finite value {x}")
        return check_int(math.trunc(x), "to_int")
    if isinstance(x, str):
        try:
            return check_int(int(x.strip(), 10), "to_int")
        except ValueError:
            raise TypeError_(f"to_int: cannot parse {x!r}") from None
    raise TypeError_(f"to_int: cannot convert {type(x).__name__}")


def _to_double(x):
    if isinstance(x, bool):
        return float(x)
    if isinstance(x, (int, float)):
        return float(x)
    if isinstance(x, str):
        try:
            return float(x.strip())
        except ValueError:
            raise TypeError_(f"to_double: cannot parse {x!r}") from None
    raise TypeError_(f"to_double: cannot convert {type(x).__name__}")


_register("to_string", _to_string, _fixed(types.STRING), broadcast=True)
_register("to_int", _to_int, _fixed(types.INT), broadcast=True)
_register("to_double", _to_double, _fixed(types.DOUBLE), broadcast=True)
_register("is_null", lambda x: x is None, _fixed(types.BOOL), null_prop=False)


# --- strings -----------------------------------------------------------


def _text_match(field, query):
    """All query tokens must occur among the field's tokens."""
    have = set(tokenize(_str(field, "text_match")))
    want = tokenize(_str(query, "text_match"))
    return all(tok in have for tok in want)


_register("lower", lambda s: _str(s, "lower").lower(), _fixed(types.STRING), broadcast=True)
_register("upper", lambda s: _str(s, "upper").upper(), _fixed(types.STRING), broadcast=True)
_register(
    "split",
    lambda s, sep: _str(s, "split").split(_str(sep, "split")),
    _fixed(types.vector(types.STRING)),
)
_register("tokens", lambda s: tokenize(_str(s, "tokens")), _fixed(types.vector(types.STRING)))
_register("text_match", _text_match, _fixed(types.BOOL))


# --- vectors, dicts, sets ----------------------------------------------


def _len(x):
    if isinstance(x, (str, list, dict, set, frozenset)):
        return len(x)
    raise TypeError_(f"len: cannot measure {type(x).__name__}")


def _vnums(v, where):
    xs = [x for x in _vec(v, where) if x is not None]
    for x in xs:
        _num(x, where)
    return xs


def _vsum(v):
    xs = _vnums(v, "vsum")
    total = sum(xs)
    return check_int(total, "vsum") if isinstance(total, int) else total


def _vavg(v):
    xs = _vnums(v, "vavg")
    return sum(xs) / len(xs) if xs else None


def _vmin(v):
    xs = _vnums(v, "vmin")
    return min(xs) if xs else None


def _vmax(v):
    xs = _vnums(v, "vmax")
    return max(xs) if xs else None


def _set(v):
    return {group_key(x) for x in _vec(v, "set")}


def _contains(c, x):
    from tesserflow.geo.areatree import AreaTree
    from tesserflow.geo.mercator import OutOfBand, project
    from tesserflow.geo.shapes import LatLngRect

    if c is None:
        return None
    if isinstance(c, str):
        return _str(x, "contains") in c
    if isinstance(c, list):
        return group_key(x) in {group_key(e) for e in c}
    if isinstance(c, (set, frozenset)):
        return group_key(x) in c
    if isinstance(c, dict):
        return group_key(x) in c
    if isinstance(c, (AreaTree, LatLngRect)):
        # containment at grid precision; points outside the mercator
        # band are in no area
        if x is None:
            return False
        try:
            g = project(as_point(x, "contains"))
        except OutOfBand:
            return False
        if isinstance(c, LatLngRect):
            return c.contains_grid(g.x, g.y)
        return c.contains(g)
    raise TypeError_(f"contains: cannot search {type(c).__name__}")


def _dict(keys, vals):
    ks, vs = _vec(keys, "dict"), _vec(vals, "dict")
    if len(ks) != len(vs):
        raise LengthMismatch(f"dict: {len(ks)} keys vs {len(vs)} values")
    return {group_key(k): v for k, v in zip(ks, vs)}


def _concat(a, b):
    if isinstance(a, list) and isinstance(b, list):
        return a + b
    if isinstance(a, str) and isinstance(b, str):
        return a + b
    raise TypeError_("concat: expected two vectors or two strings")


def _elem_type(args):
    return args[0].elem or types.ANY if args and args[0].kind == "vector" else types.ANY


_register("len", _len, _fixed(types.UINT))
_register("vsum", _vsum, lambda a: _numeric_join_type([_elem_type(a)]))
_register("vavg", _vavg, _fixed(types.DOUBLE))
_register("vmin", _vmin, lambda a: _elem_type(a))
_register("vmax", _vmax, lambda a: _elem_type(a))
_register(
    "array",
    lambda *xs: list(xs),
    lambda a: types.vector(a[0] if a else types.ANY),
    null_prop=False,
)
_register("set", _set, lambda a: types.FlowType("set", elem=_elem_type(a)))
_register("contains", _contains, _fixed(types.BOOL), null_prop=False)
_register("dict", _dict, lambda a: types.FlowType("dict", elem=_elem_type(a[1:] or a)))
_register("keys", lambda d: sorted(d.keys(), key=group_key), _fixed(types.vector(types.ANY)))
_register("values", lambda d: [d[k] for k in sorted(d.keys(), key=group_key)],
          _fixed(types.vector(types.ANY)))
_register("concat", _concat, lambda a: a[0] if a else types.ANY)
_register(
    "range",
    lambda n: list(range(_int(n, "range"))),
    _fixed(types.vector(types.INT)),
)


# --- geometry ----------------------------------------------------------


def _point(lat, lng):
    from tesserflow.geo.mercator import GeoPoint

    return GeoPoint(_num(lat, "point"), _num(lng, "point"))


def _rect(sw_lat, sw_lng, ne_lat, ne_lng):
    from tesserflow.geo.mercator import GeoPoint
    from tesserflow.geo.shapes import LatLngRect

    try:
        return LatLngRect(
            GeoPoint(_num(sw_lat, "rect"), _num(sw_lng, "rect")),
            GeoPoint(_num(ne_lat, "rect"), _num(ne_lng, "rect")),
        )
    except ValueError as exc:
        raise TypeError_(f"rect: {exc}") from None


def _polygon(pts):
    from tesserflow.geo.shapes import Polygon

    rings = _vec(pts, "polygon")
    if rings and isinstance(rings[0], list) and rings[0] and isinstance(rings[0][0], list):
        return Polygon([_points(r, "polygon") for r in rings])
    return Polygon([_points(pts, "polygon")])


def _path(pts):
    from tesserflow.geo.shapes import Polyline

    return Polyline(_points(pts, "path"))


def _circle(center, radius_m, max_level=8):
    from tesserflow.geo.shapes import area_from_point_radius

    return area_from_point_radius(
        as_point(center, "circle"), _num(radius_m, "circle"), _int(max_level, "circle")
    )


def _strip(path, width_m, max_level=8):
    from tesserflow.geo.shapes import Polyline, area_from_path

    line = path if isinstance(path, Polyline) else _path(path)
    return area_from_path(line, _num(width_m, "strip"), _int(max_level, "strip"))


def _region(shape, max_level=8):
    from tesserflow.geo.shapes import LatLngRect, Polygon, area_from_polygon, area_from_rect

    level = _int(max_level, "region")
    if isinstance(shape, LatLngRect):
        return area_from_rect(shape, level)
    if isinstance(shape, Polygon):
        return area_from_polygon(shape, level)
    raise TypeError_(f"region: expected a rect or polygon, got {type(shape).__name__}")


def _distance_m(a, b):
    pa, pb = as_point(a, "distance_m"), as_point(b, "distance_m")
    lat1, lng1 = math.radians(pa.lat), math.radians(pa.lng)
    lat2, lng2 = math.radians(pb.lat), math.radians(pb.lng)
    sin_dlat = math.sin((lat2 - lat1) / 2.0)
    sin_dlng = math.sin((lng2 - lng1) / 2.0)
    h = sin_dlat * sin_dlat + math.cos(lat1) * math.cos(lat2) * sin_dlng * sin_dlng
    return 2.0 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(h)))


def _point_in_polygon(pt, poly):
    from tesserflow.geo.shapes import Polygon, _point_in_rings, _project_f

    if not isinstance(poly, Polygon):
        raise TypeError_(f"point_in_polygon: expected a polygon, got {type(poly).__name__}")
    p = as_point(pt, "point_in_polygon")
    x, y = _project_f(p)
    rings = [[_project_f(v) for v in ring] for ring in poly.rings]
    return _point_in_rings(x, y, rings)


def _area_op(op):
    from tesserflow.geo.areatree import AreaTree, area_combine

    def run(a, b):
        for v in (a, b):
            if not isinstance(v, AreaTree):
                raise TypeError_(f"{op}: expected an area, got {type(v).__name__}")
        return area_combine(op, a, b)

    return run


def _intersects(a, b):
    from tesserflow.geo.areatree import AreaTree

    for v in (a, b):
        if not isinstance(v, AreaTree):
            raise TypeError_(f"intersects: expected an area, got {type(v).__name__}")
    return a.intersects(b)


_register("point", _point, _fixed(types.POINT))
_register("rect", _rect, _fixed(types.FlowType("rect")))
_register("polygon", _polygon, _fixed(types.FlowType("polygon")))
_register("path", _path, _fixed(types.FlowType("path")))
_register("circle", _circle, _fixed(types.AREA))
_register("strip", _strip, _fixed(types.AREA))
_register("region", _region, _fixed(types.AREA))
_register("area_union", _area_op("union"), _fixed(types.AREA))
_register("area_intersection", _area_op("intersection"), _fixed(types.AREA))
_register("area_difference", _area_op("difference"), _fixed(types.AREA))
_register("intersects", _intersects, _fixed(types.BOOL))
_register("distance_m", _distance_m, _fixed(types.DOUBLE))
_register("point_in_polygon", _point_in_polygon, _fixed(types.BOOL))


def _geo_stub(name):
    def run(*args):
        raise NotImplementedError(f"{name} requires an external provider")

    return run


_register("geocode", _geo_stub("geocode"), _fixed(types.POINT), pure=False)
_register("reverse_geocode", _geo_stub("reverse_geocode"), _fixed(types.STRING), pure=False)
_register("route", _geo_stub("route"), _fixed(types.FlowType("path")), pure=False)


# --- time --------------------------------------------------------------

_UTC = datetime.timezone.utc


def _parse_time(s):
    if isinstance(s, int) and not isinstance(s, bool):
        return s
    text = _str(s, "parse_time").strip()
    for fmt in ("%Y-%m-%dT%H:%M:%SZ", "%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%d"):
        try:
            dt = datetime.datetime.strptime(text, fmt).replace(tzinfo=_UTC)
            return int(dt.timestamp())
        except ValueError:
            continue
    raise ParseError(f"parse_time: cannot parse {text!r}")


def _format_time(ts):
    dt = datetime.datetime.fromtimestamp(_int(ts, "format_time"), tz=_UTC)
    return dt.strftime("%Y-%m-%dT%H:%M:%SZ")


def _hour_of_day(ts):
    return (_int(ts, "hour_of_day") % 86400) // 3600


def _day_of_week(ts):
    # epoch day 0 was a Thursday; weekdays count from Monday == 0
    return ((_int(ts, "day_of_week") // 86400) + 3) % 7


_register("parse_time", _parse_time, _fixed(types.INT), broadcast=True)
_register("format_time", _format_time, _fixed(types.STRING), broadcast=True)
_register("hour_of_day", _hour_of_day, _fixed(types.UINT), broadcast=True)
_register("day_of_week", _day_of_week, _fixed(types.UINT), broadcast=True)


# --- sketches ----------------------------------------------------------


def _hll_add(h, v):
    if not isinstance(h, sketches.Hll):
        raise TypeError_("hll_add: first argument must be an hll sketch")
    return h.add(v) if v is not None else h


def _hll_merge(a, b):
    if not isinstance(a, sketches.Hll) or not isinstance(b, sketches.Hll):
        raise TypeError_("hll_merge: both arguments must be hll sketches")
    return a.merge(b)


def _hll_estimate(h):
    if not isinstance(h, sketches.Hll):
        raise TypeError_("hll_estimate: expected an hll sketch")
    return h.estimate()


def _bloom_add(b, v):
    if not isinstance(b, sketches.Bloom):
        raise TypeError_("bloom_add: first argument must be a bloom filter")
    return b.add(v) if v is not None else b


def _bloom_contains(b, v):
    if not isinstance(b, sketches.Bloom):
        raise TypeError_("bloom_contains: first argument must be a bloom filter")
    return b.contains(v)


def _interval_tree_build(intervals):
    return sketches.IntervalTree(_vec(intervals, "interval_tree_build"))


def _interval_tree_query(t, probe):
    """Point probe for a number, overlap probe for a [lo, hi] pair."""
    if not isinstance(t, sketches.IntervalTree):
        raise TypeError_("interval_tree_query: first argument must be an interval tree")
    if isinstance(probe, list):
        if len(probe) != 2:
            raise sketches.BadParam("range probe must be a [lo, hi] pair")
        hits = t.overlapping(_num(probe[0], "interval_tree_query"),
                             _num(probe[1], "interval_tree_query"))
    else:
        hits = t.at(probe)
    return [list(iv) for iv in hits]


_register(
    "hll_create",
    lambda p=14: sketches.Hll(_int(p, "hll_create")),
    _fixed(types.FlowType("hll")),
    null_prop=False,
)
_register("hll_add", _hll_add, _fixed(types.FlowType("hll")), null_prop=False)
_register("hll_merge", _hll_merge, _fixed(types.FlowType("hll")))
_register("hll_estimate", _hll_estimate, _fixed(types.UINT))
_register(
    "bloom_create",
    lambda n, fpr: sketches.Bloom(_int(n, "bloom_create"), _num(fpr, "bloom_create")),
    _fixed(types.FlowType("bloom")),
)
_register("bloom_add", _bloom_add, _fixed(types.FlowType("bloom")), null_prop=False)
_register("bloom_contains", _bloom_contains, _fixed(types.BOOL))
_register("interval_tree_build", _interval_tree_build, _fixed(types.FlowType("interval_tree")))
_register("interval_tree_query", _interval_tree_query,
          _fixed(types.vector(types.vector(types.DOUBLE))), null_prop=False)
