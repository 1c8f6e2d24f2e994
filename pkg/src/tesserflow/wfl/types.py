"""Static types for expressions.

Inference is pragmatic: it exists to derive stage schemas (what
crosses a worker boundary), to reject values that cannot cross one
(areas, tensors, sketches), and to drive completion.  Anything too
dynamic to pin down becomes "any", which is fine locally but refuses
to become a schema field.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from tesserflow.errors import TypeError_
from tesserflow.wfl import ast

NUMERIC_KINDS = ("int", "uint", "float", "double")
_CMP_OPS = ("==", "!=", "<", "<=", ">", ">=")


@dataclass(frozen=True)
class FlowType:
    kind: str
    elem: Optional["FlowType"] = None  # vector/dict/set element
    fields: Optional[tuple] = None  # record: ((name, FlowType), ...)

    def __repr__(self):
        if self.kind == "vector":
            return f"vector<{self.elem!r}>"
        if self.kind == "record" and self.fields is not None:
            inner = ", ".join(f"{n}: {t!r}" for n, t in self.fields)
            return f"record{{{inner}}}"
        if self.kind in ("dict", "set") and self.elem is not None:
            return f"{self.kind}<{self.elem!r}>"
        return self.kind

    def field(self, name):
        if self.fields is None:
            return None
        for n, t in self.fields:
            if n == name:
                return t
        return None


ANY = FlowType("any")
NULL = FlowType("null")
BOOL = FlowType("bool")
INT = FlowType("int")
UINT = FlowType("uint")
FLOAT = FlowType("float")
DOUBLE = FlowType("double")
STRING = FlowType("string")
POINT = FlowType("point")
AREA = FlowType("area")


def vector(elem: FlowType) -> FlowType:
    return FlowType("vector", elem=elem)


def record(fields) -> FlowType:
    return FlowType("record", fields=tuple(fields))


def from_schema_node(node) -> FlowType:
    """Virtual fields type as their declared kind so predicates can
    reference them; the codec simply never stores them."""
    if node.type == "message":
        t = record((c.name, from_schema_node(c)) for c in node.children)
    else:
        t = FlowType(node.type)
    return vector(t) if node.repeated else t


def for_schema(schema) -> FlowType:
    return from_schema_node(schema.root)


def type_of_value(v) -> FlowType:
    """Reflect a runtime value's type (ints read as signed)."""
    from tesserflow.geo.areatree import AreaTree
    from tesserflow.geo.mercator import GeoPoint
    from tesserflow.geo.shapes import LatLngRect, Polygon, Polyline
    from tesserflow.schema.model import Record

    if v is None:
        return NULL
    if isinstance(v, bool):
        return BOOL
    if isinstance(v, int):
        return INT
    if isinstance(v, float):
        return DOUBLE
    if isinstance(v, str):
        return STRING
    if isinstance(v, Record):
        return record((k, type_of_value(x)) for k, x in v.fields.items())
    if isinstance(v, list):
        elem = ANY
        for x in v:
            if x is not None:
                elem = type_of_value(x)
                break
        return vector(elem)
    if isinstance(v, dict):
        elem = ANY
        for x in v.values():
            if x is not None:
                elem = type_of_value(x)
                break
        return FlowType("dict", elem=elem)
    if isinstance(v, (set, frozenset)):
        return FlowType("set", elem=ANY)
    if isinstance(v, GeoPoint):
        return POINT
    if isinstance(v, AreaTree):
        return AREA
    if isinstance(v, LatLngRect):
        return FlowType("rect")
    if isinstance(v, Polygon):
        return FlowType("polygon")
    if isinstance(v, Polyline):
        return FlowType("path")
    kind = getattr(v, "flow_type_kind", None)
    if kind:
        return FlowType(kind)
    return ANY


class TypeEnv:
    def __init__(self, vars: dict = None, parent: "TypeEnv" = None):
        self.vars = vars or {}
        self.parent = parent

    @classmethod
    def for_schema(cls, schema) -> "TypeEnv":
        return cls({c.name: from_schema_node(c) for c in schema.root.children})

    def child(self, vars: dict) -> "TypeEnv":
        return TypeEnv(vars, self)

    def lookup(self, name: str):
        env = self
        while env is not None:
            if name in env.vars:
                return env.vars[name]
            env = env.parent
        return None


def join_numeric(a: FlowType, b: FlowType, where: str) -> FlowType:
    if ANY in (a, b):
        return ANY
    for t in (a, b):
        if t.kind not in NUMERIC_KINDS and t.kind != "null":
            raise TypeError_(f"{where}: {t!r} is not numeric")
    if a.kind == "null" or b.kind == "null":
        return NULL
    if "double" in (a.kind, b.kind) or "float" in (a.kind, b.kind):
        return DOUBLE
    if a.kind == b.kind == "uint":
        return UINT
    return INT


def _devector(t: FlowType):
    """(is_vector, elem)."""
    if t.kind == "vector":
        return True, t.elem or ANY
    return False, t


def infer_expr_type(e, env: TypeEnv) -> FlowType:
    from tesserflow.wfl.builtins import lookup_builtin_type

    def infer(e) -> FlowType:
        if isinstance(e, ast.Literal):
            v = e.value
            if v is None:
                return NULL
            if isinstance(v, bool):
                return BOOL
            if isinstance(v, int):
                return INT
            if isinstance(v, float):
                return DOUBLE
            return STRING
        if isinstance(e, ast.Var):
            t = env.lookup(e.name)
            return t if t is not None else ANY
        if isinstance(e, ast.Member):
            base = infer(e.obj)
            vec, inner = _devector(base)
            if inner.kind == "point":
                if e.name in ("lat", "lng"):
                    return vector(DOUBLE) if vec else DOUBLE
                raise TypeError_(f"point has no field {e.name}")
            if inner.kind == "record":
                ft = inner.field(e.name)
                if ft is None:
                    raise TypeError_(f"no field {e.name} on {inner!r}")
                return vector(ft) if vec else ft
            if inner.kind == "any":
                return ANY
            raise TypeError_(f"cannot access .{e.name} on {base!r}")
        if isinstance(e, ast.Index):
            base = infer(e.obj)
            infer(e.index)
            if base.kind == "vector":
                return base.elem or ANY
            if base.kind == "dict":
                return base.elem or ANY
            if base.kind == "any":
                return ANY
            raise TypeError_(f"cannot index {base!r}")
        if isinstance(e, ast.Unary):
            t = infer(e.operand)
            vec, inner = _devector(t)
            if e.op == "not":
                r = BOOL
            else:
                r = join_numeric(inner, INT if inner.kind == "int" else inner, "negation") \
                    if inner.kind != "any" else ANY
                if inner.kind == "uint":
                    r = INT
            return vector(r) if vec else r
        if isinstance(e, ast.Binary):
            lt, rt = infer(e.left), infer(e.right)
            lv, li = _devector(lt)
            rv, ri = _devector(rt)
            if e.op in ("and", "or"):
                r = BOOL
            elif e.op in _CMP_OPS:
                r = BOOL
            elif e.op == "+" and (li.kind == "string" or ri.kind == "string"):
                if {li.kind, ri.kind} <= {"string", "any", "null"}:
                    r = STRING
                else:
                    raise TypeError_("+ mixes string with non-string")
            else:
                r = join_numeric(li, ri, f"operator {e.op}")
            return vector(r) if lv or rv else r
        if isinstance(e, ast.Between):
            infer(e.lo)
            infer(e.hi)
            vec, _ = _devector(infer(e.value))
            return vector(BOOL) if vec else BOOL
        if isinstance(e, ast.InOp):
            infer(e.value)
            infer(e.container)
            return BOOL
        if isinstance(e, ast.ArrayLit):
            elem = ANY
            kinds = {infer(i).kind for i in e.items}
            if len(kinds) == 1:
                elem = FlowType(kinds.pop())
            elif kinds and kinds <= set(NUMERIC_KINDS):
                elem = DOUBLE if kinds & {"float", "double"} else INT
            return vector(elem)
        if isinstance(e, ast.DictLit):
            return record((name, infer(v)) for name, v in e.entries)
        if isinstance(e, ast.Call):
            return lookup_builtin_type(e, infer)
        if isinstance(e, ast.Lambda):
            raise TypeError_("lambda used as a value")
        if isinstance(e, ast.Pipeline):
            return vector(ANY)
        raise TypeError_(f"cannot type {type(e).__name__}")

    return infer(e)
