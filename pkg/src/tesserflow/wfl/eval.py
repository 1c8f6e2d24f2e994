"""Tree-walking evaluator.

Value semantics in brief: null propagates through arithmetic, member
access, and most builtins; comparisons involving null are false;
and/or/not follow three-valued logic.  Integer arithmetic is exact
within [-2^63, 2^64-1] and division truncates toward zero.  Binary
operators broadcast elementwise when either side is a vector
(both sides must then agree on length).
"""

from __future__ import annotations

import math

from tesserflow.errors import TesserflowError, TypeError_
from tesserflow.wfl import ast
from tesserflow.wfl.builtins import (
    AGG_FUNCS,
    BUILTINS,
    Builtin,
    LengthMismatch,
    as_point,
    lookup_extension,
)
from tesserflow.wfl.values import check_int, group_key


class UnknownName(TesserflowError):
    pass


class DivisionByZero(TesserflowError):
    pass


class NullAccess(TesserflowError):
    pass


class EvalContext:
    """Name bindings plus the hook for executing nested pipelines.

    strict_nulls turns member access on a null object into a
    NullAccess error; the default propagates null instead.
    """

    def __init__(self, globals: dict = None, pipeline_runner=None, strict_nulls: bool = False):
        self.globals = dict(globals) if globals else {}
        self.scopes = []
        self.pipeline_runner = pipeline_runner
        self.strict_nulls = strict_nulls

    def lookup(self, name: str):
        for scope in reversed(self.scopes):
            if name in scope:
                return scope[name]
        if name in self.globals:
            return self.globals[name]
        raise UnknownName(f"unknown name {name}")

    def bind(self, name: str, value):
        (self.scopes[-1] if self.scopes else self.globals)[name] = value

    def push(self, scope: dict):
        self.scopes.append(scope)

    def pop(self):
        self.scopes.pop()


def _is_num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _arith(op: str, a, b):
    if a is None or b is None:
        return None
    if op == "+" and isinstance(a, str) and isinstance(b, str):
        return a + b
    if not _is_num(a) or not _is_num(b):
        raise TypeError_(
            f"operator {op}: cannot combine {type(a).__name__} and {type(b).__name__}"
        )
    if isinstance(a, int) and isinstance(b, int):
        if op == "+":
            return check_int(a + b, op)
        if op == "-":
            return check_int(a - b, op)
        if op == "*":
            return check_int(a * b, op)
        if b == 0:
            raise DivisionByZero(f"{a} {op} 0")
        q = abs(a) // abs(b)
        if (a < 0) != (b < 0):
            q = -q
        if op == "/":
            return check_int(q, op)
        return check_int(a - b * q, op)
    fa, fb = float(a), float(b)
    if op == "+":
        return fa + fb
    if op == "-":
        return fa - fb
    if op == "*":
        return fa * fb
    if fb == 0.0:
        raise DivisionByZero(f"{fa} {op} 0.0")
    return fa / fb if op == "/" else math.fmod(fa, fb)


def _compare(op: str, a, b):
    """Null operands make every comparison false."""
    if a is None or b is None:
        return False
    if op in ("==", "!="):
        eq = _equal(a, b)
        return eq if op == "==" else not eq
    for v in (a, b):
        if not (_is_num(v) or isinstance(v, str)):
            raise TypeError_(f"operator {op}: cannot order {type(v).__name__}")
    if isinstance(a, str) != isinstance(b, str):
        raise TypeError_(f"operator {op}: cannot order {type(a).__name__} and {type(b).__name__}")
    if op == "<":
        return a < b
    if op == "<=":
        return a <= b
    if op == ">":
        return a > b
    return a >= b


def _equal(a, b) -> bool:
    if isinstance(a, bool) != isinstance(b, bool):
        raise TypeError_("operator ==: cannot compare bool with non-bool")
    if _is_num(a) and _is_num(b):
        return a == b
    if type(a) is not type(b):
        raise TypeError_(
            f"operator ==: cannot compare {type(a).__name__} and {type(b).__name__}"
        )
    return a == b


def _kleene(op: str, a, b):
    for v in (a, b):
        if v is not None and not isinstance(v, bool):
            raise TypeError_(f"operator {op}: expected bool, got {type(v).__name__}")
    if op == "and":
        if a is False or b is False:
            return False
        return None if a is None or b is None else True
    if a is True or b is True:
        return True
    return None if a is None or b is None else False


def _broadcast2(fn, l, r):
    l_vec, r_vec = isinstance(l, list), isinstance(r, list)
    if l_vec and r_vec:
        if len(l) != len(r):
            raise LengthMismatch(f"vector lengths differ: {len(l)} vs {len(r)}")
        return [_broadcast2(fn, x, y) for x, y in zip(l, r)]
    if l_vec:
        return [_broadcast2(fn, x, r) for x in l]
    if r_vec:
        return [_broadcast2(fn, l, y) for y in r]
    return fn(l, r)


def broadcast_apply(op: str, l, r):
    if op in ("and", "or"):
        return _broadcast2(lambda a, b: _kleene(op, a, b), l, r)
    if op in ("==", "!=", "<", "<=", ">", ">="):
        return _broadcast2(lambda a, b: _compare(op, a, b), l, r)
    return _broadcast2(lambda a, b: _arith(op, a, b), l, r)


def call_builtin(b: Builtin, args: list):
    if b.broadcast and any(isinstance(a, list) for a in args):
        length = None
        for a in args:
            if isinstance(a, list):
                if length is not None and len(a) != length:
                    raise LengthMismatch(f"vector lengths differ: {length} vs {len(a)}")
                length = len(a)
        rows = []
        for i in range(length):
            rows.append(call_builtin(b, [a[i] if isinstance(a, list) else a for a in args]))
        return rows
    if b.null_prop and any(a is None for a in args):
        return None
    return b.fn(*args)


def _member(obj, name: str, strict: bool = False):
    from tesserflow.geo.mercator import GeoPoint
    from tesserflow.schema.model import Record

    if obj is None:
        if strict:
            raise NullAccess(f"accessed .{name} on null")
        return None
    if isinstance(obj, list):
        return [_member(x, name, strict) for x in obj]
    if isinstance(obj, Record):
        if name not in obj.fields:
            raise TypeError_(f"no field {name}")
        return obj.fields[name]
    if isinstance(obj, GeoPoint):
        if name == "lat":
            return obj.lat
        if name == "lng":
            return obj.lng
        raise TypeError_(f"point has no field {name}")
    raise TypeError_(f"cannot access .{name} on {type(obj).__name__}")


def _index(obj, idx):
    if obj is None or idx is None:
        return None
    if isinstance(idx, list):
        return [_index(obj, i) for i in idx]
    if isinstance(obj, list):
        if isinstance(idx, bool) or not isinstance(idx, int):
            raise TypeError_(f"vector index must be an integer, got {type(idx).__name__}")
        if not 0 <= idx < len(obj):
            raise TypeError_(f"index {idx} out of range for vector of {len(obj)}")
        return obj[idx]
    if isinstance(obj, dict):
        return obj.get(group_key(idx))
    raise TypeError_(f"cannot index {type(obj).__name__}")


def _contains_point(container, x) -> bool:
    from tesserflow.geo.areatree import AreaTree
    from tesserflow.geo.mercator import OutOfBand, project
    from tesserflow.geo.shapes import LatLngRect

    p = as_point(x, "in")
    if isinstance(container, LatLngRect):
        return (
            container.sw.lat <= p.lat <= container.ne.lat
            and container.sw.lng <= p.lng <= container.ne.lng
        )
    assert isinstance(container, AreaTree)
    try:
        g = project(p)
    except OutOfBand:
        return False
    return container.contains(g)


def _in_op(x, container):
    from tesserflow.geo.areatree import AreaTree
    from tesserflow.geo.shapes import LatLngRect

    if container is None:
        return False
    if isinstance(container, (AreaTree, LatLngRect)):
        if x is None:
            return False
        if isinstance(x, list) and x and not _is_num(x[0]):
            return [_in_op(e, container) for e in x]
        return _contains_point(container, x)
    if x is None:
        return False
    if isinstance(container, list):
        key = group_key(x)
        return any(e is not None and group_key(e) == key for e in container)
    if isinstance(container, (set, frozenset, dict)):
        return group_key(x) in container
    if isinstance(container, str):
        if not isinstance(x, str):
            raise TypeError_(f"in: cannot search a string for {type(x).__name__}")
        return x in container
    raise TypeError_(f"in: cannot search {type(container).__name__}")


def _resolve_call(e, ctx):
    """(builtin, arg_nodes) for a call site, or a stage misuse error."""
    if isinstance(e.func, ast.Var):
        name = e.func.name
        b = BUILTINS.get(name)
        if b is None:
            if name in AGG_FUNCS:
                raise TypeError_(
                    f"{name} is an aggregate function, only valid inside aggregate()"
                )
            raise UnknownName(f"unknown function {name}")
        return b
    if isinstance(e.func, ast.Member) and isinstance(e.func.obj, ast.Var):
        b = lookup_extension(e.func.obj.name, e.func.name)
        if b is not None:
            return b
        raise UnknownName(f"unknown function {e.func.obj.name}.{e.func.name}")
    raise TypeError_("only named functions can be called")


def eval_expr(e, ctx: EvalContext):
    if isinstance(e, ast.Literal):
        return e.value
    if isinstance(e, ast.Var):
        return ctx.lookup(e.name)
    if isinstance(e, ast.Member):
        return _member(eval_expr(e.obj, ctx), e.name, ctx.strict_nulls)
    if isinstance(e, ast.Index):
        return _index(eval_expr(e.obj, ctx), eval_expr(e.index, ctx))
    if isinstance(e, ast.Unary):
        v = eval_expr(e.operand, ctx)
        if e.op == "not":
            return _broadcast_unary_not(v)
        return _broadcast_neg(v)
    if isinstance(e, ast.Binary):
        left = eval_expr(e.left, ctx)
        # short-circuit only on decisive scalars; vectors and null
        # still need the right side
        if e.op == "and" and left is False:
            return False
        if e.op == "or" and left is True:
            return True
        return broadcast_apply(e.op, left, eval_expr(e.right, ctx))
    if isinstance(e, ast.Between):
        v = eval_expr(e.value, ctx)
        lo = eval_expr(e.lo, ctx)
        hi = eval_expr(e.hi, ctx)

        def between(x):
            return _compare(">=", x, lo) and _compare("<=", x, hi)

        return [between(x) for x in v] if isinstance(v, list) else between(v)
    if isinstance(e, ast.InOp):
        return _in_op(eval_expr(e.value, ctx), eval_expr(e.container, ctx))
    if isinstance(e, ast.ArrayLit):
        return [eval_expr(item, ctx) for item in e.items]
    if isinstance(e, ast.DictLit):
        from tesserflow.schema.model import Record

        return Record({name: eval_expr(v, ctx) for name, v in e.entries})
    if isinstance(e, ast.Call):
        b = _resolve_call(e, ctx)
        args = []
        for a in e.args:
            if isinstance(a, ast.Lambda):
                raise TypeError_(f"{b.name} does not take a lambda")
            args.append(eval_expr(a, ctx))
        return call_builtin(b, args)
    if isinstance(e, ast.Lambda):
        raise TypeError_("lambda used outside a stage")
    if isinstance(e, ast.Pipeline):
        if ctx.pipeline_runner is None:
            raise TypeError_("pipeline execution requires an engine session")
        return ctx.pipeline_runner(e, ctx)
    if isinstance(e, ast.Let):
        value = eval_expr(e.expr, ctx)
        ctx.bind(e.name, value)
        return value
    raise TypeError_(f"cannot evaluate {type(e).__name__}")


def _broadcast_neg(v):
    if v is None:
        return None
    if isinstance(v, list):
        return [_broadcast_neg(x) for x in v]
    if not _is_num(v):
        raise TypeError_(f"cannot negate {type(v).__name__}")
    return check_int(-v, "negation") if isinstance(v, int) else -v


def _broadcast_unary_not(v):
    if v is None:
        return None
    if isinstance(v, list):
        return [_broadcast_unary_not(x) for x in v]
    if not isinstance(v, bool):
        raise TypeError_(f"not: expected bool, got {type(v).__name__}")
    return not v


def eval_lambda(lam: ast.Lambda, arg, ctx: EvalContext):
    """Apply a one-parameter lambda; a block's value is its final
    statement's value."""
    ctx.push({lam.param: arg})
    try:
        result = None
        for stmt in lam.body:
            result = eval_expr(stmt, ctx)
        return result
    finally:
        ctx.pop()


def run_statements(stmts, ctx: EvalContext):
    """Evaluate a statement list; the last statement's value wins."""
    result = None
    for stmt in stmts:
        result = eval_expr(stmt, ctx)
    return result
