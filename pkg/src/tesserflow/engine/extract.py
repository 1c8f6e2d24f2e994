"""Index extraction for find() predicates.

Compiles a predicate lambda into an index query plus the residual
expression that restores exactness.  Every translated leaf selects
exactly the records its predicate form matches (null values match
nothing, geo forms are defined at grid precision on both sides), so a
fully translated predicate needs no residual at all.  Negation is the
one connective that always keeps a residual: the complement of an
index selection includes records where the inner predicate is null,
which `not` must still reject.
"""

import math
from dataclasses import dataclass

from tesserflow.errors import TypeError_
from tesserflow.fdb import query as fq
from tesserflow.fdb.shard import UnindexedField
from tesserflow.geo.areatree import AreaTree
from tesserflow.geo.shapes import LatLngRect
from tesserflow.wfl import ast
from tesserflow.wfl.builtins import as_point
from tesserflow.wfl.eval import eval_expr
from tesserflow.bytesutil import tokenize

FULL = object()  # matches every document; dropped from conjunctions

_NUMERIC = ("int", "uint", "float", "double")


@dataclass(frozen=True)
class Deferred:
    """A leaf argument that binds to the outer record at run time."""

    expr: object


@dataclass(frozen=True)
class LeafSpec:
    kind: str  # tag, text, range, location, area_point, area_region
    path: tuple
    args: tuple


@dataclass(frozen=True)
class Compiled:
    """Extraction result for one predicate."""

    spec: object  # FULL | LeafSpec | (op, parts)
    residual: object  # expr or None
    exact: bool


def references(e, name: str) -> bool:
    """Does the expression mention the given variable (respecting
    lambda shadowing)?"""
    if isinstance(e, ast.Var):
        return e.name == name
    if isinstance(e, ast.Lambda):
        if e.param == name:
            return False
        return any(references(s, name) for s in e.body)
    if isinstance(e, ast.Let):
        return references(e.expr, name)
    if isinstance(e, ast.Member):
        return references(e.obj, name)
    if isinstance(e, ast.Index):
        return references(e.obj, name) or references(e.index, name)
    if isinstance(e, ast.Unary):
        return references(e.operand, name)
    if isinstance(e, ast.Binary):
        return references(e.left, name) or references(e.right, name)
    if isinstance(e, ast.Between):
        return any(references(x, name) for x in (e.value, e.lo, e.hi))
    if isinstance(e, ast.InOp):
        return references(e.value, name) or references(e.container, name)
    if isinstance(e, ast.ArrayLit):
        return any(references(x, name) for x in e.items)
    if isinstance(e, ast.DictLit):
        return any(references(v, name) for _, v in e.entries)
    if isinstance(e, ast.Call):
        return references(e.func, name) or any(references(a, name) for a in e.args)
    if isinstance(e, ast.Pipeline):
        return references(e.source, name) or any(
            any(references(a, name) for a in st.args) for st in e.stages
        )
    return False


def member_path(e, param: str):
    """Path tuple when e is a member chain rooted at the lambda
    parameter, else None."""
    parts = []
    while isinstance(e, ast.Member):
        parts.append(e.name)
        e = e.obj
    if isinstance(e, ast.Var) and e.name == param and parts:
        return tuple(reversed(parts))
    return None


def collect_paths(e, param: str) -> set:
    """Every member path on the parameter, anywhere in the expression."""
    out = set()

    def walk(e):
        p = member_path(e, param)
        if p is not None:
            out.add(p)
            return
        if isinstance(e, ast.Lambda):
            if e.param != param:
                for s in e.body:
                    walk(s)
            return
        for name in ("obj", "index", "operand", "left", "right", "value",
                     "lo", "hi", "container", "expr", "func", "source"):
            sub = getattr(e, name, None)
            if isinstance(sub, ast.Node):
                walk(sub)
        for name in ("items", "args", "body", "stages"):
            for sub in getattr(e, name, ()) or ():
                if isinstance(sub, ast.Stage):
                    for a in sub.args:
                        walk(a)
                elif isinstance(sub, ast.Node):
                    walk(sub)
        if isinstance(e, ast.DictLit):
            for _, v in e.entries:
                walk(v)

    walk(e)
    return out


class Extractor:
    """One predicate's compiler.  `outer` names a variable whose
    fields become run-time parameters (sub-flow templates)."""

    def __init__(self, schema, param: str, ctx, outer: str = None):
        self.schema = schema
        self.param = param
        self.ctx = ctx
        self.outer = outer
        self.index_kinds = {}
        for path, _node, ann in schema.indexed_nodes():
            self.index_kinds.setdefault(path, set()).add(ann.kind)

    # --- constant argument handling ---

    def const(self, e):
        """Plan-time value of an expression not touching the record;
        None marks 'not constant'."""
        if references(e, self.param):
            return None
        if self.outer and references(e, self.outer):
            return (Deferred(e),)
        return (eval_expr(e, self.ctx),)

    # --- leaf recognition ---

    def _kinds(self, path):
        return self.index_kinds.get(path, set())

    def _node(self, path):
        if path in self.schema.by_path:
            return self.schema.resolve(path)
        return None

    def _scalar_chain(self, path):
        """True when no node along the path is repeated."""
        for i in range(1, len(path) + 1):
            if self.schema.resolve(path[:i]).repeated:
                return False
        return True

    def _tag_const_ok(self, node, v):
        if isinstance(v, Deferred):
            return True
        t = node.type
        if t == "bool":
            return isinstance(v, bool)
        if t in ("int", "uint"):
            return isinstance(v, int) and not isinstance(v, bool)
        if t == "string":
            return isinstance(v, str)
        return False

    def _eq_leaf(self, path, const):
        node = self._node(path)
        if node is None or node.type == "message" or not self._scalar_chain(path):
            return None
        kinds = self._kinds(path)
        v = const[0]
        if "tag" in kinds:
            if isinstance(v, float) and node.type in ("int", "uint"):
                if not (isinstance(v, Deferred) or v.is_integer()):
                    return None
                v = int(v)
            if not self._tag_const_ok(node, v):
                return None
            return LeafSpec("tag", path, (v,))
        if "range" in kinds and node.type in _NUMERIC:
            if not isinstance(v, (Deferred, int, float)) or isinstance(v, bool):
                return None
            return LeafSpec("range", path, (v, v))
        if kinds:
            raise UnindexedField(
                f"equality on {'.'.join(path)} needs a tag or range index"
            )
        raise UnindexedField(f"{'.'.join(path)} has no index")

    def _range_leaf(self, path, lo, hi):
        node = self._node(path)
        if node is None or not self._scalar_chain(path):
            return None
        if node.type not in _NUMERIC:
            return None
        if "range" not in self._kinds(path):
            raise UnindexedField(f"comparison on {'.'.join(path)} needs a range index")
        for b in (lo, hi):
            if b is not None and not isinstance(b, (Deferred, int, float)):
                return None
            if isinstance(b, bool):
                return None
        return LeafSpec("range", path, (lo, hi))

    def _strict_bound(self, node, v, is_lo):
        """Exclusive bound -> inclusive one, exactly."""
        if isinstance(v, Deferred):
            return Deferred(("strict", v.expr, is_lo, node.type))
        if node.type in ("int", "uint"):
            if isinstance(v, float):
                if math.isinf(v) or math.isnan(v):
                    return v  # fdb clamps infinities; nan raises there
                return math.floor(v) + 1 if is_lo else math.ceil(v) - 1
            return v + 1 if is_lo else v - 1
        return math.nextafter(v, math.inf if is_lo else -math.inf)

    def leaf(self, e):
        """LeafSpec | FULL-marker None for an atomic predicate."""
        # bare boolean field: p.flag
        path = member_path(e, self.param)
        if path is not None:
            node = self._node(path)
            if (node is not None and node.type == "bool"
                    and "tag" in self._kinds(path) and self._scalar_chain(path)):
                return LeafSpec("tag", path, (True,))
            return None

        if isinstance(e, ast.Binary) and e.op in ("==", "<", "<=", ">", ">="):
            lp = member_path(e.left, self.param)
            rp = member_path(e.right, self.param)
            if lp is not None and rp is None:
                const = self.const(e.right)
                if const is None:
                    return None
                op = e.op
            elif rp is not None and lp is None:
                const = self.const(e.left)
                if const is None:
                    return None
                lp = rp
                # mirror the comparison so the path is on the left
                op = {"<": ">", "<=": ">=", ">": "<", ">=": "<="}.get(e.op, e.op)
            else:
                return None
            if op == "==":
                return self._eq_leaf(lp, const)
            node = self._node(lp)
            if node is None or node.type not in _NUMERIC:
                return None
            v = const[0]
            if op == ">=":
                return self._range_leaf(lp, v, None)
            if op == "<=":
                return self._range_leaf(lp, None, v)
            if not isinstance(v, (Deferred, int, float)) or isinstance(v, bool):
                return None
            if op == ">":
                return self._range_leaf(lp, self._strict_bound(node, v, True), None)
            return self._range_leaf(lp, None, self._strict_bound(node, v, False))

        if isinstance(e, ast.Between):
            path = member_path(e.value, self.param)
            if path is None:
                return None
            lo, hi = self.const(e.lo), self.const(e.hi)
            if lo is None or hi is None:
                return None
            return self._range_leaf(path, lo[0], hi[0])

        if isinstance(e, ast.InOp):
            path = member_path(e.value, self.param)
            if path is None:
                return None
            node = self._node(path)
            if node is None or not self._scalar_chain(path):
                return None
            vals = self.const(e.container)
            if vals is None or not isinstance(vals[0], list) or not vals[0]:
                return None
            parts = []
            for v in vals[0]:
                leaf = self._eq_leaf(path, (v,))
                if leaf is None:
                    return None
                parts.append(leaf)
            return ("or", tuple(parts))

        if isinstance(e, ast.Call) and isinstance(e.func, ast.Var):
            return self._call_leaf(e)
        return None

    def _call_leaf(self, e):
        name, args = e.func.name, e.args
        if name == "text_match" and len(args) == 2:
            path = member_path(args[0], self.param)
            if path is None:
                return None
            node = self._node(path)
            if node is None or node.type != "string" or not self._scalar_chain(path):
                return None
            if "text" not in self._kinds(path):
                raise UnindexedField(f"text_match on {'.'.join(path)} needs a text index")
            const = self.const(args[1])
            if const is None or isinstance(const[0], Deferred):
                return None  # token set unknown until run time
            if not isinstance(const[0], str):
                return None
            toks = tokenize(const[0])
            if not toks:
                return None
            leaves = tuple(LeafSpec("text", path, (t,)) for t in toks)
            return leaves[0] if len(leaves) == 1 else ("and", leaves)

        if name == "contains" and len(args) == 2:
            path = member_path(args[0], self.param)
            if path is not None:
                node = self._node(path)
                if node is None:
                    return None
                if node.repeated and node.type != "message":
                    if "tag" not in self._kinds(path):
                        raise UnindexedField(
                            f"contains on {'.'.join(path)} needs a tag index")
                    const = self.const(args[1])
                    if const is None:
                        return None
                    return self._eq_leaf_repeated(path, node, const[0])
                if node.type == "area":
                    if "area" not in self._kinds(path):
                        raise UnindexedField(
                            f"contains on {'.'.join(path)} needs an area index")
                    const = self.const(args[1])
                    if const is None:
                        return None
                    v = const[0]
                    if not isinstance(v, Deferred):
                        try:
                            v = as_point(v, "contains")
                        except TypeError_:
                            return None
                    return LeafSpec("area_point", path, (v,))
                return None
            # region constant containing an indexed location
            path = member_path(args[1], self.param)
            if path is None:
                return None
            node = self._node(path)
            if node is None or node.type != "message" or not self._scalar_chain(path):
                return None
            if "location" not in self._kinds(path):
                raise UnindexedField(
                    f"contains over {'.'.join(path)} needs a location index")
            const = self.const(args[0])
            if const is None:
                return None
            v = const[0]
            if not isinstance(v, (Deferred, LatLngRect, AreaTree)):
                return None
            return LeafSpec("location", path, (v,))

        if name == "intersects" and len(args) == 2:
            for a, b in ((args[0], args[1]), (args[1], args[0])):
                path = member_path(a, self.param)
                if path is None:
                    continue
                node = self._node(path)
                if node is None or node.type != "area":
                    return None
                if "area" not in self._kinds(path):
                    raise UnindexedField(
                        f"intersects on {'.'.join(path)} needs an area index")
                const = self.const(b)
                if const is None:
                    return None
                v = const[0]
                if not isinstance(v, (Deferred, AreaTree)):
                    return None
                return LeafSpec("area_region", path, (v,))
            return None
        return None

    def _eq_leaf_repeated(self, path, node, v):
        if isinstance(v, float) and node.type in ("int", "uint"):
            if not v.is_integer():
                return None
            v = int(v)
        if not self._tag_const_ok(node, v):
            return None
        return LeafSpec("tag", path, (v,))

    # --- connective composition ---

    def compile(self, e) -> Compiled:
        if isinstance(e, ast.Binary) and e.op == "and":
            left, right = self.compile(e.left), self.compile(e.right)
            parts = [c.spec for c in (left, right) if c.spec is not FULL]
            residuals = [r for c in (left, right) if c.residual is not None
                         for r in [c.residual]]
            spec = FULL if not parts else (
                parts[0] if len(parts) == 1 else ("and", tuple(parts)))
            residual = None
            if residuals:
                residual = residuals[0]
                for r in residuals[1:]:
                    residual = ast.Binary("and", residual, r)
            return Compiled(spec, residual, left.exact and right.exact)
        if isinstance(e, ast.Binary) and e.op == "or":
            left, right = self.compile(e.left), self.compile(e.right)
            if left.spec is FULL or right.spec is FULL:
                return Compiled(FULL, e, False)
            spec = ("or", (left.spec, right.spec))
            if left.exact and right.exact:
                return Compiled(spec, None, True)
            return Compiled(spec, e, False)
        if isinstance(e, ast.Unary) and e.op == "not":
            inner = self.compile(e.operand)
            if inner.exact and inner.spec is not FULL:
                return Compiled(("not", inner.spec), e, False)
            return Compiled(FULL, e, False)

        leaf = self.leaf(e)
        if leaf is None:
            return Compiled(FULL, e, False)
        return Compiled(leaf, None, True)


def spec_to_query(spec):
    """LeafSpec tree -> fdb query; Deferred args must be gone."""
    if isinstance(spec, tuple) and spec and spec[0] in ("and", "or", "not"):
        if spec[0] == "not":
            return fq.Not(spec_to_query(spec[1]))
        parts = tuple(spec_to_query(p) for p in spec[1])
        return fq.And(parts) if spec[0] == "and" else fq.Or(parts)
    leaf = spec
    k, p, a = leaf.kind, leaf.path, leaf.args
    if k == "tag":
        return fq.TagEq(p, a[0])
    if k == "text":
        return fq.TextMatch(p, a[0])
    if k == "range":
        return fq.RangeBetween(p, a[0], a[1])
    if k == "location":
        return fq.LocationIn(p, a[0])
    if k == "area_point":
        return fq.AreaContainsPoint(p, a[0])
    return fq.AreaIntersects(p, a[0])


def instantiate(spec, resolve):
    """Replace Deferred leaf arguments via resolve(Deferred) -> value."""
    if spec is FULL or spec is None:
        return spec
    if isinstance(spec, tuple) and spec and spec[0] in ("and", "or", "not"):
        if spec[0] == "not":
            return ("not", instantiate(spec[1], resolve))
        return (spec[0], tuple(instantiate(p, resolve) for p in spec[1]))
    args = tuple(resolve(a) if isinstance(a, Deferred) else a for a in spec.args)
    return LeafSpec(spec.kind, spec.path, args)


def spec_print(spec) -> str:
    if spec is FULL:
        return "*"
    if spec is None:
        return "*"
    if isinstance(spec, tuple) and spec and spec[0] in ("and", "or", "not"):
        if spec[0] == "not":
            return f"not({spec_print(spec[1])})"
        inner = ",".join(spec_print(p) for p in spec[1])
        return f"{spec[0]}({inner})"
    args = ",".join("?" if isinstance(a, Deferred) else repr(a) for a in spec.args)
    return f"{spec.kind}[{'.'.join(spec.path)}]({args})"


def check_paths_indexed(schema, lam):
    """Every field the predicate mentions must carry an index; scans
    and filter stages are the home for unindexed fields."""
    indexed = {path for path, _n, _a in schema.indexed_nodes()}
    for stmt in lam.body:
        for path in sorted(collect_paths(stmt, lam.param)):
            if path not in indexed:
                raise UnindexedField(
                    f"find() predicate references unindexed field "
                    f"{'.'.join(path)}")


def compile_predicate(schema, lam, ctx, outer: str = None):
    """(spec, residual lambda or None) for a find/sub_flow predicate."""
    check_paths_indexed(schema, lam)
    if len(lam.body) != 1:
        # multi-statement bodies are opaque: keep them whole
        return FULL, lam
    ex = Extractor(schema, lam.param, ctx, outer=outer)
    c = ex.compile(lam.body[0])
    residual = None
    if c.residual is not None:
        residual = ast.Lambda(lam.param, (c.residual,))
    return c.spec, residual
