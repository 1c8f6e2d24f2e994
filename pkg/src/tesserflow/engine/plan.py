"""Pipeline planning.

A parsed pipeline becomes a PlanDag with one source, a remote segment
that every shard worker runs, a boundary where records cross between
workers and the mixer as encoded bytes, and a mixer segment ending in
a sink.  Transform stages (map, filter, flatten) stay remote until the
first stage that needs the whole flow (sort, limit, distinct, join,
sub_flow, or a sink); an aggregate splits in two, folding partial
states remotely and merging them on the mixer.

The planner also type-checks every stage expression and derives the
read set: the field paths a shard worker must actually load.  A find
whose predicate is fully served by indices and whose downstream stages
touch no stored fields reads postings only.
"""

import copy
from dataclasses import dataclass, field

from tesserflow.engine import extract
from tesserflow.engine.catalog import Catalog, UnknownDataset
from tesserflow.engine.aggregates import (
    AGG_OPS,
    AggDef,
    AggregatePlan,
    GroupDef,
)
from tesserflow.errors import BadParam, TypeError_
from tesserflow.geo.areatree import AreaTree
from tesserflow.geo.mercator import GeoPoint
from tesserflow.geo.shapes import LatLngRect
from tesserflow.schema.infer import schema_from_field_types
from tesserflow.schema.model import Schema, SchemaNode, format_path
from tesserflow.wfl import ast
from tesserflow.wfl import types as wt
from tesserflow.wfl.ast import print_ast
from tesserflow.wfl.eval import EvalContext, eval_expr

_BREAKERS = ("sort_asc", "sort_desc", "limit", "distinct", "join", "sub_flow")
_SINKS = ("collect", "save")
_SAVE_FORMATS = ("fdb", "sorted-table", "record-stream")


# --- plan nodes ---


@dataclass
class FindNode:
    dataset: str
    spec: object  # extract.FULL or a LeafSpec tree
    residual: object  # Lambda or None
    read_fields: object  # tuple of paths, or None for every field
    virtual_fields: tuple = ()  # virtual paths the worker materializes

    def print(self):
        reads = "*" if self.read_fields is None else ",".join(
            format_path(p) for p in self.read_fields)
        virt = ",".join(format_path(p) for p in self.virtual_fields)
        res = print_ast(self.residual) if self.residual is not None else "-"
        return (f"find dataset={self.dataset} spec={extract.spec_print(self.spec)} "
                f"residual={res} reads={reads} virtuals={virt}")


@dataclass
class LocalSourceNode:
    expr: object  # evaluated in the session context at run time

    def print(self):
        return f"local source={print_ast(self.expr)}"


@dataclass
class SampleNode:
    fraction: float
    seed: int

    def print(self):
        return f"sample fraction={self.fraction!r} seed={self.seed}"


@dataclass
class MapNode:
    lam: object
    schema: object  # output Schema, or None when the flow stays local

    def print(self):
        return f"map {print_ast(self.lam)}"


@dataclass
class FilterNode:
    lam: object

    def print(self):
        return f"filter {print_ast(self.lam)}"


@dataclass
class FlattenNode:
    path: tuple
    schema: object

    def print(self):
        return f"flatten {format_path(self.path)}"


@dataclass
class SortNode:
    lam: object
    desc: bool

    def print(self):
        op = "sort_desc" if self.desc else "sort_asc"
        return f"{op} {print_ast(self.lam)}"


@dataclass
class LimitNode:
    n: int

    def print(self):
        return f"limit {self.n}"


@dataclass
class DistinctNode:
    lam: object  # None keys on the whole record

    def print(self):
        key = print_ast(self.lam) if self.lam is not None else "*"
        return f"distinct {key}"


@dataclass
class AggregatePartialNode:
    agg: AggregatePlan
    schema: object  # partial-state Schema

    def print(self):
        names = ",".join(
            f"{d.name}:{d.op}" if k == "agg" else f"{d.name}:group"
            for k, d in self.agg.entries)
        exprs = ",".join(
            print_ast(d.expr) if d.expr is not None else "-"
            for _, d in self.agg.entries)
        return f"aggregate_partial {names} exprs={exprs}"


@dataclass
class AggregateFinalNode:
    agg: AggregatePlan
    schema: object  # output Schema

    def print(self):
        mode = "aggregate_merge" if self.agg.merge else "aggregate_concat"
        return mode


@dataclass
class AggregateFusedNode:
    """Single-pass aggregate for flows already on the mixer."""

    agg: AggregatePlan
    schema: object

    def print(self):
        names = ",".join(
            f"{d.name}:{d.op}" if k == "agg" else f"{d.name}:group"
            for k, d in self.agg.entries)
        exprs = ",".join(
            print_ast(d.expr) if d.expr is not None else "-"
            for _, d in self.agg.entries)
        return f"aggregate_fused {names} exprs={exprs}"


@dataclass
class JoinNode:
    right_plan: object  # nested PlanDag, or None when right is a value
    right_expr: object  # expression for a value right side
    left_key: object
    right_key: object
    strategy: object  # "broadcast" | "shuffle" | None for automatic
    schema: object

    def print(self):
        right = self.right_plan.print() if self.right_plan is not None \
            else print_ast(self.right_expr)
        mode = self.strategy or "auto"
        return (f"join strategy={mode} left={print_ast(self.left_key)} "
                f"right={print_ast(self.right_key)} [{right}]")


@dataclass
class SubFlowNode:
    dataset: str
    template: object  # the original template lambda
    spec: object  # leaf tree with deferred outer references
    residual: object
    inner: object  # optional lambda over each matched record
    read_fields: object
    virtual_fields: tuple = ()
    schema: object = None

    def print(self):
        inner = print_ast(self.inner) if self.inner is not None else "-"
        return (f"sub_flow dataset={self.dataset} template={print_ast(self.template)} "
                f"inner={inner}")


@dataclass
class CollectSink:
    def print(self):
        return "collect"


@dataclass
class SaveSink:
    format: str
    path: str
    schema_name: object = None
    num_shards: int = 1

    def print(self):
        return (f"save format={self.format} path={self.path} "
                f"schema={self.schema_name or '-'} shards={self.num_shards}")


@dataclass
class RemoteBoundary:
    schema: object  # Schema for encoded crossing; None = passthrough

    def print(self):
        if self.schema is None:
            return "boundary passthrough"
        return f"boundary schema={self.schema.name}"


@dataclass
class PlanDag:
    source: object
    sample: object  # SampleNode or None
    remote: tuple
    boundary: RemoteBoundary
    mixer: tuple
    sink: object
    source_schema: object = None  # dataset Schema when source is a find
    out_schema: object = None  # schema of records reaching the sink

    def nodes(self):
        out = [self.source]
        if self.sample is not None:
            out.append(self.sample)
        out.extend(self.remote)
        out.append(self.boundary)
        out.extend(self.mixer)
        out.append(self.sink)
        return out

    def print(self) -> str:
        lines = [self.source.print()]
        if self.sample is not None:
            lines.append(self.sample.print())
        for n in self.remote:
            lines.append("remote " + n.print())
        lines.append(self.boundary.print())
        for n in self.mixer:
            lines.append("mixer " + n.print())
        lines.append("sink " + self.sink.print())
        return "\n".join(lines)


# --- helpers ---


def const_text(v) -> str:
    """Stable plan-text form of a plan-time constant."""
    if isinstance(v, GeoPoint):
        return f"point({v.lat!r},{v.lng!r})"
    if isinstance(v, LatLngRect):
        return (f"rect({v.sw.lat!r},{v.sw.lng!r},{v.ne.lat!r},{v.ne.lng!r})")
    if isinstance(v, AreaTree):
        cells = ";".join(f"{c.level}:{c.code:x}" for c in v.cells())
        return f"area({v.max_level}|{cells})"
    return repr(v)


def infer_body(body, env) -> wt.FlowType:
    """Type a lambda body: lets bind, the final statement is the value."""
    t = wt.NULL
    for stmt in body:
        if isinstance(stmt, ast.Let):
            env = env.child({stmt.name: wt.infer_expr_type(stmt.expr, env)})
            t = env.lookup(stmt.name)
        else:
            t = wt.infer_expr_type(stmt, env)
    return t


def _stage_error(stage, message):
    return TypeError_(f"{stage.op} (line {stage.line}, col {stage.col}): {message}")


def _only_lambda(stage) -> ast.Lambda:
    if len(stage.args) != 1 or not isinstance(stage.args[0], ast.Lambda):
        raise BadParam(f"{stage.op} takes exactly one lambda "
                       f"(line {stage.line}, col {stage.col})")
    return stage.args[0]


def _member_chain(lam):
    """Path when a lambda body is a bare field chain on its parameter."""
    if len(lam.body) != 1:
        return None
    return extract.member_path(lam.body[0], lam.param)


def _flatten_schema(schema: Schema, path: tuple) -> Schema:
    """Copy of the schema with one repeated node made singular and
    virtual fields dropped (their values do not survive a transform)."""

    def walk(node, rel):
        c = SchemaNode(name=node.name, type=node.type, repeated=node.repeated,
                       colset=node.colset)
        if rel == ():
            c.repeated = False
        c.children = []
        for ch in node.children:
            if ch.is_virtual():
                continue
            sub = rel[1:] if rel and ch.name == rel[0] else None
            c.children.append(walk(ch, sub))
        return c

    return Schema(f"{schema.name}_flat", walk(schema.root, path))


def _strip_virtual_fields(t: wt.FlowType, schema: Schema,
                          at: tuple = ()) -> wt.FlowType:
    """Record type without virtual fields; they exist only while the
    scan holds the source record in memory."""
    if t.kind != "record" or t.fields is None:
        return t
    keep = []
    for n, ft in t.fields:
        node = schema.by_path.get(at + (n,))
        if node is not None and node.is_virtual():
            continue
        inner = ft.elem if ft.kind == "vector" else ft
        if inner.kind == "record":
            stripped = _strip_virtual_fields(inner, schema, at + (n,))
            ft = wt.vector(stripped) if ft.kind == "vector" else stripped
        keep.append((n, ft))
    return wt.record(keep)


def _record_type_at(t: wt.FlowType, path: tuple):
    for name in path:
        t = t.field(name)
        if t is None:
            return None
    return t


def _retype_flatten(t: wt.FlowType, path: tuple) -> wt.FlowType:
    """Record type with the vector at `path` replaced by its element."""
    if not path:
        return t
    fields = []
    for n, ft in t.fields:
        if n == path[0]:
            if len(path) == 1:
                if ft.kind != "vector":
                    raise TypeError_(f"flatten: {n} is not repeated")
                ft = ft.elem or wt.ANY
            else:
                ft = _retype_flatten(ft, path[1:])
        fields.append((n, ft))
    return wt.record(fields)


class _ReadSet:
    """Accumulates the field paths a find must load."""

    def __init__(self, schema: Schema):
        self.schema = schema
        self.paths = set()
        self.virtuals = set()
        self.all = False
        self._virtual_nodes = {
            p for p, n in schema.by_path.items() if n.is_virtual()
        }

    def add_expr(self, e, param):
        for path in extract.collect_paths(e, param):
            self.add_path(path)

    def add_path(self, path):
        if self.all:
            return
        # trim to the deepest schema node along the chain; an unknown
        # tail means the chain indexes into values the node holds
        known = None
        for i in range(len(path), 0, -1):
            if path[:i] in self.schema.by_path:
                known = path[:i]
                break
        if known is None:
            return
        if known in self._virtual_nodes:
            self.virtuals.add(known)
            node = self.schema.by_path[known]
            deps = _virtual_deps(self.schema, node)
            self.paths.update(deps)
        else:
            self.paths.add(known)

    def need_all(self):
        self.all = True

    def result(self):
        if self.all:
            return None, tuple(sorted(self.virtuals))
        return tuple(sorted(self.paths)), tuple(sorted(self.virtuals))


def _virtual_deps(schema: Schema, node) -> set:
    """Stored root fields a virtual expression reads."""
    from tesserflow.wfl.parser import parse_expr

    expr = parse_expr(node.virtual_expr)
    roots = {p[0] for p in schema.by_path if len(p) == 1}
    deps = set()

    def walk(e):
        if isinstance(e, ast.Var) and e.name in roots:
            deps.add((e.name,))
            return
        if isinstance(e, ast.Member):
            # resolve the full chain if it starts at a root field
            chain = []
            cur = e
            while isinstance(cur, ast.Member):
                chain.append(cur.name)
                cur = cur.obj
            if isinstance(cur, ast.Var) and cur.name in roots:
                deps.add((cur.name,) + tuple(reversed(chain[1:])) if len(chain) > 1
                         else (cur.name,))
                return
            walk(e.obj)
            return
        for name in ("obj", "index", "operand", "left", "right", "value",
                     "lo", "hi", "container", "expr", "func"):
            sub = getattr(e, name, None)
            if isinstance(sub, ast.Node):
                walk(sub)
        for name in ("items", "args", "body"):
            for sub in getattr(e, name, ()) or ():
                if isinstance(sub, ast.Node):
                    walk(sub)

    walk(expr)
    # keep only stored paths the schema can read
    out = set()
    for p in deps:
        if p in schema.by_path and not schema.by_path[p].is_virtual():
            out.add(p)
        elif p[:1] in schema.by_path and not schema.by_path[p[:1]].is_virtual():
            out.add(p[:1])
    return out


# --- the planner ---


class Planner:
    def __init__(self, catalog: Catalog, type_env=None, value_ctx=None,
                 local_sources=None):
        self.catalog = catalog
        self.type_env = type_env or wt.TypeEnv()
        self.ctx = value_ctx or EvalContext()
        self.local_sources = local_sources or {}

    def plan(self, pipeline: ast.Pipeline) -> PlanDag:
        if not isinstance(pipeline, ast.Pipeline):
            raise BadParam("not a pipeline")
        return _PlanBuild(self, pipeline).run()

    def const(self, e, what):
        try:
            return eval_expr(e, self.ctx)
        except Exception as err:
            raise BadParam(f"{what} must be a constant: {err}") from err


class _PlanBuild:
    def __init__(self, planner: Planner, pipeline: ast.Pipeline):
        self.p = planner
        self.pipeline = pipeline
        self.remote = []
        self.mixer = []
        self.sink = None
        self.sample = None
        self.where = "remote"
        self.dataset = None  # FdbDataset when the source is one
        self.source_schema = None
        self.cur_schema = None  # wire Schema of the current flow, if any
        self.cur_type = None  # FlowType record of the current flow
        self.find_lam = None
        self.find_spec = extract.FULL
        self.find_residual = None
        self.reads = None  # _ReadSet for dataset sources
        self.renamed = False  # a map/flatten ran before the aggregate
        self.track_reads = True  # flow records are still source records
        self._split_schema = None
        self._seq = 0  # per-plan counter so names are reproducible

    def run(self) -> PlanDag:
        self._source()
        for stage in self.pipeline.stages:
            self._stage(stage)
        if self.sink is None:
            self.sink = CollectSink()
        return self._assemble()

    # --- source resolution ---

    def _source(self):
        src = self.pipeline.source
        if isinstance(src, ast.Var) and src.name in self.p.local_sources:
            self._local_source(src)
            return
        if isinstance(src, ast.Var):
            try:
                self.dataset = self.p.catalog.dataset(src.name)
            except UnknownDataset:
                bound = self.p.type_env.lookup(src.name)
                if bound is None:
                    raise
                self._local_source(src)
                return
            self.source_schema = self.dataset.schema
            self.cur_schema = self.dataset.schema
            self.cur_type = wt.for_schema(self.dataset.schema)
            self.reads = _ReadSet(self.dataset.schema)
            return
        # any other expression is evaluated locally at run time
        self._local_source(src)

    def _local_source(self, src):
        self.where = "mixer"
        t = None
        if isinstance(src, ast.Var):
            t = self.p.type_env.lookup(src.name)
        else:
            t = wt.infer_expr_type(src, self.p.type_env)
        if t is not None and t.kind == "vector":
            self.cur_type = t.elem or wt.ANY
        else:
            self.cur_type = wt.ANY
        self.local_src = src

    # --- stage dispatch ---

    def _stage(self, stage: ast.Stage):
        if self.sink is not None:
            raise BadParam(f"stage {stage.op} after a sink "
                           f"(line {stage.line}, col {stage.col})")
        handler = getattr(self, f"_op_{stage.op}", None)
        if handler is None:
            raise BadParam(f"unknown stage {stage.op}")
        handler(stage)

    def _param_env(self, param):
        return self.p.type_env.child({param: self.cur_type or wt.ANY})

    def _collect_reads(self, lam):
        if self.reads is None or not self.track_reads:
            return
        for stmt in lam.body:
            self.reads.add_expr(stmt, lam.param)

    def _op_find(self, stage):
        if self.dataset is None:
            raise BadParam("find needs a dataset source")
        if self.remote or self.mixer or self.where != "remote":
            raise BadParam("find must be the first stage")
        if self.find_lam is not None:
            raise BadParam("only one find per pipeline")
        lam = _only_lambda(stage)
        env = self._param_env(lam.param)
        t = infer_body(lam.body, env)
        if t.kind not in ("bool", "any", "null"):
            raise _stage_error(stage, f"predicate must be boolean, got {t.kind}")
        self.find_lam = lam
        self.find_spec, self.find_residual = extract.compile_predicate(
            self.dataset.schema, lam, self.p.ctx)
        if self.find_residual is not None:
            self._collect_reads(self.find_residual)

    def _op_sample(self, stage):
        if self.dataset is None:
            raise BadParam("sample needs a dataset source")
        if self.remote or self.mixer or self.sample is not None:
            raise BadParam("sample must come before any transform")
        if not 1 <= len(stage.args) <= 2:
            raise BadParam("sample takes a fraction and an optional seed")
        fraction = self.p.const(stage.args[0], "sample fraction")
        seed = self.p.const(stage.args[1], "sample seed") if len(stage.args) == 2 else 0
        if not isinstance(fraction, (int, float)) or isinstance(fraction, bool) \
                or not 0 < float(fraction) <= 1:
            raise BadParam(f"sample fraction must be in (0, 1], got {fraction!r}")
        if not isinstance(seed, int) or isinstance(seed, bool):
            raise BadParam("sample seed must be an integer")
        self.sample = SampleNode(float(fraction), seed)

    def _op_filter(self, stage):
        lam = _only_lambda(stage)
        env = self._param_env(lam.param)
        t = infer_body(lam.body, env)
        if t.kind not in ("bool", "any", "null"):
            raise _stage_error(stage, f"filter must produce a boolean, got {t.kind}")
        self._collect_reads(lam)
        self._append(FilterNode(lam))

    def _op_map(self, stage):
        lam = _only_lambda(stage)
        env = self._param_env(lam.param)
        t = infer_body(lam.body, env)
        self._collect_reads(lam)
        if len(lam.body) == 1 and isinstance(lam.body[0], ast.Var) \
                and lam.body[0].name == lam.param:
            self._append(MapNode(lam, self.cur_schema))
            return
        if t.kind != "record":
            raise _stage_error(stage, f"map must produce a record, got {t.kind}")
        schema = self._synthesize(stage, t)
        self._append(MapNode(lam, schema))
        self.cur_type = t
        self.cur_schema = schema
        self.track_reads = False
        if self.where == "remote":
            self.renamed = True

    def _op_flatten(self, stage):
        lam = _only_lambda(stage)
        path = _member_chain(lam)
        if path is None:
            raise _stage_error(stage, "flatten takes a field chain like p => p.tags")
        ft = _record_type_at(self.cur_type, path) if self.cur_type is not None else None
        if ft is None or ft.kind != "vector":
            name = format_path(path)
            raise _stage_error(stage, f"flatten needs a repeated field, {name} is not")
        self._collect_reads(lam)
        self.cur_type = _retype_flatten(self.cur_type, path)
        if self.cur_schema is not None:
            self.cur_schema = _flatten_schema(self.cur_schema, path)
        self._append(FlattenNode(path, self.cur_schema))
        if self.where == "remote":
            self.renamed = True

    def _op_sort_asc(self, stage):
        self._sort(stage, desc=False)

    def _op_sort_desc(self, stage):
        self._sort(stage, desc=True)

    def _sort(self, stage, desc):
        lam = _only_lambda(stage)
        self._to_mixer()
        infer_body(lam.body, self._param_env(lam.param))
        self._collect_reads(lam)
        self.mixer.append(SortNode(lam, desc))

    def _op_limit(self, stage):
        if len(stage.args) != 1:
            raise BadParam("limit takes a count")
        n = self.p.const(stage.args[0], "limit count")
        if not isinstance(n, int) or isinstance(n, bool) or n < 0:
            raise BadParam(f"limit count must be a non-negative integer, got {n!r}")
        self._to_mixer()
        self.mixer.append(LimitNode(n))

    def _op_distinct(self, stage):
        self._to_mixer()
        lam = None
        if stage.args:
            lam = _only_lambda(stage)
            infer_body(lam.body, self._param_env(lam.param))
            self._collect_reads(lam)
        elif self.reads is not None and self.track_reads:
            self.reads.need_all()
        self.mixer.append(DistinctNode(lam))

    def _op_aggregate(self, stage):
        lam = _only_lambda(stage)
        if len(lam.body) != 1 or not isinstance(lam.body[0], ast.DictLit):
            raise _stage_error(stage, "aggregate takes p => {name: spec, ...}")
        entries = []
        env = self._param_env(lam.param)
        shard_key_hit = False
        for name, e in lam.body[0].entries:
            if isinstance(e, ast.Call) and isinstance(e.func, ast.Var) \
                    and e.func.name in AGG_OPS:
                entries.append(("agg", self._agg_def(stage, name, e, env)))
            else:
                t = wt.infer_expr_type(e, env)
                if t.kind in ("record", "vector", "dict", "set", "area", "point"):
                    raise _stage_error(stage, f"group key {name} must be scalar, got {t.kind}")
                entries.append(("group", GroupDef(name, e, t)))
                if self._is_shard_key(e, lam.param):
                    shard_key_hit = True
        if not any(k == "agg" for k, _ in entries):
            raise _stage_error(stage, "aggregate needs at least one aggregate entry")
        self._collect_reads(lam)
        merge = not (shard_key_hit and self.where == "remote" and not self.renamed)
        agg = AggregatePlan(lam.param, tuple(entries), merge=merge)
        out_schema = schema_from_field_types(
            self._schema_name("agg"), agg.output_field_types())
        if self.where == "remote":
            partial_schema = schema_from_field_types(
                self._schema_name("agg_partial"), agg.partial_field_types())
            self.remote.append(AggregatePartialNode(agg, partial_schema))
            self.where = "mixer"
            self._split_schema = partial_schema
            self.mixer.append(AggregateFinalNode(agg, out_schema))
        else:
            self.mixer.append(AggregateFusedNode(agg, out_schema))
        self.cur_schema = out_schema
        self.cur_type = wt.record(agg.output_field_types())
        self._source_shape_ends(after_split=True)

    def _agg_def(self, stage, name, call, env) -> AggDef:
        op = call.func.name
        if op == "count":
            if call.args:
                raise _stage_error(stage, "count takes no arguments")
            return AggDef(name, "count")
        if not call.args:
            raise _stage_error(stage, f"{op} needs an input expression")
        expr = call.args[0]
        if isinstance(expr, ast.Lambda):
            raise _stage_error(stage, f"{op} takes an expression over the "
                                      "aggregate parameter, not a lambda")
        d = AggDef(name, op, expr)
        if op == "hll_count":
            if len(call.args) > 2:
                raise _stage_error(stage, "hll_count takes a value and a precision")
            if len(call.args) == 2:
                prec = self.p.const(call.args[1], "hll precision")
                if not isinstance(prec, int) or isinstance(prec, bool):
                    raise BadParam("hll precision must be an integer")
                d.precision = prec
        elif len(call.args) != 1:
            raise _stage_error(stage, f"{op} takes exactly one expression")
        d.check_input(wt.infer_expr_type(expr, env))
        return d

    def _is_shard_key(self, e, param) -> bool:
        if self.dataset is None or self.dataset.shard_key is None:
            return False
        path = extract.member_path(e, param)
        return path == tuple(self.dataset.shard_key)

    def _op_join(self, stage):
        if not 3 <= len(stage.args) <= 4:
            raise BadParam("join takes right side, two key lambdas and an "
                           "optional strategy")
        right, lkey, rkey = stage.args[0], stage.args[1], stage.args[2]
        if not isinstance(lkey, ast.Lambda) or not isinstance(rkey, ast.Lambda):
            raise BadParam("join keys must be lambdas")
        strategy = None
        if len(stage.args) == 4:
            strategy = self.p.const(stage.args[3], "join strategy")
            if strategy not in ("broadcast", "shuffle"):
                raise BadParam(f"join strategy must be broadcast or shuffle, "
                               f"got {strategy!r}")
        infer_body(lkey.body, self._param_env(lkey.param))
        self._collect_reads(lkey)
        if self.reads is not None:
            self.reads.need_all()  # joined records keep every left field
        right_plan = None
        right_type = wt.ANY
        if isinstance(right, ast.Pipeline):
            right_plan = Planner(self.p.catalog, self.p.type_env, self.p.ctx,
                                 self.p.local_sources).plan(right)
            if right_plan.out_schema is not None:
                right_type = wt.for_schema(right_plan.out_schema)
        else:
            t = wt.infer_expr_type(right, self.p.type_env)
            if t.kind == "vector":
                right_type = t.elem or wt.ANY
        env = self.p.type_env.child({rkey.param: right_type})
        infer_body(rkey.body, env)
        self._to_mixer()
        out_type, out_schema = _join_shape(self.cur_type, self.cur_schema,
                                           right_type,
                                           right_plan.out_schema if right_plan else None)
        self.mixer.append(JoinNode(right_plan, None if right_plan else right,
                                   lkey, rkey, strategy, out_schema))
        self.cur_type = out_type
        self.cur_schema = out_schema

    def _op_sub_flow(self, stage):
        if not 2 <= len(stage.args) <= 3:
            raise BadParam("sub_flow takes a dataset, a template lambda and "
                           "an optional inner lambda")
        target = stage.args[0]
        if isinstance(target, ast.Var):
            name = target.name
        elif isinstance(target, ast.Literal) and isinstance(target.value, str):
            name = target.value
        else:
            raise BadParam("sub_flow dataset must be a name")
        template = stage.args[1]
        if not isinstance(template, ast.Lambda):
            raise BadParam("sub_flow template must be a lambda")
        inner = None
        if len(stage.args) == 3:
            inner = stage.args[2]
            if not isinstance(inner, ast.Lambda):
                raise BadParam("sub_flow inner transform must be a lambda")
        ds = self.p.catalog.dataset(name)
        target_type = wt.for_schema(ds.schema)
        env = self.p.type_env.child({"outer": self.cur_type or wt.ANY})
        t = infer_body(template.body, env.child({template.param: target_type}))
        if t.kind not in ("bool", "any", "null"):
            raise _stage_error(stage, f"template must be boolean, got {t.kind}")
        # outer fields referenced by the template must be readable
        if self.reads is not None and not self.reads.all:
            for stmt in template.body:
                self._note_virtual_use(stmt, "outer")
                self.reads.add_expr(stmt, "outer")
        spec, residual = extract.compile_predicate(
            ds.schema, template, _OuterAware(self.p.ctx), outer="outer")
        treads = _ReadSet(ds.schema)
        if residual is not None:
            for stmt in residual.body:
                treads.add_expr(stmt, residual.param)
        inner_type = target_type
        if inner is not None:
            ienv = env.child({inner.param: target_type})
            inner_type = infer_body(inner.body, ienv)
            if inner_type.kind != "record":
                raise _stage_error(stage, "inner transform must produce a record")
            for stmt in inner.body:
                treads.add_expr(stmt, inner.param)
        else:
            treads.need_all()
        if self.reads is not None:
            self.reads.need_all()  # combined records keep every outer field
        self._to_mixer()
        read_fields, virtuals = treads.result()
        out_type, out_schema = _join_shape(self.cur_type, self.cur_schema,
                                           inner_type, None)
        self.mixer.append(SubFlowNode(name, template, spec, residual, inner,
                                      read_fields, virtuals, out_schema))
        self.cur_type = out_type
        self.cur_schema = out_schema

    def _op_collect(self, stage):
        if stage.args:
            raise BadParam("collect takes no arguments")
        if self.reads is not None and self._still_source_shaped():
            self.reads.need_all()
        self.sink = CollectSink()

    def _op_save(self, stage):
        if not 2 <= len(stage.args) <= 4:
            raise BadParam("save takes a format, a path, and optionally a "
                           "schema name and shard count")
        fmt = self.p.const(stage.args[0], "save format")
        path = self.p.const(stage.args[1], "save path")
        if fmt not in _SAVE_FORMATS:
            raise BadParam(f"save format must be one of {', '.join(_SAVE_FORMATS)}")
        if not isinstance(path, str) or not path:
            raise BadParam("save path must be a non-empty string")
        schema_name = None
        num_shards = 1
        if len(stage.args) >= 3:
            schema_name = self.p.const(stage.args[2], "save schema")
            if schema_name is not None and not isinstance(schema_name, str):
                raise BadParam("save schema must be a name")
        if len(stage.args) == 4:
            num_shards = self.p.const(stage.args[3], "save shard count")
            if not isinstance(num_shards, int) or isinstance(num_shards, bool) \
                    or num_shards < 1:
                raise BadParam("save shard count must be a positive integer")
        if self.reads is not None and self._still_source_shaped():
            self.reads.need_all()
        if schema_name is None and self.cur_schema is None:
            raise _stage_error(stage, "this flow has no wire schema; name a "
                                      "registered schema to save it")
        self.sink = SaveSink(fmt, path, schema_name, num_shards)

    # --- segment management ---

    def _append(self, node):
        if self.where == "remote":
            self.remote.append(node)
        else:
            self.mixer.append(node)

    def _to_mixer(self):
        if self.where == "remote":
            self.where = "mixer"
            self._split_schema = self.cur_schema

    def _still_source_shaped(self) -> bool:
        return self.reads is not None and not self.reads.all and \
            self.source_schema is not None and self.cur_schema is self.source_schema

    def _source_shape_ends(self, after_split=False):
        # once records are rebuilt, the original field paths are gone
        pass

    def _synthesize(self, stage, t: wt.FlowType) -> Schema:
        try:
            return schema_from_field_types(self._schema_name(stage.op), t.fields or ())
        except TypeError_ as e:
            if self.where == "remote":
                raise _stage_error(stage, str(e))
            return None  # local flows may hold values that never encode

    _name_seq = 0

    def _schema_name(self, op: str) -> str:
        base = self.source_schema.name if self.source_schema is not None else "flow"
        _PlanBuild._name_seq += 1
        return f"{base}_{op}_{_PlanBuild._name_seq}"

    # --- assembly ---

    def _assemble(self) -> PlanDag:
        if self.dataset is None:
            source = LocalSourceNode(self.local_src)
            boundary = RemoteBoundary(None)
            dag = PlanDag(source, None, (), boundary, tuple(self.mixer),
                          self.sink, None, self.cur_schema)
            return dag
        # a pipeline that never left the workers still crosses once
        if self.where == "remote":
            self._split_schema = self.cur_schema
        read_fields, virtuals = self.reads.result()
        if self.find_spec is extract.FULL and self.find_residual is None \
                and read_fields == ():
            # nothing selective and nothing read: a bare count-style scan
            # still needs no stored columns
            pass
        source = FindNode(self.dataset.schema.name, self.find_spec,
                          self.find_residual, read_fields, virtuals)
        boundary_schema = self._split_schema
        if boundary_schema is self.source_schema and read_fields is not None:
            from tesserflow.schema.model import prune_schema
            boundary_schema = prune_schema(self.source_schema, read_fields)
        boundary = RemoteBoundary(boundary_schema)
        return PlanDag(source, self.sample, tuple(self.remote), boundary,
                       tuple(self.mixer), self.sink, self.source_schema,
                       self.cur_schema)


class _OuterAware(EvalContext):
    """Plan-time context for sub_flow templates: any lookup of the
    outer record fails so those expressions defer to run time."""

    def __init__(self, base: EvalContext):
        super().__init__(globals=dict(base.globals) if hasattr(base, "globals") else None)


def _join_shape(left_type, left_schema, right_type, right_schema):
    """Record type and schema of a joined flow: left fields, then right
    fields renamed with a right_ prefix on collision."""
    lfields = list(left_type.fields) if left_type is not None and \
        left_type.kind == "record" and left_type.fields else None
    rfields = list(right_type.fields) if right_type is not None and \
        right_type.kind == "record" and right_type.fields else None
    if lfields is None or rfields is None:
        return wt.ANY, None
    taken = {n for n, _ in lfields}
    out = list(lfields)
    for n, t in rfields:
        name = n if n not in taken else f"right_{n}"
        if name in taken:
            raise TypeError_(f"join output field {name} collides twice")
        taken.add(name)
        out.append((name, t))
    out_type = wt.record(out)
    try:
        schema = schema_from_field_types("joined", out)
    except TypeError_:
        schema = None
    return out_type, schema


def plan(query, catalog: Catalog, type_env=None, value_ctx=None) -> PlanDag:
    """Plan a parsed pipeline against a catalog."""
    return Planner(catalog, type_env, value_ctx).plan(query)
