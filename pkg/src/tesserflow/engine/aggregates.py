"""Two-phase aggregate machinery.

Each aggregate keeps a small mergeable state per group: workers fold
records into partial states, the mixer merges partials and finalizes.
Integer sums accumulate as exact Python ints and cross the worker
boundary as decimal strings, so no intermediate overflow is possible;
the 64-bit window is enforced only on the finished value.  Distinct
counts keep their register vector as a latin-1 string field, which the
wire codec round-trips byte for byte.
"""

import math
from dataclasses import dataclass, field

from tesserflow.errors import TypeError_
from tesserflow.wfl import types as wt
from tesserflow.wfl.eval import EvalContext, eval_expr
from tesserflow.wfl.sketches import Hll
from tesserflow.wfl.values import Overflow, group_key

AGG_OPS = ("count", "sum", "avg", "min", "max", "stddev", "hll_count")

_INT64_MIN, _INT64_MAX = -(1 << 63), (1 << 63) - 1
_UINT64_MAX = (1 << 64) - 1

_NUMERIC = {"int", "uint", "float", "double"}
_ORDERABLE = _NUMERIC | {"string", "bool"}
_HASHABLE = _ORDERABLE


@dataclass
class AggDef:
    """One aggregate entry of an aggregate stage."""

    name: str  # output field name
    op: str
    expr: object = None  # input expression, None for count
    precision: int = 12  # hll_count only
    in_kind: str = "any"  # inferred input kind

    def check_input(self, in_type):
        k = in_type.kind
        self.in_kind = k
        if self.op == "count":
            return
        if self.op in ("sum", "avg", "stddev"):
            if k not in _NUMERIC and k not in ("any", "null"):
                raise TypeError_(f"{self.op} needs a numeric input, got {k}")
        elif self.op in ("min", "max"):
            if k not in _ORDERABLE and k not in ("any", "null"):
                raise TypeError_(f"{self.op} needs an orderable input, got {k}")
        elif self.op == "hll_count":
            if k not in _HASHABLE and k not in ("any", "null"):
                raise TypeError_(f"hll_count needs a scalar input, got {k}")

    def out_type(self):
        if self.op == "count":
            return wt.UINT
        if self.op == "avg" or self.op == "stddev":
            return wt.DOUBLE
        if self.op == "hll_count":
            return wt.UINT
        # sum/min/max follow the input
        if self.in_kind == "float":
            return wt.DOUBLE
        if self.in_kind in ("any", "null"):
            return wt.DOUBLE if self.op == "sum" else wt.STRING
        return wt.FlowType(self.in_kind)

    def state_fields(self, i: int):
        """Wire fields this aggregate adds to the partial schema."""
        p = f"s{i}"
        if self.op == "count":
            return [(f"{p}_n", wt.UINT)]
        if self.op == "sum":
            if self.in_kind in ("int", "uint"):
                return [(f"{p}_n", wt.UINT), (f"{p}_sum", wt.STRING)]
            return [(f"{p}_n", wt.UINT), (f"{p}_sum", wt.DOUBLE)]
        if self.op == "avg":
            return [(f"{p}_n", wt.UINT), (f"{p}_sum", wt.DOUBLE)]
        if self.op in ("min", "max"):
            vt = self.out_type()
            if vt.kind in ("int", "uint"):
                vt = wt.STRING  # one wire shape for both signed ranges
            return [(f"{p}_n", wt.UINT), (f"{p}_v", vt)]
        if self.op == "stddev":
            return [(f"{p}_n", wt.UINT), (f"{p}_sum", wt.DOUBLE),
                    (f"{p}_sq", wt.DOUBLE)]
        return [(f"{p}_regs", wt.STRING)]  # hll_count

    # --- state lifecycle ---

    def init(self):
        if self.op == "hll_count":
            return Hll(self.precision)
        if self.op == "stddev":
            return [0, 0.0, 0.0]
        if self.op in ("sum", "avg"):
            return [0, 0.0 if self.op == "avg" or self.in_kind not in ("int", "uint") else 0]
        if self.op in ("min", "max"):
            return [0, None]
        return [0]  # count

    def update(self, state, value):
        if self.op == "count":
            state[0] += 1
            return
        if value is None:
            return
        if self.op == "hll_count":
            state.add(value)
            return
        if self.op in ("min", "max"):
            self._check_scalar(value)
            state[0] += 1
            if state[1] is None:
                state[1] = value
            elif self.op == "min":
                if _ranked(value) < _ranked(state[1]):
                    state[1] = value
            elif _ranked(value) > _ranked(state[1]):
                state[1] = value
            return
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise TypeError_(f"{self.op}: expected a number, got {type(value).__name__}")
        state[0] += 1
        if self.op == "stddev":
            state[1] += float(value)
            state[2] += float(value) * float(value)
        elif self.op == "avg":
            state[1] += float(value)
        elif self.in_kind in ("int", "uint") and isinstance(value, int):
            state[1] += value  # exact
        else:
            state[1] += float(value)

    def _check_scalar(self, v):
        if isinstance(v, (int, float, str, bool)):
            return
        raise TypeError_(f"{self.op}: unorderable value {type(v).__name__}")

    def merge(self, a, b):
        if self.op == "hll_count":
            return a.merge(b)
        if self.op in ("min", "max"):
            a[0] += b[0]
            if b[1] is not None:
                if a[1] is None:
                    a[1] = b[1]
                elif self.op == "min":
                    if _ranked(b[1]) < _ranked(a[1]):
                        a[1] = b[1]
                elif _ranked(b[1]) > _ranked(a[1]):
                    a[1] = b[1]
            return a
        for j in range(1, len(a)):
            a[j] += b[j]
        a[0] += b[0]
        return a

    def finalize(self, state):
        if self.op == "count":
            return state[0]
        if self.op == "hll_count":
            return state.estimate()
        if state[0] == 0:
            return None  # no non-null inputs
        if self.op in ("min", "max"):
            return state[1]
        if self.op == "avg":
            return state[1] / state[0]
        if self.op == "stddev":
            n, s, sq = state
            var = sq / n - (s / n) ** 2
            return math.sqrt(var) if var > 0.0 else 0.0
        # sum
        total = state[1]
        if isinstance(total, int):
            if self.in_kind == "uint":
                if not 0 <= total <= _UINT64_MAX:
                    raise Overflow(f"sum: {total} outside the unsigned 64-bit range")
            elif not _INT64_MIN <= total <= _INT64_MAX:
                raise Overflow(f"sum: {total} outside the signed 64-bit range")
        return total

    # --- wire form (partial records) ---

    def to_fields(self, state, i: int) -> dict:
        p = f"s{i}"
        if self.op == "count":
            return {f"{p}_n": state[0]}
        if self.op == "hll_count":
            return {f"{p}_regs": bytes(state.registers).decode("latin-1")}
        if self.op in ("min", "max"):
            v = state[1]
            if v is not None and self.out_type().kind in ("int", "uint"):
                v = str(v)
            return {f"{p}_n": state[0], f"{p}_v": v}
        if self.op == "stddev":
            return {f"{p}_n": state[0], f"{p}_sum": state[1], f"{p}_sq": state[2]}
        v = state[1]
        if self.op == "sum" and isinstance(v, int):
            v = str(v)
        return {f"{p}_n": state[0], f"{p}_sum": v}

    def from_fields(self, fields: dict, i: int):
        p = f"s{i}"
        if self.op == "count":
            return [fields[f"{p}_n"] or 0]
        if self.op == "hll_count":
            h = Hll(self.precision)
            raw = fields[f"{p}_regs"]
            if raw:
                h.registers[:] = raw.encode("latin-1")
            return h
        if self.op in ("min", "max"):
            v = fields[f"{p}_v"]
            if v is not None and self.out_type().kind in ("int", "uint"):
                v = int(v)
            return [fields[f"{p}_n"] or 0, v]
        if self.op == "stddev":
            return [fields[f"{p}_n"] or 0,
                    fields[f"{p}_sum"] or 0.0, fields[f"{p}_sq"] or 0.0]
        v = fields[f"{p}_sum"]
        if self.op == "sum" and isinstance(v, str):
            v = int(v)
        return [fields[f"{p}_n"] or 0, v if v is not None else self.init()[1]]


def _ranked(v):
    """Comparable form across the scalar kinds min/max accepts."""
    if isinstance(v, bool):
        return (0, v)
    if isinstance(v, (int, float)):
        return (1, v)
    return (2, v)


@dataclass
class GroupDef:
    name: str
    expr: object
    out_type: object = None


@dataclass
class AggregatePlan:
    """Shared shape of an aggregate stage: groups + aggregate defs in
    output order, plus the two derived schemas."""

    param: str
    entries: tuple  # ("group", GroupDef) | ("agg", AggDef), output order
    merge: bool = True  # False: groups align with the shard key

    def groups(self):
        return [d for k, d in self.entries if k == "group"]

    def aggs(self):
        return [d for k, d in self.entries if k == "agg"]

    def partial_field_types(self):
        out = []
        for gi, g in enumerate(self.groups()):
            t = g.out_type
            if t is None or t.kind in ("any", "null"):
                t = wt.STRING
            out.append((f"g{gi}", t))
        for i, a in enumerate(self.aggs()):
            out.extend(a.state_fields(i))
        return out

    def output_field_types(self):
        out = []
        for k, d in self.entries:
            if k == "group":
                t = d.out_type
                if t is None or t.kind in ("any", "null"):
                    t = wt.STRING
                out.append((d.name, t))
            else:
                out.append((d.name, d.out_type()))
        return out


class GroupedStates:
    """Accumulates per-group aggregate states on one worker."""

    def __init__(self, plan: AggregatePlan, ctx: EvalContext):
        self.plan = plan
        self.ctx = ctx
        self.groups = {}  # group_key tuple -> (key values, [states])

    def consume(self, rec):
        self.ctx.push({self.plan.param: rec})
        try:
            keys = tuple(eval_expr(g.expr, self.ctx) for g in self.plan.groups())
            inputs = [
                None if a.expr is None else eval_expr(a.expr, self.ctx)
                for a in self.plan.aggs()
            ]
        finally:
            self.ctx.pop()
        gk = tuple(group_key(k) for k in keys)
        slot = self.groups.get(gk)
        if slot is None:
            slot = (keys, [a.init() for a in self.plan.aggs()])
            self.groups[gk] = slot
        for a, st, v in zip(self.plan.aggs(), slot[1], inputs):
            a.update(st, v)

    def partial_records(self):
        """One plain dict per group, shaped for the partial schema."""
        from tesserflow.schema.model import Record

        aggs = self.plan.aggs()
        for gk in sorted(self.groups, key=repr):
            keys, states = self.groups[gk]
            fields = {}
            for gi, v in enumerate(keys):
                fields[f"g{gi}"] = _wire_group_value(v)
            for i, (a, st) in enumerate(zip(aggs, states)):
                fields.update(a.to_fields(st, i))
            yield Record(fields)


def _wire_group_value(v):
    # bool survives as bool; ints/floats/strings pass through
    return v


def merge_partials(plan: AggregatePlan, partial_recs):
    """Mixer side: fold partial records back into grouped states."""
    aggs = plan.aggs()
    ngroups = len(plan.groups())
    merged = {}  # group_key -> (key values, [states])
    order = []  # first-seen order when merge is off
    for rec in partial_recs:
        f = rec.fields
        keys = tuple(f[f"g{gi}"] for gi in range(ngroups))
        states = [a.from_fields(f, i) for i, a in enumerate(aggs)]
        if not plan.merge:
            order.append((keys, states))
            continue
        gk = tuple(group_key(k) for k in keys)
        slot = merged.get(gk)
        if slot is None:
            merged[gk] = (keys, states)
        else:
            held = slot[1]
            for j, a in enumerate(aggs):
                held[j] = a.merge(held[j], states[j])
    if not plan.merge:
        return order
    return list(merged.values())


def finalize_groups(plan: AggregatePlan, grouped):
    """(key values, states) pairs -> output records."""
    from tesserflow.schema.model import Record

    out = []
    for keys, states in grouped:
        fields = {}
        gi = si = 0
        for kind, d in plan.entries:
            if kind == "group":
                fields[d.name] = keys[gi]
                gi += 1
            else:
                fields[d.name] = d.finalize(states[si])
                si += 1
        out.append(Record(fields))
    return out
