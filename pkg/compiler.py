"""Lower C-RASP programs to LimitTransformer weights.

Every operation owns one home channel of the residual stream. Boolean
operations store 0/1 there; Count operations store c/(t+1) at program
position t, which lives on network row t+1 (row 1 is the start-of-sequence
row). Each operation gets its own layer, built by a gadget; a bookkeeping
layer in front computes 1/(t+1) and clears positional channels on row 1.

All attention heads are content-free (K = Q = 0): counting needs only the
uniform average or a single-offset positional logit.
"""

import abc
import dataclasses
import logging
import math
import os
from typing import Optional

import numpy as np

from dsl import (
    SOS,
    Add,
    And,
    Conditional,
    Count,
    Initial,
    Leq,
    LocalRelation,
    Not,
    OneConst,
    Operation,
    Positional,
    Program,
    Sort,
    Sub,
    Token,
    Top,
    TrueConst,
    desugar,
)
from interp import evaluate
from runtime import (
    HEAVISIDE,
    RELU,
    AttentionHead,
    FixedPrecision,
    Layer,
    LimitTransformer,
    MLPBlock,
    PeriodicEncoding,
    PositionalLogitFn,
    forward,
)

logger = logging.getLogger(__name__)

_max_width = os.getenv("CRASP_MAX_WIDTH")
MAX_WIDTH = int(_max_width) if _max_width else None

SOS_LAYER_NOTE = (
    "row 1 keeps the token, constant and start-of-sequence channels; "
    "positional channels are cleared"
)


class CompileError(ValueError):
    pass


class UnsupportedConstruct(CompileError):
    def __init__(self, op: str, body=None):
        self.op = op
        self.body = body
        super().__init__(f"{op}: no gadget for {type(body).__name__}")


class ChannelOverflow(CompileError):
    def __init__(self, width: int, cap: int):
        self.width = width
        self.cap = cap
        super().__init__(f"compiled net needs {width} channels, cap is {cap}")


# -------------------- Plan and report --------------------
@dataclasses.dataclass(frozen=True)
class ChannelPlan:
    width: int
    tokens: dict
    sos: int
    const: int
    one: int
    encodings: dict
    gates: dict
    homes: dict
    sorts: dict
    scratch: dict
    accept: int
    predict: dict

    def as_dict(self) -> dict:
        return {
            "width": self.width,
            "tokens": dict(self.tokens),
            "sos": self.sos,
            "const": self.const,
            "one": self.one,
            "encodings": {f"{m},{r}": ch for (m, r), ch in self.encodings.items()},
            "gates": {str(k): ch for k, ch in self.gates.items()},
            "homes": dict(self.homes),
            "sorts": {k: s.value for k, s in self.sorts.items()},
            "scratch": {k: list(v) for k, v in self.scratch.items()},
            "accept": self.accept,
            "predict": dict(self.predict),
        }


@dataclasses.dataclass(frozen=True)
class CompileReport:
    program: str
    layers: int
    channels: int
    gadgets: tuple
    stages: tuple
    radius: int
    period: int
    notes: tuple = (SOS_LAYER_NOTE,)

    def as_dict(self) -> dict:
        return {
            "program": self.program,
            "layers": self.layers,
            "channels": self.channels,
            "gadgets": dict(self.gadgets),
            "stages": list(self.stages),
            "radius": self.radius,
            "period": self.period,
            "notes": list(self.notes),
        }


def format_report(report: CompileReport) -> str:
    lines = [
        f"program   {report.program}",
        f"layers    {report.layers}",
        f"channels  {report.channels}",
        f"radius    {report.radius}",
        f"period    {report.period}",
        "gadgets",
    ]
    lines += [f"  {name:<24} {kind}" for name, kind in report.gadgets]
    lines += [f"note      {note}" for note in report.notes]
    return "\n".join(lines) + "\n"


# -------------------- Layer sketches --------------------
@dataclasses.dataclass
class _Unit:
    activation: str
    inputs: dict
    bias: float = 0.0
    outputs: dict = dataclasses.field(default_factory=dict)


@dataclasses.dataclass
class _Stage:
    """One transformer layer before it is laid out as matrices."""

    label: str
    value: dict = dataclasses.field(default_factory=dict)
    phi: tuple = ()
    units: list = dataclasses.field(default_factory=list)


def _weights(*pairs) -> dict:
    out = {}
    for ch, w in pairs:
        out[ch] = out.get(ch, 0.0) + w
    return out


def _relu(inputs: dict, bias: float, out: dict) -> _Unit:
    return _Unit(RELU, inputs, bias, out)


def _identity(inputs: dict, target: int) -> list:
    """ReLU(x) - ReLU(-x) = x for any real x."""
    negated = {ch: -w for ch, w in inputs.items()}
    return [_relu(inputs, 0.0, {target: 1.0}), _relu(negated, 0.0, {target: -1.0})]


def _select(flag: int, value: dict, bound: float, target: int, negate_flag=False) -> list:
    """Units writing flag * value to target, exact while |value| <= bound.

    With negate_flag the units write (1 - flag) * value instead.
    """
    if negate_flag:
        pos = _weights(*value.items(), (flag, -bound))
        neg = _weights(*((ch, -w) for ch, w in value.items()), (flag, -bound))
        return [_relu(pos, 0.0, {target: 1.0}), _relu(neg, 0.0, {target: -1.0})]
    pos = _weights(*value.items(), (flag, bound))
    neg = _weights(*((ch, -w) for ch, w in value.items()), (flag, bound))
    return [_relu(pos, -bound, {target: 1.0}), _relu(neg, -bound, {target: -1.0})]


def _constant_half(targets) -> _Unit:
    """hs(0) = 1, so this unit adds 1/2 to every target."""
    return _Unit(HEAVISIDE, {}, 0.0, {ch: 0.5 for ch in targets})


# -------------------- Gadgets --------------------
class Gadget(abc.ABC):
    kind = "abstract"

    @abc.abstractmethod
    def stages(self, op: Operation, ctx: "_Context") -> list:
        pass


class InitialGadget(Gadget):
    kind = "initial"

    def stages(self, op, ctx):
        tok = ctx.tokens[op.body.symbol]
        return [_Stage(op.name, units=[_relu({tok: 1.0}, 0.0, {ctx.home(op): 1.0})])]


class NotGadget(Gadget):
    kind = "not"

    def stages(self, op, ctx):
        inputs = _weights((ctx.ref(op.body.arg), -1.0), (ctx.sos, -1.0))
        return [_Stage(op.name, units=[_relu(inputs, 1.0, {ctx.home(op): 1.0})])]


class AndGadget(Gadget):
    kind = "and"

    def stages(self, op, ctx):
        inputs = _weights((ctx.ref(op.body.left), 1.0), (ctx.ref(op.body.right), 1.0))
        return [_Stage(op.name, units=[_relu(inputs, -1.0, {ctx.home(op): 1.0})])]


class TrueGadget(Gadget):
    kind = "true"

    def stages(self, op, ctx):
        return [_Stage(op.name, units=[_relu({ctx.sos: -1.0}, 1.0, {ctx.home(op): 1.0})])]


class PositionalGadget(Gadget):
    kind = "positional"

    def stages(self, op, ctx):
        rel = op.body.relation
        enc = ctx.encodings[(rel.modulus, rel.residue)]
        inputs = {enc: 1.0, ctx.sos: -1.0}
        return [_Stage(op.name, units=[_relu(inputs, 0.0, {ctx.home(op): 1.0})])]


class OneGadget(Gadget):
    kind = "one"

    def stages(self, op, ctx):
        inputs = {ctx.one: 1.0, ctx.sos: -1.0}
        return [_Stage(op.name, units=[_relu(inputs, 0.0, {ctx.home(op): 1.0})])]


class LeqGadget(Gadget):
    """[x1 <= x2] via hs(x2 - x1 + one/2 - 2 sos).

    Count channels differ by a multiple of one = 1/(t+1), so the half-step
    keeps the argument away from 0; on row 1 the sos term forces false.
    """

    kind = "leq"

    def stages(self, op, ctx):
        home = ctx.home(op)
        inputs = _weights(
            (ctx.homes[op.body.right], 1.0),
            (ctx.homes[op.body.left], -1.0),
            (ctx.one, 0.5),
            (ctx.sos, -2.0),
        )
        units = [_Unit(HEAVISIDE, inputs, 0.0, {home: 0.5}), _constant_half([home])]
        return [_Stage(op.name, units=units)]


class CountTopGadget(Gadget):
    kind = "count"

    def stages(self, op, ctx):
        return [_Stage(op.name, value={(ctx.home(op), ctx.ref(op.body.pred)): 1.0})]


class CountLocalGadget(Gadget):
    """Count with a single offset c: the predicate at position i + c."""

    kind = "count-local"

    def stages(self, op, ctx):
        (c,) = op.body.mask.offsets
        pred, home = ctx.ref(op.body.pred), ctx.home(op)
        if c > 0:
            return []
        if c == 0:
            return [_Stage(op.name, units=_select(pred, {ctx.one: 1.0}, 2.0, home))]
        lag = -c
        s, bit = ctx.scratch[op.name]
        gate = ctx.gates[lag]
        # s > 1/2 iff the predicate holds lag rows back; the gate is 0 while
        # that row does not exist
        look = _Stage(
            f"{op.name}:look",
            value={(s, pred): 1.0},
            phi=((lag, 1.0),),
            units=[
                _Unit(HEAVISIDE, {s: 1.0, gate: 1.0}, -1.5, {bit: 0.5}),
                _constant_half([bit]),
            ],
        )
        store = _Stage(op.name, units=_select(bit, {ctx.one: 1.0}, 2.0, home))
        return [look, store]


class ConditionalGadget(Gadget):
    kind = "conditional"

    def stages(self, op, ctx):
        body = op.body
        flag = ctx.ref(body.cond)
        bound = max(ctx.bounds[body.then], ctx.bounds[body.orelse]) + 1.0
        home = ctx.home(op)
        units = _select(flag, {ctx.homes[body.then]: 1.0}, bound, home)
        units += _select(flag, {ctx.homes[body.orelse]: 1.0}, bound, home, negate_flag=True)
        return [_Stage(op.name, units=units)]


class ArithmeticGadget(Gadget):
    kind = "arith"

    def stages(self, op, ctx):
        body = op.body
        sign = 1.0 if isinstance(body, Add) else -1.0
        inputs = _weights((ctx.homes[body.left], 1.0), (ctx.homes[body.right], sign))
        return [_Stage(op.name, units=_identity(inputs, ctx.home(op)))]


class GadgetFactory:
    _by_body = {
        Initial: InitialGadget,
        Not: NotGadget,
        And: AndGadget,
        TrueConst: TrueGadget,
        Positional: PositionalGadget,
        OneConst: OneGadget,
        Leq: LeqGadget,
        Conditional: ConditionalGadget,
        Add: ArithmeticGadget,
        Sub: ArithmeticGadget,
    }

    @staticmethod
    def get_gadget(op: Operation) -> Gadget:
        body = op.body
        if isinstance(body, Count):
            if isinstance(body.mask, Top):
                return CountTopGadget()
            if isinstance(body.mask, LocalRelation) and len(body.mask.offsets) == 1:
                return CountLocalGadget()
            raise UnsupportedConstruct(op.name, body)
        cls = GadgetFactory._by_body.get(type(body))
        if cls is None:
            raise UnsupportedConstruct(op.name, body)
        return cls()


# -------------------- Channel allocation --------------------
class _Context:
    def __init__(self, program: Program):
        self.width = 0
        self.tokens = {s: self._take() for s in (SOS, *program.alphabet)}
        self.sos = self.tokens[SOS]
        self.const = self._take()
        self.one = self._take()

        relations, lags = [], []
        for op in program.ops:
            body = op.body
            if isinstance(body, Positional):
                relations.append((body.relation.modulus, body.relation.residue))
            elif isinstance(body, Count) and isinstance(body.mask, LocalRelation):
                lags += [-c for c in body.mask.offsets if c < 0]
        self.encodings = {rel: self._take() for rel in sorted(set(relations))}
        self.gates = {lag: self._take() for lag in sorted(set(lags))}
        self.period = math.lcm(*(m for m, _ in self.encodings)) if self.encodings else 1
        self.radius = max(self.gates, default=0)

        self.homes, self.scratch, self.bounds = {}, {}, {}
        for op in program.ops:
            body = op.body
            if isinstance(body, Count) and isinstance(body.mask, LocalRelation):
                if body.mask.offsets[0] < 0:
                    self.scratch[op.name] = (self._take(), self._take())
            self.homes[op.name] = self._take()
            if op.sort is Sort.COUNT:
                self.bounds[op.name] = self._bound(body)

    def _take(self) -> int:
        self.width += 1
        return self.width - 1

    def _bound(self, body) -> float:
        """Static bound on |c/(t+1)| for a count operation."""
        if isinstance(body, (Count, OneConst)):
            return 1.0
        if isinstance(body, (Add, Sub)):
            return self.bounds[body.left] + self.bounds[body.right]
        if isinstance(body, Conditional):
            return max(self.bounds[body.then], self.bounds[body.orelse])
        raise UnsupportedConstruct("bound", body)

    def home(self, op: Operation) -> int:
        return self.homes[op.name]

    def ref(self, r) -> int:
        return self.tokens[r.symbol] if isinstance(r, Token) else self.homes[r]


def _bookkeeping(ctx: _Context) -> _Stage:
    units = [
        _relu({enc: 1.0, ctx.sos: 1.0}, -1.0, {enc: -1.0}) for enc in ctx.encodings.values()
    ]
    return _Stage("bookkeeping", value={(ctx.one, ctx.sos): 1.0}, units=units)


def _gating(ctx: _Context) -> _Stage:
    """G_lag = [t >= lag + 1], read off one = 1/(t+1)."""
    units = []
    for lag, gate in ctx.gates.items():
        midpoint = (1.0 / (lag + 1) + 1.0 / (lag + 2)) / 2
        units.append(_Unit(HEAVISIDE, {ctx.one: -1.0}, midpoint, {gate: 0.5}))
    units.append(_constant_half(ctx.gates.values()))
    return _Stage("gates", units=units)


def _lay_out(stage: _Stage, d: int, d_ff: int, fp: FixedPrecision) -> Layer:
    V = np.zeros((d, d))
    for (dst, src), w in stage.value.items():
        V[dst, src] += w
    A = np.zeros((d_ff, d))
    B = np.zeros((d, d_ff))
    b = np.zeros(d_ff)
    tags = [RELU] * d_ff
    for k, unit in enumerate(stage.units):
        tags[k] = unit.activation
        b[k] = unit.bias
        for ch, w in unit.inputs.items():
            A[k, ch] += w
        for ch, w in unit.outputs.items():
            B[ch, k] += w
    zero = np.zeros((d, d))
    head = AttentionHead(
        K=zero,
        Q=zero,
        V=fp.round_array(V),
        phi=PositionalLogitFn(tuple((lag, fp.round(v)) for lag, v in stage.phi)),
    )
    mlp = MLPBlock(fp.round_array(A), fp.round_array(B), fp.round_array(b), "".join(tags))
    return Layer(heads=(head,), mlp=mlp)


# -------------------- Compile --------------------
def compile_program(
    program: Program,
    fp: Optional[FixedPrecision] = None,
    max_width: Optional[int] = MAX_WIDTH,
):
    """Compile `program` into (LimitTransformer, ChannelPlan, CompileReport)."""
    fp = fp or FixedPrecision()
    core = desugar(program)
    ctx = _Context(core)
    if max_width is not None and ctx.width > max_width:
        raise ChannelOverflow(ctx.width, max_width)

    stages = [_bookkeeping(ctx)]
    if ctx.gates:
        stages.append(_gating(ctx))
    gadgets = []
    for op in core.ops:
        gadget = GadgetFactory.get_gadget(op)
        produced = gadget.stages(op, ctx)
        kind = gadget.kind
        if isinstance(gadget, CountLocalGadget):
            kind = "count-vacuous" if not produced else "count-local"
        gadgets.append((op.name, kind))
        stages.extend(produced)

    d = ctx.width
    d_ff = max(1, max(len(stage.units) for stage in stages))
    layers = [_lay_out(stage, d, d_ff, fp) for stage in stages]

    alphabet = (SOS, *core.alphabet)
    embeddings = np.zeros((len(alphabet), d))
    for row, symbol in enumerate(alphabet):
        embeddings[row, ctx.tokens[symbol]] = 1.0
        embeddings[row, ctx.const] = 1.0

    table = np.zeros((ctx.period, d))
    for (m, r), ch in ctx.encodings.items():
        table[np.arange(ctx.period) % m == r, ch] = 1.0

    predict_symbols = core.predict_symbols
    predict_map = core.predict_map
    unembedding = np.zeros((len(predict_symbols) + 1, d))
    for k, symbol in enumerate(predict_symbols):
        unembedding[k, ctx.homes[predict_map[symbol]]] = 2.0
        unembedding[k, ctx.const] = -1.0
    unembedding[-1, ctx.homes[core.accept]] = 2.0
    unembedding[-1, ctx.const] = -1.0

    plan = ChannelPlan(
        width=d,
        tokens=dict(ctx.tokens),
        sos=ctx.sos,
        const=ctx.const,
        one=ctx.one,
        encodings=dict(ctx.encodings),
        gates=dict(ctx.gates),
        homes=dict(ctx.homes),
        sorts={op.name: op.sort for op in core.ops},
        scratch=dict(ctx.scratch),
        accept=ctx.homes[core.accept],
        predict={s: ctx.homes[predict_map[s]] for s in predict_symbols},
    )
    report = CompileReport(
        program=core.name,
        layers=len(layers),
        channels=d,
        gadgets=tuple(gadgets),
        stages=tuple(stage.label for stage in stages),
        radius=ctx.radius,
        period=ctx.period,
    )
    net = LimitTransformer(
        alphabet=alphabet,
        embeddings=embeddings,
        encoding=PeriodicEncoding(table),
        layers=layers,
        unembedding=unembedding,
        precision=fp,
        param_precision=fp.p,
        metadata={
            "program": core.name,
            "empty_accepts": core.empty_accepts,
            "predict": list(predict_symbols),
            "channel_plan": plan.as_dict(),
            "report": report.as_dict(),
        },
    )
    logger.info(
        f"🔧 compiled {core.name}: {report.layers} layers, {d} channels, "
        f"radius {report.radius}, period {report.period}"
    )
    return net, plan, report


# -------------------- Channel check --------------------
@dataclasses.dataclass(frozen=True)
class ChannelCheck:
    bool_error: float
    count_error: float
    per_op: dict

    @property
    def max_error(self) -> float:
        return max(self.bool_error, self.count_error)


def check_channels(program: Program, net: LimitTransformer, plan: ChannelPlan, w) -> ChannelCheck:
    """Compare every home channel with the interpreter on word `w`.

    Row 1 must read 0 on every home channel; row t+1 must read the Boolean
    value or c/(t+1).
    """
    core = desugar(program)
    w = tuple(w)
    final = forward(net, (SOS, *w)).layers[-1]
    per_op = {}
    bool_error = count_error = 0.0
    trace = evaluate(core, w) if w else None
    rows = np.arange(1, len(w) + 1)
    for op in core.ops:
        column = final[:, plan.homes[op.name]]
        expected = np.zeros(len(w) + 1)
        if trace is not None:
            values = trace.values[op.name].astype(np.float64)
            expected[1:] = values if op.sort is Sort.BOOLEAN else values / (rows + 1)
        err = float(np.max(np.abs(column - expected)))
        per_op[op.name] = err
        if op.sort is Sort.BOOLEAN:
            bool_error = max(bool_error, err)
        else:
            count_error = max(count_error, err)
    return ChannelCheck(bool_error=bool_error, count_error=count_error, per_op=per_op)
