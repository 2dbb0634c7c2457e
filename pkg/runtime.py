"""Limit Transformer weights and their forward pass.

Numerical contract: activations are float64; attention logits and the
exponentiated attention weights are rounded to p fractional bits (ties to
even) before normalisation; weights are exp(ln(n) * logit) for an input of n
rows including the start-of-sequence row.
"""

import dataclasses
import logging
import math
import os
from typing import Optional

import numpy as np

from dsl import SOS

logger = logging.getLogger(__name__)

DEFAULT_PRECISION = int(os.getenv("CRASP_PRECISION", "24"))
# exp arguments are clipped to +-EXP_LIMIT; the result is still finite after
# scaling by 2**p for any p below 800
EXP_LIMIT = 600.0
RELU = "R"
HEAVISIDE = "H"


class RuntimeModelError(ValueError):
    pass


class NonFinite(RuntimeModelError):
    def __init__(self, value):
        self.value = value
        super().__init__(f"non-finite value {value!r}")


class MalformedInput(RuntimeModelError):
    pass


class DimensionMismatch(RuntimeModelError):
    pass


# -------------------- Fixed precision --------------------
@dataclasses.dataclass(frozen=True)
class FixedPrecision:
    p: int = DEFAULT_PRECISION

    def __post_init__(self):
        if not isinstance(self.p, int) or self.p < 1:
            raise RuntimeModelError(f"precision must be a positive integer, got {self.p!r}")

    @property
    def ulp(self) -> float:
        return math.ldexp(1.0, -self.p)

    def round(self, x) -> float:
        return round_fixed(x, self)

    def round_array(self, values) -> np.ndarray:
        values = np.asarray(values, dtype=np.float64)
        if not np.all(np.isfinite(values)):
            raise NonFinite(values[~np.isfinite(values)].flat[0])
        with np.errstate(over="ignore"):
            scaled = np.ldexp(values, self.p)
        if not np.all(np.isfinite(scaled)):
            # |x| * 2**p leaves the float range
            raise NonFinite(values[~np.isfinite(scaled)].flat[0])
        return np.ldexp(np.rint(scaled), -self.p)


def round_fixed(x, fp: FixedPrecision) -> float:
    """Nearest multiple of 2**-p, ties to even."""
    x = float(x)
    if not math.isfinite(x):
        raise NonFinite(x)
    try:
        scaled = math.ldexp(x, fp.p)
    except OverflowError:
        raise NonFinite(x) from None
    return math.ldexp(round(scaled), -fp.p)


# -------------------- Model --------------------
def _matrix(value, shape=None, what="matrix") -> np.ndarray:
    arr = np.array(value, dtype=np.float64)
    if shape is not None and arr.shape != shape:
        raise DimensionMismatch(f"{what}: expected shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFinite(what)
    arr.setflags(write=False)
    return arr


def _same(a, b) -> bool:
    if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
        return (
            isinstance(a, np.ndarray)
            and isinstance(b, np.ndarray)
            and a.shape == b.shape
            and np.array_equal(a, b)
        )
    if dataclasses.is_dataclass(a) and not isinstance(a, type):
        return type(a) is type(b) and all(
            _same(getattr(a, f.name), getattr(b, f.name))
            for f in dataclasses.fields(a)
        )
    if isinstance(a, (tuple, list)):
        return (
            isinstance(b, (tuple, list))
            and len(a) == len(b)
            and all(_same(x, y) for x, y in zip(a, b))
        )
    return a == b


def _structural_eq(self, other):
    if type(self) is not type(other):
        return NotImplemented
    return _same(self, other)


@dataclasses.dataclass(frozen=True)
class PositionalLogitFn:
    """Attention-logit term depending only on d = i - j.

    `table` holds (d, value) pairs with value != 0; every distance not listed
    contributes 0, so the function vanishes beyond its radius.
    """

    table: tuple = ()

    def __post_init__(self):
        entries = {}
        for d, value in self.table:
            d, value = int(d), float(value)
            if d < 0:
                raise DimensionMismatch(f"positional logit distance {d} < 0")
            if not math.isfinite(value):
                raise NonFinite(value)
            if value != 0.0:
                entries[d] = value
        object.__setattr__(self, "table", tuple(sorted(entries.items())))

    @property
    def radius(self) -> int:
        return self.table[-1][0] if self.table else 0

    def value(self, d: int) -> float:
        return dict(self.table).get(d, 0.0)

    def energy(self) -> float:
        return math.fsum(v * v for _, v in self.table)

    def matrix(self, n: int) -> np.ndarray:
        out = np.zeros((n, n))
        for d, value in self.table:
            if d < n:
                idx = np.arange(d, n)
                out[idx, idx - d] = value
        return out


@dataclasses.dataclass(frozen=True, eq=False)
class PeriodicEncoding:
    table: np.ndarray

    __eq__ = _structural_eq

    def __post_init__(self):
        table = _matrix(self.table, what="encoding")
        if table.ndim != 2 or table.shape[0] < 1:
            raise DimensionMismatch(f"encoding table must be 2-d with >= 1 row, got {table.shape}")
        object.__setattr__(self, "table", table)

    @property
    def period(self) -> int:
        return self.table.shape[0]

    def rows(self, n: int, offset: int = 0) -> np.ndarray:
        return self.table[(np.arange(n) + offset) % self.period]

    def minimal_period(self) -> int:
        for k in range(1, self.period + 1):
            if self.period % k == 0 and np.array_equal(
                self.table, self.table[np.arange(self.period) % k]
            ):
                return k
        return self.period


@dataclasses.dataclass(frozen=True, eq=False)
class AttentionHead:
    K: np.ndarray
    Q: np.ndarray
    V: np.ndarray
    phi: PositionalLogitFn = PositionalLogitFn()

    __eq__ = _structural_eq

    def __post_init__(self):
        for name in ("K", "Q", "V"):
            object.__setattr__(self, name, _matrix(getattr(self, name), what=name))

    @property
    def content_free(self) -> bool:
        return not (np.any(self.K) and np.any(self.Q))

    @property
    def silent(self) -> bool:
        return not np.any(self.V)


@dataclasses.dataclass(frozen=True, eq=False)
class MLPBlock:
    A: np.ndarray
    B: np.ndarray
    b: np.ndarray
    activations: str

    __eq__ = _structural_eq

    def __post_init__(self):
        for name in ("A", "B", "b"):
            object.__setattr__(self, name, _matrix(getattr(self, name), what=name))
        if set(self.activations) - {RELU, HEAVISIDE}:
            raise DimensionMismatch(f"activation tags must be R/H, got {self.activations!r}")

    @property
    def d_ff(self) -> int:
        return len(self.activations)


@dataclasses.dataclass(frozen=True, eq=False)
class Layer:
    heads: tuple
    mlp: MLPBlock

    __eq__ = _structural_eq


@dataclasses.dataclass(frozen=True, eq=False)
class LimitTransformer:
    alphabet: tuple
    embeddings: np.ndarray
    encoding: PeriodicEncoding
    layers: tuple
    unembedding: np.ndarray
    precision: FixedPrecision = FixedPrecision()
    param_precision: int = DEFAULT_PRECISION
    metadata: dict = dataclasses.field(default_factory=dict)

    __eq__ = _structural_eq

    def __post_init__(self):
        object.__setattr__(self, "alphabet", tuple(self.alphabet))
        object.__setattr__(self, "layers", tuple(self.layers))
        object.__setattr__(self, "embeddings", _matrix(self.embeddings, what="embeddings"))
        object.__setattr__(self, "unembedding", _matrix(self.unembedding, what="unembedding"))
        self._check_dimensions()

    def _check_dimensions(self):
        if not self.alphabet or self.alphabet[0] != SOS:
            raise DimensionMismatch(f"alphabet must start with {SOS!r}")
        if len(set(self.alphabet)) != len(self.alphabet):
            raise DimensionMismatch("alphabet has duplicate symbols")
        d = self.width
        if self.embeddings.shape != (len(self.alphabet), d):
            raise DimensionMismatch(
                f"embeddings: expected ({len(self.alphabet)}, {d}), got {self.embeddings.shape}"
            )
        if self.encoding.table.shape[1] != d:
            raise DimensionMismatch(f"encoding width {self.encoding.table.shape[1]} != {d}")
        for l, layer in enumerate(self.layers):
            for h, head in enumerate(layer.heads):
                for name in ("K", "Q", "V"):
                    if getattr(head, name).shape != (d, d):
                        raise DimensionMismatch(f"layers.{l}.heads.{h}.{name} is not {d}x{d}")
            mlp = layer.mlp
            if (
                mlp.A.shape != (mlp.d_ff, d)
                or mlp.B.shape != (d, mlp.d_ff)
                or mlp.b.shape != (mlp.d_ff,)
            ):
                raise DimensionMismatch(f"layers.{l}.mlp does not match d={d}, d_ff={mlp.d_ff}")
        if self.unembedding.ndim != 2 or self.unembedding.shape[1] != d:
            raise DimensionMismatch(f"unembedding must have {d} columns")
        if self.unembedding.shape[0] < 1:
            raise DimensionMismatch("unembedding needs at least one output")

    @property
    def width(self) -> int:
        return self.embeddings.shape[1] if self.embeddings.ndim == 2 else 0

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def heads(self) -> int:
        return max((len(layer.heads) for layer in self.layers), default=0)

    def symbol_ids(self, x) -> np.ndarray:
        index = {s: k for k, s in enumerate(self.alphabet)}
        try:
            return np.array([index[s] for s in x], dtype=np.int64)
        except KeyError as e:
            raise MalformedInput(f"symbol {e.args[0]!r} not in alphabet") from None


def zero_transformer(alphabet, width: int, depth: int = 1, heads: int = 1, d_ff: int = 1, p: int = DEFAULT_PRECISION) -> LimitTransformer:
    """All-zero net; handy as a structural baseline."""
    d = width
    layers = [
        Layer(
            heads=tuple(
                AttentionHead(np.zeros((d, d)), np.zeros((d, d)), np.zeros((d, d)))
                for _ in range(heads)
            ),
            mlp=MLPBlock(np.zeros((d_ff, d)), np.zeros((d, d_ff)), np.zeros(d_ff), RELU * d_ff),
        )
        for _ in range(depth)
    ]
    symbols = (SOS, *[s for s in alphabet if s != SOS])
    return LimitTransformer(
        alphabet=symbols,
        embeddings=np.zeros((len(symbols), d)),
        encoding=PeriodicEncoding(np.zeros((1, d))),
        layers=layers,
        unembedding=np.zeros((1, d)),
        precision=FixedPrecision(p),
        param_precision=p,
    )


# -------------------- Forward pass --------------------
@dataclasses.dataclass(frozen=True, eq=False)
class ActivationTensor:
    layers: tuple
    logits: np.ndarray
    attention: Optional[tuple] = None
    saturated: bool = False


def _activate(hidden: np.ndarray, relu_mask: np.ndarray) -> np.ndarray:
    heaviside = np.where(hidden >= 0.0, 1.0, -1.0)
    return np.where(relu_mask, np.maximum(hidden, 0.0), heaviside)


def forward(
    t: LimitTransformer, x, offset: int = 0, record_attention: bool = False
) -> ActivationTensor:
    x = tuple(x)
    n = len(x)
    if n == 0 or x[0] != SOS:
        raise MalformedInput(f"input must start with {SOS!r}")
    if SOS in x[1:]:
        raise MalformedInput(f"{SOS!r} may only appear at row 1")
    if offset < 0:
        raise MalformedInput(f"offset must be >= 0, got {offset}")

    fp = t.precision
    y = t.embeddings[t.symbol_ids(x)] + t.encoding.rows(n, offset)
    history = [y]
    recorded = []
    scale = math.log(n)
    causal = np.tril(np.ones((n, n), dtype=bool))
    saturated = False

    for layer in t.layers:
        Y = y.copy()
        per_head = []
        for head in layer.heads:
            if head.silent and not record_attention:
                continue
            if head.content_free:
                logits = np.zeros((n, n))
            else:
                logits = (y @ head.Q.T) @ (y @ head.K.T).T
            if head.phi.table:
                logits = logits + head.phi.matrix(n)
            a = fp.round_array(np.where(causal, logits, 0.0))
            arg = scale * a
            clipped = np.clip(arg, -EXP_LIMIT, EXP_LIMIT)
            if np.any((clipped != arg) & causal):
                saturated = True
            w = np.where(causal, fp.round_array(np.exp(clipped)), 0.0)
            sums = w.sum(axis=1, keepdims=True)
            if np.any(sums == 0.0):
                saturated = True
                sums = np.where(sums == 0.0, 1.0, sums)
            weights = w / sums
            if record_attention:
                per_head.append(weights)
            if not head.silent:
                Y = Y + weights @ (y @ head.V.T)
        recorded.append(tuple(per_head))
        mlp = layer.mlp
        if mlp.d_ff:
            relu_mask = np.array([tag == RELU for tag in mlp.activations])
            y = Y + _activate(Y @ mlp.A.T + mlp.b, relu_mask) @ mlp.B.T
        else:
            y = Y
        history.append(y)

    if saturated:
        logger.warning(f"attention saturated on an input of {n} rows")
    return ActivationTensor(
        layers=tuple(history),
        logits=y @ t.unembedding.T,
        attention=tuple(recorded) if record_attention else None,
        saturated=saturated,
    )


def accepts_net(t: LimitTransformer, w) -> bool:
    """Accept iff the last output coordinate at the last row is positive."""
    w = tuple(w)
    if not w:
        return bool(t.metadata.get("empty_accepts", False))
    out = forward(t, (SOS, *w)).logits
    return bool(out[-1, -1] > 0.0)


def predicted_sets_net(t: LimitTransformer, w) -> list:
    """Per-position predicted symbols read from the predict output coordinates."""
    symbols = list(t.metadata.get("predict", []))
    w = tuple(w)
    if not w:
        return []
    out = forward(t, (SOS, *w)).logits
    return [
        frozenset(s for k, s in enumerate(symbols) if out[r, k] > 0.0)
        for r in range(1, len(w) + 1)
    ]


# -------------------- Complexity --------------------
@dataclasses.dataclass(frozen=True)
class RegInfinity:
    size: int
    precision: int
    max_norm: float
    delta: int
    phi_energy: float

    @property
    def total(self) -> float:
        return self.size + self.precision + self.max_norm + self.delta + self.phi_energy

    def as_dict(self) -> dict:
        return {**dataclasses.asdict(self), "total": self.total}


def reg_infinity(t: LimitTransformer) -> RegInfinity:
    params = [t.embeddings, t.encoding.table, t.unembedding]
    energies = [0.0]
    for layer in t.layers:
        params.extend((layer.mlp.A, layer.mlp.B, layer.mlp.b))
        for head in layer.heads:
            params.extend((head.K, head.Q, head.V))
            energies.append(head.phi.energy())
    max_norm = max((float(np.max(np.abs(m))) for m in params if m.size), default=0.0)
    return RegInfinity(
        size=t.depth + t.heads + t.width,
        precision=t.param_precision + t.precision.p,
        max_norm=max_norm,
        delta=t.encoding.minimal_period(),
        phi_energy=max(energies),
    )
