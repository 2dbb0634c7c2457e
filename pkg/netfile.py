"""Text serialisation of LimitTransformer objects.

Matrices are stored sparsely; every entry is an exact dyadic rational written
as `m` or `m*2^e`, so a net read back is bit-identical to the one written.
"""

import math
import re
from typing import Any, List, Literal, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from runtime import (
    AttentionHead,
    FixedPrecision,
    Layer,
    LimitTransformer,
    MLPBlock,
    PeriodicEncoding,
    PositionalLogitFn,
    RuntimeModelError,
)

FORMAT = "crasp-net"
VERSION = 1

_DYADIC = re.compile(r"(-?[0-9]+)(?:\*2\^(-?[0-9]+))?")


class SchemaError(RuntimeModelError):
    def __init__(self, path: str, message: str):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}")


def to_dyadic(x: float) -> str:
    x = float(x)
    if not math.isfinite(x):
        raise SchemaError("<value>", f"cannot encode {x!r}")
    if x == 0.0:
        return "0"
    num, den = x.as_integer_ratio()
    if den == 1:
        return str(num)
    return f"{num}*2^-{den.bit_length() - 1}"


def from_dyadic(text: str) -> float:
    m = _DYADIC.fullmatch(text.strip())
    if not m:
        raise ValueError(f"{text!r} is not a dyadic rational")
    try:
        value = math.ldexp(int(m[1]), int(m[2] or 0))
    except OverflowError:
        raise ValueError(f"{text!r} overflows float64") from None
    return value


class ArrayDoc(BaseModel):
    model_config = ConfigDict(extra="forbid")

    shape: List[int]
    entries: List[Tuple[List[int], str]] = Field(default_factory=list)

    @model_validator(mode="after")
    def _check_entries(self):
        if len(self.shape) not in (1, 2) or any(s < 0 for s in self.shape):
            raise ValueError(f"bad shape {self.shape}")
        for k, (index, value) in enumerate(self.entries):
            if len(index) != len(self.shape) or not all(
                0 <= i < s for i, s in zip(index, self.shape)
            ):
                raise ValueError(f"entry {k}: index {index} outside shape {self.shape}")
            try:
                from_dyadic(value)
            except ValueError as e:
                raise ValueError(f"entry {k}: {e}") from None
        return self

    @classmethod
    def of(cls, arr: np.ndarray) -> "ArrayDoc":
        entries = [
            (list(map(int, index)), to_dyadic(arr[tuple(index)]))
            for index in np.argwhere(arr != 0.0)
        ]
        return cls(shape=list(arr.shape), entries=entries)

    def to_array(self) -> np.ndarray:
        arr = np.zeros(tuple(self.shape))
        for index, value in self.entries:
            arr[tuple(index)] = from_dyadic(value)
        return arr


class HeadDoc(BaseModel):
    model_config = ConfigDict(extra="forbid")

    K: ArrayDoc
    Q: ArrayDoc
    V: ArrayDoc
    phi: dict = Field(default_factory=dict)

    @model_validator(mode="after")
    def _check_phi(self):
        for d, value in self.phi.items():
            if not str(d).isdigit():
                raise ValueError(f"phi distance {d!r} is not a non-negative integer")
            from_dyadic(str(value))
        return self


class MLPDoc(BaseModel):
    model_config = ConfigDict(extra="forbid")

    A: ArrayDoc
    B: ArrayDoc
    b: ArrayDoc
    activations: str = Field(pattern=r"^[RH]*$")


class LayerDoc(BaseModel):
    model_config = ConfigDict(extra="forbid")

    heads: List[HeadDoc]
    mlp: MLPDoc


class EncodingDoc(BaseModel):
    model_config = ConfigDict(extra="forbid")

    period: int = Field(ge=1)
    table: ArrayDoc

    @model_validator(mode="after")
    def _check_period(self):
        if not self.table.shape or self.table.shape[0] != self.period:
            raise ValueError(f"table has {self.table.shape[:1]} rows, period is {self.period}")
        return self


class NetDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    format: Literal["crasp-net"]
    version: Literal[1]
    alphabet: List[str]
    width: int = Field(ge=0)
    precision: int = Field(ge=1)
    param_precision: int = Field(ge=1)
    embeddings: ArrayDoc
    encoding: EncodingDoc
    layers: List[LayerDoc]
    unembedding: ArrayDoc
    metadata: dict[str, Any] = Field(default_factory=dict)


def serialize(t: LimitTransformer) -> str:
    doc = NetDocument(
        format=FORMAT,
        version=VERSION,
        alphabet=list(t.alphabet),
        width=t.width,
        precision=t.precision.p,
        param_precision=t.param_precision,
        embeddings=ArrayDoc.of(t.embeddings),
        encoding=EncodingDoc(
            period=t.encoding.period, table=ArrayDoc.of(t.encoding.table)
        ),
        layers=[
            LayerDoc(
                heads=[
                    HeadDoc(
                        K=ArrayDoc.of(h.K),
                        Q=ArrayDoc.of(h.Q),
                        V=ArrayDoc.of(h.V),
                        phi={str(d): to_dyadic(v) for d, v in h.phi.table},
                    )
                    for h in layer.heads
                ],
                mlp=MLPDoc(
                    A=ArrayDoc.of(layer.mlp.A),
                    B=ArrayDoc.of(layer.mlp.B),
                    b=ArrayDoc.of(layer.mlp.b),
                    activations=layer.mlp.activations,
                ),
            )
            for layer in t.layers
        ],
        unembedding=ArrayDoc.of(t.unembedding),
        metadata=dict(t.metadata),
    )
    return doc.model_dump_json(indent=1) + "\n"


def deserialize(text: str) -> LimitTransformer:
    try:
        doc = NetDocument.model_validate_json(text)
    except ValidationError as e:
        err = e.errors()[0]
        path = ".".join(str(part) for part in err["loc"]) or "<root>"
        raise SchemaError(path, err["msg"]) from None

    try:
        return LimitTransformer(
            alphabet=tuple(doc.alphabet),
            embeddings=doc.embeddings.to_array(),
            encoding=PeriodicEncoding(doc.encoding.table.to_array()),
            layers=tuple(
                Layer(
                    heads=tuple(
                        AttentionHead(
                            K=h.K.to_array(),
                            Q=h.Q.to_array(),
                            V=h.V.to_array(),
                            phi=PositionalLogitFn(
                                tuple((int(d), from_dyadic(str(v))) for d, v in h.phi.items())
                            ),
                        )
                        for h in layer.heads
                    ),
                    mlp=MLPBlock(
                        A=layer.mlp.A.to_array(),
                        B=layer.mlp.B.to_array(),
                        b=layer.mlp.b.to_array(),
                        activations=layer.mlp.activations,
                    ),
                )
                for layer in doc.layers
            ),
            unembedding=doc.unembedding.to_array(),
            precision=FixedPrecision(doc.precision),
            param_precision=doc.param_precision,
            metadata=dict(doc.metadata),
        )
    except RuntimeModelError as e:
        raise SchemaError("net", str(e)) from None
