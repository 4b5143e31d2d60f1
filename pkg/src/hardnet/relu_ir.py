"""Exact, composable ReLU network IR.

A network is an ordered sequence of affine layers over exact rationals; every
layer but the last applies relu coordinatewise and the last is affine
(LINEAR). Exact rational evaluation is the source of truth; float64 is a
derived view with a fixed summation order so results are reproducible across
platforms and thread counts.

Serialization is canonical: fixed key order, rationals as "num/den" strings,
no floats. Two structurally equal networks serialize to identical bytes.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Iterable, Sequence, Union

import numpy as np

from . import kernels

RationalLike = Union[int, Fraction, str]


class Activation(Enum):
    RELU = "relu"
    LINEAR = "linear"


class EvalMode(Enum):
    EXACT = "exact"
    FLOAT64 = "float64"


class Extrapolation(Enum):
    CONSTANT = "constant"


class DimensionMismatch(ValueError):
    """Width conflict, naming the layer where it occurred."""

    def __init__(self, message: str, layer_index: int | None = None):
        self.layer_index = layer_index
        if layer_index is not None:
            message = f"layer {layer_index}: {message}"
        super().__init__(message)


class FormatError(ValueError):
    """Malformed network document, with the location of the offense."""

    def __init__(self, message: str, location: str):
        self.location = location
        super().__init__(f"{location}: {message}")


def as_rational(x: RationalLike) -> Fraction:
    """Coerce int/Fraction/'num/den' string to Fraction; floats are rejected."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int) and not isinstance(x, bool):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    raise TypeError(f"exact rational required, got {type(x).__name__}")


def _rational_matrix(rows: Iterable[Iterable[RationalLike]]) -> tuple[tuple[Fraction, ...], ...]:
    return tuple(tuple(as_rational(w) for w in row) for row in rows)


@dataclass(frozen=True)
class AffineLayer:
    weights: tuple[tuple[Fraction, ...], ...]  # rows = output units
    bias: tuple[Fraction, ...]
    activation: Activation

    def __post_init__(self):
        if len(self.weights) != len(self.bias):
            raise DimensionMismatch(
                f"{len(self.weights)} weight rows but {len(self.bias)} biases"
            )
        if not self.weights:
            raise DimensionMismatch("layer must have at least one output unit")
        width = len(self.weights[0])
        if width == 0:
            raise DimensionMismatch("layer must have at least one input")
        for row in self.weights:
            if len(row) != width:
                raise DimensionMismatch("ragged weight rows")

    @property
    def in_dim(self) -> int:
        return len(self.weights[0])

    @property
    def out_dim(self) -> int:
        return len(self.bias)


def affine_layer(
    weights: Iterable[Iterable[RationalLike]],
    bias: Iterable[RationalLike],
    activation: Activation,
) -> AffineLayer:
    return AffineLayer(
        weights=_rational_matrix(weights),
        bias=tuple(as_rational(b) for b in bias),
        activation=activation,
    )


@dataclass(frozen=True)
class NetworkMeta:
    hidden_layers: int
    unit_count: int
    weight_bound: Fraction


def _compute_meta(layers: Sequence[AffineLayer]) -> NetworkMeta:
    hidden = sum(1 for layer in layers if layer.activation is Activation.RELU)
    units = sum(layer.out_dim for layer in layers if layer.activation is Activation.RELU)
    bound = Fraction(0)
    for layer in layers:
        for row in layer.weights:
            for w in row:
                if abs(w) > bound:
                    bound = abs(w)
        for b in layer.bias:
            if abs(b) > bound:
                bound = abs(b)
    return NetworkMeta(hidden_layers=hidden, unit_count=units, weight_bound=bound)


@dataclass(frozen=True)
class ReluNetwork:
    input_dim: int
    layers: tuple[AffineLayer, ...]
    meta: NetworkMeta

    def __post_init__(self):
        if self.input_dim < 1:
            raise DimensionMismatch("input_dim must be positive")
        if not self.layers:
            raise DimensionMismatch("network needs at least one layer")
        width = self.input_dim
        for i, layer in enumerate(self.layers):
            if layer.in_dim != width:
                raise DimensionMismatch(
                    f"expects input width {layer.in_dim}, previous width is {width}",
                    layer_index=i,
                )
            width = layer.out_dim
        for i, layer in enumerate(self.layers[:-1]):
            if layer.activation is not Activation.RELU:
                raise DimensionMismatch("non-final layer must be RELU", layer_index=i)
        if self.layers[-1].activation is not Activation.LINEAR:
            raise DimensionMismatch(
                "final layer must be LINEAR", layer_index=len(self.layers) - 1
            )
        # meta is recomputed, never trusted from input
        recount = _compute_meta(self.layers)
        if recount != self.meta:
            raise DimensionMismatch(f"meta {self.meta} does not match recount {recount}")

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_dim

    @property
    def hidden_layers(self) -> int:
        return self.meta.hidden_layers


def make_network(input_dim: int, layers: Sequence[AffineLayer]) -> ReluNetwork:
    """Build a network, computing meta from the layers."""
    return ReluNetwork(input_dim=input_dim, layers=tuple(layers), meta=_compute_meta(layers))


# ---------------------------------------------------------------------------
# evaluation

def _prepared(net: ReluNetwork) -> kernels.PreparedNet:
    try:
        return object.__getattribute__(net, "_prep")
    except AttributeError:
        prep = kernels.prepare(
            net.input_dim,
            [
                (layer.weights, layer.bias, layer.activation is Activation.RELU)
                for layer in net.layers
            ],
        )
        object.__setattr__(net, "_prep", prep)
        return prep


def _exact_input(z: Sequence) -> tuple[list[int], int]:
    """Common-denominator integer form of an input vector.

    Floats are converted by their exact binary value, so evaluating at a
    float64 point means evaluating at exactly that dyadic rational.
    """
    fracs = [Fraction(v) if isinstance(v, float) else as_rational(v) for v in z]
    den = 1
    for f in fracs:
        den = math.lcm(den, f.denominator)
    nums = [f.numerator * (den // f.denominator) for f in fracs]
    return nums, den


def eval_vec(net: ReluNetwork, z: Sequence, mode: EvalMode = EvalMode.EXACT):
    """Evaluate the network; returns a tuple of Fractions (EXACT) or floats."""
    if len(z) != net.input_dim:
        raise DimensionMismatch(
            f"input has {len(z)} coordinates, network expects {net.input_dim}",
            layer_index=0,
        )
    prep = _prepared(net)
    if mode is EvalMode.EXACT:
        zn, zd = _exact_input(z)
        nums, den = kernels.forward_exact(prep, zn, zd)
        return tuple(Fraction(num, den) for num in nums)
    Z = np.asarray([[float(v) for v in z]], dtype=np.float64)
    return tuple(float(v) for v in kernels.forward_f64(prep, Z)[0])


def eval(net: ReluNetwork, z: Sequence, mode: EvalMode = EvalMode.EXACT):
    """Scalar evaluation; the network must have a single output."""
    if net.out_dim != 1:
        raise DimensionMismatch(
            f"scalar eval requires a single output, network has {net.out_dim}"
        )
    return eval_vec(net, z, mode)[0]


def eval_batch_exact(net: ReluNetwork, zs: Sequence[Sequence]) -> list[tuple[Fraction, ...]]:
    """Exact evaluation over a batch of inputs."""
    prep = _prepared(net)
    batch = [_exact_input(z) for z in zs]
    out = kernels.forward_exact_batch(prep, batch)
    return [tuple(Fraction(num, den) for num in nums) for nums, den in out]


def eval_batch_f64(net: ReluNetwork, Z: np.ndarray) -> np.ndarray:
    """Float64 evaluation over a batch: (n, input_dim) -> (n, out_dim)."""
    return kernels.forward_f64(_prepared(net), Z)


# ---------------------------------------------------------------------------
# algebra on networks

def _matmul(A, B):
    rows = len(A)
    inner = len(B)
    cols = len(B[0])
    zero = Fraction(0)
    out = []
    for i in range(rows):
        row = []
        Ai = A[i]
        for j in range(cols):
            acc = zero
            for k in range(inner):
                a = Ai[k]
                if a:
                    acc += a * B[k][j]
            row.append(acc)
        out.append(tuple(row))
    return tuple(out)


def _matvec(A, v):
    zero = Fraction(0)
    out = []
    for row in A:
        acc = zero
        for a, x in zip(row, v):
            if a:
                acc += a * x
        out.append(acc)
    return tuple(out)


def compose(outer: ReluNetwork, inner: ReluNetwork) -> ReluNetwork:
    """Network computing outer(inner(z)); inner's final affine map is fused
    into outer's first layer so hidden-layer counts add."""
    if inner.out_dim != outer.input_dim:
        raise DimensionMismatch(
            f"inner output width {inner.out_dim} != outer input width {outer.input_dim}"
        )
    last = inner.layers[-1]
    first = outer.layers[0]
    fused_w = _matmul(first.weights, last.weights)
    fused_b = tuple(
        wb + b for wb, b in zip(_matvec(first.weights, last.bias), first.bias)
    )
    fused = AffineLayer(weights=fused_w, bias=fused_b, activation=first.activation)
    return make_network(
        inner.input_dim, inner.layers[:-1] + (fused,) + outer.layers[1:]
    )


def depth_pad(net: ReluNetwork, target_hidden: int) -> ReluNetwork:
    """Pointwise-equal network with exactly target_hidden hidden layers,
    via identity pairs t -> relu(t) - relu(-t) appended at the output."""
    cur = net.hidden_layers
    if target_hidden < cur:
        raise ValueError(f"target {target_hidden} below current depth {cur}")
    if target_hidden == cur:
        return net
    layers = list(net.layers)
    for _ in range(target_hidden - cur):
        last = layers.pop()
        k = last.out_dim
        neg = tuple(tuple(-w for w in row) for row in last.weights)
        split = AffineLayer(
            weights=last.weights + neg,
            bias=last.bias + tuple(-b for b in last.bias),
            activation=Activation.RELU,
        )
        one, zero = Fraction(1), Fraction(0)
        merge_w = tuple(
            tuple(
                (one if j == i else zero) if j < k else (-one if j == k + i else zero)
                for j in range(2 * k)
            )
            for i in range(k)
        )
        merge = AffineLayer(
            weights=merge_w, bias=(zero,) * k, activation=Activation.LINEAR
        )
        layers.extend([split, merge])
    return make_network(net.input_dim, layers)


def stack_shared(nets: Sequence[ReluNetwork]) -> ReluNetwork:
    """Parallel composition on a shared input: output is the concatenation of
    the nets' outputs. Nets are depth-padded to a common hidden count."""
    if not nets:
        raise ValueError("nothing to stack")
    dims = {net.input_dim for net in nets}
    if len(dims) != 1:
        raise DimensionMismatch(f"mixed input dims {sorted(dims)}")
    target = max(net.hidden_layers for net in nets)
    padded = [depth_pad(net, target) for net in nets]
    if len(padded) == 1:
        return padded[0]
    depth = target + 1
    zero = Fraction(0)
    layers = []
    for li in range(depth):
        parts = [net.layers[li] for net in padded]
        activation = parts[0].activation
        bias = tuple(b for p in parts for b in p.bias)
        if li == 0:
            weights = tuple(row for p in parts for row in p.weights)
        else:
            widths = [p.in_dim for p in parts]
            total = sum(widths)
            offsets = [sum(widths[:i]) for i in range(len(parts))]
            weights = tuple(
                tuple(
                    row[j - off] if off <= j < off + p.in_dim else zero
                    for j in range(total)
                )
                for p, off in zip(parts, offsets)
                for row in p.weights
            )
        layers.append(AffineLayer(weights=weights, bias=bias, activation=activation))
    return make_network(nets[0].input_dim, layers)


def affine_network(
    weights: Iterable[Iterable[RationalLike]], bias: Iterable[RationalLike]
) -> ReluNetwork:
    """Zero-hidden-layer network computing an affine map."""
    layer = affine_layer(weights, bias, Activation.LINEAR)
    return make_network(layer.in_dim, [layer])


def identity_network(dim: int = 1) -> ReluNetwork:
    """One-hidden-layer identity, t -> relu(t) - relu(-t) per coordinate."""
    eye = affine_network(
        [[1 if j == i else 0 for j in range(dim)] for i in range(dim)], [0] * dim
    )
    return depth_pad(eye, 1)


def scalar_relu_network() -> ReluNetwork:
    """One-hidden-layer network computing t -> relu(t)."""
    return make_network(
        1,
        [
            affine_layer([[1]], [0], Activation.RELU),
            affine_layer([[1]], [0], Activation.LINEAR),
        ],
    )


def linear_combine(
    terms: Sequence[tuple[RationalLike, ReluNetwork]], offset: RationalLike = 0
) -> ReluNetwork:
    """Network computing offset + sum of coeff_i * net_i(z) for scalar nets
    on a shared input; depth is the maximum over the terms."""
    if not terms:
        raise ValueError("linear_combine requires at least one term")
    coeffs = [as_rational(c) for c, _ in terms]
    nets = [net for _, net in terms]
    for net in nets:
        if net.out_dim != 1:
            raise DimensionMismatch("linear_combine terms must have scalar output")
    dims = {net.input_dim for net in nets}
    if len(dims) != 1:
        raise DimensionMismatch(f"mixed input dims {sorted(dims)}")
    stacked = stack_shared(nets)
    head = affine_network([coeffs], [as_rational(offset)])
    return compose(head, stacked)


def precompose_affine(
    net: ReluNetwork,
    matrix: Iterable[Iterable[RationalLike]],
    offset: Iterable[RationalLike],
) -> ReluNetwork:
    """Network computing net(A x + c), fused into the first layer."""
    return compose(net, affine_network(matrix, offset))


# ---------------------------------------------------------------------------
# piecewise-linear compiler

@dataclass(frozen=True)
class PwlFunction:
    """Continuous piecewise-linear function given by (breakpoint, value)
    pairs, interpolated between consecutive breakpoints and constant
    outside the breakpoint range."""

    breakpoints: tuple[Fraction, ...]
    values: tuple[Fraction, ...]
    extrapolation: Extrapolation = Extrapolation.CONSTANT

    def __post_init__(self):
        if len(self.breakpoints) < 1:
            raise ValueError("a piecewise-linear function needs at least one breakpoint")
        if len(self.breakpoints) != len(self.values):
            raise ValueError("breakpoints and values must have equal length")
        for a, b in zip(self.breakpoints, self.breakpoints[1:]):
            if not a < b:
                raise ValueError("breakpoints must be strictly increasing")


def pwl_function(
    breakpoints: Iterable[RationalLike], values: Iterable[RationalLike]
) -> PwlFunction:
    return PwlFunction(
        breakpoints=tuple(as_rational(t) for t in breakpoints),
        values=tuple(as_rational(v) for v in values),
    )


def pwl_eval(f: PwlFunction, t: RationalLike) -> Fraction:
    """Reference interpolation semantics for a PwlFunction."""
    t = Fraction(t) if isinstance(t, float) else as_rational(t)
    bp, vals = f.breakpoints, f.values
    if t <= bp[0]:
        return vals[0]
    if t >= bp[-1]:
        return vals[-1]
    lo, hi = 0, len(bp) - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if bp[mid] <= t:
            lo = mid
        else:
            hi = mid
    frac = (t - bp[lo]) / (bp[hi] - bp[lo])
    return vals[lo] + frac * (vals[hi] - vals[lo])


def compile_pwl(f: PwlFunction) -> ReluNetwork:
    """One-hidden-layer scalar network exactly matching pwl_eval everywhere,
    constant extrapolation included; at most breakpoints + 2 units."""
    bp, vals = f.breakpoints, f.values
    k = len(bp)
    slopes = [Fraction(0)]
    for i in range(k - 1):
        slopes.append((vals[i + 1] - vals[i]) / (bp[i + 1] - bp[i]))
    slopes.append(Fraction(0))
    # f(x) = v_1 + sum_i (slope_i - slope_{i-1}) * relu(x - t_i)
    hidden = affine_layer([[1]] * k, [-t for t in bp], Activation.RELU)
    coeffs = [slopes[i + 1] - slopes[i] for i in range(k)]
    final = affine_layer([coeffs], [vals[0]], Activation.LINEAR)
    return make_network(1, [hidden, final])


# ---------------------------------------------------------------------------
# canonical serialization

def _frac_str(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}"


def _parse_frac(s, location: str) -> Fraction:
    if not isinstance(s, str) or "/" not in s:
        raise FormatError("rational must be a 'num/den' string", location)
    num_s, _, den_s = s.partition("/")
    try:
        num, den = int(num_s), int(den_s)
    except ValueError:
        raise FormatError(f"bad rational {s!r}", location) from None
    if den <= 0:
        raise FormatError("rational denominator must be positive", location)
    return Fraction(num, den)


def serialize_network(net: ReluNetwork) -> str:
    """Canonical text document: fixed key order, rationals as 'num/den'."""
    doc = {
        "input_dim": net.input_dim,
        "layers": [
            {
                "weights": [[_frac_str(w) for w in row] for row in layer.weights],
                "bias": [_frac_str(b) for b in layer.bias],
                "activation": layer.activation.value,
            }
            for layer in net.layers
        ],
        "meta": {
            "hidden_layers": net.meta.hidden_layers,
            "unit_count": net.meta.unit_count,
            "weight_bound": _frac_str(net.meta.weight_bound),
        },
    }
    return json.dumps(doc, separators=(",", ":"))


def parse_network(text: str) -> ReluNetwork:
    """Parse a canonical document; meta is recomputed and cross-checked."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise FormatError(f"invalid JSON: {e.msg}", "document") from None
    if not isinstance(doc, dict):
        raise FormatError("document must be an object", "document")
    input_dim = doc.get("input_dim")
    if not isinstance(input_dim, int) or input_dim < 1:
        raise FormatError("input_dim must be a positive integer", "input_dim")
    raw_layers = doc.get("layers")
    if not isinstance(raw_layers, list) or not raw_layers:
        raise FormatError("layers must be a nonempty list", "layers")
    layers = []
    for i, raw in enumerate(raw_layers):
        loc = f"layers[{i}]"
        if not isinstance(raw, dict):
            raise FormatError("layer must be an object", loc)
        raw_w = raw.get("weights")
        raw_b = raw.get("bias")
        raw_a = raw.get("activation")
        if not isinstance(raw_w, list) or not raw_w:
            raise FormatError("weights must be a nonempty list of rows", f"{loc}.weights")
        if not isinstance(raw_b, list):
            raise FormatError("bias must be a list", f"{loc}.bias")
        if raw_a not in (Activation.RELU.value, Activation.LINEAR.value):
            raise FormatError(f"unknown activation {raw_a!r}", f"{loc}.activation")
        weights = []
        for r, row in enumerate(raw_w):
            if not isinstance(row, list):
                raise FormatError("weight row must be a list", f"{loc}.weights[{r}]")
            weights.append(
                tuple(
                    _parse_frac(w, f"{loc}.weights[{r}][{c}]") for c, w in enumerate(row)
                )
            )
        bias = tuple(_parse_frac(b, f"{loc}.bias[{j}]") for j, b in enumerate(raw_b))
        try:
            layers.append(
                AffineLayer(
                    weights=tuple(weights), bias=bias, activation=Activation(raw_a)
                )
            )
        except DimensionMismatch as e:
            raise FormatError(str(e), loc) from None
    try:
        net = make_network(input_dim, layers)
    except DimensionMismatch as e:
        raise FormatError(str(e), "layers") from None
    raw_meta = doc.get("meta")
    if raw_meta is not None:
        if not isinstance(raw_meta, dict):
            raise FormatError("meta must be an object", "meta")
        expect = {
            "hidden_layers": net.meta.hidden_layers,
            "unit_count": net.meta.unit_count,
            "weight_bound": _frac_str(net.meta.weight_bound),
        }
        for key, want in expect.items():
            got = raw_meta.get(key)
            if got != want:
                raise FormatError(
                    f"stored value {got!r} does not match recomputed {want!r}",
                    f"meta.{key}",
                )
    return net


def round_trip(net: ReluNetwork) -> ReluNetwork:
    """deserialize(serialize(net)); field-identical by construction."""
    return parse_network(serialize_network(net))
