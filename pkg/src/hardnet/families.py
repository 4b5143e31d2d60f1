"""Compressible Boolean function families and labeled dataset sampling.

A compressible function is f = sigma(h(x)) where h is an integer-valued
network on the Boolean cube with small range T and sigma maps T into [0, 1].
Families here: subset parities, learning-with-rounding labels over a binary
encoding of Z_q^n, and a keyed toy composition (not pseudorandom).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from . import rng
from .relu_ir import (
    Activation,
    EvalMode,
    PwlFunction,
    ReluNetwork,
    affine_layer,
    affine_network,
    as_rational,
    compile_pwl,
    compose,
    eval as net_eval,
    eval_vec,
    make_network,
    pwl_function,
    stack_shared,
)


class DomainConvention(Enum):
    PM_ONE = "pm_one"     # corners in {-1, +1}
    ZERO_ONE = "zero_one"  # corners in {0, 1}


class FamilyError(ValueError):
    pass


@dataclass(frozen=True)
class CompressibleFn:
    """f = sigma(h(x)): integer-valued inner network plus a sigma table."""

    inner_h: ReluNetwork
    range_t: tuple[int, ...]            # sorted integers
    sigma: tuple[tuple[int, Fraction], ...]  # (t, sigma(t)) pairs, sorted by t
    domain_convention: DomainConvention
    bound: int                          # certified |h(x)| <= bound on corners
    label_values: tuple[Fraction, ...]  # label law support for RANDOM sampling
    descriptor: str                     # canonical family spec document

    def __post_init__(self):
        if tuple(sorted(self.range_t)) != self.range_t:
            raise FamilyError("range_t must be sorted")
        if tuple(t for t, _ in self.sigma) != self.range_t:
            raise FamilyError("sigma table must cover exactly range_t")
        for _, v in self.sigma:
            if not 0 <= v <= 1:
                raise FamilyError("sigma values must lie in [0, 1]")

    @property
    def d(self) -> int:
        return self.inner_h.input_dim

    def sigma_value(self, t: int) -> Fraction:
        table = dict(self.sigma)
        if t not in table:
            raise FamilyError(f"h value {t} outside range_t")
        return table[t]

    def sigma_pwl(self) -> PwlFunction:
        return pwl_function([t for t, _ in self.sigma], [v for _, v in self.sigma])


@dataclass(frozen=True)
class ParitySpec:
    d: int
    subset_s: frozenset[int]  # 1-indexed coordinates

    def __post_init__(self):
        if self.d < 1:
            raise FamilyError("d must be >= 1")
        if not all(1 <= j <= self.d for j in self.subset_s):
            raise FamilyError("subset_S must be contained in {1, ..., d}")


def parity_spec(d: int, subset: Iterable[int]) -> ParitySpec:
    return ParitySpec(d=d, subset_s=frozenset(subset))


@dataclass(frozen=True)
class LwrInstance:
    n: int
    p: int
    q: int
    w: tuple[int, ...]

    def __post_init__(self):
        if self.n < 1:
            raise FamilyError("n must be >= 1")
        if not (1 < self.p < self.q):
            raise FamilyError("need 1 < p < q")
        if self.q & (self.q - 1) != 0:
            raise FamilyError("q must be a power of two")
        if self.q % self.p != 0:
            raise FamilyError("p must divide q")
        if len(self.w) != self.n:
            raise FamilyError("w must have length n")
        if not all(0 <= wi < self.q for wi in self.w):
            raise FamilyError("w entries must lie in {0, ..., q-1}")

    @property
    def log2_q(self) -> int:
        return self.q.bit_length() - 1

    @property
    def binary_dim(self) -> int:
        return self.n * self.log2_q


def lwr_instance(n: int, p: int, q: int, w: Iterable[int]) -> LwrInstance:
    return LwrInstance(n=n, p=p, q=q, w=tuple(w))


@dataclass(frozen=True)
class BooleanExample:
    x: tuple[int, ...]
    y: Fraction


class LabelMode(Enum):
    REALIZABLE = "realizable"
    RANDOM = "random"


def _descriptor(kind: str, params: dict) -> str:
    return json.dumps({"kind": kind, "params": params}, separators=(",", ":"), sort_keys=True)


def family_from_descriptor(text: str) -> "CompressibleFn":
    """Rebuild a family from its canonical spec document (the exact inverse
    of the .descriptor field)."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FamilyError(f"malformed family spec: {exc}") from None
    if not isinstance(doc, dict) or "kind" not in doc or "params" not in doc:
        raise FamilyError("family spec needs 'kind' and 'params'")
    kind, params = doc["kind"], doc["params"]
    try:
        if kind == "parity":
            return build_parity(parity_spec(params["d"], set(params["subset"])))
        if kind == "lwr":
            return build_lwr(
                lwr_instance(params["n"], params["p"], params["q"], params["w"])
            )
        if kind == "keyed_toy":
            return build_keyed_toy(params["key"], params["depth_budget"], params["d"])
    except KeyError as exc:
        raise FamilyError(f"family spec missing field {exc}") from None
    raise FamilyError(f"unknown family kind {kind!r}")


def build_parity(spec: ParitySpec) -> CompressibleFn:
    """Parity over subset S: h(x) = sum_{j in S} (1 - x_j)/2, sigma(t) = t mod 2."""
    half = Fraction(1, 2)
    weights = [[-half if (j + 1) in spec.subset_s else Fraction(0) for j in range(spec.d)]]
    bias = [half * len(spec.subset_s)]
    inner = affine_network(weights, bias)
    size = len(spec.subset_s)
    range_t = tuple(range(size + 1))
    sigma = tuple((t, Fraction(t % 2)) for t in range_t)
    return CompressibleFn(
        inner_h=inner,
        range_t=range_t,
        sigma=sigma,
        domain_convention=DomainConvention.PM_ONE,
        bound=size,
        label_values=(Fraction(0), Fraction(1)),
        descriptor=_descriptor("parity", {"d": spec.d, "subset": sorted(spec.subset_s)}),
    )


def lwr_round(t: int, p: int, q: int) -> Fraction:
    """(1/p) * (floor((p/q) t + 1/2) mod p): half-up rounding then reduce mod p."""
    scaled = Fraction(p * (t % q), q) + Fraction(1, 2)
    return Fraction(math.floor(scaled) % p, p)


def build_lwr(inst: LwrInstance) -> CompressibleFn:
    """Rounded inner product over the binary encoding of Z_q^n.

    h(x~) = w~ . x~ with w~ expanding each w_i across little-endian bit
    weights 2^j; sigma(t) = (1/p)(floor((p/q)(t mod q) + 1/2) mod p).
    """
    bits = inst.log2_q
    weights = [
        [Fraction(inst.w[i] * (1 << j)) for i in range(inst.n) for j in range(bits)]
    ]
    inner = affine_network(weights, [0])
    top = inst.n * (inst.q - 1) ** 2
    range_t = tuple(range(top + 1))
    sigma = tuple((t, lwr_round(t, inst.p, inst.q)) for t in range_t)
    return CompressibleFn(
        inner_h=inner,
        range_t=range_t,
        sigma=sigma,
        domain_convention=DomainConvention.ZERO_ONE,
        bound=top,
        label_values=tuple(Fraction(a, inst.p) for a in range(inst.p)),
        descriptor=_descriptor(
            "lwr", {"n": inst.n, "p": inst.p, "q": inst.q, "w": list(inst.w)}
        ),
    )


def build_keyed_toy(key: int, depth_budget: int, d: int = 8) -> CompressibleFn:
    """Keyed composition of parities and a majority vote.

    Subsets, sign flips, and the output table are drawn from the key's
    substream, so a fixed key always yields the same function. This is a
    stand-in with NO pseudorandomness claim.

    depth_budget 1: a key-selected subset parity with a key-drawn sigma
    table. depth_budget >= 2: majority of three key-selected parities,
    realized with two hidden layers.
    """
    if depth_budget < 1:
        raise FamilyError("depth_budget must be >= 1")
    if d < 2:
        raise FamilyError("d must be >= 2")
    gen = rng.substream(key, "keyed-toy")
    descriptor = _descriptor("keyed_toy", {"key": key, "depth_budget": depth_budget, "d": d})

    def draw_subset() -> list[int]:
        while True:
            mask = gen.integers(0, 2, d)
            if mask.any():
                return [j + 1 for j in range(d) if mask[j]]

    if depth_budget == 1:
        subset = draw_subset()
        base = build_parity(parity_spec(d, subset))
        table = gen.integers(0, 2, len(base.range_t))
        # force the table to be non-constant so the function depends on x
        if table.min() == table.max():
            table[0] ^= 1
        sigma = tuple((t, Fraction(int(table[t]))) for t in base.range_t)
        return CompressibleFn(
            inner_h=base.inner_h,
            range_t=base.range_t,
            sigma=sigma,
            domain_convention=DomainConvention.PM_ONE,
            bound=base.bound,
            label_values=(Fraction(0), Fraction(1)),
            descriptor=descriptor,
        )

    # majority of three keyed parities: inner nets compute p_i in {0,1};
    # the vote sum s = sum_i eps_i (2 p_i - 1) is an odd integer in [-3, 3]
    parts = []
    signs_eps = []
    for _ in range(3):
        subset = draw_subset()
        eps = 1 if gen.integers(0, 2) else -1
        parts.append(to_network(build_parity(parity_spec(d, subset))))
        signs_eps.append(eps)
    stacked = stack_shared(parts)
    vote = affine_network([[2 * e for e in signs_eps]], [-sum(signs_eps)])
    inner = compose(vote, stacked)
    flip = int(gen.integers(0, 2))
    range_t = (-3, -1, 1, 3)
    sigma = tuple(
        (t, Fraction((1 if t > 0 else 0) ^ flip)) for t in range_t
    )
    return CompressibleFn(
        inner_h=inner,
        range_t=range_t,
        sigma=sigma,
        domain_convention=DomainConvention.PM_ONE,
        bound=3,
        label_values=(Fraction(0), Fraction(1)),
        descriptor=descriptor,
    )


def eval_family(cf: CompressibleFn, x: Sequence[int]) -> Fraction:
    """sigma(h(x)); errors if h(x) falls outside range_t."""
    h = net_eval(cf.inner_h, x, EvalMode.EXACT)
    if h.denominator != 1:
        raise FamilyError(f"inner network returned non-integer {h}")
    return cf.sigma_value(int(h))


def to_network(cf: CompressibleFn) -> ReluNetwork:
    """compose(compile_pwl(sigma), h): one more hidden layer than h."""
    return compose(compile_pwl(cf.sigma_pwl()), cf.inner_h)


def pm_corner(cf: CompressibleFn, x_pm: Sequence[int]) -> tuple[int, ...]:
    """Translate a {-1,+1} corner into the family's own convention."""
    if cf.domain_convention is DomainConvention.PM_ONE:
        return tuple(int(v) for v in x_pm)
    return tuple((1 - int(v)) // 2 for v in x_pm)


def eval_family_pm(cf: CompressibleFn, x_pm: Sequence[int]) -> Fraction:
    """Evaluate at a {-1,+1} corner regardless of the family's convention."""
    return eval_family(cf, pm_corner(cf, x_pm))


def pm_input_network(cf: CompressibleFn) -> ReluNetwork:
    """to_network(cf) adjusted to accept {-1,+1} inputs.

    For ZERO_ONE families the conversion x -> (1-x)/2 is folded into the
    first layer, so the result is exactly equal on corners with no extra
    depth.
    """
    net = to_network(cf)
    if cf.domain_convention is DomainConvention.PM_ONE:
        return net
    d = net.input_dim
    half = Fraction(1, 2)
    zero = Fraction(0)
    matrix = [[-half if j == i else zero for j in range(d)] for i in range(d)]
    return compose(net, affine_network(matrix, [half] * d))


def encode_zq(x: Sequence[int], q: int) -> tuple[int, ...]:
    """Little-endian bit encoding of a Z_q^n vector; q must be a power of two."""
    if q < 2 or q & (q - 1) != 0:
        raise FamilyError("q must be a power of two")
    bits = q.bit_length() - 1
    out = []
    for i, v in enumerate(x):
        if not 0 <= v < q:
            raise FamilyError(f"entry {v} at position {i} outside Z_{q}")
        out.extend((v >> j) & 1 for j in range(bits))
    return tuple(out)


def decode_zq(bits_vec: Sequence[int], q: int) -> tuple[int, ...]:
    """Inverse of encode_zq."""
    if q < 2 or q & (q - 1) != 0:
        raise FamilyError("q must be a power of two")
    bits = q.bit_length() - 1
    if len(bits_vec) % bits != 0:
        raise FamilyError("bit string length is not a multiple of log2(q)")
    out = []
    for i in range(0, len(bits_vec), bits):
        out.append(sum((int(bits_vec[i + j]) & 1) << j for j in range(bits)))
    return tuple(out)


def corner_matrix(count: int, d: int, convention: DomainConvention, seed: int, label: str,
                  threads: int = 1) -> np.ndarray:
    """(count, d) uniform corners in the given convention, dtype int8."""
    if convention is DomainConvention.PM_ONE:
        return rng.signs(seed, label, count, d, threads)
    return rng.bits(seed, label, count, d, threads)


def sample_dataset(
    cf: CompressibleFn,
    count: int,
    label_mode: LabelMode,
    seed: int,
    threads: int = 1,
) -> list[BooleanExample]:
    """Uniform corners with realizable or independently random labels."""
    X = corner_matrix(count, cf.d, cf.domain_convention, seed, "dataset-x", threads)
    if label_mode is LabelMode.REALIZABLE:
        hs = eval_inner_batch(cf, X)
        table = dict(cf.sigma)
        ys = [table[int(t)] for t in hs]
    else:
        picks = rng.integers(seed, "dataset-y", count, 0, len(cf.label_values), threads)
        ys = [cf.label_values[int(i)] for i in picks]
    return [BooleanExample(x=tuple(int(v) for v in X[i]), y=ys[i]) for i in range(count)]


def eval_inner_batch(cf: CompressibleFn, X: np.ndarray) -> np.ndarray:
    """Integer h values over a batch of corners (int64 array).

    Affine inner networks take a vectorized path; deeper inner networks fall
    back to exact per-corner evaluation.
    """
    if cf.inner_h.hidden_layers == 0:
        layer = cf.inner_h.layers[0]
        den = math.lcm(*[w.denominator for w in layer.weights[0]], layer.bias[0].denominator)
        wn = np.asarray([int(w * den) for w in layer.weights[0]], dtype=np.int64)
        b = int(layer.bias[0] * den)
        nums = X.astype(np.int64) @ wn + b
        if np.any(nums % den != 0):
            raise FamilyError("inner network returned non-integer on a corner")
        return nums // den
    out = np.empty(X.shape[0], dtype=np.int64)
    for i in range(X.shape[0]):
        h = net_eval(cf.inner_h, [int(v) for v in X[i]], EvalMode.EXACT)
        if h.denominator != 1:
            raise FamilyError(f"inner network returned non-integer {h}")
        out[i] = int(h)
    return out


def eval_family_batch(cf: CompressibleFn, X: np.ndarray) -> list[Fraction]:
    """Exact labels over a batch of corners in the family's convention."""
    table = dict(cf.sigma)
    hs = eval_inner_batch(cf, X)
    missing = set(int(t) for t in np.unique(hs)) - set(table)
    if missing:
        raise FamilyError(f"h values {sorted(missing)} outside range_t")
    return [table[int(t)] for t in hs]


def serialize_dataset(examples: Iterable[BooleanExample]) -> str:
    """One record per line: corner, exact label, float64 label."""
    lines = []
    for ex in examples:
        lines.append(
            json.dumps(
                {
                    "x": list(ex.x),
                    "y_exact": f"{ex.y.numerator}/{ex.y.denominator}",
                    "y_float": float(ex.y),
                },
                separators=(",", ":"),
            )
        )
    return "\n".join(lines) + "\n"
