"""Boolean-to-Gaussian lifts and the example-transform reduction.

The lifted function is f_lift(z) = relu(f(sgn z) - K*N2(z)) with sgn(0) := +1.
The naive lift realizes it as relu(f(N1(z)) - K*N2(z)) and is exact for every
z; the compressed lift saves one hidden layer via a bank of N3 indicator
gadgets and is exact whenever min_j |z_j| > delta (its behavior when some
coordinate falls in [0, delta] is measured, not contracted).

K = max(1, C) where C certifies sup |f(N1(z))| over the solid cube; this is
what makes the small-coordinate case force both lifts to zero. The label map
and the example transform use the same K-scaled N2, so transformed labels
agree with the naive lift exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import integrate, stats

from . import rng
from .families import (
    CompressibleFn,
    DomainConvention,
    eval_family_pm,
    pm_input_network,
)
from .gadgets import (
    GadgetParams,
    IndicatorVariant,
    build_n1_vec,
    build_n2,
    build_n3,
    gadget_params,
    n2_value,
)
from .relu_ir import (
    Activation,
    EvalMode,
    ReluNetwork,
    affine_network,
    as_rational,
    compose,
    eval as net_eval,
    linear_combine,
    make_network,
    scalar_relu_network,
    stack_shared,
)


class LiftError(ValueError):
    pass


class LiftKind(Enum):
    NAIVE = "naive"
    COMPRESSED = "compressed"


class DistKind(Enum):
    GAUSSIAN = "gaussian"
    SYMMETRIC_UNIFORM = "symmetric_uniform"
    CUSTOM_PRODUCT = "custom_product"


@dataclass(frozen=True)
class DistributionSpec:
    """Product distribution, symmetric about 0, with an anticoncentration
    certificate: an interval of width 1/d^a around the median has mass at
    most 1/d^b, with b > 1."""

    kind: DistKind
    anticoncentration_a: int
    anticoncentration_b: int
    density: Callable[[float], float]
    cdf: Callable[[np.ndarray], np.ndarray]
    half_draw: Callable[[np.random.Generator, tuple], np.ndarray]

    def __post_init__(self):
        if self.anticoncentration_b <= 1:
            raise LiftError("anticoncentration certificate requires b > 1")


def _gauss_density(x: float) -> float:
    return math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)


def _unif_density(x: float) -> float:
    return 0.5 if -1.0 <= x <= 1.0 else 0.0


GAUSSIAN = DistributionSpec(
    kind=DistKind.GAUSSIAN,
    anticoncentration_a=2,
    anticoncentration_b=2,
    density=_gauss_density,
    cdf=lambda x: stats.norm.cdf(x),
    half_draw=lambda gen, shape: np.abs(gen.standard_normal(shape)),
)

SYMMETRIC_UNIFORM = DistributionSpec(
    kind=DistKind.SYMMETRIC_UNIFORM,
    anticoncentration_a=2,
    anticoncentration_b=2,
    density=_unif_density,
    cdf=lambda x: np.clip((np.asarray(x) + 1.0) / 2.0, 0.0, 1.0),
    half_draw=lambda gen, shape: gen.uniform(0.0, 1.0, shape),
)


def custom_product(
    density: Callable[[float], float],
    cdf: Callable[[np.ndarray], np.ndarray],
    half_draw: Callable[[np.random.Generator, tuple], np.ndarray],
    anticoncentration_a: int = 2,
    anticoncentration_b: int = 2,
) -> DistributionSpec:
    return DistributionSpec(
        kind=DistKind.CUSTOM_PRODUCT,
        anticoncentration_a=anticoncentration_a,
        anticoncentration_b=anticoncentration_b,
        density=density,
        cdf=cdf,
        half_draw=half_draw,
    )


def distribution(name: str) -> DistributionSpec:
    table = {"gaussian": GAUSSIAN, "uniform": SYMMETRIC_UNIFORM,
             "symmetric_uniform": SYMMETRIC_UNIFORM}
    if name not in table:
        raise LiftError(f"unknown distribution {name!r}")
    return table[name]


def validate_certificate(dist: DistributionSpec, d: int) -> tuple[float, float, bool]:
    """(mass, bound, ok): mass of the width-1/d^a interval around the median
    versus the certified bound 1/d^b."""
    half_width = 0.5 / d**dist.anticoncentration_a
    mass, err = integrate.quad(dist.density, -half_width, half_width)
    bound = 1.0 / d**dist.anticoncentration_b
    return mass, bound, mass <= bound + err


# ---------------------------------------------------------------------------
# certified bounds and parameter defaults

def interval_bound(
    net: ReluNetwork, box: Sequence[tuple[Fraction, Fraction]]
) -> list[tuple[Fraction, Fraction]]:
    """Per-output interval enclosure of the network over a box, by layerwise
    interval arithmetic with exact rational endpoints."""
    if len(box) != net.input_dim:
        raise LiftError("box width does not match network input")
    cur = [(as_rational(lo), as_rational(hi)) for lo, hi in box]
    for layer in net.layers:
        nxt = []
        for row, b in zip(layer.weights, layer.bias):
            lo = hi = b
            for w, (xlo, xhi) in zip(row, cur):
                if w > 0:
                    lo += w * xlo
                    hi += w * xhi
                elif w < 0:
                    lo += w * xhi
                    hi += w * xlo
            if layer.activation is Activation.RELU:
                lo = max(lo, Fraction(0))
                hi = max(hi, Fraction(0))
            nxt.append((lo, hi))
        cur = nxt
    return cur


def compute_bound(source: CompressibleFn | ReluNetwork) -> Fraction:
    """Certified C >= sup over the solid cube [-1,1]^d of |f(N1(z))|.

    For a compressible source the constant-extrapolated sigma is bounded by
    its table, so C = max |sigma(t)|. For a plain network, C comes from
    interval arithmetic over [-1,1]^d (the N1 image lies inside the cube).
    """
    if isinstance(source, CompressibleFn):
        return max((abs(v) for _, v in source.sigma), default=Fraction(0))
    if source.out_dim != 1:
        raise LiftError("bound computation requires a scalar network")
    box = [(Fraction(-1), Fraction(1))] * source.input_dim
    lo, hi = interval_bound(source, box)[0]
    return max(abs(lo), abs(hi))


def lift_params(
    source: CompressibleFn | ReluNetwork,
    delta: Fraction | None = None,
    indicator_variant: IndicatorVariant = IndicatorVariant.UNIT_SLOPE,
) -> GadgetParams:
    """Standard lift parameters: K = max(1, C) and W covering the reachable
    (s, t) domain of the N3 bank."""
    d = source.d if isinstance(source, CompressibleFn) else source.input_dim
    c_bound = compute_bound(source)
    k_scale = max(Fraction(1), c_bound)
    t_bound = (
        max((abs(t) for t in source.range_t), default=0)
        if isinstance(source, CompressibleFn)
        else 0
    )
    w = max(2 * d * k_scale + 1, Fraction(t_bound + 1), Fraction(2))
    return gadget_params(
        d, delta=delta, n2_scale=k_scale, n3_w=w, n3_indicator_variant=indicator_variant
    )


@dataclass(frozen=True)
class LiftedNetwork:
    net: ReluNetwork
    kind: LiftKind
    source: str           # family descriptor document
    source_hidden: int    # L of the source family network
    n2_scale: Fraction    # K
    bound_c: Fraction     # certified sup |f(N1(z))|

    def __post_init__(self):
        expect = self.source_hidden + (2 if self.kind is LiftKind.NAIVE else 1)
        if self.net.hidden_layers != expect:
            raise LiftError(
                f"{self.kind.value} lift must have {expect} hidden layers, "
                f"got {self.net.hidden_layers}"
            )
        if self.n2_scale < max(Fraction(1), self.bound_c):
            raise LiftError("K below the certified bound C")


def _resolve_source(
    source: CompressibleFn | ReluNetwork,
) -> tuple[ReluNetwork, Fraction, str]:
    """(pm-input network, certified C, descriptor) for either source kind."""
    if isinstance(source, CompressibleFn):
        return pm_input_network(source), compute_bound(source), source.descriptor
    if source.out_dim != 1:
        raise LiftError("lift source must have scalar output")
    return source, compute_bound(source), "network"


def lift_naive(
    source: CompressibleFn | ReluNetwork, params: GadgetParams | None = None
) -> LiftedNetwork:
    """relu(f(N1(z)) - K*N2(z)): exact for every z, at depth L + 2."""
    f_net, c_bound, descriptor = _resolve_source(source)
    if params is None:
        params = lift_params(source)
    if params.n2_scale < max(Fraction(1), c_bound):
        raise LiftError(
            f"K = {params.n2_scale} is below the certified bound C = {c_bound}"
        )
    f_of_n1 = compose(f_net, build_n1_vec(params))
    kn2 = build_n2(params)
    inner = linear_combine([(1, f_of_n1), (-1, kn2)])
    net = compose(scalar_relu_network(), inner)
    return LiftedNetwork(
        net=net,
        kind=LiftKind.NAIVE,
        source=descriptor,
        source_hidden=f_net.hidden_layers,
        n2_scale=params.n2_scale,
        bound_c=c_bound,
    )


def lift_compressed(
    cf: CompressibleFn, params: GadgetParams | None = None
) -> LiftedNetwork:
    """Depth-(L+1) lift via an N3 bank over (s, t) = (K*N2(z), h(N1(z))).

    Each t* in T contributes an N3 gadget of height sigma(t*), so the bank
    sums to relu(sigma(t0) - K*N2(z)) whenever t0 = h(sgn z) is hit exactly;
    that happens for every z with min_j |z_j| > delta, where N1 = sgn.
    """
    if params is None:
        params = lift_params(cf)
    c_bound = compute_bound(cf)
    if params.n2_scale < max(Fraction(1), c_bound):
        raise LiftError(
            f"K = {params.n2_scale} is below the certified bound C = {c_bound}"
        )
    needed_w = 2 * params.d * params.n2_scale + 1
    t_bound = max((abs(t) for t in cf.range_t), default=0)
    if params.n3_w < needed_w or params.n3_w < t_bound + 1:
        raise LiftError(
            f"W = {params.n3_w} too small: the reachable s-range needs "
            f"W >= {max(needed_w, Fraction(t_bound + 1))}"
        )
    h_net = cf.inner_h
    if cf.domain_convention is DomainConvention.ZERO_ONE:
        d = h_net.input_dim
        half = Fraction(1, 2)
        zero = Fraction(0)
        conv = affine_network(
            [[-half if j == i else zero for j in range(d)] for i in range(d)],
            [half] * d,
        )
        h_net = compose(h_net, conv)
    t_net = compose(h_net, build_n1_vec(params))
    s_net = build_n2(params)
    front = stack_shared([s_net, t_net])
    bank = linear_combine(
        [
            (1, build_n3(params, cf.range_t, t_star, height=value))
            for t_star, value in cf.sigma
        ]
    )
    net = compose(bank, front)
    source_hidden = cf.inner_h.hidden_layers + 1
    return LiftedNetwork(
        net=net,
        kind=LiftKind.COMPRESSED,
        source=cf.descriptor,
        source_hidden=source_hidden,
        n2_scale=params.n2_scale,
        bound_c=c_bound,
    )


# ---------------------------------------------------------------------------
# the reference lifted function and the label map

def sgn_corner(z: Sequence) -> tuple[int, ...]:
    """Coordinatewise sign with sgn(0) := +1."""
    return tuple(-1 if v < 0 else 1 for v in z)


def reference_eval(
    family_eval: Callable[[tuple[int, ...]], Fraction],
    params: GadgetParams,
    z: Sequence,
) -> Fraction:
    """relu(f(sgn z) - K*N2(z)), the oracle both lifts are tested against."""
    y = as_rational(family_eval(sgn_corner(z)))
    return max(y - n2_value(z, params), Fraction(0))


def label_map(y, abs_z: Sequence, params: GadgetParams) -> Fraction:
    """The transformed label: y where every |z_j| >= 2*delta; 0 where some
    |z_j| <= delta; relu(y - K*N2(|z|)) in between."""
    y = as_rational(y)
    delta = params.delta
    two_delta = 2 * delta
    mags = [Fraction(v) if isinstance(v, float) else as_rational(v) for v in abs_z]
    if any(m < 0 for m in mags):
        raise LiftError("label_map takes coordinate magnitudes")
    if all(m >= two_delta for m in mags):
        return y
    if any(m <= delta for m in mags):
        return Fraction(0)
    return max(y - n2_value(mags, params), Fraction(0))


def n2_batch(G: np.ndarray, params: GadgetParams) -> np.ndarray:
    """Vectorized float64 K*N2 over rows of magnitudes G (n, d)."""
    delta = float(params.delta)
    two_delta = 2.0 * delta
    scale = float(params.n2_scale) / delta
    return (
        np.maximum(G + two_delta, 0.0)
        + np.maximum(G - two_delta, 0.0)
        - 2.0 * np.maximum(G, 0.0)
    ).sum(axis=1) * scale


def label_map_batch(y: np.ndarray, G: np.ndarray, params: GadgetParams) -> np.ndarray:
    """Vectorized float64 label map over rows of magnitudes G (n, d).

    A float64 convenience for Monte Carlo estimates; exact workflows use
    label_map per example.
    """
    delta = float(params.delta)
    two_delta = 2.0 * delta
    out = np.maximum(np.asarray(y, dtype=np.float64) - n2_batch(G, params), 0.0)
    out[(G <= delta).any(axis=1)] = 0.0
    keep = (G >= two_delta).all(axis=1)
    out[keep] = np.asarray(y, dtype=np.float64)[keep]
    return out


# ---------------------------------------------------------------------------
# the example transform

@dataclass(frozen=True)
class RealExample:
    z: tuple[float, ...]          # float64 view
    z_exact: tuple[Fraction, ...]  # exact twin (the dyadic values of z)
    y_tilde: Fraction


def transform_dataset(
    examples: Sequence,
    dist: DistributionSpec,
    params: GadgetParams,
    seed: int,
    threads: int = 1,
) -> list[RealExample]:
    """z_i = g_i * x_i with g_i from the positive half of dist; labels via
    the K-scaled label map. Example i depends only on (seed, i)."""
    count = len(examples)
    if count == 0:
        return []
    d = len(examples[0].x)
    G = rng.chunked(
        seed, "transform-g", count, lambda gen, n: dist.half_draw(gen, (n, d)), threads
    )
    out = []
    for i, ex in enumerate(examples):
        if len(ex.x) != d:
            raise LiftError("mixed dimensions in dataset")
        if any(v not in (-1, 1) for v in ex.x):
            raise LiftError("transform requires corners in {-1, +1}")
        g_row = G[i]
        g_exact = tuple(Fraction(float(v)) for v in g_row)
        z_exact = tuple(gx * x for gx, x in zip(g_exact, ex.x))
        z = tuple(float(v) for v in z_exact)
        out.append(
            RealExample(z=z, z_exact=z_exact, y_tilde=label_map(ex.y, g_exact, params))
        )
    return out


def transform_example(ex, dist: DistributionSpec, params: GadgetParams, seed: int,
                      index: int = 0) -> RealExample:
    """Row `index` of transform_dataset on a list containing ex at that index."""
    if any(v not in (-1, 1) for v in ex.x):
        raise LiftError("transform requires corners in {-1, +1}")
    chunk, offset = divmod(index, rng.CHUNK)
    d = len(ex.x)
    block = dist.half_draw(rng.substream(seed, "transform-g", chunk), (offset + 1, d))
    g_row = block[offset]
    g_exact = tuple(Fraction(float(v)) for v in g_row)
    z_exact = tuple(gx * x for gx, x in zip(g_exact, ex.x))
    return RealExample(
        z=tuple(float(v) for v in z_exact),
        z_exact=z_exact,
        y_tilde=label_map(ex.y, g_exact, params),
    )


# ---------------------------------------------------------------------------
# the good set

def in_good_set(z: Sequence, params: GadgetParams) -> bool:
    """Exact test: every |z_j| >= 2*delta."""
    two_delta = 2 * params.delta
    for v in z:
        m = abs(Fraction(v) if isinstance(v, float) else as_rational(v))
        if m < two_delta:
            return False
    return True


def good_set_prob(dist: DistributionSpec, d: int) -> float:
    """(1 - m1)^d where m1 is the per-coordinate mass of (-2/d^2, 2/d^2),
    numerically integrated with absolute error <= 1e-6."""
    two_delta = 2.0 / d**2
    m1, err = integrate.quad(dist.density, -two_delta, two_delta)
    if err > 1e-6:
        raise LiftError(f"integration error {err} exceeds 1e-6")
    return (1.0 - m1) ** d


# ---------------------------------------------------------------------------
# weak prediction and the membership-query wrapper

def _clamp01(v: float | Fraction) -> float | Fraction:
    return min(max(v, 0), 1)


class WeakPredictor:
    """Randomized corner predictor: draw a fresh half-sample g and output
    1[clamp(h(g*x)) >= 1/2]. Call i uses the (seed, i) substream, so a fixed
    seed gives a reproducible call sequence."""

    def __init__(self, h: Callable[[Sequence[float]], float],
                 dist: DistributionSpec, seed: int):
        self.h = h
        self.dist = dist
        self.seed = seed
        self.calls = 0
        self._chunk_id = -1
        self._chunk: np.ndarray | None = None

    def __call__(self, x: Sequence[int]) -> int:
        d = len(x)
        chunk, offset = divmod(self.calls, rng.CHUNK)
        if chunk != self._chunk_id or self._chunk is None or self._chunk.shape[1] != d:
            self._chunk = self.dist.half_draw(
                rng.substream(self.seed, "weak-g", chunk), (rng.CHUNK, d)
            )
            self._chunk_id = chunk
        g = self._chunk[offset]
        self.calls += 1
        z = [float(gj) * float(xj) for gj, xj in zip(g, x)]
        val = _clamp01(self.h(z))
        return 1 if val >= Fraction(1, 2) else 0


def weak_predictor(h: Callable, dist: DistributionSpec, seed: int) -> WeakPredictor:
    return WeakPredictor(h, dist, seed)


def weak_predict_batch(
    h_batch: Callable[[np.ndarray], np.ndarray],
    dist: DistributionSpec,
    seed: int,
    X: np.ndarray,
    threads: int = 1,
) -> np.ndarray:
    """Vectorized WeakPredictor over corner rows X, one fresh g per row."""
    n, d = X.shape
    G = rng.chunked(
        seed, "weak-g", n, lambda gen, m: dist.half_draw(gen, (m, d)), threads
    )
    vals = np.clip(np.asarray(h_batch(G * X), dtype=np.float64), 0.0, 1.0)
    return (vals >= 0.5).astype(np.int8)


class MqWrapper:
    """Answers real-point queries with reference_eval semantics at the cost
    of exactly one Boolean corner query each."""

    def __init__(self, boolean_oracle: Callable[[tuple[int, ...]], Fraction],
                 params: GadgetParams):
        self.boolean_oracle = boolean_oracle
        self.params = params
        self.real_queries = 0
        self.boolean_queries = 0

    def query(self, z: Sequence) -> Fraction:
        self.real_queries += 1
        corner = sgn_corner(z)
        self.boolean_queries += 1
        y = as_rational(self.boolean_oracle(corner))
        return max(y - n2_value(z, self.params), Fraction(0))


def mq_wrap(boolean_oracle: Callable, params: GadgetParams) -> MqWrapper:
    return MqWrapper(boolean_oracle, params)


# ---------------------------------------------------------------------------
# verification sweeps

def sample_dist(dist: DistributionSpec, seed: int, label: str, count: int, d: int,
                threads: int = 1) -> np.ndarray:
    """(count, d) full signed samples: |row| from dist.half_draw, independent
    uniform signs. Row i is a pure function of (seed, label, i)."""
    mags = rng.chunked(
        seed, label + "-mag", count, lambda gen, n: dist.half_draw(gen, (n, d)), threads
    )
    return mags * rng.signs(seed, label + "-sign", count, d, threads)


def verify_identity(
    cf: CompressibleFn,
    kind: LiftKind = LiftKind.NAIVE,
    samples: int = 1000,
    seed: int = 0,
    threads: int = 1,
    adversarial: int = 1000,
    dist: DistributionSpec | None = None,
    params: GadgetParams | None = None,
) -> dict:
    """Exact comparison of the lifted network against reference_eval on
    random draws plus adversarial boundary magnitudes in (0, 2*delta].

    For the compressed lift only points with min_j |z_j| > delta are in
    contract; out-of-contract points are skipped, not counted."""
    from .families import eval_family_batch  # local to avoid import cycles

    if dist is None:
        dist = GAUSSIAN
    if params is None:
        params = lift_params(cf)
    lifted = (
        lift_naive(cf, params) if kind is LiftKind.NAIVE else lift_compressed(cf, params)
    )
    d = cf.d
    blocks = []
    if samples:
        blocks.append(sample_dist(dist, seed, "verify-z", samples, d, threads))
    if adversarial:
        gen = rng.substream(seed, "verify-adv")
        blocks.append(
            adversarial_coordinates(gen, adversarial, d, hi=2.0 * float(params.delta))
        )
    Z = np.concatenate(blocks) if blocks else np.zeros((0, d))
    delta = params.delta
    pm = cf.domain_convention is DomainConvention.PM_ONE
    checked = 0
    failures = 0
    max_dev = Fraction(0)
    from .relu_ir import eval_batch_exact

    for start in range(0, len(Z), 4096):
        chunk = Z[start:start + 4096]
        rows = [tuple(Fraction(float(v)) for v in row) for row in chunk]
        if kind is LiftKind.COMPRESSED:
            rows = [r for r in rows if min(abs(c) for c in r) > delta]
        if not rows:
            continue
        corners = np.array(
            [[-1 if c < 0 else 1 for c in r] for r in rows], dtype=np.int8
        )
        native = corners if pm else ((1 - corners.astype(np.int64)) // 2)
        labels = eval_family_batch(cf, native)
        outs = eval_batch_exact(lifted.net, rows)
        for r, label, out in zip(rows, labels, outs):
            want = max(label - n2_value(r, params), Fraction(0))
            dev = abs(out[0] - want)
            checked += 1
            if dev != 0:
                failures += 1
                max_dev = max(max_dev, dev)
    return {
        "mode": kind.value,
        "checked": checked,
        "failures": failures,
        "max_abs_deviation": max_dev,
    }


def verify_goodset(
    d: int,
    dist: DistributionSpec,
    samples: int = 100000,
    seed: int = 0,
    threads: int = 1,
) -> dict:
    """Empirical good-set fraction versus the integrated prediction; a
    failure is a deviation beyond three binomial standard deviations."""
    Z = sample_dist(dist, seed, "verify-goodset", samples, d, threads)
    two_delta = 2.0 / d**2
    emp = float((np.abs(Z) >= two_delta).all(axis=1).mean())
    pred = good_set_prob(dist, d)
    sigma = math.sqrt(max(pred * (1.0 - pred), 1e-12) / samples)
    dev = abs(emp - pred)
    return {
        "checked": samples,
        "failures": int(dev > 3.0 * sigma),
        "max_abs_deviation": dev,
        "empirical": emp,
        "predicted": pred,
        "threshold_3sigma": 3.0 * sigma,
    }


def verify_marginal(
    dist: DistributionSpec,
    d: int,
    samples: int = 100000,
    seed: int = 0,
    threads: int = 1,
    ks_threshold: float = 0.01,
) -> dict:
    """Per-coordinate Kolmogorov-Smirnov statistic of the sampled marginal
    against the distribution's cdf; a coordinate fails at ks >= threshold."""
    Z = sample_dist(dist, seed, "verify-marginal", samples, d, threads)
    grid_hi = np.arange(1, samples + 1) / samples
    grid_lo = np.arange(0, samples) / samples
    failures = 0
    worst = 0.0
    for j in range(d):
        x = np.sort(Z[:, j])
        c = np.asarray(dist.cdf(x), dtype=np.float64)
        ks = max(np.abs(c - grid_hi).max(), np.abs(c - grid_lo).max())
        worst = max(worst, float(ks))
        failures += ks >= ks_threshold
    return {
        "checked": d * samples,
        "failures": int(failures),
        "max_abs_deviation": worst,
        "ks_threshold": ks_threshold,
    }


# ---------------------------------------------------------------------------
# case-3 characterization

def adversarial_coordinates(
    gen: np.random.Generator, n: int, d: int, hi: float, lo_exp: float = 9.0
) -> np.ndarray:
    """(n, d) coordinates with magnitudes log-uniform in (hi*10^-lo_exp, hi]
    and uniform signs; stresses every case split around the thresholds."""
    mags = hi * np.power(10.0, -gen.uniform(0.0, lo_exp, (n, d)))
    signs = 2 * gen.integers(0, 2, (n, d)) - 1
    return mags * signs


def case3_discrepancy(
    cf: CompressibleFn,
    params: GadgetParams | None = None,
    sample_budget: int = 1000,
    seed: int = 0,
    kind: LiftKind = LiftKind.COMPRESSED,
) -> dict:
    """Measure |lift - reference| over z with a coordinate forced into
    [0, delta]. Characterization only: asserts nothing.

    Returns checked, max/mean absolute deviation (Fractions), and the
    fraction of nonzero deviations; every 16th forced coordinate is exactly
    0 to stress the sgn(0) convention.
    """
    if params is None:
        params = lift_params(cf)
    lifted = (
        lift_compressed(cf, params) if kind is LiftKind.COMPRESSED else lift_naive(cf, params)
    )
    d = cf.d
    delta = float(params.delta)
    gen = rng.substream(seed, "case3-z")
    base = gen.standard_normal((sample_budget, d))
    forced_j = gen.integers(0, d, sample_budget)
    forced_mag = delta * np.power(10.0, -gen.uniform(0.0, 9.0, sample_budget))
    forced_sign = 2 * gen.integers(0, 2, sample_budget) - 1
    devs = []
    nonzero = 0

    def fam_eval(corner):
        return eval_family_pm(cf, corner)

    for i in range(sample_budget):
        z = base[i].copy()
        mag = 0.0 if i % 16 == 0 else forced_mag[i]
        z[forced_j[i]] = forced_sign[i] * mag
        z_exact = [Fraction(float(v)) for v in z]
        got = net_eval(lifted.net, z_exact, EvalMode.EXACT)
        want = reference_eval(fam_eval, params, z_exact)
        dev = abs(got - want)
        if dev != 0:
            nonzero += 1
        devs.append(dev)
    total = sum(devs, Fraction(0))
    return {
        "kind": kind.value,
        "checked": sample_budget,
        "max_abs_deviation": max(devs, default=Fraction(0)),
        "mean_abs_deviation": total / sample_budget if sample_budget else Fraction(0),
        "nonzero_fraction": Fraction(nonzero, sample_budget) if sample_budget else Fraction(0),
    }
