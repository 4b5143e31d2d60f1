"""Sign, small-coordinate-detector, and indicator gadget networks.

N1 approximates sgn and is exact outside (-delta, delta); N2 detects small
coordinates (>= 1 if any |z_j| <= delta, = 0 if all |z_j| >= 2*delta); N3
computes relu(height * 1[t = t*] - s) exactly on integer t and s in [0, W].
The majority builder arithmetizes an odd-arity vote over {-1, +1} inputs.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Iterable

from .relu_ir import (
    Activation,
    RationalLike,
    ReluNetwork,
    affine_layer,
    as_rational,
    make_network,
)


class IndicatorVariant(Enum):
    # slope-1 ramp over [t*-1, t*]: value exactly 1 on integers t < t*
    UNIT_SLOPE = "unit_slope"
    # the same ramp scaled by 1/delta; kept for documentation tests only,
    # it evaluates to 1/delta (not 1) on integers t < t*
    PAPER_ONE_OVER_DELTA = "paper_one_over_delta"


@dataclass(frozen=True)
class GadgetParams:
    d: int
    delta: Fraction
    n2_scale: Fraction  # K: N2 output scaling
    n3_w: Fraction      # W: N3 slope/domain bound
    n3_indicator_variant: IndicatorVariant = IndicatorVariant.UNIT_SLOPE

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("d must be >= 1")
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        if self.n2_scale < 1:
            raise ValueError("n2_scale K must be >= 1")
        if self.n3_w < 1:
            raise ValueError("n3_w W must be >= 1")


def gadget_params(
    d: int,
    delta: RationalLike | None = None,
    n2_scale: RationalLike = 1,
    n3_w: RationalLike = 2,
    n3_indicator_variant: IndicatorVariant = IndicatorVariant.UNIT_SLOPE,
) -> GadgetParams:
    """Parameters with the standard threshold delta = 1/d^2 unless overridden."""
    if d < 1:
        raise ValueError("d must be >= 1")
    resolved = Fraction(1, d * d) if delta is None else as_rational(delta)
    return GadgetParams(
        d=d,
        delta=resolved,
        n2_scale=as_rational(n2_scale),
        n3_w=as_rational(n3_w),
        n3_indicator_variant=n3_indicator_variant,
    )


def build_n1(params: GadgetParams) -> ReluNetwork:
    """1 -> 1 network: (1/delta)(relu(t + delta) - relu(t - delta)) - 1.

    Equals sgn(t) whenever |t| >= delta; range is [-1, 1]; odd symmetric.
    """
    delta = params.delta
    inv = 1 / delta
    return make_network(
        1,
        [
            affine_layer([[1], [1]], [delta, -delta], Activation.RELU),
            affine_layer([[inv, -inv]], [-1], Activation.LINEAR),
        ],
    )


def build_n1_vec(params: GadgetParams) -> ReluNetwork:
    """d -> d coordinatewise N1 with block-diagonal weights."""
    d = params.d
    delta = params.delta
    inv = 1 / delta
    zero = Fraction(0)
    hidden_w = []
    hidden_b = []
    for j in range(d):
        e_j = [Fraction(1) if c == j else zero for c in range(d)]
        hidden_w.extend([e_j, list(e_j)])
        hidden_b.extend([delta, -delta])
    final_w = [
        [inv if c == 2 * j else (-inv if c == 2 * j + 1 else zero) for c in range(2 * d)]
        for j in range(d)
    ]
    return make_network(
        d,
        [
            affine_layer(hidden_w, hidden_b, Activation.RELU),
            affine_layer(final_w, [-1] * d, Activation.LINEAR),
        ],
    )


def build_n2(params: GadgetParams) -> ReluNetwork:
    """d -> 1 small-coordinate detector, scaled by K = params.n2_scale:

        K * sum_j (1/delta)(relu(z_j + 2delta) + relu(z_j - 2delta) - 2relu(z_j))

    With K = 1: >= 1 if some |z_j| <= delta; = 0 if all |z_j| >= 2delta;
    0 <= N2 <= 2d, with N2(0) = 2d. General K scales those levels.
    """
    d = params.d
    delta = params.delta
    two = 2 * delta
    scale = params.n2_scale / delta
    zero = Fraction(0)
    hidden_w = []
    hidden_b = []
    for j in range(d):
        e_j = [Fraction(1) if c == j else zero for c in range(d)]
        hidden_w.extend([e_j, list(e_j), list(e_j)])
        hidden_b.extend([two, -two, zero])
    coeff = {0: scale, 1: scale, 2: -2 * scale}
    final_w = [[coeff[c % 3] for c in range(3 * d)]]
    return make_network(
        d,
        [
            affine_layer(hidden_w, hidden_b, Activation.RELU),
            affine_layer(final_w, [0], Activation.LINEAR),
        ],
    )


def n2_value(z: Iterable, params: GadgetParams) -> Fraction:
    """Closed-form exact K-scaled N2, the oracle the network is tested against."""
    delta = params.delta
    two = 2 * delta
    total = Fraction(0)
    for v in z:
        t = Fraction(v) if isinstance(v, float) else as_rational(v)
        total += max(t + two, 0) + max(t - two, 0) - 2 * max(t, 0)
    return params.n2_scale * total / delta


def build_n3_indicator(params: GadgetParams, t_star: int) -> ReluNetwork:
    """1 -> 1 subnetwork for 1[t < t*]: a ramp over [t*-1, t*].

    UNIT_SLOPE evaluates to exactly 1 on integers t <= t*-1 and 0 for
    t >= t*. PAPER_ONE_OVER_DELTA carries a spurious 1/delta prefactor and
    evaluates to 1/delta on integers t <= t*-1; it is retained so tests can
    document that measured deviation.
    """
    scale = Fraction(1)
    if params.n3_indicator_variant is IndicatorVariant.PAPER_ONE_OVER_DELTA:
        scale = 1 / params.delta
    return make_network(
        1,
        [
            affine_layer([[-1], [-1]], [t_star, t_star - 1], Activation.RELU),
            affine_layer([[scale, -scale]], [0], Activation.LINEAR),
        ],
    )


def build_n3(
    params: GadgetParams, T: Iterable[int], t_star: int, height: RationalLike = 1
) -> ReluNetwork:
    """2 -> 1 network computing relu(height * 1[t = t*] - s) on (s, t).

    Exact for integer t in T and rational s in [0, W] under UNIT_SLOPE, for
    any height in [0, 1]:

        relu(c - s + 2W(t* - t)) - relu(-s + 2W(t* - t)) - c * ramp(t* - t)

    where c = height and ramp is the width-1 indicator of t < t*. Behavior at
    non-integer t is not contracted. Height 1 is the plain indicator gadget;
    fractional heights let a lift fold sigma values into the bank.
    """
    t_set = set(T)
    if t_star not in t_set:
        raise ValueError(f"t_star {t_star} not in T")
    c = as_rational(height)
    if not 0 <= c <= 1:
        raise ValueError("height must lie in [0, 1]")
    W = params.n3_w
    ind_scale = Fraction(1)
    if params.n3_indicator_variant is IndicatorVariant.PAPER_ONE_OVER_DELTA:
        ind_scale = 1 / params.delta
    twoW = 2 * W
    # hidden: u1 = c - s + 2W(t*-t), u2 = -s + 2W(t*-t), ramp pair on t
    hidden = affine_layer(
        [[-1, -twoW], [-1, -twoW], [0, -1], [0, -1]],
        [c + twoW * t_star, twoW * t_star, t_star, t_star - 1],
        Activation.RELU,
    )
    final = affine_layer(
        [[1, -1, -c * ind_scale, c * ind_scale]], [0], Activation.LINEAR
    )
    return make_network(2, [hidden, final])


def build_majority(arity: int) -> ReluNetwork:
    """arity -> 1 majority vote on {-1,+1} inputs: 1 if the sum is positive.

    Computed as relu((s+1)/2) - relu((s-1)/2) on the integer sum s, which is
    exact on every corner for odd arity.
    """
    if arity < 1 or arity % 2 == 0:
        raise ValueError("majority needs an odd arity >= 1")
    half = Fraction(1, 2)
    return make_network(
        arity,
        [
            affine_layer([[half] * arity, [half] * arity], [half, -half], Activation.RELU),
            affine_layer([[1, -1]], [0], Activation.LINEAR),
        ],
    )
