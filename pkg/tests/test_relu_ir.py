"""Exact-rational network IR: construction rules, evaluation semantics,
algebra, the piecewise-linear compiler, and canonical serialization."""
from fractions import Fraction

import numpy as np
import pytest

from hardnet import rng
from hardnet.relu_ir import (
    Activation,
    DimensionMismatch,
    EvalMode,
    FormatError,
    affine_layer,
    affine_network,
    as_rational,
    compile_pwl,
    compose,
    depth_pad,
    eval as net_eval,
    eval_batch_exact,
    eval_batch_f64,
    eval_vec,
    identity_network,
    linear_combine,
    make_network,
    parse_network,
    precompose_affine,
    pwl_eval,
    pwl_function,
    round_trip,
    scalar_relu_network,
    serialize_network,
    stack_shared,
)

F = Fraction


def test_as_rational_accepts_int_fraction_string():
    assert as_rational(3) == F(3)
    assert as_rational(F(2, 7)) == F(2, 7)
    assert as_rational("5/9") == F(5, 9)


def test_as_rational_rejects_floats():
    # weights must be stated exactly; silent float conversion is the bug
    # this guards against
    with pytest.raises(TypeError):
        as_rational(0.1)


def test_layer_validation():
    with pytest.raises(DimensionMismatch):
        affine_layer([[1, 2], [3]], [0, 0], Activation.LINEAR)  # ragged
    with pytest.raises(DimensionMismatch):
        affine_layer([[1]], [0, 0], Activation.LINEAR)  # bias mismatch


def test_network_requires_linear_final_and_relu_inner():
    relu = affine_layer([[1]], [0], Activation.RELU)
    lin = affine_layer([[1]], [0], Activation.LINEAR)
    make_network(1, [relu, lin])  # fine
    with pytest.raises(DimensionMismatch):
        make_network(1, [relu, relu])
    with pytest.raises(DimensionMismatch):
        make_network(1, [lin, lin])


def test_hidden_layer_count_is_relu_count():
    relu = affine_layer([[1]], [0], Activation.RELU)
    lin = affine_layer([[1]], [0], Activation.LINEAR)
    assert make_network(1, [lin]).hidden_layers == 0
    assert make_network(1, [relu, lin]).hidden_layers == 1
    assert make_network(1, [relu, relu, lin]).hidden_layers == 2


def test_exact_eval_single_relu():
    net = scalar_relu_network()
    assert net_eval(net, [F(-3, 2)]) == 0
    assert net_eval(net, [F(3, 2)]) == F(3, 2)
    assert net_eval(net, [0]) == 0


def test_exact_eval_uses_rational_arithmetic():
    # relu(t/3 - 1/3) at t = 1: float64 of 1/3 would not cancel exactly
    net = make_network(
        1,
        [
            affine_layer([[F(1, 3)]], [F(-1, 3)], Activation.RELU),
            affine_layer([[1]], [0], Activation.LINEAR),
        ],
    )
    assert net_eval(net, [1]) == 0
    assert net_eval(net, [4]) == 1
    assert net_eval(net, [F(7, 2)]) == F(5, 6)


def test_float_inputs_are_taken_exactly_as_dyadics():
    net = scalar_relu_network()
    assert net_eval(net, [0.5]) == F(1, 2)
    assert net_eval(net, [0.1]) == F(0.1)  # the dyadic the float actually is


def test_eval_vec_and_scalar_eval_dimension_checks():
    net = affine_network([[1, 1]], [0])
    with pytest.raises(DimensionMismatch):
        eval_vec(net, [1])
    two_out = affine_network([[1], [1]], [0, 0])
    with pytest.raises(DimensionMismatch):
        net_eval(two_out, [1])


def test_eval_batch_exact_matches_pointwise():
    gen = rng.substream(17, "ir-batch")
    net = compile_pwl(pwl_function([-1, 0, 1], [0, 1, 0]))
    zs = [[F(int(gen.integers(-300, 300)), 100)] for _ in range(200)]
    batch = eval_batch_exact(net, zs)
    for z, out in zip(zs, batch):
        assert out == eval_vec(net, z)


def test_eval_batch_f64_matches_pointwise_float():
    gen = rng.substream(18, "ir-f64")
    net = compile_pwl(pwl_function([-1, 0, 1], [0, 1, 0]))
    Z = gen.standard_normal((100, 1))
    B = eval_batch_f64(net, Z)
    for i in range(100):
        assert B[i, 0] == eval_vec(net, Z[i], EvalMode.FLOAT64)[0]


def test_compose_adds_hidden_layers_and_matches_pointwise():
    inner = scalar_relu_network()
    outer = compile_pwl(pwl_function([0, 1], [0, 1]))
    net = compose(outer, inner)
    assert net.hidden_layers == inner.hidden_layers + outer.hidden_layers
    for t in [F(-2), F(-1, 3), F(0), F(1, 2), F(3)]:
        assert net_eval(net, [t]) == net_eval(outer, [net_eval(inner, [t])])


def test_identity_network_is_exact_everywhere():
    net = identity_network(3)
    assert net.hidden_layers == 1
    for z in ([F(-5), F(0), F(7, 3)], [F(1, 7), F(-2, 9), F(4)]):
        assert eval_vec(net, z) == tuple(z)


def test_depth_pad_preserves_values():
    net = compile_pwl(pwl_function([-1, 1], [-1, 1]))
    padded = depth_pad(net, 4)
    assert padded.hidden_layers == 4
    gen = rng.substream(19, "ir-pad")
    for _ in range(50):
        t = F(int(gen.integers(-400, 400)), 67)
        assert net_eval(padded, [t]) == net_eval(net, [t])
    with pytest.raises(ValueError):
        depth_pad(padded, 2)


def test_stack_shared_concatenates_outputs():
    a = scalar_relu_network()
    b = compile_pwl(pwl_function([-1, 0, 1], [1, 0, 1]))
    net = stack_shared([a, b])
    assert net.out_dim == 2
    for t in [F(-3, 2), F(0), F(2, 5)]:
        assert eval_vec(net, [t]) == (net_eval(a, [t]), net_eval(b, [t]))


def test_linear_combine_exact():
    a = scalar_relu_network()
    b = identity_network(1)
    net = linear_combine([(F(2), a), (F(-1, 3), b)], offset=F(1, 7))
    for t in [F(-1), F(0), F(5, 4)]:
        want = 2 * net_eval(a, [t]) - F(1, 3) * net_eval(b, [t]) + F(1, 7)
        assert net_eval(net, [t]) == want


def test_precompose_affine_folds_into_first_layer():
    net = scalar_relu_network()
    pre = precompose_affine(net, [[F(2), F(-1)]], [F(1, 2)])
    assert pre.hidden_layers == net.hidden_layers  # fused, no extra depth
    assert net_eval(pre, [F(1), F(3, 2)]) == max(2 * 1 - F(3, 2) + F(1, 2), 0)


def test_pwl_compiler_matches_reference_everywhere():
    f = pwl_function([F(-2), F(-1, 2), F(0), F(3, 4), F(2)],
                     [F(1), F(0), F(1, 3), F(1, 3), F(-1)])
    net = compile_pwl(f)
    assert net.hidden_layers == 1
    gen = rng.substream(20, "ir-pwl")
    # interior, exact breakpoints, and far extrapolation on both sides
    probes = [F(int(gen.integers(-500, 500)), 97) for _ in range(300)]
    probes += list(f.breakpoints) + [F(-100), F(100)]
    for t in probes:
        assert net_eval(net, [t]) == pwl_eval(f, t)


def test_pwl_requires_sorted_distinct_breakpoints():
    with pytest.raises(ValueError):
        pwl_function([0, 0, 1], [1, 2, 3])
    with pytest.raises(ValueError):
        pwl_function([1, 0], [1, 2])


def test_serialization_round_trip_and_determinism():
    net = compile_pwl(pwl_function([F(-1, 3), F(2, 7)], [F(5), F(-1, 2)]))
    doc = serialize_network(net)
    assert serialize_network(net) == doc  # canonical: byte-stable
    back = parse_network(doc)
    assert back == net
    assert serialize_network(round_trip(net)) == doc


def test_serialization_rejects_corrupt_documents():
    net = scalar_relu_network()
    doc = serialize_network(net)
    with pytest.raises(FormatError):
        parse_network(doc.replace("1/1", "1/0", 1))
    with pytest.raises(FormatError):
        parse_network("{not json")
    with pytest.raises(FormatError):
        parse_network("{}")


def test_meta_weight_bound_and_unit_count():
    net = make_network(
        1,
        [
            affine_layer([[F(5, 2)], [F(-7, 2)]], [0, F(1, 4)], Activation.RELU),
            affine_layer([[1, 1]], [0], Activation.LINEAR),
        ],
    )
    assert net.meta.unit_count == 2
    assert net.meta.weight_bound == F(7, 2)
