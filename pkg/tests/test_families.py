"""Compressible function families: parity, rounded modular inner product,
and the keyed toy composition; descriptors; batch evaluation."""
import json
from fractions import Fraction

import numpy as np
import pytest

from hardnet import rng
from hardnet.families import (
    DomainConvention,
    FamilyError,
    LabelMode,
    build_keyed_toy,
    build_lwr,
    build_parity,
    decode_zq,
    encode_zq,
    eval_family,
    eval_family_batch,
    eval_family_pm,
    eval_inner_batch,
    family_from_descriptor,
    lwr_instance,
    lwr_round,
    parity_spec,
    pm_input_network,
    sample_dataset,
    serialize_dataset,
    to_network,
)
from hardnet.relu_ir import eval as net_eval

F = Fraction


# ---------------------------------------------------------------------------
# parity

def test_parity_truth_table_small():
    cf = build_parity(parity_spec(3, {1, 3}))
    assert cf.domain_convention is DomainConvention.PM_ONE
    for m in range(8):
        x = tuple(1 - 2 * ((m >> j) & 1) for j in range(3))
        bits = [(1 - x[0]) // 2, (1 - x[2]) // 2]
        assert eval_family(cf, x) == F(sum(bits) % 2)


def test_parity_subset_validation():
    with pytest.raises(FamilyError):
        parity_spec(4, {0})
    with pytest.raises(FamilyError):
        parity_spec(4, {5})


def test_parity_inner_h_counts_minus_ones():
    cf = build_parity(parity_spec(5, {2, 4, 5}))
    assert net_eval(cf.inner_h, [1, -1, 1, -1, -1]) == 3
    assert net_eval(cf.inner_h, [1] * 5) == 0
    assert cf.range_t == (0, 1, 2, 3)
    assert cf.bound == 3


def test_to_network_matches_family_on_all_corners():
    cf = build_parity(parity_spec(4, {1, 2, 4}))
    net = to_network(cf)
    assert net.hidden_layers == cf.inner_h.hidden_layers + 1
    for m in range(16):
        x = tuple(1 - 2 * ((m >> j) & 1) for j in range(4))
        assert net_eval(net, x) == eval_family(cf, x)


# ---------------------------------------------------------------------------
# rounded modular inner product

def test_lwr_round_frozen_table_p2_q4():
    assert [lwr_round(t, 2, 4) for t in range(4)] == [F(0), F(1, 2), F(1, 2), F(0)]


def test_lwr_round_reduces_mod_q_first():
    assert lwr_round(7, 2, 4) == lwr_round(3, 2, 4)
    assert lwr_round(-1, 2, 4) == lwr_round(3, 2, 4)


def test_lwr_instance_validation():
    with pytest.raises(FamilyError):
        lwr_instance(2, 2, 3, (1, 1))   # q not a power of two
    with pytest.raises(FamilyError):
        lwr_instance(2, 3, 4, (1, 1))   # p does not divide q
    with pytest.raises(FamilyError):
        lwr_instance(2, 4, 4, (1, 1))   # p == q
    with pytest.raises(FamilyError):
        lwr_instance(2, 2, 4, (1,))     # wrong key length
    with pytest.raises(FamilyError):
        lwr_instance(2, 2, 4, (4, 0))   # key entry outside Z_q


def test_lwr_family_matches_direct_formula():
    inst = lwr_instance(2, 2, 4, (3, 1))
    cf = build_lwr(inst)
    assert cf.domain_convention is DomainConvention.ZERO_ONE
    for a in range(4):
        for b in range(4):
            x = encode_zq((a, b), 4)
            want = lwr_round(3 * a + 1 * b, 2, 4)
            assert eval_family(cf, x) == want


def test_lwr_inner_is_affine_with_bit_weights():
    cf = build_lwr(lwr_instance(2, 2, 4, (3, 1)))
    # little-endian: weights (3, 6, 1, 2)
    assert net_eval(cf.inner_h, [1, 0, 0, 0]) == 3
    assert net_eval(cf.inner_h, [0, 1, 0, 0]) == 6
    assert net_eval(cf.inner_h, [0, 0, 1, 0]) == 1
    assert net_eval(cf.inner_h, [0, 0, 0, 1]) == 2
    assert net_eval(cf.inner_h, [1, 1, 1, 1]) == 12


def test_encode_decode_zq_round_trip():
    gen = rng.substream(200, "zq")
    for q in (2, 4, 8, 16):
        for _ in range(50):
            v = tuple(int(t) for t in gen.integers(0, q, 3))
            assert decode_zq(encode_zq(v, q), q) == v
    with pytest.raises(FamilyError):
        encode_zq((4,), 4)
    with pytest.raises(FamilyError):
        decode_zq((1, 0, 1), 4)
    with pytest.raises(FamilyError):
        encode_zq((1,), 3)


def test_pm_input_network_agrees_on_pm_corners():
    cf = build_lwr(lwr_instance(2, 2, 4, (3, 1)))
    net = pm_input_network(cf)
    base = to_network(cf)
    assert net.hidden_layers == base.hidden_layers  # folded, not deepened
    gen = rng.substream(201, "pm-in")
    for _ in range(40):
        x_pm = [1 - 2 * int(b) for b in gen.integers(0, 2, 4)]
        assert net_eval(net, x_pm) == eval_family_pm(cf, x_pm)


# ---------------------------------------------------------------------------
# keyed toy

def test_keyed_toy_is_deterministic_in_the_key():
    a = build_keyed_toy(7, 2, d=8)
    b = build_keyed_toy(7, 2, d=8)
    assert a.descriptor == b.descriptor
    for _ in range(20):
        gen = rng.substream(202, "toy-x")
        x = [1 - 2 * int(t) for t in gen.integers(0, 2, 8)]
        assert eval_family_pm(a, x) == eval_family_pm(b, x)


def test_keyed_toy_keys_give_different_functions():
    a = build_keyed_toy(1, 2, d=8)
    b = build_keyed_toy(2, 2, d=8)
    gen = rng.substream(203, "toy-diff")
    differs = False
    for _ in range(200):
        x = [1 - 2 * int(t) for t in gen.integers(0, 2, 8)]
        if eval_family_pm(a, x) != eval_family_pm(b, x):
            differs = True
            break
    assert differs


def test_keyed_toy_labels_in_unit_interval_and_range_consistent():
    cf = build_keyed_toy(11, 2, d=6)
    table = dict(cf.sigma)
    gen = rng.substream(204, "toy-range")
    for _ in range(100):
        x = [1 - 2 * int(t) for t in gen.integers(0, 2, 6)]
        y = eval_family_pm(cf, x)
        assert 0 <= y <= 1
        h = net_eval(cf.inner_h, x)
        assert h.denominator == 1 and int(h) in table


# ---------------------------------------------------------------------------
# descriptors

def test_descriptor_round_trip_parity():
    cf = build_parity(parity_spec(6, {2, 5}))
    back = family_from_descriptor(cf.descriptor)
    assert back.descriptor == cf.descriptor
    assert back == cf


def test_descriptor_round_trip_lwr():
    cf = build_lwr(lwr_instance(2, 2, 8, (5, 3)))
    back = family_from_descriptor(cf.descriptor)
    assert back.descriptor == cf.descriptor


def test_descriptor_round_trip_keyed_toy():
    cf = build_keyed_toy(9, 1, d=7)
    back = family_from_descriptor(cf.descriptor)
    assert back.descriptor == cf.descriptor


def test_descriptor_errors():
    with pytest.raises(FamilyError):
        family_from_descriptor("{not json")
    with pytest.raises(FamilyError):
        family_from_descriptor(json.dumps({"kind": "mystery", "params": {}}))
    with pytest.raises(FamilyError):
        family_from_descriptor(json.dumps({"kind": "parity", "params": {"d": 4}}))


# ---------------------------------------------------------------------------
# datasets and batching

def test_sample_dataset_realizable_labels_are_exact():
    cf = build_parity(parity_spec(6, {1, 4}))
    data = sample_dataset(cf, 300, LabelMode.REALIZABLE, seed=5)
    assert len(data) == 300
    for ex in data[:50]:
        assert ex.y == eval_family(cf, ex.x)


def test_sample_dataset_random_labels_come_from_label_values():
    cf = build_lwr(lwr_instance(2, 2, 4, (3, 1)))
    data = sample_dataset(cf, 200, LabelMode.RANDOM, seed=6)
    support = set(cf.label_values)
    assert set(ex.y for ex in data) <= support


def test_eval_family_batch_matches_pointwise():
    cf = build_lwr(lwr_instance(2, 2, 8, (5, 3)))
    X = rng.bits(7, "fam-batch", 200, cf.d)
    ys = eval_family_batch(cf, X)
    for i in range(200):
        assert ys[i] == eval_family(cf, tuple(int(v) for v in X[i]))


def test_eval_inner_batch_matches_pointwise_on_deep_inner():
    cf = build_keyed_toy(3, 2, d=6)
    X = rng.signs(8, "toy-batch", 100, 6)
    hs = eval_inner_batch(cf, X)
    for i in range(100):
        assert hs[i] == int(net_eval(cf.inner_h, [int(v) for v in X[i]]))


def test_serialize_dataset_is_line_oriented_and_exact():
    cf = build_parity(parity_spec(3, {2}))
    data = sample_dataset(cf, 5, LabelMode.REALIZABLE, seed=1)
    text = serialize_dataset(data)
    lines = text.strip().split("\n")
    assert len(lines) == 5
    rec = json.loads(lines[0])
    assert set(rec) == {"x", "y_exact", "y_float"}
    num, den = rec["y_exact"].split("/")
    assert F(int(num), int(den)) == data[0].y


def test_eval_family_rejects_out_of_range_h():
    cf = build_parity(parity_spec(3, {1}))
    with pytest.raises(FamilyError):
        eval_family(cf, (3, 1, 1))  # h = -1, outside {0, 1}
