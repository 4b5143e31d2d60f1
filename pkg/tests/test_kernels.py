"""Backend equivalence: the compiled and pure-Python kernels must return
bit-for-bit identical float64 outputs and identical exact integers."""
from fractions import Fraction

import numpy as np
import pytest

from hardnet import kernels, rng


def _random_specs(gen, in_dim, widths):
    specs = []
    cur = in_dim
    for k, w in enumerate(widths):
        rows = [
            [Fraction(int(gen.integers(-8, 9)), int(gen.integers(1, 5)))
             for _ in range(cur)]
            for _ in range(w)
        ]
        bias = [Fraction(int(gen.integers(-8, 9)), int(gen.integers(1, 5)))
                for _ in range(w)]
        specs.append((rows, bias, k < len(widths) - 1))
        cur = w
    return specs


def test_both_backends_present():
    found = kernels.backends()
    assert "python" in found
    if kernels.BACKEND == "c":
        assert "c" in found


def test_prepare_rejects_bad_shapes():
    with pytest.raises(ValueError):
        kernels.prepare(2, [])
    with pytest.raises(ValueError):
        kernels.prepare(2, [([[Fraction(1)]], [Fraction(0)], False)])


@pytest.mark.skipif("c" not in kernels.backends(), reason="compiled backend absent")
def test_float64_bitwise_agreement_across_backends():
    mods = kernels.backends()
    for trial in range(20):
        gen = rng.substream(90, "kern-f64", trial)
        in_dim = int(gen.integers(1, 6))
        widths = [int(gen.integers(1, 7)) for _ in range(int(gen.integers(1, 4)))]
        prep = kernels.prepare(in_dim, _random_specs(gen, in_dim, widths))
        Z = gen.standard_normal((64, in_dim))
        out_c = mods["c"].forward_f64_batch(prep, np.ascontiguousarray(Z))
        out_py = mods["python"].forward_f64_batch(prep, np.ascontiguousarray(Z))
        # bitwise, not approximate: identical operation order is the contract
        assert out_c.tobytes() == out_py.tobytes()


@pytest.mark.skipif("c" not in kernels.backends(), reason="compiled backend absent")
def test_exact_integer_agreement_across_backends():
    mods = kernels.backends()
    for trial in range(10):
        gen = rng.substream(91, "kern-exact", trial)
        in_dim = int(gen.integers(1, 5))
        widths = [int(gen.integers(1, 6)) for _ in range(int(gen.integers(1, 4)))]
        prep = kernels.prepare(in_dim, _random_specs(gen, in_dim, widths))
        batch = []
        for _ in range(16):
            zd = int(gen.integers(1, 10**6))
            zn = [int(gen.integers(-(10**9), 10**9)) for _ in range(in_dim)]
            batch.append((zn, zd))
        out_c = mods["c"].forward_exact_batch(prep, [(list(zn), zd) for zn, zd in batch])
        out_py = mods["python"].forward_exact_batch(prep, [(list(zn), zd) for zn, zd in batch])
        assert out_c == out_py


def test_exact_forward_matches_fraction_arithmetic():
    gen = rng.substream(92, "kern-ref")
    in_dim = 3
    specs = _random_specs(gen, in_dim, [4, 2, 1])
    prep = kernels.prepare(in_dim, specs)
    for _ in range(25):
        zd = int(gen.integers(1, 1000))
        zn = [int(gen.integers(-2000, 2000)) for _ in range(in_dim)]
        nums, den = kernels.forward_exact(prep, zn, zd)
        got = [Fraction(v, den) for v in nums]
        # independent reference with Fraction arithmetic
        vec = [Fraction(n, zd) for n in zn]
        for rows, bias, relu in specs:
            vec = [sum(w * x for w, x in zip(row, vec)) + b
                   for row, b in zip(rows, bias)]
            if relu:
                vec = [max(v, Fraction(0)) for v in vec]
        assert got == vec


def test_exact_denominator_is_product_of_layer_denominators():
    prep = kernels.prepare(
        1,
        [
            ([[Fraction(1, 3)]], [Fraction(0)], True),
            ([[Fraction(1, 4)]], [Fraction(1, 2)], False),
        ],
    )
    nums, den = kernels.forward_exact(prep, [5], 7)
    assert den == 7 * 3 * 4
    assert Fraction(nums[0], den) == Fraction(5, 7) * Fraction(1, 3) * Fraction(1, 4) + Fraction(1, 2)


def test_forward_f64_validates_shape():
    prep = kernels.prepare(2, [([[Fraction(1), Fraction(1)]], [Fraction(0)], False)])
    with pytest.raises(ValueError):
        kernels.forward_f64(prep, np.zeros((4, 3)))


def test_relu_clamps_exact_numerators():
    prep = kernels.prepare(1, [([[Fraction(1)]], [Fraction(0)], True),
                               ([[Fraction(1)]], [Fraction(0)], False)])
    nums, den = kernels.forward_exact(prep, [-9], 2)
    assert Fraction(nums[0], den) == 0
