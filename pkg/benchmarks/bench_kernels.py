"""Timing comparison of the compiled and pure-Python forward kernels.

Runs the same prepared networks through every importable backend on both
evaluation paths (float64 batch, exact rational batch), asserts the outputs
are bit-for-bit identical across backends, and prints a throughput table.

    python3 benchmarks/bench_kernels.py
    python3 benchmarks/bench_kernels.py --float-batch 100000 --repeats 5
"""
import argparse
import time
from fractions import Fraction

import numpy as np

from hardnet import kernels, rng
from hardnet.families import build_lwr, build_parity, lwr_instance, parity_spec
from hardnet.gadgets import build_n2, gadget_params
from hardnet.lift import GAUSSIAN, lift_compressed, lift_naive
from hardnet.relu_ir import ReluNetwork


def _prepared(net: ReluNetwork) -> kernels.PreparedNet:
    specs = [
        (layer.weights, layer.bias, layer.activation.name == "RELU")
        for layer in net.layers
    ]
    return kernels.prepare(net.input_dim, specs)


def _networks() -> list[tuple[str, ReluNetwork]]:
    parity = build_parity(parity_spec(10, {1, 3, 7}))
    lwr = build_lwr(lwr_instance(2, 2, 8, (3, 1)))
    return [
        ("parity d=10 naive lift", lift_naive(parity).net),
        ("lwr 2/8/2 compressed lift", lift_compressed(lwr).net),
        ("bump gadget d=16", build_n2(gadget_params(16))),
    ]


def _time(fn, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=rng.default_seed())
    ap.add_argument("--float-batch", type=int, default=20000,
                    help="rows per float64 forward pass (default 20000)")
    ap.add_argument("--exact-batch", type=int, default=2000,
                    help="rows per exact rational forward pass (default 2000)")
    ap.add_argument("--repeats", type=int, default=3,
                    help="timing repeats; the best is reported (default 3)")
    args = ap.parse_args(argv)

    backends = kernels.backends()
    print(f"backends available: {', '.join(sorted(backends))} "
          f"(import selected: {kernels.BACKEND})")
    header = (f"{'network':<28} {'path':<8} {'backend':<8} "
              f"{'rows':>8} {'seconds':>10} {'rows/s':>12} {'speedup':>8}")
    print(header)
    print("-" * len(header))

    for name, net in _networks():
        prep = _prepared(net)
        Z = GAUSSIAN.half_draw(rng.substream(args.seed, f"bench-{net.input_dim}"),
                               (args.float_batch, net.input_dim))
        exact_rows = [
            (
                [Fraction(float(v)).numerator * (1 << 32) // Fraction(float(v)).denominator
                 for v in row],
                1 << 32,
            )
            for row in Z[: args.exact_batch]
        ]

        for path, batch_n, run_of in (
            ("float64", args.float_batch,
             lambda mod: mod.forward_f64_batch(prep, Z)),
            ("exact", args.exact_batch,
             lambda mod: mod.forward_exact_batch(prep, list(exact_rows))),
        ):
            results = {}
            times = {}
            for bname in sorted(backends):
                mod = backends[bname]
                results[bname] = run_of(mod)
                times[bname] = _time(lambda: run_of(mod), args.repeats)
            if "c" in results and "python" in results:
                if path == "float64":
                    assert results["c"].tobytes() == results["python"].tobytes(), (
                        f"{name}: float64 outputs differ between backends")
                else:
                    assert results["c"] == results["python"], (
                        f"{name}: exact outputs differ between backends")
            base = times.get("python")
            for bname in sorted(backends):
                sec = times[bname]
                speed = f"{base / sec:6.1f}x" if base else "n/a"
                print(f"{name:<28} {path:<8} {bname:<8} {batch_n:>8} "
                      f"{sec:>10.4f} {batch_n / sec:>12.0f} {speed:>8}")
    print("\ncross-backend outputs verified bit-for-bit identical on every row")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
