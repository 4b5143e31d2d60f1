"""Forward-evaluation kernels with an optional compiled fast path.

`prepare` lowers a network's layers to a backend-neutral sparse-row form;
the forward functions run it in one of two semantics:

 - FLOAT64: per output unit, the accumulator starts at the bias and adds
   weight*input over the stored nonzero weights in ascending input index;
   relu(x) is `x if x > 0.0 else 0.0`. No FMA, no reordering.
 - EXACT: each layer's rationals are scaled to a common integer denominator
   D; numerators propagate as arbitrary-precision integers and the running
   denominator multiplies by D per layer; relu clamps the numerator at 0.

The compiled backend (_ckernels, Cython) is selected at import when present
unless HARDNET_FORCE_PY_KERNELS=1; the pure-Python backend (_pykernels)
implements the identical order of operations, so the two backends return
bit-for-bit equal float64 values and identical exact integers.
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from fractions import Fraction
from math import lcm
from typing import Sequence

import numpy as np

from . import _pykernels

_impl = _pykernels
BACKEND = "python"
if os.environ.get("HARDNET_FORCE_PY_KERNELS", "") != "1":
    try:
        from . import _ckernels

        _impl = _ckernels
        BACKEND = "c"
    except ImportError:
        pass


def backends() -> dict[str, object]:
    """Importable backend modules by name (for tests and benchmarks)."""
    found: dict[str, object] = {"python": _pykernels}
    try:
        from . import _ckernels as c_mod

        found["c"] = c_mod
    except ImportError:
        pass
    return found


@dataclass(frozen=True)
class PreparedLayer:
    """One affine layer in sparse-row form, with float64 and integer views."""

    indptr: np.ndarray   # int64, (out_dim + 1,)
    idx: np.ndarray      # int64, (nnz,), ascending within each row
    val_f64: np.ndarray  # float64, (nnz,)
    bias_f64: np.ndarray  # float64, (out_dim,)
    indptr_t: tuple      # same as indptr, as Python ints
    idx_t: tuple         # same as idx, as Python ints
    val_int: tuple       # numerators scaled by den, parallel to idx
    bias_int: tuple      # biases scaled by den
    den: int             # positive common denominator of the layer
    relu: bool
    in_dim: int
    out_dim: int


@dataclass(frozen=True)
class PreparedNet:
    input_dim: int
    layers: tuple[PreparedLayer, ...]
    out_dim: int


def prepare(
    input_dim: int,
    layer_specs: Sequence[tuple[Sequence[Sequence[Fraction]], Sequence[Fraction], bool]],
) -> PreparedNet:
    """Lower (weights, bias, relu) triples of exact rationals to kernel form."""
    if not layer_specs:
        raise ValueError("a network needs at least one layer")
    prepared = []
    cur_dim = input_dim
    for rows, bias, relu in layer_specs:
        out_dim = len(rows)
        den = 1
        for row in rows:
            for w in row:
                den = lcm(den, w.denominator)
        for b in bias:
            den = lcm(den, b.denominator)
        indptr = [0]
        idx: list[int] = []
        val_int: list[int] = []
        val_f64: list[float] = []
        for row in rows:
            if len(row) != cur_dim:
                raise ValueError("layer row width does not match input width")
            for j, w in enumerate(row):
                if w != 0:
                    idx.append(j)
                    val_int.append(w.numerator * (den // w.denominator))
                    val_f64.append(float(w))
            indptr.append(len(idx))
        bias_int = tuple(b.numerator * (den // b.denominator) for b in bias)
        prepared.append(
            PreparedLayer(
                indptr=np.asarray(indptr, dtype=np.int64),
                idx=np.asarray(idx, dtype=np.int64),
                val_f64=np.asarray(val_f64, dtype=np.float64),
                bias_f64=np.asarray([float(b) for b in bias], dtype=np.float64),
                indptr_t=tuple(indptr),
                idx_t=tuple(idx),
                val_int=tuple(val_int),
                bias_int=bias_int,
                den=den,
                relu=relu,
                in_dim=cur_dim,
                out_dim=out_dim,
            )
        )
        cur_dim = out_dim
    return PreparedNet(input_dim=input_dim, layers=tuple(prepared), out_dim=cur_dim)


def forward_f64(prep: PreparedNet, Z: np.ndarray) -> np.ndarray:
    """Batched float64 forward pass: (n, input_dim) -> (n, out_dim)."""
    Z = np.ascontiguousarray(Z, dtype=np.float64)
    if Z.ndim != 2 or Z.shape[1] != prep.input_dim:
        raise ValueError(f"expected shape (n, {prep.input_dim}), got {Z.shape}")
    return _impl.forward_f64_batch(prep, Z)


def forward_exact(prep: PreparedNet, zn: Sequence[int], zd: int) -> tuple[list[int], int]:
    """Exact forward pass of one input given as numerators zn over denominator zd."""
    if len(zn) != prep.input_dim:
        raise ValueError(f"expected {prep.input_dim} coordinates, got {len(zn)}")
    if zd <= 0:
        raise ValueError("input denominator must be positive")
    return _impl.forward_exact(prep, list(zn), zd)


def forward_exact_batch(
    prep: PreparedNet, batch: Sequence[tuple[Sequence[int], int]]
) -> list[tuple[list[int], int]]:
    """Exact forward pass over a batch of (numerators, denominator) inputs."""
    return _impl.forward_exact_batch(prep, [(list(zn), zd) for zn, zd in batch])
