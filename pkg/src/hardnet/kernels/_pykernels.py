"""Pure-Python reference kernels.

These define the semantics the compiled backend must reproduce bit for bit:
ascending-index accumulation starting from the bias, relu as a `> 0.0` test,
and per-layer integer scaling on the exact path. Python float arithmetic is
IEEE binary64, so matching the loop order is sufficient for bit identity.
"""
from __future__ import annotations

import numpy as np


def forward_f64_batch(prep, Z: np.ndarray) -> np.ndarray:
    n = Z.shape[0]
    cur = Z.tolist()
    for layer in prep.layers:
        indptr = layer.indptr_t
        idx = layer.idx_t
        val = layer.val_f64.tolist()
        bias = layer.bias_f64.tolist()
        relu = layer.relu
        k = layer.out_dim
        nxt = []
        for s in range(n):
            row = cur[s]
            orow = [0.0] * k
            for i in range(k):
                acc = bias[i]
                for p in range(indptr[i], indptr[i + 1]):
                    acc += val[p] * row[idx[p]]
                if relu and not (acc > 0.0):
                    acc = 0.0
                orow[i] = acc
            nxt.append(orow)
        cur = nxt
    return np.asarray(cur, dtype=np.float64).reshape(n, prep.out_dim)


def forward_exact(prep, zn: list[int], zd: int) -> tuple[list[int], int]:
    cur = zn
    cd = zd
    for layer in prep.layers:
        indptr = layer.indptr_t
        idx = layer.idx_t
        val = layer.val_int
        bias = layer.bias_int
        relu = layer.relu
        out = []
        for i in range(layer.out_dim):
            acc = bias[i] * cd
            for p in range(indptr[i], indptr[i + 1]):
                acc += val[p] * cur[idx[p]]
            if relu and acc < 0:
                acc = 0
            out.append(acc)
        cur = out
        cd = cd * layer.den
    return cur, cd


def forward_exact_batch(prep, batch):
    return [forward_exact(prep, zn, zd) for zn, zd in batch]
