# cython: language_level=3, boundscheck=False, wraparound=False, initializedcheck=False
"""Compiled twins of the pure-Python kernels (see _pykernels.py).

The order of operations matches _pykernels exactly: per output unit the
accumulator starts at the bias and adds val*input in ascending stored order,
and relu compares `> 0.0`. Compiled with -ffp-contract=off so no FMA
contraction can change float64 results relative to the Python backend.
"""
import numpy as np


def forward_f64_batch(prep, Z):
    cdef double[:, ::1] cur = np.ascontiguousarray(Z, dtype=np.float64)
    cdef double[:, ::1] nxt
    cdef long long[::1] indptr
    cdef long long[::1] idx
    cdef double[::1] val
    cdef double[::1] bias
    cdef Py_ssize_t n = cur.shape[0]
    cdef Py_ssize_t s, i, p, k
    cdef bint relu
    cdef double acc
    out_arr = None
    for layer in prep.layers:
        indptr = layer.indptr
        idx = layer.idx
        val = layer.val_f64
        bias = layer.bias_f64
        relu = layer.relu
        k = layer.out_dim
        out_arr = np.empty((n, k), dtype=np.float64)
        nxt = out_arr
        for s in range(n):
            for i in range(k):
                acc = bias[i]
                for p in range(indptr[i], indptr[i + 1]):
                    acc = acc + val[p] * cur[s, idx[p]]
                if relu and not (acc > 0.0):
                    acc = 0.0
                nxt[s, i] = acc
        cur = nxt
    return out_arr


def forward_exact(prep, list zn, zd):
    cdef Py_ssize_t i, p, k, lo, hi
    cdef tuple indptr_t, idx_t, val_int, bias_int
    cdef bint relu
    cur = zn
    cd = zd
    for layer in prep.layers:
        indptr_t = layer.indptr_t
        idx_t = layer.idx_t
        val_int = layer.val_int
        bias_int = layer.bias_int
        relu = layer.relu
        k = layer.out_dim
        out = [0] * k
        for i in range(k):
            acc = bias_int[i] * cd
            lo = indptr_t[i]
            hi = indptr_t[i + 1]
            for p in range(lo, hi):
                acc = acc + val_int[p] * cur[<Py_ssize_t> idx_t[p]]
            if relu and acc < 0:
                acc = 0
            out[i] = acc
        cur = out
        cd = cd * layer.den
    return cur, cd


def forward_exact_batch(prep, list batch):
    cdef list results = []
    for zn, zd in batch:
        results.append(forward_exact(prep, zn, zd))
    return results
