"""Dilated 1-D convolution kernels with two interchangeable backends.

The same index contract is implemented twice:

* ``numpy`` — gathers taps into an im2col matrix and hands the contraction
  to BLAS.  This is the default: on typical layer shapes the GEMM path is
  roughly an order of magnitude faster than scalar JIT loops on one core
  (see benchmarks/bench_kernels.py).
* ``numba`` — straight @njit loops, no temporaries beyond the output.

Select with the ``NXSG_BACKEND`` environment variable: ``auto`` (default,
resolves to numpy), ``numpy``, or ``numba``.  Every output element is
written by exactly one loop iteration, so both backends are deterministic.

Index contract, shared by forward and both gradients: with kernel length L,
centre tap c = (L-1)//2 and offset(l) = dilation*(l-c),

    out[co, t] = sum_{ci, l} k[co, ci, l] * x[ci, t + offset(l)]

with out-of-range taps reading zero ("same" padding).
"""

import os
import warnings

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None


def _resolve_backend() -> str:
    choice = os.environ.get("NXSG_BACKEND", "auto").strip().lower()
    if choice in ("", "auto"):
        return "numpy"
    if choice == "numpy":
        return "numpy"
    if choice == "numba":
        if numba is None:
            warnings.warn("NXSG_BACKEND=numba but numba is not importable; "
                          "falling back to numpy", RuntimeWarning)
            return "numpy"
        return "numba"
    warnings.warn(f"unknown NXSG_BACKEND={choice!r}; using numpy",
                  RuntimeWarning)
    return "numpy"


BACKEND = _resolve_backend()


# ---------------------------------------------------------------- numpy ----

def _im2col(x: np.ndarray, L: int, dilation: int) -> np.ndarray:
    """Stack the L dilated taps of x (cin, T) into a (cin*L, T) matrix."""
    cin, T = x.shape
    c = (L - 1) // 2
    cols = np.zeros((cin * L, T))
    for l in range(L):
        off = dilation * (l - c)
        lo, hi = max(0, -off), min(T, T - off)
        if lo < hi:
            cols[l * cin:(l + 1) * cin, lo:hi] = x[:, lo + off:hi + off]
    return cols


def conv1d_forward_np(x, k, dilation):
    cout, cin, L = k.shape
    cols = _im2col(x, L, dilation)
    kmat = k.transpose(0, 2, 1).reshape(cout, cin * L)
    return kmat @ cols


def conv1d_backward_kernel_np(x, g, L, dilation):
    cout, T = g.shape
    cin = x.shape[0]
    cols = _im2col(x, L, dilation)
    gk = (g @ cols.T).reshape(cout, L, cin)
    return np.ascontiguousarray(gk.transpose(0, 2, 1))


def conv1d_backward_input_np(k, g, dilation):
    cout, cin, L = k.shape
    T = g.shape[1]
    c = (L - 1) // 2
    kmat = k.transpose(0, 2, 1).reshape(cout, cin * L)
    cols_g = kmat.T @ g
    gx = np.zeros((cin, T))
    for l in range(L):
        off = dilation * (l - c)
        lo, hi = max(0, -off), min(T, T - off)
        if lo < hi:
            gx[:, lo + off:hi + off] += cols_g[l * cin:(l + 1) * cin, lo:hi]
    return gx


# ---------------------------------------------------------------- numba ----

if numba is not None:

    @numba.njit(cache=True)
    def _conv1d_forward_nb(x, k, dilation):
        cin, T = x.shape
        cout, _, L = k.shape
        c = (L - 1) // 2
        out = np.zeros((cout, T))
        for co in range(cout):
            for l in range(L):
                off = dilation * (l - c)
                lo = max(0, -off)
                hi = min(T, T - off)
                for ci in range(cin):
                    w = k[co, ci, l]
                    for t in range(lo, hi):
                        out[co, t] += w * x[ci, t + off]
        return out

    @numba.njit(cache=True)
    def _conv1d_backward_kernel_nb(x, g, L, dilation):
        cin, T = x.shape
        cout = g.shape[0]
        c = (L - 1) // 2
        gk = np.zeros((cout, cin, L))
        for co in range(cout):
            for l in range(L):
                off = dilation * (l - c)
                lo = max(0, -off)
                hi = min(T, T - off)
                for ci in range(cin):
                    acc = 0.0
                    for t in range(lo, hi):
                        acc += g[co, t] * x[ci, t + off]
                    gk[co, ci, l] = acc
        return gk

    @numba.njit(cache=True)
    def _conv1d_backward_input_nb(k, g, dilation, T):
        cout, cin, L = k.shape
        c = (L - 1) // 2
        gx = np.zeros((cin, T))
        for ci in range(cin):
            for co in range(cout):
                for l in range(L):
                    off = dilation * (l - c)
                    lo = max(0, -off)
                    hi = min(T, T - off)
                    w = k[co, ci, l]
                    for t in range(lo, hi):
                        gx[ci, t + off] += w * g[co, t]
        return gx

    def conv1d_forward_nb(x, k, dilation):
        return _conv1d_forward_nb(np.ascontiguousarray(x),
                                  np.ascontiguousarray(k), dilation)

    def conv1d_backward_kernel_nb(x, g, L, dilation):
        return _conv1d_backward_kernel_nb(np.ascontiguousarray(x),
                                          np.ascontiguousarray(g), L, dilation)

    def conv1d_backward_input_nb(k, g, dilation):
        return _conv1d_backward_input_nb(np.ascontiguousarray(k),
                                         np.ascontiguousarray(g), dilation,
                                         g.shape[1])


if BACKEND == "numba":
    conv1d_forward = conv1d_forward_nb
    conv1d_backward_kernel = conv1d_backward_kernel_nb
    conv1d_backward_input = conv1d_backward_input_nb
else:
    conv1d_forward = conv1d_forward_np
    conv1d_backward_kernel = conv1d_backward_kernel_np
    conv1d_backward_input = conv1d_backward_input_np
