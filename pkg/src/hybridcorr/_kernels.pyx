# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for the hot per-step simulation loops.

Must stay bitwise-compatible with ``_kernels_py``: same operations, same
order, no FP contraction (see setup.py). Any semantic change here must be
mirrored there and vice versa.
"""

from libc.math cimport sqrt

import numpy as np

BACKEND = "compiled"


def ou_exact_path(double decay, double noise_scale, z):
    """Exact OU transition x[k+1] = decay * x[k] + noise_scale * z[k], x[0] = 0."""
    cdef double[::1] zv = np.ascontiguousarray(z, dtype=np.float64)
    cdef Py_ssize_t n = zv.shape[0]
    out_arr = np.empty(n + 1)
    cdef double[::1] out = out_arr
    cdef double x = 0.0
    cdef Py_ssize_t k
    out[0] = 0.0
    if noise_scale == 0.0:
        for k in range(n):
            out[k + 1] = 0.0
        return out_arr
    for k in range(n):
        x = decay * x + noise_scale * zv[k]
        out[k + 1] = x
    return out_arr


def heston_full_truncation(
    double s0,
    double v0,
    double dt,
    double kappa,
    double theta,
    double xi,
    base_drift,
    dw_s,
    dw_v,
    jumps=None,
):
    """Full-truncation Euler step loop for (log price, variance)."""
    cdef double[::1] base = np.ascontiguousarray(base_drift, dtype=np.float64)
    cdef double[::1] ws = np.ascontiguousarray(dw_s, dtype=np.float64)
    cdef double[::1] wv = np.ascontiguousarray(dw_v, dtype=np.float64)
    cdef Py_ssize_t n = ws.shape[0]
    cdef bint has_jumps = jumps is not None
    cdef double[::1] jp
    if has_jumps:
        jp = np.ascontiguousarray(jumps, dtype=np.float64)

    s_arr = np.empty(n + 1)
    v_arr = np.empty(n + 1)
    cdef double[::1] s_out = s_arr
    cdef double[::1] v_out = v_arr

    cdef double s = s0
    cdef double v = v0
    cdef double vp, sq
    cdef Py_ssize_t k
    s_out[0] = s0
    v_out[0] = v0 if v0 > 0.0 else 0.0
    for k in range(n):
        vp = v if v > 0.0 else 0.0
        sq = sqrt(vp)
        if has_jumps:
            s = s + (base[k] - 0.5 * vp) * dt + sq * ws[k] + jp[k]
        else:
            s = s + (base[k] - 0.5 * vp) * dt + sq * ws[k]
        v = v + kappa * (theta - vp) * dt + xi * sq * wv[k]
        s_out[k + 1] = s
        v_out[k + 1] = v if v > 0.0 else 0.0
    return s_arr, v_arr
