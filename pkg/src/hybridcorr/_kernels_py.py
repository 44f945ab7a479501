"""Pure Python/numpy kernels: fallback when the compiled extension is absent.

These are the reference semantics. The Cython twins in ``_kernels.pyx`` run
the same floating-point operations in the same order (compiled with FP
contraction off), so both backends produce bitwise-identical paths. A parity
test in the suite enforces this.
"""

from __future__ import annotations

from math import sqrt

import numpy as np
from scipy.signal import lfilter

BACKEND = "python"


def ou_exact_path(decay: float, noise_scale: float, z: np.ndarray) -> np.ndarray:
    """Exact OU transition x[k+1] = decay * x[k] + noise_scale * z[k], x[0] = 0.

    ``z`` are unit-variance normalized increments. A one-pole IIR filter
    evaluates the recursion in C with the same two-flop update as the naive
    loop, so this is fast without changing the arithmetic.
    """
    z = np.ascontiguousarray(z, dtype=np.float64)
    out = np.empty(z.size + 1)
    out[0] = 0.0
    if noise_scale == 0.0:
        out[1:] = 0.0
        return out
    out[1:] = lfilter([noise_scale], [1.0, -decay], z)
    return out


def heston_full_truncation(
    s0: float,
    v0: float,
    dt: float,
    kappa: float,
    theta: float,
    xi: float,
    base_drift: np.ndarray,
    dw_s: np.ndarray,
    dw_v: np.ndarray,
    jumps: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Full-truncation Euler step loop for (log price, variance).

    Internal variance state may go negative; drift and diffusion use its
    positive part and the stored path is the positive part, so every
    returned variance value is >= 0. ``base_drift[k]`` carries
    r_k - q - jump_compensator, per step to allow a stochastic short rate.
    ``jumps[k]``, when given, is added to the log price at step k.
    """
    n = len(dw_s)
    s_out = np.empty(n + 1)
    v_out = np.empty(n + 1)
    s_out[0] = s0
    v_out[0] = v0 if v0 > 0.0 else 0.0

    base = np.ascontiguousarray(base_drift, dtype=np.float64).tolist()
    ws = np.ascontiguousarray(dw_s, dtype=np.float64).tolist()
    wv = np.ascontiguousarray(dw_v, dtype=np.float64).tolist()
    jp = None if jumps is None else np.ascontiguousarray(jumps, dtype=np.float64).tolist()

    s = float(s0)
    v = float(v0)
    for k in range(n):
        vp = v if v > 0.0 else 0.0
        sq = sqrt(vp)
        if jp is None:
            s = s + (base[k] - 0.5 * vp) * dt + sq * ws[k]
        else:
            s = s + (base[k] - 0.5 * vp) * dt + sq * ws[k] + jp[k]
        v = v + kappa * (theta - vp) * dt + xi * sq * wv[k]
        s_out[k + 1] = s
        v_out[k + 1] = v if v > 0.0 else 0.0
    return s_out, v_out
