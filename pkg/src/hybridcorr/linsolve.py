"""Dense linear solve with partial pivoting for the small coefficient systems.

Systems here are at most 4x4, so a direct elimination beats any library
dispatch overhead and gives an explicit singularity contract: a pivot below
1e-14 * max|A| raises SingularSystemError.
"""

from __future__ import annotations

import numpy as np

PIVOT_RTOL = 1e-14


class SingularSystemError(ValueError):
    """Raised when elimination meets a pivot below the singularity threshold."""


def solve_dense(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve A x = b by Gaussian elimination with partial pivoting."""
    A = np.array(A, dtype=float)
    b = np.array(b, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n) or b.shape != (n,):
        raise ValueError(f"incompatible shapes {A.shape} and {b.shape}")
    threshold = PIVOT_RTOL * np.abs(A).max()

    for k in range(n - 1):
        p = k + int(np.argmax(np.abs(A[k:, k])))
        if abs(A[p, k]) < threshold:
            raise SingularSystemError(f"singular system: pivot {A[p, k]:.3e} in column {k}")
        if p != k:
            A[[k, p]] = A[[p, k]]
            b[[k, p]] = b[[p, k]]
        for i in range(k + 1, n):
            if A[i, k] != 0.0:
                m = A[i, k] / A[k, k]
                A[i, k + 1:] -= m * A[k, k + 1:]
                b[i] -= m * b[k]
    if abs(A[n - 1, n - 1]) < threshold:
        raise SingularSystemError(f"singular system: pivot {A[n - 1, n - 1]:.3e} in column {n - 1}")

    x = np.empty(n)
    for k in range(n - 1, -1, -1):
        x[k] = (b[k] - A[k, k + 1:] @ x[k + 1:]) / A[k, k]
    return x
