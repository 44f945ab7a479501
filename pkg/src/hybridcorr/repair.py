"""Positive-semidefinite testing and repair by clamping plus shrinking.

An indefinite draft M0 is replaced by the convex combination

    S(alpha) = (1 - alpha) M0 + alpha M1

where M1 is the block-diagonal matrix of calibrated inner correlations.
The optimal shrinking parameter alpha* (smallest alpha in [0, 1] with
S(alpha) PSD) is bracketed by bisection; the returned matrix uses the right
endpoint of the final bracket, which guarantees positive semidefiniteness.
Diagonal blocks coincide in M0 and M1, so they never change.

Entries are clamped into [-bound, bound] before shrinking: a wild entry from
a badly fitted linear system would otherwise push alpha* toward 1 and wipe
out every cross correlation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .blockmatrix import BlockCorrelationMatrix

DEFAULT_PSD_TOL = 1e-10
DEFAULT_CLAMP_BOUND = 0.999
DEFAULT_BISECTION_TOL = 1e-6


@dataclass(frozen=True)
class ShrinkResult:
    """Repaired matrix plus the shrinking diagnostics."""

    matrix: np.ndarray
    alpha_star: float
    clamp_count: int
    min_eigenvalue: float


def is_psd(matrix: np.ndarray, tolerance: float = DEFAULT_PSD_TOL) -> bool:
    """True iff the symmetrized matrix has min eigenvalue >= -tolerance.

    Implemented as a Cholesky factorization of M + shift * I, the cheapest
    reliable test inside a bisection loop; the shift is the tolerance scaled
    by the largest diagonal entry (floored at 1 for degenerate inputs).
    """
    M = np.asarray(matrix, dtype=float)
    if not np.all(np.isfinite(M)):
        return False  # LAPACK propagates NaN silently instead of failing
    M = (M + M.T) / 2.0
    shift = tolerance * max(float(np.max(np.diag(M))), 1.0)
    try:
        np.linalg.cholesky(M + shift * np.eye(M.shape[0]))
        return True
    except np.linalg.LinAlgError:
        return False


def clamp_cross_entries(
    matrix: np.ndarray,
    block_sizes: Sequence[int],
    bound: float = DEFAULT_CLAMP_BOUND,
) -> tuple[np.ndarray, int]:
    """Clamp off-diagonal-block entries into [-bound, bound].

    Diagonal blocks are never touched (calibrated data; out-of-range values
    there are a validation error upstream). Returns the clamped copy and the
    number of upper-triangle cross entries that moved.
    """
    if not 0.0 < bound <= 1.0:
        raise ValueError("clamp bound must be in (0, 1]")
    M = np.asarray(matrix, dtype=float).copy()
    offs = np.concatenate([[0], np.cumsum(block_sizes)]).astype(int)
    mask = np.ones(M.shape, dtype=bool)
    for i in range(len(block_sizes)):
        mask[offs[i]:offs[i + 1], offs[i]:offs[i + 1]] = False
    clipped = np.clip(M, -bound, bound)
    changed = mask & (clipped != M)
    count = int(np.count_nonzero(np.triu(changed, k=1)))
    M[mask] = clipped[mask]
    return M, count


def _combine(M0: np.ndarray, M1: np.ndarray, alpha: float) -> np.ndarray:
    S = (1.0 - alpha) * M0 + alpha * M1
    # entries equal in M0 and M1 (the diagonal blocks, by precondition) are
    # copied through bitwise instead of recombined
    same = M0 == M1
    S[same] = M1[same]
    return S


def shrink(
    M0: np.ndarray,
    M1: np.ndarray,
    tol: float = DEFAULT_BISECTION_TOL,
    psd_tol: float = DEFAULT_PSD_TOL,
) -> ShrinkResult:
    """Bisection for the optimal shrinking parameter.

    ``M0`` is the (clamped) draft, ``M1`` the PSD target with identical
    diagonal blocks. Returns S(xr) for the right bracket endpoint xr, with
    alpha_star = 0 short-circuited when M0 is already PSD.
    """
    M0 = np.asarray(M0, dtype=float)
    M1 = np.asarray(M1, dtype=float)
    if M0.shape != M1.shape:
        raise ValueError("M0 and M1 must have the same shape")
    if not is_psd(M1, psd_tol):
        raise ValueError("diagonal blocks must be positive semidefinite")
    if is_psd(M0, psd_tol):
        out = M0.copy()
        return ShrinkResult(out, 0.0, 0, float(np.linalg.eigvalsh(out).min()))

    xl, xr = 0.0, 1.0
    while xr - xl > tol:
        xm = (xl + xr) * 0.5
        if not is_psd(_combine(M0, M1, xm), psd_tol):
            xl = xm
        else:
            xr = xm
    out = _combine(M0, M1, xr)
    return ShrinkResult(out, xr, 0, float(np.linalg.eigvalsh(out).min()))


def block_diagonal_target(draft: BlockCorrelationMatrix) -> np.ndarray:
    """M1: the draft's diagonal blocks with all cross blocks zeroed."""
    M1 = np.zeros_like(draft.entries)
    for s in draft.block_slices():
        M1[s, s] = draft.entries[s, s]
    return M1


def repair(
    draft: BlockCorrelationMatrix,
    bound: float = DEFAULT_CLAMP_BOUND,
    tol: float = DEFAULT_BISECTION_TOL,
) -> ShrinkResult:
    """Clamp cross entries, then shrink toward the block-diagonal target."""
    if not np.all(np.isfinite(draft.entries)):
        raise ValueError("matrix has missing entries; run completion first")
    M1 = block_diagonal_target(draft)
    if not is_psd(M1):
        raise ValueError("diagonal blocks must be positive semidefinite")
    M0, count = clamp_cross_entries(draft.entries, draft.block_sizes, bound)
    res = shrink(M0, M1, tol)
    return ShrinkResult(res.matrix, res.alpha_star, count, res.min_eigenvalue)
