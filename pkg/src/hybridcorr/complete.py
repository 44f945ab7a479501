"""Filling missing variance correlations via de-correlated Brownian motions.

When a component's variance proxy series is unavailable, its cross
correlations cannot be estimated. Writing each two-state component's
Brownians as W = L Z with L the lower Cholesky factor of the inner 2x2
correlation and assuming the de-correlated variance driver carries no cross
correlation, the cross block L_i Omega L_j^T collapses to rank one and the
missing entries follow from the observed ones:

    corr(p, v_j) = corr(p, s_j) * rho_j        (any outside state p)

Applying the rule on both sides gives corr(v_i, v_j) = corr(s_i, s_j)
* rho_i * rho_j when both variances are missing. The filled cross blocks are
exactly rank 1 by construction.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .blockmatrix import BlockCorrelationMatrix
from .models import KIND_BATES, KIND_HESTON, HybridSystemSpec


@dataclass(frozen=True)
class InnerCholesky:
    """Lower Cholesky factor of a two-state inner correlation block."""

    rho: float

    @property
    def L(self) -> np.ndarray:
        return np.array([[1.0, 0.0], [self.rho, np.sqrt(1.0 - self.rho**2)]])

    def reconstruct_cross(self, omega: np.ndarray, other: "InnerCholesky") -> np.ndarray:
        """L_i Omega L_j^T, the cross block implied by de-correlated drivers."""
        return self.L @ np.asarray(omega, dtype=float) @ other.L.T


def complete_g2_heston(rho_x_s: float, rho_y_s: float, rho_j: float) -> tuple[float, float]:
    """Variance column of a rates/Heston cross block from its stock column."""
    return rho_x_s * rho_j, rho_y_s * rho_j


def complete_heston_heston(
    rho_s_s: float, rho_i: float, rho_j: float
) -> tuple[float, float, float]:
    """(corr(s_i, v_j), corr(v_i, s_j), corr(v_i, v_j)) from corr(s_i, s_j)."""
    return rho_s_s * rho_j, rho_s_s * rho_i, rho_s_s * rho_i * rho_j


def complete_panel(
    draft: BlockCorrelationMatrix,
    system_spec: HybridSystemSpec,
    mask: Optional[np.ndarray] = None,
) -> BlockCorrelationMatrix:
    """Fill masked cross entries of the draft via the de-correlation rule.

    ``mask`` defaults to the NaN entries of the draft. Only entries in a
    variance row/column of a Heston-family component are completable; a
    masked stock-stock (or rate) entry raises ValueError. Unmasked entries
    are returned unchanged.
    """
    M = draft.entries.copy()
    if mask is None:
        mask = np.isnan(M)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != M.shape:
        raise ValueError("mask shape does not match the matrix")
    if not mask.any():
        return draft

    labels = draft.labels
    n = len(labels)
    # per state: (component index, is_heston_variance, row of the sibling stock)
    comp_of = np.empty(n, dtype=int)
    is_var = np.zeros(n, dtype=bool)
    stock_row = np.full(n, -1, dtype=int)
    rho_inner = np.zeros(n)
    for r, lab in enumerate(labels):
        ci, state = lab.split(".", 1)
        ci = int(ci)
        comp_of[r] = ci
        comp = system_spec.components[ci]
        if comp.kind in (KIND_HESTON, KIND_BATES) and state == "v":
            is_var[r] = True
            stock_row[r] = labels.index(f"{ci}.s")
            rho_inner[r] = comp.inner_rho

    pending = [(r, c) for r in range(n) for c in range(r + 1, n) if mask[r, c] or mask[c, r]]
    for r, c in pending:
        if comp_of[r] == comp_of[c]:
            raise ValueError(
                f"masked entry ({labels[r]}, {labels[c]}) lies in a diagonal block; "
                "inner correlations must come from calibration"
            )
    progress = True
    while pending and progress:
        progress = False
        rest = []
        for r, c in pending:
            value = None
            if is_var[c] and not _masked(mask, M, r, stock_row[c]):
                value = M[r, stock_row[c]] * rho_inner[c]
            elif is_var[r] and not _masked(mask, M, stock_row[r], c):
                value = M[stock_row[r], c] * rho_inner[r]
            if value is None:
                rest.append((r, c))
            else:
                M[r, c] = M[c, r] = value
                mask[r, c] = mask[c, r] = False
                progress = True
        pending = rest
    if pending:
        r, c = pending[0]
        raise ValueError(
            f"entry ({labels[r]}, {labels[c]}) is not completable by the "
            "de-correlation rule; it requires observed stock series"
        )
    return draft.with_entries(M)


def _masked(mask: np.ndarray, M: np.ndarray, r: int, c: int) -> bool:
    return bool(mask[r, c]) or not np.isfinite(M[r, c])
