"""Labeled block correlation matrices and block assembly.

A block correlation matrix records, next to the entries, how the rows/columns
split into per-component diagonal blocks and which state each row represents.
Diagonal blocks come from volatility-surface calibration and are preserved by
every downstream transformation; cross blocks are estimated or completed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

SYM_TOL = 1e-12


@dataclass(frozen=True)
class BlockCorrelationMatrix:
    """Square matrix with recorded block boundaries and per-state labels.

    ``entries`` may violate [-1, 1] for raw estimation drafts; ``finalized``
    distinguishes repaired/validated matrices from such drafts.
    """

    entries: np.ndarray
    block_sizes: tuple[int, ...]
    labels: tuple[str, ...]

    def __init__(self, entries, block_sizes, labels=None):
        entries = np.asarray(entries, dtype=float)
        block_sizes = tuple(int(b) for b in block_sizes)
        n = sum(block_sizes)
        if entries.shape != (n, n):
            raise ValueError(
                f"matrix shape {entries.shape} does not match block sizes {block_sizes}"
            )
        if labels is None:
            labels = tuple(
                f"{i}.{k}" for i, b in enumerate(block_sizes) for k in range(b)
            )
        labels = tuple(labels)
        if len(labels) != n:
            raise ValueError(f"{len(labels)} labels for {n} states")
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "block_sizes", block_sizes)
        object.__setattr__(self, "labels", labels)

    @property
    def n_states(self) -> int:
        return self.entries.shape[0]

    @property
    def n_components(self) -> int:
        return len(self.block_sizes)

    def block_slices(self) -> list[slice]:
        offs = np.concatenate([[0], np.cumsum(self.block_sizes)])
        return [slice(int(offs[i]), int(offs[i + 1])) for i in range(len(self.block_sizes))]

    def diagonal_block(self, i: int) -> np.ndarray:
        s = self.block_slices()[i]
        return self.entries[s, s].copy()

    def cross_block(self, i: int, j: int) -> np.ndarray:
        sl = self.block_slices()
        return self.entries[sl[i], sl[j]].copy()

    def cross_mask(self) -> np.ndarray:
        """Boolean mask, True on off-diagonal-block entries."""
        mask = np.ones(self.entries.shape, dtype=bool)
        for s in self.block_slices():
            mask[s, s] = False
        return mask

    def is_finalized(self, tol: float = SYM_TOL) -> bool:
        """Unit diagonal, symmetric and all entries in [-1, 1] (to ``tol``)."""
        M = self.entries
        return bool(
            np.abs(np.diag(M) - 1.0).max() <= tol
            and np.abs(M - M.T).max() <= tol
            and np.abs(M).max() <= 1.0 + tol
        )

    def with_entries(self, entries: np.ndarray) -> "BlockCorrelationMatrix":
        return BlockCorrelationMatrix(entries, self.block_sizes, self.labels)


def assemble_block_matrix(
    diagonal_blocks: Sequence[np.ndarray],
    cross_blocks: Optional[Mapping[tuple[int, int], np.ndarray]] = None,
    labels: Optional[Sequence[str]] = None,
) -> BlockCorrelationMatrix:
    """Assemble diagonal blocks and (i, j) cross blocks into one matrix.

    Cross block (j, i) is filled with the transpose of (i, j); missing cross
    blocks default to zero. Raises ValueError on dimension mismatches or
    invalid diagonal blocks (non-square, non-symmetric, non-unit diagonal).
    """
    blocks = [np.asarray(b, dtype=float) for b in diagonal_blocks]
    sizes = []
    for i, b in enumerate(blocks):
        if b.ndim != 2 or b.shape[0] != b.shape[1]:
            raise ValueError(f"diagonal block {i} is not square: shape {b.shape}")
        if np.abs(b - b.T).max() > SYM_TOL:
            raise ValueError(f"diagonal block {i} is not symmetric")
        if np.abs(np.diag(b) - 1.0).max() > SYM_TOL:
            raise ValueError(f"diagonal block {i} does not have unit diagonal")
        sizes.append(b.shape[0])
    sizes = tuple(sizes)
    n = sum(sizes)
    offs = np.concatenate([[0], np.cumsum(sizes)]).astype(int)

    M = np.zeros((n, n))
    for i, b in enumerate(blocks):
        M[offs[i]:offs[i + 1], offs[i]:offs[i + 1]] = b

    for (i, j), cb in (cross_blocks or {}).items():
        if i == j:
            raise ValueError(f"cross block key ({i}, {j}) addresses a diagonal block")
        cb = np.asarray(cb, dtype=float)
        if i > j:
            i, j, cb = j, i, cb.T
        if cb.shape != (sizes[i], sizes[j]):
            raise ValueError(
                f"cross block ({i}, {j}) has shape {cb.shape}, "
                f"expected {(sizes[i], sizes[j])}"
            )
        M[offs[i]:offs[i + 1], offs[j]:offs[j + 1]] = cb
        M[offs[j]:offs[j + 1], offs[i]:offs[i + 1]] = cb.T

    return BlockCorrelationMatrix(M, sizes, labels)
