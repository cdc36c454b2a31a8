"""Cumulative sufficient statistics for a stream of regression batches."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError


@dataclass
class BatchData:
    """One arriving batch ``(X, y)``; validated on construction."""

    X: np.ndarray
    y: np.ndarray
    batch_index: int = 0

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.X.ndim != 2:
            raise DataError(f"X must be 2-dimensional, got shape {self.X.shape}")
        if self.y.ndim != 1:
            raise DataError(f"y must be 1-dimensional, got shape {self.y.shape}")
        if self.X.shape[0] != self.y.shape[0]:
            raise DataError(f"X has {self.X.shape[0]} rows but y has {self.y.shape[0]} entries")
        if self.X.shape[0] < 1:
            raise DataError("batch must contain at least one observation")
        if not (np.all(np.isfinite(self.X)) and np.all(np.isfinite(self.y))):
            raise DataError("batch contains NaN or infinite values")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]


class CumulativeStats:
    """Running ``S = sum X'X``, ``U = sum X'y``, ``yy = sum y'y`` and counters.

    ``p`` may be left as ``None``; the first ingested batch then fixes it.
    Each ingest builds the new arrays first and swaps them in afterwards, so a
    reader holding a reference to ``S`` never observes a half-applied batch.
    """

    def __init__(self, p: int | None = None):
        self.p = p
        self.N = 0
        self.b = 0
        self.yy = 0.0
        if p is None:
            self.S = None
            self.U = None
        else:
            self.S = np.zeros((p, p))
            self.U = np.zeros(p)

    def ingest(self, batch: BatchData) -> "CumulativeStats":
        if self.p is None:
            self.p = batch.p
            self.S = np.zeros((batch.p, batch.p))
            self.U = np.zeros(batch.p)
        elif batch.p != self.p:
            raise DataError(f"batch has {batch.p} columns, stream dimension is {self.p}")
        X, y = batch.X, batch.y
        G = X.T @ X
        # mirror so both triangles are bit-identical
        G = np.triu(G) + np.triu(G, 1).T
        S = self.S + G
        U = self.U + X.T @ y
        yy = self.yy + float(y @ y)
        self.S, self.U, self.yy = S, U, yy
        self.N += batch.n
        self.b += 1
        return self

    def submatrices(self, r: int) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(S[-r,-r], S[-r,r])`` for a 0-based coordinate ``r``.

        Both are fresh copies (``O(p^2)``), so the caller may keep them across
        later ingests.
        """
        return project_submatrices(self.S, r)

    def copy(self) -> "CumulativeStats":
        out = CumulativeStats(self.p)
        if self.p is not None:
            out.S = self.S.copy()
            out.U = self.U.copy()
        out.N, out.b, out.yy = self.N, self.b, self.yy
        return out


def ingest_batch(stats: CumulativeStats, batch: BatchData) -> CumulativeStats:
    return stats.ingest(batch)


def project_submatrices(S: np.ndarray, r: int) -> tuple[np.ndarray, np.ndarray]:
    p = S.shape[0]
    if not 0 <= r < p:
        raise IndexError(f"coordinate {r} out of range for dimension {p}")
    keep = np.r_[0:r, r + 1:p]
    return S[np.ix_(keep, keep)], S[keep, r]


def cumulative_size_sums(sizes) -> tuple[float, float]:
    """``(sum n_j/N_j, sum n_j/sqrt(N_j))`` for a batch-size schedule.

    These are the quantities that govern how errors from early, small batches
    accumulate; they are bounded by ``1 + log(N_b/n_1)`` and ``2 sqrt(N_b)``.
    """
    total = 0
    s1 = s2 = 0.0
    for n in sizes:
        if n < 1:
            raise ValueError("batch sizes must be positive")
        total += n
        s1 += n / total
        s2 += n / math.sqrt(total)
    return s1, s2
