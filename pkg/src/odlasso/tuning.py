"""Adaptive choice of the lasso penalty along the stream.

The first batch is tuned by ordinary K-fold cross-validation.  Every later
batch scores each candidate's previous estimate on the newly arrived data
(rolling-origin evaluation) and keeps the candidate with the smallest
prediction error.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .prox import SolverConfig, solve_l1
from .suffstats import BatchData

FIXED = "fixed"
SCALED = "scaled"


@dataclass
class CVReport:
    seed: int
    folds: int
    fold_of_row: np.ndarray
    cv_error: np.ndarray
    selected: int


@dataclass
class TuningState:
    """Candidate grid plus the per-batch selection history.

    In ``fixed`` mode the grid holds penalty values directly.  In ``scaled``
    mode it holds constants ``C`` and the penalty at cumulative size ``N`` is
    ``C * sqrt(log(p) / N)``.
    """

    grid: tuple
    mode: str = FIXED
    selected: list = field(default_factory=list)
    pe_table: list = field(default_factory=list)
    cv: CVReport | None = None

    def __post_init__(self):
        self.grid = tuple(float(g) for g in self.grid)
        if not self.grid:
            raise ValueError("tuning grid is empty")
        if any(g < 0 for g in self.grid):
            raise ValueError("tuning grid values must be non-negative")
        if any(b <= a for a, b in zip(self.grid, self.grid[1:])):
            raise ValueError("tuning grid must be strictly increasing")
        if self.mode not in (FIXED, SCALED):
            raise ValueError(f"unknown grid mode {self.mode!r}")

    def penalty(self, value: float, p: int, N: int) -> float:
        if self.mode == FIXED:
            return value
        return value * math.sqrt(math.log(p) / N)

    def penalties(self, p: int, N: int) -> list[float]:
        return [self.penalty(g, p, N) for g in self.grid]


def prediction_error(batch: BatchData, beta) -> float:
    """Mean squared error of ``beta`` on ``batch``."""
    beta = np.asarray(beta, dtype=float)
    if batch.p != beta.shape[0]:
        raise DataError(f"batch has {batch.p} columns, coefficient vector has {beta.shape[0]}")
    resid = batch.y - batch.X @ beta
    return float(resid @ resid) / batch.n


def argmin_smallest(values) -> int:
    """Index of the minimum; ties go to the earliest (smallest-penalty) entry."""
    values = list(values)
    if not values:
        raise ValueError("empty candidate list")
    best = 0
    for i, v in enumerate(values):
        if v < values[best]:
            best = i
    return best


def select_lambda(state: TuningState, batch: BatchData, tracks) -> float:
    """Pick the grid value whose previous estimate predicts ``batch`` best.

    ``tracks`` must be aligned with ``state.grid`` and still hold the
    estimates from before this batch was ingested.
    """
    tracks = list(tracks)
    if len(tracks) != len(state.grid):
        raise ValueError(f"{len(tracks)} tracks for a grid of {len(state.grid)}")
    pe = np.array([prediction_error(batch, t.beta) for t in tracks])
    i = argmin_smallest(pe)
    state.pe_table.append(pe)
    state.selected.append(state.grid[i])
    return state.grid[i]


def kfold_assignment(n: int, folds: int, seed: int) -> np.ndarray:
    """Fold label per row: contiguous blocks of a seeded permutation."""
    perm = np.random.default_rng(seed).permutation(n)
    labels = np.empty(n, dtype=np.int64)
    for k, idx in enumerate(np.array_split(perm, folds)):
        labels[idx] = k
    return labels


def first_batch_cv(batch: BatchData, lambdas, folds: int = 5, cfg: SolverConfig | None = None,
                   seed: int = 0) -> CVReport:
    """K-fold cross-validation over ``lambdas`` on a single batch.

    Each fold's path is solved from the largest penalty down with warm
    starts.  ``CVReport.selected`` indexes into ``lambdas``.
    """
    lambdas = [float(v) for v in lambdas]
    if not lambdas:
        raise ValueError("tuning grid is empty")
    if folds < 2:
        raise ValueError(f"need at least 2 folds, got {folds}")
    if batch.n < folds:
        raise DataError(f"first batch has {batch.n} rows, fewer than {folds} folds")
    labels = kfold_assignment(batch.n, folds, seed)
    err = np.zeros((folds, len(lambdas)))
    order = np.argsort(lambdas)[::-1]
    for k in range(folds):
        test = labels == k
        Xtr, ytr = batch.X[~test], batch.y[~test]
        Xte, yte = batch.X[test], batch.y[test]
        S, U = Xtr.T @ Xtr, Xtr.T @ ytr
        beta = np.zeros(batch.p)
        for i in order:
            beta = solve_l1(S, U, Xtr.shape[0], lambdas[i], init=beta, cfg=cfg).coefficients
            resid = yte - Xte @ beta
            err[k, i] = float(resid @ resid) / yte.shape[0]
    mean_err = err.mean(axis=0)
    return CVReport(seed, folds, labels, mean_err, argmin_smallest(mean_err))
