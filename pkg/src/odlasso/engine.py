"""Batch-by-batch driver tying statistics, lasso, projections and tuning together."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .debias import InferenceResult, infer
from .lasso import LassoTrack, fold_rss, update_beta, update_sigma2
from .projection import ProjectionTrack, accumulate, update_gamma
from .prox import SolverConfig
from .suffstats import BatchData, CumulativeStats
from .tuning import FIXED, TuningState, first_batch_cv, select_lambda

DEFAULT_GRID = (0.15, 0.20, 0.25, 0.30)
MAX_DEFAULT_TRACKED = 500


@dataclass
class EngineConfig:
    grid: tuple = DEFAULT_GRID
    grid_mode: str = FIXED
    coords: tuple | None = None
    alpha: float = 0.05
    solver: SolverConfig = field(default_factory=SolverConfig)
    cv_folds: int = 5
    seed: int = 0
    workers: int | None = None

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        self.grid = tuple(float(g) for g in self.grid)
        if self.coords is not None:
            self.coords = tuple(int(r) for r in self.coords)


@dataclass
class BatchOutput:
    batch: int
    N: int
    lam: float
    sigma2: float
    results: list[InferenceResult]


def _default_workers() -> int:
    try:
        return max(1, int(os.environ.get("ODL_THREADS", "1")))
    except ValueError:
        return 1


class OnlineDebiasedLasso:
    """Streaming debiased lasso over a sequence of batches.

    Each call to :meth:`partial_fit` consumes one batch, updates the
    sufficient statistics and all tracks, and returns the inference results
    for the tracked coordinates.  Raw batches are not retained.

    The reported noise variance ``sigma2`` follows the selection path: batch
    ``j`` contributes its residuals under the estimate at the penalty chosen
    for batch ``j``.  Each :class:`LassoTrack` also keeps its own fixed-penalty
    variance for diagnostics.

    ``on_solve``, when set, is called after every solver run as
    ``on_solve(kind, key, S, U, N, lam, report)`` with ``kind`` either
    ``"lasso"`` or ``"projection"``; it exists for auditing.
    """

    def __init__(self, config: EngineConfig | None = None):
        self.config = config or EngineConfig()
        self.stats = CumulativeStats()
        self.tuning = TuningState(self.config.grid, self.config.grid_mode)
        self.tracks: list[LassoTrack] = []
        self.projections: list[ProjectionTrack] = []
        self.selected_index: int | None = None
        self.sigma2 = 0.0
        self.feature_names: list[str] | None = None
        self.on_solve = None

    @property
    def p(self):
        return self.stats.p

    @property
    def selected_track(self) -> LassoTrack:
        return self.tracks[self.selected_index]

    def _init_tracks(self, p: int):
        coords = self.config.coords
        if coords is None:
            if p > MAX_DEFAULT_TRACKED:
                raise ValueError(
                    f"p={p} exceeds {MAX_DEFAULT_TRACKED}; pass an explicit coordinate list"
                )
            coords = tuple(range(p))
        self.tracks = [LassoTrack.zeros(g, p) for g in self.tuning.grid]
        self.projections = [ProjectionTrack.zeros(r, p) for r in coords]

    def _map(self, fn, items):
        workers = self.config.workers or _default_workers()
        if workers <= 1 or len(items) <= 1:
            return [fn(x) for x in items]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))

    def partial_fit(self, X, y=None) -> BatchOutput:
        batch = X if isinstance(X, BatchData) else BatchData(X, y, self.stats.b + 1)
        first = self.stats.b == 0
        if first:
            self._init_tracks(batch.p)
        elif batch.p != self.stats.p:
            raise DataError(f"batch has {batch.p} columns, stream dimension is {self.stats.p}")

        cfg = self.config.solver
        if first:
            lambdas = self.tuning.penalties(batch.p, batch.n)
            cv = first_batch_cv(batch, lambdas, self.config.cv_folds, cfg, self.config.seed)
            self.tuning.cv = cv
            self.tuning.selected.append(self.tuning.grid[cv.selected])
            sel = cv.selected
        else:
            sel = self.tuning.grid.index(select_lambda(self.tuning, batch, self.tracks))

        n_prev = self.stats.N
        self.stats.ingest(batch)
        stats = self.stats
        N = stats.N

        def lasso_step(i):
            track = self.tracks[i]
            track.lam = self.tuning.penalty(self.tuning.grid[i], stats.p, N)
            update_beta(track, stats, cfg)
            update_sigma2(track, batch, n_prev, N)
            if self.on_solve is not None:
                self.on_solve("lasso", i, stats.S, stats.U, N, track.lam, track.last_report)

        self._map(lasso_step, list(range(len(self.tracks))))
        self.selected_index = sel
        chosen = self.tracks[sel]
        lam_b = chosen.lam
        self.sigma2 = fold_rss(self.sigma2, batch, chosen.beta, n_prev, N)

        def projection_step(track):
            update_gamma(track, stats, lam_b, cfg)
            accumulate(track, batch)
            if self.on_solve is not None:
                R, T = stats.submatrices(track.r)
                self.on_solve("projection", track.r, R, T, N, lam_b, track.last_report)

        self._map(projection_step, self.projections)
        results = [infer(t, chosen.beta, self.sigma2, N, self.config.alpha)
                   for t in self.projections]
        return BatchOutput(stats.b, N, lam_b, self.sigma2, results)

    def fit_stream(self, batches) -> list[BatchOutput]:
        """Consume batches in order; each item is a ``BatchData`` or an ``(X, y)`` pair."""
        outs = []
        for item in batches:
            if isinstance(item, BatchData):
                outs.append(self.partial_fit(item))
            else:
                X, y = item
                outs.append(self.partial_fit(X, y))
        return outs

    @property
    def coef_(self) -> np.ndarray:
        return self.selected_track.beta
