"""Online lasso tracks: one warm-started estimate per penalty level."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .prox import SolveReport, SolverConfig, solve_l1
from .suffstats import BatchData, CumulativeStats


@dataclass
class LassoTrack:
    lam: float
    beta: np.ndarray
    sigma2: float = 0.0
    last_report: SolveReport | None = field(default=None, repr=False)

    @classmethod
    def zeros(cls, lam: float, p: int) -> "LassoTrack":
        return cls(lam=float(lam), beta=np.zeros(p))


def update_beta(track: LassoTrack, stats: CumulativeStats, cfg: SolverConfig | None = None) -> LassoTrack:
    """Re-solve the lasso on the current statistics, warm-started at ``track.beta``."""
    if stats.N < 1:
        raise ValueError("no observations ingested yet")
    rep = solve_l1(stats.S, stats.U, stats.N, track.lam, init=track.beta, cfg=cfg)
    track.beta = rep.coefficients
    track.last_report = rep
    return track


def update_sigma2(track: LassoTrack, batch: BatchData, n_prev: int, n_new: int) -> LassoTrack:
    """Fold this batch's residual sum of squares into the running noise variance.

    ``sigma2 <- (N_prev/N_new) * sigma2 + RSS_b / N_new`` so that after ``b``
    batches ``sigma2 == sum_j RSS_j / N_b`` with ``RSS_j`` evaluated at the
    estimate available right after batch ``j``.
    """
    if batch.p != track.beta.shape[0]:
        raise DataError(f"batch has {batch.p} columns, track has {track.beta.shape[0]}")
    if n_new != n_prev + batch.n:
        raise ValueError(f"n_new={n_new} must equal n_prev + batch size ({n_prev} + {batch.n})")
    track.sigma2 = fold_rss(track.sigma2, batch, track.beta, n_prev, n_new)
    return track


def fold_rss(sigma2: float, batch: BatchData, beta: np.ndarray, n_prev: int, n_new: int) -> float:
    resid = batch.y - batch.X @ beta
    return (n_prev / n_new) * sigma2 + float(resid @ resid) / n_new
