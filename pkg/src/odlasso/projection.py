"""Online low-dimensional projections and the debiasing accumulators."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .prox import SolveReport, SolverConfig, solve_l1
from .suffstats import BatchData, CumulativeStats

# a1 at or below this multiple of N marks the coordinate as non-identifiable
IDENTIFIABILITY_RTOL = 1e-10


@dataclass
class ProjectionTrack:
    """State kept for one tracked coordinate ``r`` (0-based).

    ``gamma`` regresses column ``r`` on the others.  The accumulators hold
    ``sum_j z_j'x_r`` (``a1``), ``sum_j z_j'y`` (``a2``), ``sum_j z_j'X``
    (``A1``) and ``sum_j z_j'z_j`` (``zz``), where ``z_j`` is the projection
    residual of batch ``j`` computed with the ``gamma`` available right after
    that batch.
    """

    r: int
    gamma: np.ndarray
    a1: float = 0.0
    a2: float = 0.0
    A1: np.ndarray = None
    zz: float = 0.0
    last_report: SolveReport | None = field(default=None, repr=False)

    @classmethod
    def zeros(cls, r: int, p: int) -> "ProjectionTrack":
        if not 0 <= r < p:
            raise IndexError(f"coordinate {r} out of range for dimension {p}")
        return cls(r=r, gamma=np.zeros(p - 1), A1=np.zeros(p))

    def identifiable(self, N: int) -> bool:
        return self.a1 > IDENTIFIABILITY_RTOL * N


def update_gamma(track: ProjectionTrack, stats: CumulativeStats, lam: float,
                 cfg: SolverConfig | None = None) -> ProjectionTrack:
    R, T = stats.submatrices(track.r)
    rep = solve_l1(R, T, stats.N, lam, init=track.gamma, cfg=cfg)
    track.gamma = rep.coefficients
    track.last_report = rep
    return track


def projection_residual(track: ProjectionTrack, X: np.ndarray) -> np.ndarray:
    r = track.r
    others = np.delete(X, r, axis=1)
    return X[:, r] - others @ track.gamma


def accumulate(track: ProjectionTrack, batch: BatchData) -> ProjectionTrack:
    """Add the current batch's contributions to the accumulators.

    Must run after :func:`update_gamma` for the same batch.
    """
    if batch.p != track.A1.shape[0]:
        raise DataError(f"batch has {batch.p} columns, track expects {track.A1.shape[0]}")
    z = projection_residual(track, batch.X)
    zX = z @ batch.X
    # a1 reuses the r-th entry of z'X so that A1[r] == a1 holds exactly
    track.a1 += float(zX[track.r])
    track.a2 += float(z @ batch.y)
    track.A1 = track.A1 + zX
    track.zz += float(z @ z)
    return track
