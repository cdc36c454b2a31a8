"""Debiased point estimates, standard errors and confidence intervals."""
from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist

import numpy as np

from .errors import NumericalError
from .projection import ProjectionTrack

OK = "ok"
NON_IDENTIFIABLE = "non-identifiable"

_STD_NORMAL = NormalDist()


def norm_cdf(x: float) -> float:
    return _STD_NORMAL.cdf(x)


def norm_quantile(q: float) -> float:
    """Inverse standard normal CDF (Wichura's AS241 rational approximation).

    Accurate to about 1e-15 on ``[1e-10, 1 - 1e-10]`` and symmetric:
    ``norm_quantile(q) == -norm_quantile(1 - q)``.
    """
    q = float(q)
    if not 0.0 < q < 1.0:
        raise ValueError(f"probability must lie in (0, 1), got {q}")
    return _STD_NORMAL.inv_cdf(q)


def debiased_estimate(beta_r: float, beta: np.ndarray, track: ProjectionTrack) -> float:
    """``beta_r + (a2 - A1'beta) / a1``."""
    if track.a1 == 0:
        raise NumericalError(f"coordinate {track.r} is not identifiable (a1 = 0)")
    return float(beta_r + (track.a2 - track.A1 @ beta) / track.a1)


def tau(track: ProjectionTrack) -> float:
    """Standard-error multiplier ``sqrt(zz) / a1``."""
    if not track.a1 > 0:
        raise NumericalError(f"coordinate {track.r} is not identifiable (a1 = {track.a1})")
    return math.sqrt(track.zz) / track.a1


def confidence_interval(estimate: float, sigma: float, tau_r: float, alpha: float = 0.05):
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if sigma < 0 or tau_r < 0:
        raise ValueError("sigma and tau must be non-negative")
    half = norm_quantile(1.0 - alpha / 2.0) * sigma * tau_r
    return estimate - half, estimate + half


@dataclass
class InferenceResult:
    r: int
    estimate: float | None
    tau: float | None
    se: float | None
    ci_low: float | None
    ci_high: float | None
    alpha: float
    N: int
    status: str = OK


def infer(track: ProjectionTrack, beta: np.ndarray, sigma2: float, N: int,
          alpha: float = 0.05) -> InferenceResult:
    """Assemble the full inference record for one coordinate.

    Coordinates whose ``a1`` is numerically zero come back with
    ``status="non-identifiable"`` and empty numeric fields.
    """
    if not track.identifiable(N):
        return InferenceResult(track.r, None, None, None, None, None, alpha, N, NON_IDENTIFIABLE)
    est = debiased_estimate(beta[track.r], beta, track)
    t = tau(track)
    sigma = math.sqrt(sigma2)
    lo, hi = confidence_interval(est, sigma, t, alpha)
    return InferenceResult(track.r, est, t, sigma * t, lo, hi, alpha, N, OK)
