"""Proximal gradient solver for L1-penalised quadratics.

Everything here is driven by a Gram matrix ``S``, a cross-moment vector ``U``
and the sample count ``N``; the raw observations are never needed.  The
objective minimised is::

    beta' S beta / (2N) - U' beta / N + yy / (2N) + lam * ||beta||_1

which equals the usual ``||y - X beta||^2 / (2N) + lam * ||beta||_1``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import NumericalError

# Number of consecutive objective increases that counts as divergence.
DIVERGENCE_PATIENCE = 50


@dataclass(frozen=True)
class SolverConfig:
    """Step size and stopping rule for :func:`solve_l1`.

    ``eta=None`` picks ``0.9 * N / B`` where ``B`` is the maximum absolute
    row sum of ``S`` (an upper bound on its largest eigenvalue), which keeps
    every iteration a descent step.  ``criterion`` is ``"composite"`` (the
    proximal-mapping residual) or ``"gradient"`` (norm of the smooth gradient
    only, which can stall at sparse optima).
    """

    eta: float | None = None
    tol: float = 1e-6
    max_iter: int = 100_000
    criterion: str = "composite"

    def __post_init__(self):
        if self.eta is not None and not self.eta > 0:
            raise ValueError(f"eta must be positive, got {self.eta}")
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.criterion not in ("composite", "gradient"):
            raise ValueError(f"unknown stopping criterion {self.criterion!r}")


@dataclass
class SolveReport:
    coefficients: np.ndarray
    iterations: int = 0
    final_grad_norm: float = float("inf")
    converged: bool = False
    eta: float = field(default=float("nan"), repr=False)


def soft_threshold(x, t):
    """``sgn(x) * max(|x| - t, 0)``, elementwise for arrays."""
    if np.ndim(x) == 0:
        x = float(x)
        if x > t:
            return x - t
        if x < -t:
            return x + t
        return 0.0
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def gradient(S, U, N, beta):
    """Gradient ``(S beta - U) / N`` of the smooth part of the objective."""
    if N <= 0:
        raise ValueError("sample count N must be positive")
    return (np.asarray(S) @ np.asarray(beta, dtype=float) - np.asarray(U)) / N


def objective(S, U, N, lam, beta, yy=0.0):
    beta = np.asarray(beta, dtype=float)
    Sb = S @ beta
    return float(beta @ Sb / (2 * N) - U @ beta / N + yy / (2 * N) + lam * np.abs(beta).sum())


def auto_step(S, N):
    """Safe step size from the row-sum bound on the largest eigenvalue."""
    bound = float(np.abs(S).sum(axis=1).max()) if S.size else 0.0
    if bound <= 0:
        return 1.0
    return 0.9 * N / bound


def kkt_violation(S, U, N, lam, beta):
    """Largest violation of the L1 subgradient optimality conditions.

    Zero coordinates need ``|g_r| <= lam``; active ones need
    ``g_r + lam * sgn(beta_r) == 0``.
    """
    beta = np.asarray(beta, dtype=float)
    if beta.size == 0:
        return 0.0
    g = gradient(S, U, N, beta)
    active = beta != 0
    viol = np.where(active, np.abs(g + lam * np.sign(beta)), np.maximum(np.abs(g) - lam, 0.0))
    return float(viol.max())


def solve_l1(S, U, N, lam, init=None, cfg: SolverConfig | None = None) -> SolveReport:
    """Minimise the L1-penalised quadratic by proximal gradient descent.

    Iterates ``beta <- soft_threshold(beta - (eta/N)(S beta - U), eta*lam)``
    from ``init`` until the stopping criterion drops below ``cfg.tol`` or
    ``cfg.max_iter`` is reached.  Hitting the cap is not an error: the last
    iterate is returned with ``converged=False``.

    Raises
    ------
    NumericalError
        If the iterates become non-finite (typically a non-PSD ``S``) or the
        objective rises for ``DIVERGENCE_PATIENCE`` iterations in a row.
    """
    cfg = cfg or SolverConfig()
    if lam < 0:
        raise ValueError(f"penalty must be non-negative, got {lam}")
    if N <= 0:
        raise ValueError("sample count N must be positive")
    S = np.asarray(S, dtype=float)
    U = np.asarray(U, dtype=float)
    p = U.shape[0]
    if S.shape != (p, p):
        raise ValueError(f"Gram matrix shape {S.shape} does not match cross-moment length {p}")
    beta = np.zeros(p) if init is None else np.array(init, dtype=float)
    if beta.shape != (p,):
        raise ValueError(f"initial vector has shape {beta.shape}, expected ({p},)")
    if p == 0:
        return SolveReport(beta, 0, 0.0, True, float("nan"))

    eta = cfg.eta if cfg.eta is not None else auto_step(S, N)
    S = np.ascontiguousarray(S)
    beta, it, res, status = _prox_loop(S, U, float(N), float(lam), beta, float(eta),
                                       float(cfg.tol), int(cfg.max_iter),
                                       cfg.criterion == "gradient", DIVERGENCE_PATIENCE)
    if status == _NONFINITE:
        raise NumericalError("non-finite iterate in proximal gradient; is the Gram matrix PSD?")
    if status == _DIVERGED:
        raise NumericalError(
            f"objective increased for {DIVERGENCE_PATIENCE} consecutive iterations; "
            f"step size eta={eta:g} is too large"
        )
    return SolveReport(beta, it, res, status == _CONVERGED, eta)


_CONVERGED, _MAX_ITER, _NONFINITE, _DIVERGED = 0, 1, 2, 3


@njit(cache=True)
def _prox_loop(S, U, N, lam, beta, eta, tol, max_iter, use_grad, patience):
    p = U.shape[0]
    step = eta / N
    thresh = eta * lam
    Sb = np.empty(p)
    new = np.empty(p)
    prev_obj = np.inf
    rising = 0
    res = np.inf
    it = 0
    while it < max_iter:
        it += 1
        obj = 0.0
        l1 = 0.0
        gg = 0.0
        for i in range(p):
            acc = 0.0
            for k in range(p):
                acc += S[i, k] * beta[k]
            Sb[i] = acc - U[i]
            obj += beta[i] * (0.5 * acc - U[i])
            l1 += abs(beta[i])
            gg += Sb[i] * Sb[i]
        obj = obj / N + lam * l1
        if not np.isfinite(obj):
            return beta, it, res, 2
        if obj > prev_obj:
            rising += 1
            if rising >= patience:
                return beta, it, res, 3
        else:
            rising = 0
        prev_obj = obj
        if use_grad:
            res = np.sqrt(gg) / N
            if res <= tol:
                return beta, it, res, 0
        dd = 0.0
        for i in range(p):
            z = beta[i] - step * Sb[i]
            if z > thresh:
                v = z - thresh
            elif z < -thresh:
                v = z + thresh
            else:
                v = 0.0
            new[i] = v
            d = v - beta[i]
            dd += d * d
        beta, new = new, beta
        if not use_grad:
            res = np.sqrt(dd) / eta
            if res <= tol:
                return beta, it, res, 0
    for i in range(p):
        if not np.isfinite(beta[i]):
            return beta, it, res, 2
    return beta, it, res, 1
