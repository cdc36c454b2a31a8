"""Synthetic streams with sparse truth, and replicated runs of the engine."""
from __future__ import annotations

import os
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .engine import EngineConfig, OnlineDebiasedLasso
from .errors import DataError, ODLError
from .prox import kkt_violation
from .suffstats import BatchData

IDENTITY = "identity"
AR1 = "ar1"


@dataclass
class SimDesign:
    """Data-generating setup for a simulated stream.

    ``beta0`` defaults to ones on the first ``ceil(s0/2)`` coordinates and
    0.01 on the next ``floor(s0/2)``; everything else is zero.
    """

    p: int
    s0: int
    n_sched: tuple
    sigma_eps: float = 1.0
    cov: str = IDENTITY
    rho: float = 0.0
    seed: int = 0
    replications: int = 200
    beta0: np.ndarray | None = None
    coords: tuple | None = None
    _chol: np.ndarray | None = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        self.n_sched = tuple(int(n) for n in self.n_sched)
        if any(n < 1 for n in self.n_sched):
            raise ValueError("batch sizes must be at least 1")
        if not 0 <= self.s0 <= self.p:
            raise ValueError(f"s0={self.s0} outside [0, p={self.p}]")
        if self.cov == AR1:
            if not 0 <= self.rho < 1:
                raise ValueError(f"ar1 correlation must lie in [0, 1), got {self.rho}")
        elif self.cov != IDENTITY:
            raise ValueError(f"unknown covariance {self.cov!r}")
        if self.sigma_eps < 0:
            raise ValueError("noise standard deviation must be non-negative")
        if self.beta0 is None:
            self.beta0 = default_beta0(self.p, self.s0)
        else:
            self.beta0 = np.asarray(self.beta0, dtype=float)
            if self.beta0.shape != (self.p,):
                raise ValueError("beta0 has the wrong length")
            if np.count_nonzero(self.beta0) != self.s0:
                raise ValueError("beta0 must have exactly s0 nonzero entries")
        if self.coords is not None:
            self.coords = tuple(int(r) for r in self.coords)

    @property
    def b(self) -> int:
        return len(self.n_sched)

    def covariance(self) -> np.ndarray:
        if self.cov == IDENTITY:
            return np.eye(self.p)
        idx = np.arange(self.p)
        return self.rho ** np.abs(idx[:, None] - idx[None, :])

    def cholesky(self) -> np.ndarray | None:
        if self.cov == IDENTITY:
            return None
        if self._chol is None:
            try:
                self._chol = np.linalg.cholesky(self.covariance())
            except np.linalg.LinAlgError as exc:
                raise ValueError("covariance matrix is not positive definite") from exc
        return self._chol

    def default_coords(self) -> tuple:
        """Two coordinates from each signal group (strong, weak, zero)."""
        return tuple(representative_coords(self.beta0, per_group=2))


def default_beta0(p: int, s0: int) -> np.ndarray:
    beta = np.zeros(p)
    strong = (s0 + 1) // 2
    beta[:strong] = 1.0
    beta[strong:s0] = 0.01
    return beta


def representative_coords(beta0, per_group=2) -> list[int]:
    beta0 = np.asarray(beta0)
    out = []
    for value in sorted(set(np.round(np.abs(beta0), 12)), reverse=True):
        idx = np.flatnonzero(np.round(np.abs(beta0), 12) == value)
        out.extend(int(i) for i in idx[:per_group])
    return sorted(out)


def gen_batch(design: SimDesign, j: int, replication: int = 0) -> BatchData:
    """Draw batch ``j`` (1-based) of the given replication.

    The generator is seeded from ``(seed, replication, j)`` so any batch can
    be regenerated on its own.
    """
    if not 1 <= j <= design.b:
        raise IndexError(f"batch index {j} outside 1..{design.b}")
    rng = np.random.default_rng([design.seed, replication, j])
    n = design.n_sched[j - 1]
    X = rng.standard_normal((n, design.p))
    L = design.cholesky()
    if L is not None:
        X = X @ L.T
    y = X @ design.beta0
    if design.sigma_eps > 0:
        y = y + design.sigma_eps * rng.standard_normal(n)
    return BatchData(X, y, j)


def stream(design: SimDesign, replication: int = 0):
    for j in range(1, design.b + 1):
        yield gen_batch(design, j, replication)


# column order of raw replication records
RAW_FIELDS = ("replication", "batch", "N", "coord", "truth", "estimate", "se", "ci_low",
              "ci_high", "tau", "lambda", "sigma2", "status")


def _run_one(design: SimDesign, config: EngineConfig, replication: int,
             audit_fraction: float = 0.0):
    engine = OnlineDebiasedLasso(config)
    audit = []
    if audit_fraction > 0:
        arng = np.random.default_rng([design.seed, replication, 0xA0D17])

        def on_solve(kind, key, S, U, N, lam, rep):
            if arng.random() < audit_fraction:
                audit.append((replication, engine.stats.b, kind, key, lam,
                              kkt_violation(S, U, N, lam, rep.coefficients), rep.converged))

        engine.on_solve = on_solve
    rows = []
    try:
        for batch in stream(design, replication):
            out = engine.partial_fit(batch)
            for res in out.results:
                rows.append((replication, out.batch, out.N, res.r, float(design.beta0[res.r]),
                             res.estimate, res.se, res.ci_low, res.ci_high, res.tau,
                             out.lam, out.sigma2, res.status))
        error = None
    except ODLError as exc:
        error = f"{type(exc).__name__}: {exc}"
    return rows, audit, error


@dataclass
class ReplicationResults:
    rows: list
    audit: list
    errors: dict

    def records(self) -> list[dict]:
        return [dict(zip(RAW_FIELDS, r)) for r in self.rows]


def run_replications(design: SimDesign, config: EngineConfig | None = None, *,
                     workers: int | None = None, audit_fraction: float = 0.0) -> ReplicationResults:
    """Stream every replication of ``design`` through a fresh engine.

    Engine errors are caught per replication and reported in ``errors``
    keyed by replication index; the remaining replications still run.
    Replications are distributed over ``workers`` processes (default
    ``$ODL_THREADS`` or 1); output order is independent of ``workers``.
    """
    config = config or EngineConfig()
    if config.coords is None:
        config = replace(config, coords=design.coords or design.default_coords())
    if workers is None:
        workers = max(1, int(os.environ.get("ODL_THREADS", "1") or 1))
    reps = range(design.replications)
    if workers > 1 and design.replications > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outs = list(pool.map(_run_one, [design] * len(reps), [config] * len(reps), reps,
                                 [audit_fraction] * len(reps)))
    else:
        outs = [_run_one(design, config, r, audit_fraction) for r in reps]
    rows, audit, errors = [], [], {}
    for rep, (r_rows, r_audit, err) in zip(reps, outs):
        rows.extend(r_rows)
        audit.extend(r_audit)
        if err is not None:
            errors[rep] = err
    return ReplicationResults(rows, audit, errors)


_KEYS = {"p", "s0", "cov", "nsched", "reps", "seed", "sigma", "coords", "beta0"}


def parse_nsched(text: str) -> tuple:
    """``"35x12"`` -> twelve batches of 35; ``"20,20,40"`` -> explicit list."""
    parts = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        m = re.fullmatch(r"(\d+)\s*x\s*(\d+)", chunk)
        if m:
            parts.extend([int(m.group(1))] * int(m.group(2)))
        elif chunk:
            parts.append(int(chunk))
    if not parts:
        raise ValueError("empty batch schedule")
    return tuple(parts)


def parse_design(text: str) -> SimDesign:
    """Parse a ``key=value`` design description (one pair per line).

    Recognised keys: ``p``, ``s0``, ``cov`` (``identity`` or ``ar1:RHO``),
    ``nsched``, ``reps``, ``seed``, ``sigma``, ``coords`` (comma-separated
    0-based indices) and ``beta0`` (comma-separated full vector).  Blank lines
    and ``#`` comments are ignored.
    """
    kv = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DataError(f"design line {lineno}: expected key=value, got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _KEYS:
            raise DataError(f"design line {lineno}: unknown key {key!r}")
        kv[key] = value
    for key in ("p", "s0", "nsched"):
        if key not in kv:
            raise DataError(f"design is missing required key {key!r}")
    cov, rho = IDENTITY, 0.0
    if "cov" in kv:
        cov_text = kv["cov"].lower()
        if cov_text.startswith(AR1):
            cov = AR1
            _, _, r = cov_text.partition(":")
            rho = float(r) if r else 0.5
        elif cov_text != IDENTITY:
            raise DataError(f"unknown covariance {kv['cov']!r}")
    try:
        return SimDesign(
            p=int(kv["p"]),
            s0=int(kv["s0"]),
            n_sched=parse_nsched(kv["nsched"]),
            sigma_eps=float(kv.get("sigma", 1.0)),
            cov=cov,
            rho=rho,
            seed=int(kv.get("seed", 0)),
            replications=int(kv.get("reps", 200)),
            beta0=[float(v) for v in kv["beta0"].split(",")] if "beta0" in kv else None,
            coords=[int(v) for v in kv["coords"].split(",")] if "coords" in kv else None,
        )
    except ValueError as exc:
        raise DataError(f"invalid design: {exc}") from exc
