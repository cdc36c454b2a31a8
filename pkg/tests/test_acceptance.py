"""Acceptance criteria A1-A8, each reported as a PASS/FAIL line in the summary."""
import math
import time

import numpy as np
import pytest

from odlasso.checkpoint import dumps
from odlasso.cli import main
from odlasso.engine import EngineConfig, OnlineDebiasedLasso
from odlasso.metrics import qq_data, summarize
from odlasso.prox import SolverConfig, objective, soft_threshold, solve_l1
from odlasso.simulate import SimDesign, gen_batch, run_replications
from odlasso.suffstats import BatchData, CumulativeStats, cumulative_size_sums
from oracles import offline_debiased, raw_lasso_ista, raw_objective
from test_cli import write_batches

A4_SEED = 20240101
A4_BUDGET_S = 15 * 60


def verdict(log, tag, ok, detail):
    line = f"{tag} {'PASS' if ok else 'FAIL'}: {detail}"
    log.append(line)
    print(line)
    assert ok, line


def test_a1_solver_matches_raw_data_solver(acceptance_log):
    rng = np.random.default_rng(101)
    worst = 0.0
    for _ in range(100):
        p = int(rng.integers(1, 51))
        n = int(rng.integers(5, 501))
        X = rng.normal(size=(n, p))
        y = X @ (rng.normal(size=p) * (rng.random(p) < 0.3)) + rng.normal(size=n)
        lam = float(rng.uniform(0.01, 0.5))
        stats = CumulativeStats().ingest(BatchData(X, y))
        online = solve_l1(stats.S, stats.U, stats.N, lam).coefficients
        raw = raw_lasso_ista(X, y, lam)
        worst = max(worst, abs(raw_objective(X, y, lam, online) - raw_objective(X, y, lam, raw)))
    uni = 0.0
    for _ in range(100):
        n = int(rng.integers(1, 200))
        x = rng.normal(size=(n, 1))
        y = 1.5 * x[:, 0] + rng.normal(size=n)
        lam = float(rng.uniform(0, 1))
        S, U = float(x[:, 0] @ x[:, 0]), float(x[:, 0] @ y)
        closed = soft_threshold(U / n, lam) / (S / n)
        got = solve_l1([[S]], [U], n, lam, cfg=SolverConfig(tol=1e-12)).coefficients[0]
        uni = max(uni, abs(got - closed))
    verdict(acceptance_log, "A1", worst <= 1e-6 and uni <= 1e-8,
            f"max objective gap {worst:.2e} (<= 1e-6), univariate error {uni:.2e} (<= 1e-8)")


def test_a2_single_batch_matches_offline(acceptance_log):
    rng = np.random.default_rng(202)
    worst = 0.0
    for i in range(20):
        p = int(rng.integers(5, 40))
        n = int(rng.integers(20, 120))
        X = rng.normal(size=(n, p))
        y = X @ np.r_[1.0, 0.5, np.zeros(p - 2)] + rng.normal(size=n)
        coords = tuple(sorted(rng.choice(p, size=3, replace=False).tolist()))
        eng = OnlineDebiasedLasso(EngineConfig(coords=coords, seed=i,
                                               solver=SolverConfig(tol=1e-12)))
        out = eng.partial_fit(X, y)
        for res in out.results:
            est, tau, beta = offline_debiased(X, y, out.lam, res.r)
            worst = max(worst, abs(res.estimate - est), abs(res.tau - tau))
        worst = max(worst, float(np.max(np.abs(eng.coef_ - beta))))
    verdict(acceptance_log, "A2", worst <= 1e-8, f"max deviation from offline {worst:.2e} (<= 1e-8)")


def test_a3_cumulative_size_bounds(acceptance_log):
    rng = np.random.default_rng(303)
    bad = 0
    for _ in range(1000):
        sizes = rng.integers(1, 500, size=int(rng.integers(1, 60))).tolist()
        s1, s2 = cumulative_size_sums(sizes)
        N = sum(sizes)
        bad += not (s1 <= 1 + math.log(N / sizes[0]) and s2 <= 2 * math.sqrt(N))
    verdict(acceptance_log, "A3", bad == 0, f"{bad} of 1000 schedules violate a bound")


@pytest.fixture(scope="module")
def a4_run():
    design = SimDesign(p=100, s0=4, n_sched=(20,) * 12, sigma_eps=1.0, seed=A4_SEED,
                       replications=200)
    start = time.perf_counter()
    res = run_replications(design, EngineConfig(), audit_fraction=0.01)
    elapsed = time.perf_counter() - start
    return design, res, elapsed


@pytest.mark.slow
def test_a4_coverage_bias_and_se_trend(a4_run, acceptance_log):
    design, res, elapsed = a4_run
    assert not res.errors, res.errors
    assert len(res.rows) == 200 * 12 * 6
    report = summarize(res.records())
    final = {g: report.get(12, g) for g in report.groups()}
    cp_ok = all(0.91 <= row.cp <= 0.98 for row in final.values())
    bias_ok = final[1.0].abias <= 0.05
    ase_ok = all(
        all(report.get(b + 1, g).ase < report.get(b, g).ase for b in report.batches()[:-1])
        for g in report.groups())
    time_ok = elapsed <= A4_BUDGET_S
    cps = ", ".join(f"{g:g}: {row.cp:.3f}" for g, row in final.items())
    verdict(acceptance_log, "A4", cp_ok and bias_ok and ase_ok and time_ok,
            f"CP at b=12 [{cps}] in [0.91, 0.98]; A.bias(1) {final[1.0].abias:.4f} <= 0.05; "
            f"ASE strictly decreasing: {ase_ok}; runtime {elapsed:.0f}s <= {A4_BUDGET_S}s")


@pytest.mark.slow
def test_a5_normality(a4_run, acceptance_log):
    _, res, _ = a4_run
    qqs = qq_data(res.records(), batch=12)
    crit = 1.63 / math.sqrt(200)
    good = [k for k, q in qqs.items() if q.correlation >= 0.99 and q.ks < crit]
    detail = "; ".join(f"coord {k[1]}: r={q.correlation:.4f} KS={q.ks:.4f}" for k, q in qqs.items())
    verdict(acceptance_log, "A5", len(qqs) == 6 and len(good) >= 5,
            f"{len(good)}/6 coordinates with r >= 0.99 and KS < {crit:.4f} ({detail})")


@pytest.mark.slow
def test_a6_sigma_consistency(a4_run, acceptance_log):
    _, res, _ = a4_run
    per_rep = {r["replication"]: r["sigma2"] for r in res.records() if r["batch"] == 12}
    mean = float(np.mean(list(per_rep.values())))
    verdict(acceptance_log, "A6", abs(mean - 1) <= 0.1,
            f"mean sigma2 at b=12 is {mean:.4f}, |mean - 1| = {abs(mean - 1):.4f} <= 0.1")


def test_a7_resume_at_every_boundary(tmp_path, acceptance_log):
    design = SimDesign(p=20, s0=4, n_sched=(15, 20, 25, 20, 30, 20), seed=77)
    paths = [str(p) for p in write_batches(tmp_path, design)]
    flags = ["--coords", "0,2,9"]
    assert main(["fit", *paths, "--out", str(tmp_path / "straight"), *flags]) == 0
    expected = (tmp_path / "straight" / "results.csv").read_bytes()
    mismatched = []
    for k in range(1, len(paths)):
        out = tmp_path / f"split{k}"
        assert main(["fit", *paths[:k], "--out", str(out), *flags]) == 0
        assert main(["fit", *paths[k:], "--out", str(out),
                     "--resume", str(out / "checkpoint.odl")]) == 0
        if (out / "results.csv").read_bytes() != expected:
            mismatched.append(k)
    verdict(acceptance_log, "A7", not mismatched,
            f"{len(paths) - 1} split points, bit-identical results.csv except at {mismatched or 'none'}")


@pytest.mark.slow
def test_a8_kkt_audit(a4_run, acceptance_log):
    _, res, _ = a4_run
    tol = SolverConfig().tol
    worst = max(a[5] for a in res.audit)
    kinds = {a[2] for a in res.audit}
    verdict(acceptance_log, "A8", worst <= 10 * tol and {"lasso", "projection"} <= kinds,
            f"{len(res.audit)} audited solves, max KKT violation {worst:.2e} <= {10 * tol:.0e}")
