import numpy as np
import pytest

from odlasso.engine import EngineConfig
from odlasso.errors import DataError
from odlasso.prox import SolverConfig
from odlasso.simulate import (RAW_FIELDS, SimDesign, default_beta0, gen_batch, parse_design,
                              parse_nsched, run_replications, stream)
from oracles import offline_debiased


def test_identity_covariance_law_of_large_numbers():
    design = SimDesign(p=5, s0=0, n_sched=(100_000,), seed=4)
    X = gen_batch(design, 1).X
    assert np.max(np.abs(X.T @ X / X.shape[0] - np.eye(5))) < 3 / np.sqrt(X.shape[0])


def test_ar1_covariance():
    design = SimDesign(p=4, s0=0, n_sched=(10,), cov="ar1", rho=0.5)
    assert design.covariance()[0, 2] == 0.25
    X = gen_batch(SimDesign(p=4, s0=0, n_sched=(200_000,), cov="ar1", rho=0.5, seed=1), 1).X
    assert abs((X.T @ X / X.shape[0])[0, 2] - 0.25) < 0.02


def test_noiseless_response():
    design = SimDesign(p=6, s0=2, n_sched=(9,), sigma_eps=0.0)
    batch = gen_batch(design, 1)
    np.testing.assert_array_equal(batch.y, batch.X @ design.beta0)


def test_default_beta_pattern():
    np.testing.assert_array_equal(default_beta0(8, 4), [1, 1, 0.01, 0.01, 0, 0, 0, 0])
    np.testing.assert_array_equal(default_beta0(5, 3), [1, 1, 0.01, 0, 0])
    design = SimDesign(p=100, s0=4, n_sched=(20,))
    assert design.default_coords() == (0, 1, 2, 3, 4, 5)


def test_design_validation():
    with pytest.raises(ValueError):
        SimDesign(p=5, s0=1, n_sched=(0,))
    with pytest.raises(ValueError):
        SimDesign(p=5, s0=1, n_sched=(3,), cov="ar1", rho=1.0)
    with pytest.raises(ValueError):
        SimDesign(p=3, s0=2, n_sched=(3,), beta0=[1.0, 0, 0])


def test_batches_reproducible_and_independent():
    design = SimDesign(p=5, s0=2, n_sched=(4, 4, 4), seed=9)
    a = list(stream(design, 2))
    np.testing.assert_array_equal(a[1].X, gen_batch(design, 2, 2).X)
    assert not np.array_equal(a[0].X, a[1].X)
    assert not np.array_equal(gen_batch(design, 1, 0).X, gen_batch(design, 1, 1).X)


def test_single_replication_single_batch_matches_offline():
    design = SimDesign(p=12, s0=2, n_sched=(40,), seed=5, replications=1)
    cfg = EngineConfig(coords=(0, 3), solver=SolverConfig(tol=1e-12))
    res = run_replications(design, cfg)
    assert not res.errors and len(res.rows) == 2
    batch = gen_batch(design, 1)
    for rec in res.records():
        est, tau, _ = offline_debiased(batch.X, batch.y, rec["lambda"], rec["coord"])
        assert rec["estimate"] == pytest.approx(est, abs=1e-8)
        assert rec["tau"] == pytest.approx(tau, abs=1e-8)


def test_replications_deterministic_and_shaped():
    design = SimDesign(p=10, s0=2, n_sched=(15, 15, 15), seed=2, replications=3)
    a = run_replications(design)
    b = run_replications(design)
    assert a.rows == b.rows
    assert len(a.rows) == 3 * 3 * len(design.default_coords())
    assert all(len(r) == len(RAW_FIELDS) for r in a.rows)


def test_replication_errors_are_recorded():
    # a step far too large makes every solve diverge
    design = SimDesign(p=5, s0=1, n_sched=(10, 10), replications=2)
    res = run_replications(design, EngineConfig(solver=SolverConfig(eta=1e3)))
    assert set(res.errors) == {0, 1}
    assert "NumericalError" in res.errors[0]


def test_parse_design():
    d = parse_design("p=400\ns0=6\ncov=ar1:0.5\nnsched=35x12\nreps=200\nseed=11  # comment\n")
    assert (d.p, d.s0, d.cov, d.rho, d.b, d.replications, d.seed) == (400, 6, "ar1", 0.5, 12, 200, 11)
    assert d.n_sched == (35,) * 12
    assert parse_nsched("20,20, 2x3") == (20, 20, 2, 2, 2)


@pytest.mark.parametrize("text", ["p=5\ns0=1", "p=5\ns0=1\nnsched=3\nbogus=1",
                                  "p=5\ns0=1\nnsched=3\ncov=toeplitz", "p=5 s0=1",
                                  "p=5\ns0=9\nnsched=3"])
def test_parse_design_errors(text):
    with pytest.raises(DataError):
        parse_design(text)
