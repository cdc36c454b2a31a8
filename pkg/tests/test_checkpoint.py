import numpy as np
import pytest

from odlasso.checkpoint import describe, dumps, load_checkpoint, loads, save_checkpoint
from odlasso.engine import EngineConfig, OnlineDebiasedLasso
from odlasso.errors import CheckpointError, CheckpointVersionError
from odlasso.simulate import SimDesign, stream


def _batches(seed=3, b=4):
    return list(stream(SimDesign(p=15, s0=2, n_sched=(20,) * b, seed=seed)))


def _engine(batches):
    eng = OnlineDebiasedLasso(EngineConfig(coords=(0, 2, 7)))
    eng.fit_stream(batches)
    return eng


def test_round_trip_is_bit_exact():
    eng = _engine(_batches())
    blob = dumps(eng)
    back = loads(blob)
    assert dumps(back) == blob
    np.testing.assert_array_equal(back.stats.S, eng.stats.S)
    assert back.sigma2 == eng.sigma2
    assert back.tuning.selected == eng.tuning.selected


def test_empty_engine_round_trip():
    eng = OnlineDebiasedLasso()
    assert dumps(loads(dumps(eng))) == dumps(eng)


def test_bad_magic():
    with pytest.raises(CheckpointVersionError):
        loads(b"NOPE" + bytes(20))


def test_unknown_version():
    blob = bytearray(dumps(_engine(_batches(b=1))))
    blob[4] = 99
    with pytest.raises(CheckpointVersionError):
        loads(bytes(blob))


def test_truncated_and_corrupted():
    blob = dumps(_engine(_batches(b=2)))
    with pytest.raises(CheckpointError):
        loads(blob[: len(blob) // 2])
    flipped = bytearray(blob)
    flipped[len(blob) // 2] ^= 0xFF
    with pytest.raises(CheckpointError):
        loads(bytes(flipped))


def test_missing_file(tmp_path):
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "absent.odl")


@pytest.mark.parametrize("split", [1, 2, 3])
def test_resume_matches_straight_run(tmp_path, split):
    batches = _batches()
    straight = OnlineDebiasedLasso(EngineConfig(coords=(0, 2, 7)))
    full = [straight.partial_fit(bt) for bt in batches]

    first = OnlineDebiasedLasso(EngineConfig(coords=(0, 2, 7)))
    outs = [first.partial_fit(bt) for bt in batches[:split]]
    save_checkpoint(first, tmp_path / "c.odl")
    resumed = load_checkpoint(tmp_path / "c.odl")
    outs += [resumed.partial_fit(bt) for bt in batches[split:]]
    assert [(o.lam, o.sigma2, o.results) for o in outs] == [(o.lam, o.sigma2, o.results) for o in full]
    assert dumps(resumed) == dumps(straight)


def test_describe():
    info = describe(_engine(_batches(b=2)))
    assert info["N"] == 40 and info["batches"] == 2 and info["tracked_coords"] == [0, 2, 7]
