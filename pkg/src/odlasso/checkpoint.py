"""Binary checkpoints of the complete engine state.

Layout (all integers little-endian)::

    b"ODL1"  u16 version
    repeated sections:  u16 name_len, name (ascii), u64 payload_len, payload
    u32 CRC32 of every preceding byte

Floating-point payloads are raw IEEE-754 ``<f8`` so a save/load round trip
is bit-exact.  The ``meta`` section is UTF-8 JSON holding the engine
configuration and feature names; every number that evolves with the stream
lives in a binary section.
"""
from __future__ import annotations

import io
import json
import struct
import zlib
from pathlib import Path

import numpy as np

from .engine import EngineConfig, OnlineDebiasedLasso
from .errors import CheckpointError, CheckpointVersionError
from .lasso import LassoTrack
from .projection import ProjectionTrack
from .prox import SolveReport, SolverConfig
from .suffstats import CumulativeStats
from .tuning import CVReport

MAGIC = b"ODL1"
VERSION = 1


class _Writer:
    def __init__(self):
        self.buf = io.BytesIO()

    def i64(self, v):
        self.buf.write(struct.pack("<q", int(v)))

    def f64(self, v):
        self.buf.write(struct.pack("<d", float(v)))

    def arr(self, a):
        a = np.ascontiguousarray(a, dtype="<f8")
        self.i64(a.size)
        self.buf.write(a.tobytes())

    def iarr(self, a):
        a = np.ascontiguousarray(a, dtype="<i8")
        self.i64(a.size)
        self.buf.write(a.tobytes())

    def report(self, rep: SolveReport | None):
        if rep is None:
            self.i64(0)
            return
        self.i64(1)
        self.arr(rep.coefficients)
        self.i64(rep.iterations)
        self.f64(rep.final_grad_norm)
        self.i64(int(rep.converged))
        self.f64(rep.eta)

    def getvalue(self) -> bytes:
        return self.buf.getvalue()


class _Reader:
    def __init__(self, data: bytes, where: str):
        self.data = data
        self.pos = 0
        self.where = where

    def take(self, n):
        if self.pos + n > len(self.data):
            raise CheckpointError(f"truncated {self.where} section")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def i64(self):
        return struct.unpack("<q", self.take(8))[0]

    def f64(self):
        return struct.unpack("<d", self.take(8))[0]

    def arr(self):
        n = self.i64()
        return np.frombuffer(self.take(8 * n), dtype="<f8").astype(float)

    def iarr(self):
        n = self.i64()
        return np.frombuffer(self.take(8 * n), dtype="<i8").astype(np.int64)

    def report(self):
        if not self.i64():
            return None
        coef = self.arr()
        it = self.i64()
        gn = self.f64()
        conv = bool(self.i64())
        eta = self.f64()
        return SolveReport(coef, it, gn, conv, eta)


def _config_to_dict(cfg: EngineConfig) -> dict:
    return {
        "grid": list(cfg.grid),
        "grid_mode": cfg.grid_mode,
        "coords": None if cfg.coords is None else list(cfg.coords),
        "alpha": cfg.alpha,
        "solver": {"eta": cfg.solver.eta, "tol": cfg.solver.tol,
                   "max_iter": cfg.solver.max_iter, "criterion": cfg.solver.criterion},
        "cv_folds": cfg.cv_folds,
        "seed": cfg.seed,
    }


def _config_from_dict(d: dict) -> EngineConfig:
    return EngineConfig(
        grid=tuple(d["grid"]),
        grid_mode=d["grid_mode"],
        coords=None if d["coords"] is None else tuple(d["coords"]),
        alpha=d["alpha"],
        solver=SolverConfig(**d["solver"]),
        cv_folds=d["cv_folds"],
        seed=d["seed"],
    )


def dumps(engine: OnlineDebiasedLasso) -> bytes:
    sections = []
    meta = {"config": _config_to_dict(engine.config), "feature_names": engine.feature_names}
    sections.append(("meta", json.dumps(meta, sort_keys=True).encode("utf-8")))

    st = engine.stats
    w = _Writer()
    w.i64(-1 if st.p is None else st.p)
    w.i64(st.N)
    w.i64(st.b)
    w.f64(st.yy)
    w.i64(-1 if engine.selected_index is None else engine.selected_index)
    w.f64(engine.sigma2)
    sections.append(("dims", w.getvalue()))
    if st.p is not None:
        w = _Writer()
        w.arr(st.S.ravel())
        w.arr(st.U)
        sections.append(("stats", w.getvalue()))

    w = _Writer()
    w.i64(len(engine.tracks))
    for t in engine.tracks:
        w.f64(t.lam)
        w.f64(t.sigma2)
        w.arr(t.beta)
        w.report(t.last_report)
    sections.append(("lasso", w.getvalue()))

    w = _Writer()
    w.i64(len(engine.projections))
    for t in engine.projections:
        w.i64(t.r)
        w.f64(t.a1)
        w.f64(t.a2)
        w.f64(t.zz)
        w.arr(t.A1)
        w.arr(t.gamma)
        w.report(t.last_report)
    sections.append(("projection", w.getvalue()))

    tun = engine.tuning
    w = _Writer()
    w.arr(tun.selected)
    w.i64(len(tun.pe_table))
    for row in tun.pe_table:
        w.arr(row)
    if tun.cv is None:
        w.i64(0)
    else:
        w.i64(1)
        w.i64(tun.cv.seed)
        w.i64(tun.cv.folds)
        w.iarr(tun.cv.fold_of_row)
        w.arr(tun.cv.cv_error)
        w.i64(tun.cv.selected)
    sections.append(("tuning", w.getvalue()))

    out = io.BytesIO()
    out.write(MAGIC)
    out.write(struct.pack("<H", VERSION))
    for name, payload in sections:
        raw = name.encode("ascii")
        out.write(struct.pack("<H", len(raw)))
        out.write(raw)
        out.write(struct.pack("<Q", len(payload)))
        out.write(payload)
    body = out.getvalue()
    return body + struct.pack("<I", zlib.crc32(body))


def loads(data: bytes) -> OnlineDebiasedLasso:
    if len(data) < 4 or data[:4] != MAGIC:
        raise CheckpointVersionError("not an ODL checkpoint (bad magic bytes)")
    if len(data) < 10:
        raise CheckpointError("truncated checkpoint")
    (version,) = struct.unpack("<H", data[4:6])
    if version != VERSION:
        raise CheckpointVersionError(f"checkpoint format version {version}, reader supports {VERSION}")
    body, (crc,) = data[:-4], struct.unpack("<I", data[-4:])
    sections = {}
    pos = 6
    while pos < len(body):
        if pos + 2 > len(body):
            raise CheckpointError("truncated section header")
        (nlen,) = struct.unpack("<H", body[pos:pos + 2])
        pos += 2
        name = body[pos:pos + nlen].decode("ascii", errors="replace")
        pos += nlen
        if pos + 8 > len(body):
            raise CheckpointError("truncated section header")
        (plen,) = struct.unpack("<Q", body[pos:pos + 8])
        pos += 8
        if pos + plen > len(body):
            raise CheckpointError(f"truncated {name} section")
        sections[name] = body[pos:pos + plen]
        pos += plen
    if zlib.crc32(body) != crc:
        raise CheckpointError("checksum mismatch; checkpoint is corrupted")
    for required in ("meta", "dims", "lasso", "projection", "tuning"):
        if required not in sections:
            raise CheckpointError(f"missing {required} section")

    meta = json.loads(sections["meta"].decode("utf-8"))
    engine = OnlineDebiasedLasso(_config_from_dict(meta["config"]))
    engine.feature_names = meta.get("feature_names")

    r = _Reader(sections["dims"], "dims")
    p = r.i64()
    stats = CumulativeStats(None if p < 0 else p)
    stats.N = r.i64()
    stats.b = r.i64()
    stats.yy = r.f64()
    sel = r.i64()
    engine.selected_index = None if sel < 0 else sel
    engine.sigma2 = r.f64()
    if p >= 0:
        r = _Reader(sections["stats"], "stats")
        stats.S = r.arr().reshape(p, p)
        stats.U = r.arr()
    engine.stats = stats

    r = _Reader(sections["lasso"], "lasso")
    for _ in range(r.i64()):
        lam, s2 = r.f64(), r.f64()
        beta = r.arr()
        engine.tracks.append(LassoTrack(lam, beta, s2, r.report()))

    r = _Reader(sections["projection"], "projection")
    for _ in range(r.i64()):
        coord = r.i64()
        a1, a2, zz = r.f64(), r.f64(), r.f64()
        A1 = r.arr()
        gamma = r.arr()
        engine.projections.append(ProjectionTrack(coord, gamma, a1, a2, A1, zz, r.report()))

    r = _Reader(sections["tuning"], "tuning")
    tun = engine.tuning
    tun.selected = [float(v) for v in r.arr()]
    tun.pe_table = [r.arr() for _ in range(r.i64())]
    if r.i64():
        seed, folds = r.i64(), r.i64()
        labels = r.iarr()
        err = r.arr()
        tun.cv = CVReport(seed, folds, labels, err, r.i64())
    return engine


def save_checkpoint(engine: OnlineDebiasedLasso, path) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(dumps(engine))
    tmp.replace(path)


def load_checkpoint(path) -> OnlineDebiasedLasso:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    return loads(data)


def describe(engine: OnlineDebiasedLasso) -> dict:
    """Human-readable summary used by ``odl checkpoint-info``."""
    st = engine.stats
    return {
        "p": st.p,
        "N": st.N,
        "batches": st.b,
        "grid": list(engine.tuning.grid),
        "grid_mode": engine.tuning.mode,
        "selected_history": list(engine.tuning.selected),
        "sigma2": engine.sigma2,
        "tracked_coords": [t.r for t in engine.projections],
        "feature_names": engine.feature_names,
        "alpha": engine.config.alpha,
    }
