"""Reduce replicated simulation output to coverage tables and QQ diagnostics."""
from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .debias import OK, norm_cdf, norm_quantile

METRICS = ("A.bias", "MAE", "ASE", "ESE", "CP", "ACL")
NA = "NA"

# recorded in report headers; which zero coordinates feed the "0" group
ZERO_GROUP_POLICY = "all tracked coordinates with zero truth"


@dataclass
class GroupRow:
    batch: int
    group: float
    abias: float
    mae: float
    ase: float
    ese: float | None
    cp: float
    acl: float
    n_coords: int
    n_reps: int

    def value(self, metric: str):
        return {"A.bias": self.abias, "MAE": self.mae, "ASE": self.ase, "ESE": self.ese,
                "CP": self.cp, "ACL": self.acl}[metric]


@dataclass
class MetricsReport:
    rows: list[GroupRow]
    skipped: int = 0
    alpha: float = 0.05
    notes: list[str] = field(default_factory=list)

    def get(self, batch: int, group: float) -> GroupRow:
        for row in self.rows:
            if row.batch == batch and math.isclose(row.group, group):
                return row
        raise KeyError((batch, group))

    def batches(self) -> list[int]:
        return sorted({r.batch for r in self.rows})

    def groups(self) -> list[float]:
        return sorted({r.group for r in self.rows}, reverse=True)


def _usable(records):
    ok, skipped = [], 0
    for rec in records:
        if rec["status"] == OK and rec["estimate"] is not None:
            ok.append(rec)
        else:
            skipped += 1
    return ok, skipped


def summarize(records, alpha: float = 0.05, allow_single: bool = False) -> MetricsReport:
    """Group-level metrics per batch.

    Groups are the distinct true values among tracked coordinates.  Within a
    group:

    * ``A.bias`` averages ``|mean_reps(estimate) - truth|`` over coordinates;
    * ``MAE`` is the mean of ``|estimate - truth|`` over coordinates and reps;
    * ``ASE`` and ``ACL`` average the reported standard error and interval
      width; ``CP`` is the fraction of intervals containing the truth;
    * ``ESE`` is the across-replication standard deviation (``ddof=1``) per
      coordinate, averaged over coordinates.

    ``ESE`` needs two replications.  With ``allow_single`` a single
    replication is accepted and ``ESE`` is left as ``None``.
    """
    records, skipped = _usable(list(records))
    if not records:
        raise ValueError("no usable results to summarise")
    by_cell = defaultdict(lambda: defaultdict(list))
    for rec in records:
        by_cell[(rec["batch"], float(rec["truth"]))][rec["coord"]].append(rec)

    rows = []
    for (batch, truth), per_coord in sorted(by_cell.items(), key=lambda kv: (kv[0][0], -kv[0][1])):
        est = {c: np.array([r["estimate"] for r in rs]) for c, rs in per_coord.items()}
        n_reps = min(len(v) for v in est.values())
        if n_reps < 2 and not allow_single:
            raise ValueError("ESE needs at least two replications")
        all_recs = [r for rs in per_coord.values() for r in rs]
        all_est = np.array([r["estimate"] for r in all_recs])
        se = np.array([r["se"] for r in all_recs])
        lo = np.array([r["ci_low"] for r in all_recs])
        hi = np.array([r["ci_high"] for r in all_recs])
        ese = None
        if n_reps >= 2:
            ese = float(np.mean([np.std(v, ddof=1) for v in est.values()]))
        rows.append(GroupRow(
            batch=batch,
            group=truth,
            abias=float(np.mean([abs(v.mean() - truth) for v in est.values()])),
            mae=float(np.mean(np.abs(all_est - truth))),
            ase=float(se.mean()),
            ese=ese,
            cp=float(np.mean((lo <= truth) & (truth <= hi))),
            acl=float(np.mean(hi - lo)),
            n_coords=len(per_coord),
            n_reps=n_reps,
        ))
    return MetricsReport(rows, skipped, alpha)


def ks_statistic(values) -> float:
    """Kolmogorov-Smirnov distance between the sample and N(0, 1)."""
    x = np.sort(np.asarray(values, dtype=float))
    m = x.size
    if m == 0:
        raise ValueError("empty sample")
    F = np.array([norm_cdf(v) for v in x])
    i = np.arange(1, m + 1)
    return float(max(np.max(i / m - F), np.max(F - (i - 1) / m)))


@dataclass
class QQ:
    batch: int
    coord: int
    truth: float
    theoretical: np.ndarray
    standardized: np.ndarray
    ks: float

    @property
    def correlation(self) -> float:
        return float(np.corrcoef(self.theoretical, self.standardized)[0, 1])


def qq_from_values(values, batch=0, coord=0, truth=0.0) -> QQ:
    z = np.sort(np.asarray(values, dtype=float))
    m = z.size
    if m < 2:
        raise ValueError("QQ data needs at least two replications")
    theo = np.array([norm_quantile((i - 0.5) / m) for i in range(1, m + 1)])
    return QQ(batch, coord, truth, theo, z, ks_statistic(z))


def qq_data(records, batch: int | None = None) -> dict:
    """Standardised ``(estimate - truth) / se`` against normal plotting positions.

    Returns ``{(batch, coord): QQ}``; restrict to one batch with ``batch``.
    Plotting positions are ``(i - 0.5) / m``.
    """
    records, _ = _usable(list(records))
    groups = defaultdict(list)
    truths = {}
    for rec in records:
        if batch is not None and rec["batch"] != batch:
            continue
        if not rec["se"] > 0:
            continue
        key = (rec["batch"], rec["coord"])
        groups[key].append((rec["estimate"] - rec["truth"]) / rec["se"])
        truths[key] = rec["truth"]
    return {key: qq_from_values(v, key[0], key[1], truths[key]) for key, v in sorted(groups.items())}


def _fmt(v) -> str:
    if v is None:
        return NA
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_metrics_csv(report: MetricsReport, path, header_notes=()):
    """One row per batch x group x metric, ``#`` comment lines first."""
    with open(path, "w", newline="") as fh:
        for note in (f"alpha={report.alpha}", f"zero group: {ZERO_GROUP_POLICY}",
                     f"skipped non-identifiable results: {report.skipped}",
                     "ESE is NA when fewer than two replications are available",
                     *report.notes, *header_notes):
            fh.write(f"# {note}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["batch", "group", "metric", "value"])
        for row in report.rows:
            for metric in METRICS:
                w.writerow([row.batch, _fmt(row.group), metric, _fmt(row.value(metric))])


def write_qq_csv(qqs: dict, directory) -> list:
    """One CSV per coordinate holding every batch's QQ pairs."""
    directory = Path(directory)
    by_coord = defaultdict(list)
    for (batch, coord), qq in sorted(qqs.items()):
        by_coord[coord].append(qq)
    paths = []
    for coord, items in sorted(by_coord.items()):
        path = directory / f"qq_coord{coord}.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["batch", "coord", "truth", "theoretical", "standardized", "ks"])
            for qq in items:
                for t, s in zip(qq.theoretical, qq.standardized):
                    w.writerow([qq.batch, coord, _fmt(qq.truth), _fmt(float(t)), _fmt(float(s)),
                                _fmt(qq.ks)])
        paths.append(path)
    return paths


def render_svgs(report: MetricsReport, qqs: dict, directory) -> list:
    """Static QQ scatter (last batch) and interval-length trajectory plots."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    directory = Path(directory)
    paths = []
    with matplotlib.rc_context({"svg.hashsalt": "odlasso", "svg.fonttype": "none"}):
        last = max(b for b, _ in qqs) if qqs else None
        final = [qq for (b, _), qq in sorted(qqs.items()) if b == last]
        if final:
            fig, axes = plt.subplots(1, len(final), figsize=(3 * len(final), 3), squeeze=False)
            for ax, qq in zip(axes[0], final):
                ax.scatter(qq.theoretical, qq.standardized, s=6)
                lim = max(abs(qq.theoretical).max(), abs(qq.standardized).max())
                ax.plot([-lim, lim], [-lim, lim], lw=1, color="tab:blue")
                ax.set_title(f"coord {qq.coord} (truth {qq.truth:g})", fontsize=8)
            fig.tight_layout()
            path = directory / "qq.svg"
            fig.savefig(path, format="svg", metadata={"Date": None})
            plt.close(fig)
            paths.append(path)
        fig, ax = plt.subplots(figsize=(4, 3))
        for group in report.groups():
            rows = [r for r in report.rows if math.isclose(r.group, group)]
            ax.plot([r.batch for r in rows], [r.acl for r in rows], marker="o", label=f"{group:g}")
        ax.set_xlabel("batch")
        ax.set_ylabel("ACL")
        ax.legend(title="truth", fontsize=7)
        fig.tight_layout()
        path = directory / "ci_length.svg"
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
        paths.append(path)
    return paths
