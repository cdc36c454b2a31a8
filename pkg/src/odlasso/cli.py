"""``odl`` command line: fit, simulate, report, checkpoint-info.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .checkpoint import describe, load_checkpoint, save_checkpoint
from .csvio import open_results, read_batch, read_raw_results, result_rows, write_raw_results
from .engine import DEFAULT_GRID, EngineConfig, OnlineDebiasedLasso
from .errors import CheckpointError, DataError, NumericalError
from .metrics import qq_data, render_svgs, summarize, write_metrics_csv, write_qq_csv
from .prox import SolverConfig
from .simulate import RAW_FIELDS, parse_design, run_replications
from .tuning import FIXED, SCALED, TuningState

log = logging.getLogger("odlasso")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
CHECKPOINT_NAME = "checkpoint.odl"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> tuple:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _add_engine_flags(p: argparse.ArgumentParser):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--grid", type=_floats, help="fixed penalty grid, e.g. 0.15,0.2,0.25,0.3")
    g.add_argument("--c-grid", type=_floats,
                   help="constants C for the scaled grid C*sqrt(log p / N)")
    p.add_argument("--alpha", type=float, default=0.05, help="1 - confidence level (default 0.05)")
    p.add_argument("--coords", help="tracked coordinates: column names or 0-based indices")
    p.add_argument("--eta", type=float, help="gradient step size (default: automatic)")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--max-iter", type=int, default=100_000)
    p.add_argument("--cv-folds", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, type=Path, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="odl", description="Online debiased lasso for streaming batches.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)

    fit = sub.add_parser("fit", help="stream CSV batches through the engine")
    fit.add_argument("batches", nargs="+", type=Path, help="batch CSV files in arrival order")
    fit.add_argument("--resume", type=Path, help="continue from a checkpoint")
    _add_engine_flags(fit)

    sim = sub.add_parser("simulate", help="run a replicated simulation from a design file")
    sim.add_argument("design", type=Path)
    sim.add_argument("--no-svg", action="store_true", help="skip SVG renderings")
    _add_engine_flags(sim)

    rep = sub.add_parser("report", help="recompute metrics from a simulation raw.csv")
    rep.add_argument("raw", type=Path)
    rep.add_argument("--alpha", type=float, default=0.05)
    rep.add_argument("--out", required=True, type=Path)
    rep.add_argument("--no-svg", action="store_true")

    info = sub.add_parser("checkpoint-info", help="print a checkpoint summary as JSON")
    info.add_argument("checkpoint", type=Path)
    return parser


def _engine_config(args, coords) -> EngineConfig:
    if not 0 < args.alpha < 1:
        raise UsageError(f"--alpha must lie in (0, 1), got {args.alpha}")
    if args.c_grid:
        grid, mode = args.c_grid, SCALED
    else:
        grid, mode = args.grid or DEFAULT_GRID, FIXED
    try:
        solver = SolverConfig(eta=args.eta, tol=args.tol, max_iter=args.max_iter)
        TuningState(grid, mode)
        return EngineConfig(grid=grid, grid_mode=mode, coords=coords, alpha=args.alpha,
                            solver=solver, cv_folds=args.cv_folds, seed=args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _resolve_coords(text: str | None, names: list[str] | None):
    if text is None:
        return None
    out = []
    for tok in (t.strip() for t in text.split(",")):
        if not tok:
            continue
        if names and tok in names:
            out.append(names.index(tok))
        elif tok.lstrip("-").isdigit():
            out.append(int(tok))
        else:
            raise UsageError(f"unknown coordinate {tok!r}")
    return tuple(out)


def cmd_fit(args) -> int:
    args.out.mkdir(parents=True, exist_ok=True)
    if args.resume:
        engine = load_checkpoint(args.resume)
        names = engine.feature_names
    else:
        engine = None
        names = None
    fh, writer = open_results(args.out / "results.csv", append=args.resume is not None)
    try:
        for path in args.batches:
            # one raw batch in memory at a time
            file_names, batch = read_batch(path, names)
            if engine is None:
                names = file_names
                engine = OnlineDebiasedLasso(_engine_config(args, _resolve_coords(args.coords, names)))
                engine.feature_names = names
            out = engine.partial_fit(batch)
            for row in result_rows(out, names):
                writer.writerow(row)
            log.info("batch %d (%s): N=%d lambda=%g", out.batch, path, out.N, out.lam)
    finally:
        fh.close()
    if engine is not None:
        save_checkpoint(engine, args.out / CHECKPOINT_NAME)
    return EXIT_OK


def _write_report(records, out: Path, alpha: float, svg: bool, notes=()):
    single = len({r["replication"] for r in records}) < 2
    report = summarize(records, alpha=alpha, allow_single=True)
    write_metrics_csv(report, out / "metrics.csv", header_notes=notes)
    qqs = {} if single else qq_data(records)
    if qqs:
        write_qq_csv(qqs, out)
    if svg:
        render_svgs(report, qqs, out)
    return report


def cmd_simulate(args) -> int:
    try:
        design = parse_design(args.design.read_text())
    except OSError as exc:
        raise DataError(f"cannot read design file: {exc}") from exc
    coords = _resolve_coords(args.coords, None) or design.coords or design.default_coords()
    config = _engine_config(args, coords)
    args.out.mkdir(parents=True, exist_ok=True)
    res = run_replications(design, config)
    write_raw_results(res.rows, RAW_FIELDS, args.out / "raw.csv")
    if res.errors:
        (args.out / "errors.json").write_text(json.dumps(res.errors, indent=1, sort_keys=True))
        log.warning("%d replication(s) failed; see errors.json", len(res.errors))
    if not res.rows:
        raise NumericalError("every replication failed")
    notes = (f"design: p={design.p} s0={design.s0} cov={design.cov}"
             f"{':' + repr(design.rho) if design.cov == 'ar1' else ''} "
             f"batches={design.b} reps={design.replications} seed={design.seed}",
             f"noise sd sigma_eps={design.sigma_eps!r}")
    _write_report(res.records(), args.out, config.alpha, not args.no_svg, notes)
    return EXIT_OK


def cmd_report(args) -> int:
    if not 0 < args.alpha < 1:
        raise UsageError(f"--alpha must lie in (0, 1), got {args.alpha}")
    try:
        records = read_raw_results(args.raw)
    except (OSError, KeyError, ValueError) as exc:
        raise DataError(f"cannot parse {args.raw}: {exc}") from exc
    args.out.mkdir(parents=True, exist_ok=True)
    _write_report(records, args.out, args.alpha, not args.no_svg)
    return EXIT_OK


def cmd_checkpoint_info(args) -> int:
    engine = load_checkpoint(args.checkpoint)
    print(json.dumps(describe(engine), indent=2))
    return EXIT_OK


COMMANDS = {"fit": cmd_fit, "simulate": cmd_simulate, "report": cmd_report,
            "checkpoint-info": cmd_checkpoint_info}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"odl: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, CheckpointError) as exc:
        print(f"odl: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"odl: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (IndexError, ValueError) as exc:
        print(f"odl: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
