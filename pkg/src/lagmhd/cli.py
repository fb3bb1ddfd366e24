"""Command line entry point: ``lagmhd run | verify | converge``.

Exit codes: 0 success, 1 bad input, 2 blow-up or solver failure, 3 a
verification check failed, 4 a convergence study was non-monotone.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, load_config, resolve_scenario
from .diagnostics import DiagnosticsRecord, QueuedSink, Recorder
from .model import sample_initial_state
from .oracle import CASES, convergence_study
from .snapshot import SnapshotError, read_snapshot, write_snapshot
from .stepper import run

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_FAILURE = 2
EXIT_CHECK = 3
EXIT_NON_MONOTONE = 4

OUT_DIR_ENV = "MHD_OUT_DIR"
FINAL_KEYS = ("residual_h2", "residual_F", "residual_G", "mask_fraction",
              "recon_J_mismatch", "recon_Jh2_mismatch")

log = logging.getLogger("lagmhd")


def format_value(value) -> str:
    if isinstance(value, (bool, int, np.integer)):
        return str(int(value))
    return "%.17g" % value


class CsvSink:
    """Writes one ``diagnostics.csv`` row per record, header first."""

    def __init__(self, path: Path):
        self._file = open(path, "w", newline="")
        self._writer = csv.writer(self._file, lineterminator="\n")
        self._writer.writerow(DiagnosticsRecord.columns())

    def __call__(self, record: DiagnosticsRecord, state):
        self._writer.writerow([format_value(v) for v in record.values()])

    def close(self):
        self._file.close()


class SnapshotSink:
    def __init__(self, directory: Path, params):
        self.directory = directory
        self.params = params
        self.count = 0
        directory.mkdir(parents=True, exist_ok=True)

    def __call__(self, record, state):
        write_snapshot(self.directory / f"snap_{self.count:05d}.bin", state, self.params)
        self.count += 1


def _json_safe(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None if math.isnan(value) else ("inf" if value > 0 else "-inf")
    return value


def final_residuals(record: DiagnosticsRecord) -> dict:
    return {key: _json_safe(getattr(record, key)) for key in FINAL_KEYS}


def output_dir(cfg: RunConfig, override: str | None) -> Path:
    base = override or os.environ.get(OUT_DIR_ENV) or cfg.output.dir
    return Path(base) / cfg.name


def _check(value, threshold, passed) -> dict:
    return {"value": _json_safe(float(value)), "threshold": threshold, "pass": bool(passed)}


def execute_run(cfg: RunConfig, out: Path) -> tuple[int, dict]:
    """Run one scenario, writing CSV, snapshots and ``report.json`` under ``out``."""
    out.mkdir(parents=True, exist_ok=True)
    initial = sample_initial_state(cfg.initial, cfg.grid)
    params = cfg.params
    recorder = Recorder(initial, params, cfg.verify.mask_rel,
                        residuals=cfg.verify.residuals,
                        reconstructions=cfg.verify.reconstructions)
    log.info("E0 = %.17g, J lower bound = %.17g", recorder.E0, recorder.J_bar)

    extremes = {"J_min": float(initial.J.min()), "P_min": float(initial.P.min())}

    def on_step(state):
        extremes["J_min"] = min(extremes["J_min"], float(state.J.min()))
        extremes["P_min"] = min(extremes["P_min"], float(state.P.min()))

    csv_sink = CsvSink(out / "diagnostics.csv")
    sinks = [csv_sink]
    snap_sink = None
    if cfg.output.snapshots:
        snap_sink = QueuedSink(SnapshotSink(out / "snapshots", params))
        sinks.append(snap_sink)
    try:
        result = run(initial, params, cfg.stepping, sinks=sinks, recorder=recorder,
                     on_step=on_step)
    finally:
        csv_sink.close()
        if snap_sink is not None:
            snap_sink.close()

    records = recorder.records
    last = records[-1]
    verify = cfg.verify
    checks = {
        "completed": {"value": result.failure, "threshold": None, "pass": result.failure is None},
        "energy_drift": _check(max(r.energy_rel_drift for r in records), verify.energy_tol,
                               all(r.energy_rel_drift <= verify.energy_tol for r in records)),
        "J_lower_bound": _check(extremes["J_min"], recorder.J_bar,
                                extremes["J_min"] >= recorder.J_bar),
        "positivity": {"value": {"J_min": extremes["J_min"], "P_min": extremes["P_min"]},
                       "threshold": 0.0,
                       "pass": extremes["J_min"] > 0 and extremes["P_min"] >= 0},
        "definitional": _check(max(r.definitional for r in records), verify.definitional_tol,
                               all(r.definitional <= verify.definitional_tol for r in records)),
    }
    if verify.monitors:
        checks["monitors"] = {"value": sum(r.monitors_ok for r in records),
                              "threshold": len(records),
                              "pass": all(r.monitors_ok for r in records)}
    report = {
        "scenario": cfg.name,
        "config": cfg.as_dict(),
        "steps": result.steps,
        "outputs": len(records),
        "t_final": result.state.t,
        "failure": result.failure,
        "E0": recorder.E0,
        "J_bar": recorder.J_bar,
        "checks": checks,
        "final": final_residuals(last),
    }
    report["ok"] = all(c["pass"] for c in checks.values())
    (out / "report.json").write_text(json.dumps(report, indent=2) + "\n")
    if result.failure is not None:
        log.error("run stopped: %s", result.failure)
        return EXIT_FAILURE, report
    failed = [name for name, c in checks.items() if not c["pass"]]
    if failed:
        log.error("failed checks: %s", ", ".join(failed))
        return EXIT_CHECK, report
    return EXIT_OK, report


def cmd_run(args) -> int:
    cfg = load_config(resolve_scenario(args.config))
    out = output_dir(cfg, args.out)
    out.mkdir(parents=True, exist_ok=True)
    handler = logging.FileHandler(out / "run.log", mode="w")
    handler.setFormatter(logging.Formatter("%(levelname)s %(message)s"))
    log.addHandler(handler)
    try:
        log.info("resolved config: %s", json.dumps(cfg.as_dict(), sort_keys=True))
        code, report = execute_run(cfg, out)
        log.info("wrote %s (exit %d)", out / "report.json", code)
    finally:
        log.removeHandler(handler)
        handler.close()
    return code


def verify_snapshots(paths, mask_rel: float, definitional_tol: float = 1e-10) -> dict:
    """Recompute the run diagnostics from snapshot files alone."""
    loaded = [read_snapshot(p) for p in paths]
    first_state, params = loaded[0]
    for path, (state, p) in zip(paths, loaded):
        if p != params:
            raise SnapshotError(f"{path}: parameters differ from {paths[0]}")
        if state.grid != first_state.grid:
            raise SnapshotError(f"{path}: grid differs from {paths[0]}")
        if not np.array_equal(state.rho0, first_state.rho0):
            raise SnapshotError(f"{path}: rho0 differs from {paths[0]}")
    times = [s.t for s, _ in loaded]
    if any(b <= a for a, b in zip(times, times[1:])):
        raise SnapshotError("snapshot times must be strictly increasing in the given order")

    recorder = Recorder(first_state, params, mask_rel)
    problems = []
    for path, (state, _) in zip(paths, loaded):
        try:
            state.check_admissible()
        except ValueError as exc:
            problems.append(f"{path}: {exc}")
        recorder.record(state)
    records = recorder.records
    definitional = max(r.definitional for r in records)
    pairs = [{"t0": a.t, "t1": b.t, **{k: _json_safe(getattr(b, k)) for k in FINAL_KEYS[:3]}}
             for a, b in zip(records, records[1:])]
    ok = not problems and definitional <= definitional_tol
    return {
        "snapshots": [str(p) for p in paths],
        "times": times,
        "admissibility_problems": problems,
        "definitional": _check(definitional, definitional_tol, definitional <= definitional_tol),
        "pairs": pairs,
        "final": final_residuals(records[-1]),
        "ok": ok,
    }


def cmd_verify(args) -> int:
    report = verify_snapshots([Path(p) for p in args.snapshots], args.mask_rel, args.tol)
    text = json.dumps(report, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return EXIT_OK if report["ok"] else EXIT_CHECK


def _number_list(kind):
    def parse(text):
        try:
            return [kind(x) for x in text.split(",") if x.strip()]
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from exc
    return parse


def cmd_converge(args) -> int:
    if args.case not in CASES:
        raise ConfigError(f"unknown case {args.case!r}; known: {', '.join(CASES)}")
    if len(args.grids) < 3 or len(args.dts) < 3:
        raise ConfigError("need >= 3 levels for both --grids and --dts")
    kwargs = dict(grids=args.grids, dts=args.dts, spatial_dt=args.spatial_dt,
                  temporal_nodes=args.temporal_nodes)
    case = CASES[args.case]()
    if args.workers > 1:
        with ThreadPoolExecutor(max_workers=args.workers) as pool:
            report = convergence_study(case, executor=pool, **kwargs)
    else:
        report = convergence_study(case, **kwargs)
    text = json.dumps(report.as_dict(), indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    verdicts = (report.spatial.verdict, report.temporal.verdict)
    if "non-monotone" in verdicts:
        return EXIT_NON_MONOTONE
    return EXIT_OK if report.ok else EXIT_CHECK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lagmhd", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a scenario from a TOML file or a shipped name")
    p.add_argument("config")
    p.add_argument("--out", help=f"output base directory (overrides ${OUT_DIR_ENV})")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("verify", help="recompute diagnostics from snapshot files")
    p.add_argument("snapshots", nargs="+")
    p.add_argument("--mask-rel", type=float, default=1e-8)
    p.add_argument("--tol", type=float, default=1e-10, help="definitional residual tolerance")
    p.add_argument("--out", help="also write the JSON report here")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("converge", help="manufactured-solution order study")
    p.add_argument("case", help=f"one of: {', '.join(CASES)}")
    p.add_argument("--grids", type=_number_list(int), default=[128, 256, 512])
    p.add_argument("--dts", type=_number_list(float), default=[4e-3, 2e-3, 1e-3])
    p.add_argument("--spatial-dt", type=float, default=2e-5)
    p.add_argument("--temporal-nodes", type=int, default=2049)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", help="also write the JSON report here")
    p.set_defaults(func=cmd_converge)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.DEBUG if args.verbose else logging.INFO
    logging.basicConfig(level=level, format="%(levelname)s %(message)s", stream=sys.stderr)
    log.setLevel(level)
    try:
        return args.func(args)
    except (ConfigError, SnapshotError, ValueError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
