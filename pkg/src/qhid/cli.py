"""
Command-line front end.

    qhid simulate  --config tce --out tce.csv
    qhid identify  --config tce --trace tce.csv --out tce_zs.json
    qhid baseline  --config tce --trace tce_long.csv --out tce_ft.json
    qhid sweep-t2  --config ala --t2-grid 0.01:0.1:10 --out ala_t2.csv
    qhid report    --zs tce_zs.json --ft tce_ft.json

Exit status is 0 on success, 2 for invalid input or configuration and 3
when identification fails.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import pipeline
from .era import DEFAULT_SVD_TOL
from .errors import IdentificationError, QHIDError, ValidationError
from .fid import TimeTrace
from .ft import find_peaks, peaks_to_csv, spectrum
from .hamiltonian import MoleculeSpec, load_molecule

log = logging.getLogger("qhid")

EXIT_OK, EXIT_INVALID, EXIT_IDENTIFICATION = 0, 2, 3


@dataclass(frozen=True)
class RunConfig:
    molecule: MoleculeSpec
    dt: float
    n_points: int = pipeline.DEFAULT_POINTS
    t2: float | None = None
    dead_time: float = 0.0
    gain: float = 1.0
    svd_rel_tol: float = DEFAULT_SVD_TOL
    seed: int = 0

    def validate(self) -> "RunConfig":
        K = pipeline.protocol_dynamics(self.molecule).K
        if self.n_points < 4 * K:
            raise ValidationError(
                f"{self.n_points} points cannot pin down a model of order up to {K}; use at least {4 * K}"
            )
        pipeline.check_nyquist(self.molecule, self.dt)
        if self.t2 is not None and self.t2 <= 0:
            raise ValidationError("T2 must be positive")
        if self.gain == 0:
            raise ValidationError("gain must be nonzero")
        return self


def _config(args) -> RunConfig:
    spec = load_molecule(args.config)
    dt = args.dt if args.dt is not None else pipeline.default_dt(spec)
    return RunConfig(
        spec,
        dt,
        args.points,
        getattr(args, "t2", None),
        getattr(args, "dead_time", 0.0),
        getattr(args, "gain", 1.0),
        getattr(args, "svd_tol", DEFAULT_SVD_TOL),
        args.seed,
    ).validate()


def _write(text: str, out) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _json(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _load_traces(paths) -> TimeTrace:
    traces = [TimeTrace.from_csv(Path(p)) for p in paths]
    total = traces[0]
    for t in traces[1:]:
        total = total + t
    return total


def cmd_simulate(args) -> int:
    cfg = _config(args)
    traces, total = pipeline.simulate_protocol(cfg.molecule, cfg.dt, cfg.n_points, cfg.t2, cfg.gain, cfg.dead_time)
    out = Path(args.out) if args.out else None
    if out is None:
        sys.stdout.write(total.to_csv())
        return EXIT_OK
    total.to_csv(out)
    if len(traces) > 1:
        for state, trace in zip(cfg.molecule.protocol_states, traces):
            trace.to_csv(out.with_name(f"{out.stem}_{state.letters}{out.suffix}"))
    log.info("wrote %d-sample trace(s) to %s", total.N, out)
    return EXIT_OK


def _truth(spec):
    return pipeline.true_values(spec)


def cmd_identify(args) -> int:
    spec = load_molecule(args.config)
    trace = _load_traces(args.trace)
    if trace.N < args.points:
        log.warning("trace has %d samples; using all of them", trace.N)
    truth = _truth(spec)
    ident = pipeline.identify(
        trace,
        spec,
        min(args.points, trace.N),
        args.svd_tol,
        args.order,
        args.seed,
        args.starts,
        reference=truth,
        truth=truth,
    )
    report = {"molecule": spec.name, **ident.report()}
    _write(_json(report), args.out)
    return EXIT_OK


def cmd_baseline(args) -> int:
    spec = load_molecule(args.config)
    trace = _load_traces(args.trace)
    truth = _truth(spec)
    ident = pipeline.identify_ft(trace, spec, args.zero_fill, args.min_height, args.seed, reference=truth, truth=truth)
    if args.spectrum_csv:
        spectrum(trace, args.zero_fill).to_csv(args.spectrum_csv)
    if args.peaks_csv:
        peaks_to_csv(find_peaks(spectrum(trace, args.zero_fill), args.min_height), args.peaks_csv)
    _write(_json({"molecule": spec.name, **ident.report()}), args.out)
    return EXIT_OK


def _grid(text: str) -> np.ndarray:
    try:
        lo, hi, steps = text.split(":")
        grid = np.linspace(float(lo), float(hi), int(steps))
    except ValueError as exc:
        raise ValidationError(f"--t2-grid wants LO:HI:STEPS, got {text!r}") from exc
    if grid.size < 1 or np.any(grid <= 0):
        raise ValidationError("T2 grid must hold positive values")
    return np.round(grid, 12)


def cmd_sweep_t2(args) -> int:
    cfg = _config(args)
    grid = _grid(args.t2_grid)
    results = pipeline.sweep_t2(
        cfg.molecule, grid, cfg.dt, cfg.n_points, cfg.svd_rel_tol, cfg.seed, args.starts, args.workers
    )
    labels = list(pipeline.protocol_dynamics(cfg.molecule).labels)
    rows = pipeline.sweep_rows(results, labels)
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["t2", "param", "estimate", "rel_error", "fitted_error", "status"])
    for r in rows:
        nums = [float(r[k]) for k in ("estimate", "rel_error", "fitted_error")]
        writer.writerow([repr(float(r["t2"])), r["param"], *map(repr, nums), r["status"]])
    _write(buf.getvalue(), args.out)
    failed = [t2 for t2, ident in results if ident is None]
    return EXIT_IDENTIFICATION if failed and len(failed) == len(results) else EXIT_OK


def _format(v) -> str:
    if v is None:
        return "N/A"
    return f"{v:.1f}" if abs(v) >= 1 else f"{v:.3g}"


def report_table(zs: dict | None, ft: dict | None) -> str:
    """Side-by-side table of FT and realization-matching estimates.

    Columns are parameters; rows are the two methods and their relative
    difference. Unresolved entries read ``N/A``; a missing run leaves its
    row as ``-``.
    """
    runs = [r for r in (ft, zs) if r is not None]
    if not runs:
        return "parameter\n"
    labels = [p["label"] for p in runs[0]["parameters"]]
    head = ["parameter"] + labels
    rows = []

    def estimates(run):
        if run is None:
            return None
        return [p["estimate"] for p in run["parameters"]]

    e_ft, e_zs = estimates(ft), estimates(zs)
    rows.append(["|a| FT"] + ([_format(v) for v in e_ft] if e_ft else ["-"] * len(labels)))
    rows.append(["|a| ZS"] + ([_format(v) for v in e_zs] if e_zs else ["-"] * len(labels)))
    if e_ft and e_zs:
        diff = []
        for f, z in zip(e_ft, e_zs):
            diff.append("N/A" if f is None or z is None else f"{abs(z - f) / abs(f):.2e}")
        rows.append(["rel. difference"] + diff)
    else:
        rows.append(["rel. difference"] + ["-"] * len(labels))
    widths = [max(len(r[i]) for r in [head] + rows) for i in range(len(head))]
    lines = ["  ".join(c.rjust(w) if i else c.ljust(w) for i, (c, w) in enumerate(zip(r, widths))) for r in [head] + rows]
    return "\n".join(lines) + "\n"


def cmd_report(args) -> int:
    def load(path):
        if path is None:
            return None
        try:
            return json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read report {path}: {exc}") from exc

    _write(report_table(load(args.zs), load(args.ft)), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qhid", description="Hamiltonian identification from FID traces.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, trace=False):
        p.add_argument("--config", required=True, help="molecule config file or preset name (tce, ala)")
        p.add_argument("--points", type=int, default=pipeline.DEFAULT_POINTS, help="samples used for identification")
        p.add_argument("--seed", type=int, default=0, help="seed for the multi-start search")
        p.add_argument("--out", help="output path (default: stdout)")
        if trace:
            p.add_argument("--trace", required=True, action="append", help="trace CSV; repeat to sum traces")

    p = sub.add_parser("simulate", help="simulate the molecule's protocol traces")
    common(p)
    p.add_argument("--dt", type=float, help="sampling interval in s (default: 4x below Nyquist)")
    p.add_argument("--t2", type=float, help="uniform T2 in s (default: no decay)")
    p.add_argument("--dead-time", type=float, default=0.0, help="receiver dead time in s")
    p.add_argument("--gain", type=float, default=1.0, help="receiver gain")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("identify", help="identify parameters from trace(s) by realization matching")
    common(p, trace=True)
    p.add_argument("--svd-tol", type=float, default=DEFAULT_SVD_TOL, help="relative singular-value cutoff")
    p.add_argument("--order", type=int, help="force the realization order")
    p.add_argument("--starts", type=int, default=64, help="random starts for the matching search")
    p.set_defaults(func=cmd_identify)

    p = sub.add_parser("baseline", help="identify parameters from trace(s) by spectral peaks")
    common(p, trace=True)
    p.add_argument("--zero-fill", type=int, default=4, help="zero-filling factor")
    p.add_argument("--min-height", type=float, default=1e-3, help="peak threshold relative to the tallest")
    p.add_argument("--spectrum-csv", help="also write the spectrum")
    p.add_argument("--peaks-csv", help="also write the peak table")
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("sweep-t2", help="relative error against T2")
    common(p)
    p.add_argument("--dt", type=float, help="sampling interval in s")
    p.add_argument("--t2-grid", default="0.01:0.1:10", help="LO:HI:STEPS in seconds")
    p.add_argument("--svd-tol", type=float, default=DEFAULT_SVD_TOL, help="relative singular-value cutoff")
    p.add_argument("--starts", type=int, default=64, help="random starts per point")
    p.add_argument("--workers", type=int, default=1, help="sweep points run in parallel")
    p.set_defaults(func=cmd_sweep_t2)

    p = sub.add_parser("report", help="table of FT and ZS reports side by side")
    p.add_argument("--zs", help="report from identify")
    p.add_argument("--ft", help="report from baseline")
    p.add_argument("--out", help="output path (default: stdout)")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except IdentificationError as exc:
        print(f"identification failed: {exc}", file=sys.stderr)
        return EXIT_IDENTIFICATION
    except (QHIDError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
