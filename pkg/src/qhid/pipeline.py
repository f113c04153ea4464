"""
End-to-end runs: simulate a molecule's protocol, identify it by realization
matching or by the Fourier baseline, and sweep T2.

Every function here is pure given its arguments and seed, so sweep points
can run in separate processes and still give byte-identical reports.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .accessible import ReducedDynamics, reduce
from .era import DEFAULT_SVD_TOL, era
from .errors import IdentificationError, ValidationError
from .fid import TimeTrace, preprocess, simulate_fid
from .ft import assign_lines, find_peaks, infer_params, spectrum
from .hamiltonian import MoleculeSpec, closest_relabeling, nmr_model
from .matching import match_parameters
from .pauli import WeightedSum

log = logging.getLogger(__name__)

DEFAULT_POINTS = 1600


def protocol_dynamics(spec: MoleculeSpec) -> ReducedDynamics:
    """Reduced dynamics of the summed protocol: all initial states, one observable."""
    model = nmr_model(spec, with_values=False)
    rho0 = WeightedSum([(s, 1.0) for s in spec.protocol_states], spec.n)
    return reduce(model, spec.observable, rho0)


def true_values(spec: MoleculeSpec) -> np.ndarray:
    return nmr_model(spec).values


def default_dt(spec: MoleculeSpec, margin: float = 4.0) -> float:
    """Sampling interval ``margin`` times finer than Nyquist for the molecule's own values."""
    return protocol_dynamics(spec).default_dt(true_values(spec), margin)


def check_nyquist(spec: MoleculeSpec, dt: float) -> None:
    rho = protocol_dynamics(spec).spectral_radius(true_values(spec))
    if rho * dt >= np.pi:
        raise ValidationError(
            f"dt={dt:g}s is above the Nyquist limit {np.pi / rho:.6g}s for "
            f"{spec.name or 'this molecule'} (fastest line {rho / (2 * np.pi):.6g} Hz)"
        )


def simulate_protocol(
    spec: MoleculeSpec,
    dt: float,
    N: int,
    t2: float | None = None,
    gain: float = 1.0,
    dead_time: float = 0.0,
) -> tuple[list[TimeTrace], TimeTrace]:
    """One trace per initial state and their sum (the summed-protocol trace)."""
    check_nyquist(spec, dt)
    model = nmr_model(spec)
    traces = [
        simulate_fid(model, state, spec.observed_qubits, dt, N, gain=gain, dead_time=dead_time, t2=t2)
        for state in spec.protocol_states
    ]
    total = traces[0]
    for t in traces[1:]:
        total = total + t
    return traces, total


def relative_errors(estimates, truth) -> np.ndarray:
    truth = np.abs(np.asarray(truth, dtype=float))
    return np.abs(np.abs(np.asarray(estimates, dtype=float)) - truth) / truth


@dataclass
class Identification:
    method: str
    labels: list[str]
    values: np.ndarray  # |a|, NaN where unresolved
    status: list[str]
    details: dict = field(default_factory=dict)
    truth: np.ndarray | None = None
    fitted: np.ndarray | None = None  # |a| as fitted, unresolved ones included

    @property
    def errors(self) -> np.ndarray | None:
        return None if self.truth is None else relative_errors(self.values, self.truth)

    @property
    def fitted_errors(self) -> np.ndarray | None:
        if self.truth is None or self.fitted is None:
            return None
        return relative_errors(self.fitted, self.truth)

    def report(self) -> dict:
        out = {
            "method": self.method,
            "parameters": [
                {"label": lab, "estimate": None if np.isnan(v) else float(v), "status": st}
                for lab, v, st in zip(self.labels, self.values, self.status)
            ],
        }
        if self.truth is not None:
            for p, t, e in zip(out["parameters"], self.truth, self.errors):
                p["truth"] = float(abs(t))
                p["relative_error"] = None if np.isnan(e) else float(e)
        out.update(self.details)
        return out


def _relabel(spec, values, status, reference):
    """Apply the protocol relabeling closest to ``reference``; also return its index."""
    values = np.asarray(values, dtype=float)
    if reference is None:
        return values, list(status), np.arange(values.size)
    idx = closest_relabeling(spec, values, reference)
    return values[idx], [status[i] for i in idx], idx


def _permute_fields(report: dict, idx, keys) -> dict:
    for k in keys:
        if report.get(k) is not None:
            report[k] = [report[k][i] for i in idx]
    return report


def pole_seed(tf, spec: MoleculeSpec, rel_cut: float = 1e-8, n_starts: int = 64, seed: int = 0):
    """Coefficients whose transition frequencies best match the identified poles.

    The real part of a trace has each line at both signs; the line fit is
    run on either half and the closer match is kept. Returns ``None`` when
    the transfer function has no significant modes.
    """
    mag = np.abs(tf.residues)
    if mag.size == 0 or mag.max() == 0:
        return None
    keep = mag > rel_cut * mag.max()
    freqs, heights = tf.poles.imag[keep] / (2 * np.pi), mag[keep]
    best = None
    for half in (freqs < 0, freqs > 0):
        if not half.any():
            continue
        a, r = assign_lines(freqs[half], heights[half], spec, n_starts, seed)
        if best is None or r < best[1]:
            best = (a, r)
    return None if best is None else best[0]


def identify(
    trace: TimeTrace,
    spec: MoleculeSpec,
    points: int | None = DEFAULT_POINTS,
    svd_rel_tol: float = DEFAULT_SVD_TOL,
    order: int | None = None,
    seed: int = 0,
    n_starts: int = 64,
    reference=None,
    truth=None,
) -> Identification:
    """Preprocess, realize, and match one summed-protocol trace.

    ``reference`` picks the labeling among protocol-equivalent relabelings
    and ``truth`` adds relative errors to the report; neither is used by
    the fit itself.
    """
    rd = protocol_dynamics(spec)
    if trace.gain != 1.0 or trace.dead_time != 0.0:
        trace = preprocess(trace, float(rd.output_row @ rd.x0))
    if points is not None:
        if trace.N < points:
            raise ValidationError(f"trace has {trace.N} samples, {points} requested")
        trace = trace.head(points)
    R = era(trace.real, trace.dt, order=order, svd_rel_tol=svd_rel_tol)
    tf = R.transfer_function()
    res = match_parameters(rd, tf, n_starts=n_starts, seed=seed, hint=pole_seed(tf, spec, seed=seed))
    values, status, idx = _relabel(spec, res.values, res.status, reference)
    match = {k: v for k, v in res.report().items() if k not in ("estimates", "status")}
    details = {
        "points": trace.N,
        "dt": trace.dt,
        "order": R.order,
        "accessible_set_size": rd.K,
        "match": _permute_fields(match, idx, ("signed", "fitted", "splittings", "readout_sigmas")),
    }
    return Identification("realization", list(rd.labels), values, status, details, truth, res.fitted[idx])


def identify_ft(
    trace: TimeTrace,
    spec: MoleculeSpec,
    zero_fill: int = 4,
    min_rel_height: float = 1e-3,
    seed: int = 0,
    reference=None,
    truth=None,
) -> Identification:
    """Fourier baseline on the same kind of trace ``identify`` consumes."""
    if trace.gain != 1.0 or trace.dead_time != 0.0:
        rd = protocol_dynamics(spec)
        trace = preprocess(trace, float(rd.output_row @ rd.x0))
    spec_ = spectrum(trace, zero_fill)
    peaks = find_peaks(spec_, min_rel_height)
    res = infer_params(peaks, spec, spec_.resolution, seed=seed)
    values, status, idx = _relabel(spec, res.values, res.status, reference)
    fit = {k: v for k, v in res.report().items() if k not in ("estimates", "status")}
    details = {"points": trace.N, "dt": trace.dt, "peaks": len(peaks), "fit": _permute_fields(fit, idx, ("signed", "fitted", "splittings_hz"))}
    return Identification("fourier", list(res.labels), values, status, details, truth, res.fitted[idx])


def _sweep_point(args):
    spec, t2, dt, points, svd_rel_tol, seed, n_starts = args
    truth = true_values(spec)
    _, total = simulate_protocol(spec, dt, points, t2=t2)
    try:
        ident = identify(total, spec, points, svd_rel_tol, seed=seed, n_starts=n_starts, reference=truth, truth=truth)
    except IdentificationError as exc:
        log.warning("T2=%g: %s", t2, exc)
        return t2, None
    return t2, ident


def sweep_t2(
    spec: MoleculeSpec,
    t2_grid,
    dt: float | None = None,
    points: int = DEFAULT_POINTS,
    svd_rel_tol: float = DEFAULT_SVD_TOL,
    seed: int = 0,
    n_starts: int = 64,
    workers: int = 1,
) -> list[tuple[float, Identification | None]]:
    """Identify the molecule at each T2 on the grid, sorted by T2."""
    dt = dt if dt is not None else default_dt(spec)
    jobs = [(spec, float(t2), dt, points, svd_rel_tol, seed, n_starts) for t2 in sorted(t2_grid)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_point, jobs))
    else:
        results = [_sweep_point(j) for j in jobs]
    return sorted(results, key=lambda r: r[0])


def sweep_rows(results, labels) -> list[dict]:
    """Flatten sweep results into one row per ``(t2, param)``.

    ``rel_error`` is NaN for unresolved coefficients; ``fitted_error`` is the
    error of the value the fit settled on regardless.
    """
    rows = []
    for t2, ident in results:
        for m, label in enumerate(labels):
            if ident is None:
                rows.append(
                    {"t2": t2, "param": label, "estimate": np.nan, "rel_error": np.nan, "fitted_error": np.nan, "status": "failed"}
                )
                continue
            rows.append(
                {
                    "t2": t2,
                    "param": label,
                    "estimate": ident.values[m],
                    "rel_error": ident.errors[m],
                    "fitted_error": ident.fitted_errors[m],
                    "status": ident.status[m],
                }
            )
    return rows
