"""
Fourier-transform reference pipeline: spectrum, peaks, and line-fit inference.

The receiver trace ``V(t) = sum w_rs exp(i w_rs t)`` puts a line at
``w_rs / 2 pi`` Hz on the ``numpy.fft`` frequency axis, so spins with
positive offsets show up at negative frequencies. Parameters are then
recovered by fitting the model's transition frequencies to the peak list.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage
from scipy.optimize import least_squares
from scipy.signal import find_peaks as _scipy_peaks
from scipy.signal import peak_prominences, peak_widths

from .errors import IdentificationError, ValidationError
from .fid import ObservablePair, TimeTrace
from .hamiltonian import MoleculeSpec, nmr_model
from .pauli import WeightedSum, to_dense

RESOLVED, UNRESOLVED = "ok", "unresolved"


@dataclass(frozen=True)
class Spectrum:
    """Spectrum on an ascending Hz axis spanning ``(-fs/2, fs/2]``."""

    freqs: np.ndarray
    values: np.ndarray
    resolution: float  # 1 / (N dt) of the unpadded trace

    def __post_init__(self):
        if len(self.freqs) != len(self.values):
            raise ValidationError("freqs and values differ in length")

    @property
    def df(self) -> float:
        return float(self.freqs[1] - self.freqs[0]) if len(self.freqs) > 1 else self.resolution

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        buf.write("freq_hz,re,im,abs\n")
        for f, v in zip(self.freqs, self.values):
            buf.write(f"{float(f)!r},{float(v.real)!r},{float(v.imag)!r},{float(abs(v))!r}\n")
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text


def spectrum(trace: TimeTrace, zero_fill: int = 1) -> Spectrum:
    """Scaled DFT ``dt * fft(samples)`` of a preprocessed trace.

    ``zero_fill`` pads the trace to that many times its length, which
    interpolates the spectrum without changing the resolution.
    """
    if zero_fill < 1:
        raise ValidationError("zero_fill must be at least 1")
    if trace.gain != 1.0 or trace.dead_time != 0.0:
        raise ValidationError("spectrum expects a preprocessed trace (gain 1, dead time 0)")
    L = trace.N * int(zero_fill)
    values = trace.dt * np.fft.fft(trace.samples, L)
    freqs = np.fft.fftfreq(L, trace.dt)
    order = np.argsort(freqs)
    freqs, values = freqs[order], values[order]
    if L % 2 == 0:
        # move -fs/2 to +fs/2 so the axis is (-fs/2, fs/2]
        freqs = np.roll(freqs, -1)
        freqs[-1] = -freqs[-1]
        values = np.roll(values, -1)
    return Spectrum(freqs, values, 1.0 / (trace.N * trace.dt))


@dataclass(frozen=True)
class Peak:
    freq: float  # Hz
    height: float  # |value| at the interpolated maximum
    width: float  # FWHM of |value|**2 in Hz


def _parabolic(logmag, i):
    a, b, c = logmag[i - 1], logmag[i], logmag[i + 1]
    denom = a - 2 * b + c
    if denom >= 0:
        return 0.0, b
    p = 0.5 * (a - c) / denom
    return p, b - 0.25 * (a - c) * p


def find_peaks(
    spec: Spectrum,
    min_rel_height: float = 0.01,
    min_rel_prominence: float = 0.05,
    reject_leakage: bool = True,
) -> list[Peak]:
    """Local maxima of ``|values|`` above ``min_rel_height`` of the tallest.

    A maximum must also stand out from its surroundings by
    ``min_rel_prominence`` of its own height, which discards ripple riding
    on the wings of stronger lines.

    Positions use three-point parabolic interpolation of the log magnitude.
    Widths are the full width at half maximum of the power ``|values|**2``,
    which equals the full Lorentzian linewidth ``1/(pi T2)``.

    With ``reject_leakage``, a maximum that does not rise above twice the
    truncation sidelobe envelope ``h / (pi |f - f_p| T)`` of the taller
    peaks is dropped, so the sinc ripple of undamped lines is not reported.
    """
    mag = np.abs(spec.values)
    if mag.size < 3 or mag.max() == 0:
        return []
    idx, _ = _scipy_peaks(mag, height=min_rel_height * mag.max())
    idx = idx[(idx > 0) & (idx < mag.size - 1)]
    if idx.size:
        idx = idx[peak_prominences(mag, idx)[0] >= min_rel_prominence * mag[idx]]
    if idx.size == 0:
        return []
    power = mag**2
    _, left, right = peak_prominences(power, idx)
    widths = peak_widths(power, idx, rel_height=0.5, prominence_data=(power[idx], left, right))[0]
    logmag = np.log(np.maximum(mag, 1e-300))
    df = spec.df
    peaks = []
    for i, w in zip(idx, widths):
        p, lm = _parabolic(logmag, i)
        peaks.append(Peak(float(spec.freqs[i] + p * df), float(np.exp(lm)), float(w * df)))
    if reject_leakage and len(peaks) > 1:
        T = 1.0 / spec.resolution
        peaks.sort(key=lambda q: -q.height)
        kept = []
        for q in peaks:
            envelope = sum(p.height / (np.pi * max(abs(q.freq - p.freq), spec.resolution) * T) for p in kept)
            if q.height > 2.0 * envelope:
                kept.append(q)
        peaks = kept
    return sorted(peaks, key=lambda q: q.freq)


def peaks_to_csv(peaks, path=None) -> str:
    lines = ["freq_hz,height,width_hz"] + [f"{float(p.freq)!r},{float(p.height)!r},{float(p.width)!r}" for p in peaks]
    text = "\n".join(lines) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


@dataclass
class FTResult:
    values: np.ndarray  # |a|, NaN where unresolved
    raw: np.ndarray
    status: list[str]
    residual: float  # rms line mismatch, Hz
    splittings: np.ndarray  # Hz
    resolution: float
    linewidth: float  # median peak FWHM, Hz
    labels: list[str] = field(default_factory=list)
    fitted: np.ndarray | None = None  # |a| of the full fit, before unresolved ones are pinned to 0

    def report(self) -> dict:
        return {
            "estimates": [None if np.isnan(v) else float(v) for v in self.values],
            "signed": [float(v) for v in self.raw],
            "fitted": None if self.fitted is None else [float(v) for v in self.fitted],
            "status": list(self.status),
            "residual_hz": float(self.residual),
            "splittings_hz": [float(v) for v in self.splittings],
            "resolution_hz": float(self.resolution),
            "linewidth_hz": float(self.linewidth),
        }


class _LineModel:
    """Visible transition frequencies (Hz, signed) of a molecule as functions of ``a``."""

    def __init__(self, spec: MoleculeSpec, rel_weight: float = 1e-6):
        self.model = nmr_model(spec, with_values=False)
        n = spec.n
        self.parts = [sum((to_dense(s) for s in t.strings), np.zeros((2**n, 2**n), complex)) for t in self.model.terms]
        self.f_minus = ObservablePair.on_qubits(n, spec.observed_qubits).f_minus
        self.rho0 = WeightedSum([(s, 1.0) for s in spec.protocol_states]).to_dense()
        self.rel_weight = rel_weight

    def lines(self, a, with_deriv=False):
        E, V = np.linalg.eigh(np.tensordot(a, self.parts, axes=1))
        weights = np.abs((V.conj().T @ self.f_minus @ V) * (V.conj().T @ self.rho0 @ V).T)
        keep = weights > self.rel_weight * weights.max()
        freqs = (E[:, None] - E[None, :])[keep] / (2 * np.pi)
        w = weights[keep] / weights.max()
        if not with_deriv:
            return freqs, w
        # first-order eigenvalue shifts give d(E_r - E_s)/da_m
        diag = np.array([np.einsum("ir,ij,jr->r", V.conj(), Hm, V).real for Hm in self.parts])
        deriv = (diag[:, :, None] - diag[:, None, :])[:, keep] / (2 * np.pi)
        return freqs, w, deriv

    def shift_terms(self) -> np.ndarray:
        return np.array([len(t.strings) == 1 and len(t.strings[0].support) == 1 for t in self.model.terms])


def _residuals(lines, weights, peaks, heights):
    # each predicted line to its nearest peak, and each peak to its nearest line
    d = lines[:, None] - peaks[None, :]
    a = np.abs(d)
    fwd = np.sqrt(weights) * d[np.arange(len(lines)), a.argmin(axis=1)]
    bwd = np.sqrt(heights) * d[a.argmin(axis=0), np.arange(len(peaks))]
    return np.concatenate([fwd, bwd])


def _multiplets(freqs, k):
    """Group peak positions into at most ``k`` multiplets by single linkage."""
    if k <= 1 or freqs.size <= 1:
        return [freqs]
    labels = fcluster(linkage(freqs[:, None], "single"), min(k, freqs.size), "maxclust")
    return [freqs[labels == c] for c in np.unique(labels)]


def _seeds(rng, shift, freqs, n_random, hint):
    """Starts for the line fit.

    Even starts place shifts on multiplet centers and couplings on spacings
    inside multiplets, which suits weak coupling. Odd starts draw shifts
    from single peaks and couplings from any spacing, since strongly
    coupled lines do not sit symmetrically around the offsets.
    """
    seeds = [] if hint is None else [np.asarray(hint, dtype=float)]
    groups = _multiplets(np.sort(freqs), int(shift.sum()))
    centers = np.array([g.mean() for g in groups])
    inner = np.concatenate([np.diff(g) for g in groups])
    spacings = inner[inner > 0]
    if spacings.size == 0:
        spacings = np.abs(np.diff(np.sort(freqs)))
    every = np.abs(freqs[:, None] - freqs[None, :])
    every = every[every > 0]
    n_shift, n_coupling = int(shift.sum()), int((~shift).sum())
    for i in range(n_random):
        a = np.empty(shift.size)
        if i % 2 == 0:
            picks = rng.permutation(centers)[:n_shift]
            if picks.size < n_shift:
                picks = np.concatenate([picks, rng.choice(freqs, size=n_shift - picks.size)])
            pool = spacings
        else:
            picks, pool = rng.choice(freqs, size=n_shift), every
        a[shift] = -np.pi * picks
        if n_coupling:
            gaps = rng.choice(pool, size=n_coupling) if pool.size else np.zeros(n_coupling)
            # a coupling of J Hz splits lines by J and has coefficient pi J / 2
            a[~shift] = 0.5 * np.pi * gaps * rng.choice([-1.0, 1.0], size=n_coupling)
        seeds.append(a)
    return seeds


def _assign(lm, freqs, heights, n_starts, seed, hint=None, tie_tol=0.0):
    """Best multi-start line fit; returns ``(a, rms mismatch in Hz, residual function)``."""
    heights = np.asarray(heights, dtype=float) / np.max(heights)

    def fun(a, free=None, fixed=None):
        if free is not None:
            full = fixed.copy()
            full[free] = a
            a = full
        lines, w = lm.lines(a)
        return _residuals(lines, w, freqs, heights)

    rng = np.random.default_rng(seed)
    fits = []
    for i, a0 in enumerate(_seeds(rng, lm.shift_terms(), freqs, n_starts, hint)):
        sol = least_squares(fun, a0, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15, x_scale="jac")
        # no sign canonicalization: a -> -a mirrors a complex spectrum
        fits.append((float(np.sqrt(np.mean(sol.fun**2))), i, sol.x))
    fits.sort(key=lambda f: (f[0], f[1]))
    best = fits[0]
    if hint is not None:
        # relabelings of symmetric molecules fit equally well; take the hint's labeling
        h = np.abs(np.asarray(hint, dtype=float)) + 1e-12
        ties = [f for f in fits if f[0] <= best[0] + tie_tol]
        best = min(ties, key=lambda f: (np.sum(np.log((np.abs(f[2]) + 1e-12) / h) ** 2), f[1]))
    return best[2], best[0], fun


def assign_lines(freqs, heights, spec: MoleculeSpec, n_starts: int = 64, seed: int = 0) -> tuple[np.ndarray, float]:
    """Signed coefficients whose transition frequencies best match ``freqs`` (Hz).

    Returns the coefficients and the rms line mismatch in Hz. Only one sign
    of the frequency axis should be passed, as in a quadrature spectrum.
    """
    freqs = np.asarray(freqs, dtype=float)
    if freqs.size == 0:
        raise IdentificationError("no lines to assign")
    a, r, _ = _assign(_LineModel(spec), freqs, heights, n_starts, seed)
    return a, r


def infer_params(
    peaks,
    spec: MoleculeSpec,
    resolution: float,
    hint=None,
    n_starts: int = 64,
    seed: int = 0,
) -> FTResult:
    """Fit transition frequencies of the molecule's Hamiltonian to a peak list.

    Weak coupling gives the familiar ``nu_j +- sum J_jk / 2`` multiplets;
    strong coupling gives eigenvalue differences of the full Hamiltonian.
    Both come out of the same dense eigen-decomposition. A coefficient
    whose line splitting is smaller than the resolution or the measured
    linewidth is reported as unresolved.
    """
    if not peaks:
        raise IdentificationError("no peaks to assign")
    pf = np.array([p.freq for p in peaks])
    ph = np.array([p.height for p in peaks])
    linewidth = float(np.median([p.width for p in peaks]))
    lm = _LineModel(spec)
    a, r, fun = _assign(lm, pf, ph, n_starts, seed, hint, tie_tol=1e-3 * max(resolution, 1e-12))

    split = _splittings(lm, a)
    fitted = np.abs(a)
    floor = max(resolution, linewidth)
    resolved = split > floor
    if not resolved.all():
        fixed = np.where(resolved, a, 0.0)
        sol = least_squares(fun, a[resolved], method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15, kwargs={"free": resolved, "fixed": fixed})
        a = fixed.copy()
        a[resolved] = sol.x
        r = float(np.sqrt(np.mean(sol.fun**2)))
    if r > floor:
        raise IdentificationError(
            f"peaks cannot be assigned to the model's lines (rms mismatch {r:.3g} Hz, "
            f"resolution {resolution:.3g} Hz, {len(peaks)} peaks)"
        )
    status = [RESOLVED if ok else UNRESOLVED for ok in resolved]
    values = np.where(resolved, np.abs(a), np.nan)
    return FTResult(values, a, status, r, split, resolution, linewidth, lm.model.labels, fitted)


def _splittings(lm: _LineModel, a) -> np.ndarray:
    """Per coefficient, ``2 |a_m|`` times the fastest rate at which it moves a line (Hz)."""
    _, _, deriv = lm.lines(a, with_deriv=True)
    return 2.0 * np.abs(a) * np.abs(deriv).max(axis=1)
