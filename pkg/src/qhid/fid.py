"""
Forward model of a free-induction-decay trace and its inverse preprocessing.

The receiver signal is ``V(t) = gain * Tr{F- rho(t)} / 2**n`` with
``F- = Fx - i Fy`` summed over the observed spins. Evaluation is done in
the Hamiltonian eigenbasis, where every transition ``r <- s`` contributes
``F-_rs rho_sr(0) exp((i w_rs - lambda_rs) t)``.
"""

from __future__ import annotations

import io
import warnings
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ValidationError
from .hamiltonian import HamiltonianModel, dense_hamiltonian
from .pauli import PauliString, WeightedSum

_CHUNK = 1 << 16


@dataclass(frozen=True)
class TimeTrace:
    """Uniformly sampled complex trace; sample ``j`` sits at ``dead_time + j*dt``."""

    dt: float
    samples: np.ndarray
    gain: float = 1.0
    dead_time: float = 0.0
    t2: float | None = None

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=complex).ravel()
        if self.dt <= 0:
            raise ValidationError("dt must be positive")
        if samples.size < 1:
            raise ValidationError("a trace needs at least one sample")
        if self.dead_time < 0:
            raise ValidationError("dead time cannot be negative")
        if self.t2 is not None and self.t2 <= 0:
            raise ValidationError("T2 must be positive")
        object.__setattr__(self, "samples", samples)

    @property
    def N(self) -> int:
        return self.samples.size

    @property
    def times(self) -> np.ndarray:
        return self.dead_time + self.dt * np.arange(self.N)

    @property
    def real(self) -> np.ndarray:
        return self.samples.real

    def head(self, N: int) -> "TimeTrace":
        return replace(self, samples=self.samples[:N])

    def __add__(self, other: "TimeTrace") -> "TimeTrace":
        if (other.dt, other.N, other.dead_time) != (self.dt, self.N, self.dead_time):
            raise ValidationError("traces differ in sampling grid")
        return replace(self, samples=self.samples + other.samples)

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        buf.write(f"dt,{float(self.dt)!r}\nN,{self.N}\ngain,{float(self.gain)!r}\n")
        buf.write(f"dead_time,{float(self.dead_time)!r}\nt2,{'' if self.t2 is None else repr(float(self.t2))}\n")
        buf.write("j,re,im\n")
        for j, v in enumerate(self.samples):
            buf.write(f"{j},{float(v.real)!r},{float(v.imag)!r}\n")
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, source) -> "TimeTrace":
        text = Path(source).read_text() if not isinstance(source, str) or "\n" not in source else source
        lines = text.strip().splitlines()
        meta = {}
        for i, line in enumerate(lines):
            key, _, value = line.partition(",")
            if key == "j":
                body = lines[i + 1 :]
                break
            meta[key] = value
        else:
            raise ValidationError("trace file has no 'j,re,im' data header")
        try:
            data = np.array([[float(v) for v in row.split(",")[1:3]] for row in body])
            trace = cls(
                dt=float(meta["dt"]),
                samples=data[:, 0] + 1j * data[:, 1],
                gain=float(meta.get("gain", 1.0)),
                dead_time=float(meta.get("dead_time", 0.0)),
                t2=float(meta["t2"]) if meta.get("t2") else None,
            )
        except (KeyError, ValueError, IndexError) as exc:
            raise ValidationError(f"malformed trace file: {exc}") from exc
        if "N" in meta and int(meta["N"]) != trace.N:
            raise ValidationError(f"header says N={meta['N']} but {trace.N} rows present")
        return trace


@dataclass(frozen=True)
class ObservablePair:
    """Receiver operators ``Fx`` and ``Fy`` on the observed spins."""

    fx: WeightedSum
    fy: WeightedSum

    @classmethod
    def on_qubits(cls, n: int, qubits: Sequence[int]) -> "ObservablePair":
        fx = WeightedSum([(PauliString.single(n, q, "X"), 1.0) for q in qubits], n)
        fy = WeightedSum([(PauliString.single(n, q, "Y"), 1.0) for q in qubits], n)
        return cls(fx, fy)

    @property
    def f_minus(self) -> np.ndarray:
        return self.fx.to_dense() - 1j * self.fy.to_dense()


def _density(rho0, n: int) -> np.ndarray:
    if isinstance(rho0, (str, PauliString)):
        rho0 = WeightedSum({rho0: 1.0})
    if isinstance(rho0, WeightedSum):
        if rho0.n != n:
            raise ValidationError("initial state and model qubit counts differ")
        return rho0.to_dense()
    rho = np.asarray(rho0, dtype=complex)
    if rho.shape != (2**n, 2**n):
        raise ValidationError(f"density matrix must be {2**n}x{2**n}")
    if not np.allclose(rho, rho.conj().T, atol=1e-12):
        raise ValidationError("initial density matrix is not Hermitian")
    return rho


def _transitions(model, rho0, obs, values=None):
    """Frequencies ``w_rs`` and weights ``F-_rs rho_sr / 2**n`` in the eigenbasis."""
    n = model.n
    if not isinstance(obs, ObservablePair):
        obs = ObservablePair.on_qubits(n, obs)
    E, V = np.linalg.eigh(dense_hamiltonian(model, values))
    F = V.conj().T @ obs.f_minus @ V
    rho = V.conj().T @ _density(rho0, n) @ V
    weights = F * rho.T / 2**n
    omega = E[:, None] - E[None, :]
    return omega, weights


def _eigen_sum(omega, weights, rates, times) -> np.ndarray:
    keep = np.abs(weights) > 1e-15 * max(np.abs(weights).max(), 1e-300)
    w, f, lam = weights[keep], omega[keep], rates[keep]
    out = np.empty(times.size, dtype=complex)
    expo = 1j * f - lam
    for start in range(0, times.size, _CHUNK):
        t = times[start : start + _CHUNK]
        out[start : start + _CHUNK] = np.exp(np.outer(t, expo)) @ w
    return out


def _nyquist_check(omega, weights, dt):
    active = np.abs(weights) > 1e-12 * max(np.abs(weights).max(), 1e-300)
    fmax = np.max(np.abs(omega[active]), initial=0.0)
    if fmax * dt > np.pi:
        warnings.warn(
            f"dt={dt:g}s aliases transitions up to {fmax / (2 * np.pi):.6g} Hz", stacklevel=3
        )


def simulate_fid(
    model: HamiltonianModel,
    rho0,
    obs,
    dt: float,
    N: int,
    gain: float = 1.0,
    dead_time: float = 0.0,
    t2: float | None = None,
    values=None,
) -> TimeTrace:
    """Receiver trace for a static Hamiltonian, optionally with uniform T2 decay.

    ``obs`` is an ObservablePair or a list of observed qubits (1-based).
    """
    if dt <= 0 or N < 1:
        raise ValidationError("need dt > 0 and N >= 1")
    omega, weights = _transitions(model, rho0, obs, values)
    _nyquist_check(omega, weights, dt)
    times = dead_time + dt * np.arange(N)
    samples = gain * _eigen_sum(omega, weights, np.zeros_like(omega), times)
    if t2 is not None:
        if t2 <= 0:
            raise ValidationError("T2 must be positive")
        samples = samples * np.exp(-times / t2)
    return TimeTrace(dt, samples, gain, dead_time, t2)


def apply_decoherence(
    model: HamiltonianModel,
    rho0,
    obs,
    dt: float,
    N: int,
    rates,
    gain: float = 1.0,
    dead_time: float = 0.0,
    values=None,
) -> TimeTrace:
    """Trace with per-transition relaxation rates ``lambda_rs`` (1/s).

    ``rates`` is a scalar (every transition relaxes at ``1/T2``) or a
    ``2**n x 2**n`` matrix indexed in the eigenbasis of ``H``, which is
    ordered by ascending energy.
    """
    omega, weights = _transitions(model, rho0, obs, values)
    rates = np.broadcast_to(np.asarray(rates, dtype=float), omega.shape)
    if np.any(rates < 0):
        raise ValidationError("relaxation rates must be non-negative")
    _nyquist_check(omega, weights, dt)
    times = dead_time + dt * np.arange(N)
    samples = gain * _eigen_sum(omega, weights, rates, times)
    uniform = np.ptp(rates) == 0 and rates.flat[0] > 0
    return TimeTrace(dt, samples, gain, dead_time, 1.0 / rates.flat[0] if uniform else None)


def _realize(trace: TimeTrace, svd_rel_tol: float):
    from .era import era

    n_fit = min(trace.N, 4000)
    return era(trace.samples[:n_fit], trace.dt, svd_rel_tol=svd_rel_tol)


def apply_dead_time(trace: TimeTrace, tau: float, svd_rel_tol: float = 1e-10) -> TimeTrace:
    """Delay the start of acquisition by ``tau`` seconds.

    The trace is continued analytically through its identified realization,
    so ``tau`` need not be a multiple of ``dt``.
    """
    if tau < 0:
        raise ValidationError("dead time cannot be negative")
    if tau == 0:
        return trace
    R = _realize(trace, svd_rel_tol)
    samples = R.shifted(tau).response(trace.N)
    return replace(trace, samples=samples, dead_time=trace.dead_time + tau)


def _phase_ramp(trace: TimeTrace) -> np.ndarray:
    freqs = 2 * np.pi * np.fft.fftfreq(trace.N, trace.dt)
    return np.fft.ifft(np.fft.fft(trace.samples) * np.exp(-1j * freqs * trace.dead_time))


def preprocess(
    trace: TimeTrace,
    known_x0_value: float,
    method: str = "realization",
    svd_rel_tol: float = 1e-10,
) -> TimeTrace:
    """Undo receiver dead time and gain.

    ``method="realization"`` rewinds an identified realization of the trace
    to ``t = 0`` (exact for sums of damped exponentials);
    ``method="phase_ramp"`` applies the first-order spectral phase
    correction ``exp(-i w tau)`` used on spectrometers. The result is scaled
    so that ``Re samples[0] == known_x0_value``.
    """
    if trace.dead_time > 0:
        if method == "realization":
            R = _realize(trace, svd_rel_tol)
            samples = R.shifted(-trace.dead_time).response(trace.N)
        elif method == "phase_ramp":
            samples = _phase_ramp(trace)
        else:
            raise ValidationError(f"unknown dead-time method {method!r}")
    else:
        samples = trace.samples.copy()
    first = samples[0].real
    if known_x0_value == 0 or first == 0:
        warnings.warn("cannot scale by the first sample; using unit-energy scaling", stacklevel=2)
        scale = np.sqrt(np.mean(np.abs(samples) ** 2))
    else:
        scale = first / known_x0_value
    return replace(trace, samples=samples / scale, gain=1.0, dead_time=0.0)
