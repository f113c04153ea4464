"""
Recover Hamiltonian coefficients by matching transfer functions.

The model transfer function ``T(s; a) = C (sI - sum_m a_m A_m)^-1 x0`` has
all its poles on the imaginary axis. It is compared with the identified
``T_hat`` on the line ``Re s = sigma``. By Parseval this is a time-domain
fit with weight ``exp(-2 sigma t)``, so a model line of width ``sigma``
is laid over each measured line. Measured lines that are broadened by
decoherence are wider than the model lines. Coefficients that only split
lines by less than that width cannot be pinned down, and the fit reports
them as unresolved.

The fit runs a continuation in ``sigma``: it starts at a coarse
resolution where the landscape is smooth and narrows step by step to the
target. It uses several starts and keeps the candidate with the lowest
residual.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from .accessible import ReducedDynamics
from .era import TransferFunction
from .errors import IdentificationError, ValidationError

log = logging.getLogger(__name__)

RESOLVED, UNRESOLVED = "ok", "unresolved"


@dataclass
class MatchResult:
    values: np.ndarray  # |a_m|, NaN where unresolved
    raw: np.ndarray  # signed estimate of the best start
    status: list[str]
    residual: float  # relative residual on the final contour
    sigma: float
    linewidth: float  # identified decay rate (1/s), i.e. 1/T2 estimate
    splittings: np.ndarray  # line splitting each coefficient controls (rad/s)
    start_residuals: list[float] = field(default_factory=list)
    strategy: str = "contour"
    readout_sigmas: np.ndarray | None = None
    fitted: np.ndarray | None = None  # |a_m| as read off, resolved or not

    def __post_init__(self):
        if self.fitted is None:
            self.fitted = np.abs(np.asarray(self.raw, dtype=float))

    @property
    def resolved(self) -> np.ndarray:
        return np.array([s == RESOLVED for s in self.status])

    def report(self) -> dict:
        return {
            "strategy": self.strategy,
            "estimates": [None if np.isnan(v) else float(v) for v in self.values],
            "signed": [float(v) for v in self.raw],
            "fitted": [float(v) for v in self.fitted],
            "status": list(self.status),
            "residual": float(self.residual),
            "sigma": float(self.sigma),
            "readout_sigmas": None if self.readout_sigmas is None else [float(v) for v in self.readout_sigmas],
            "linewidth": float(self.linewidth),
            "t2_estimate": None if self.linewidth <= 0 else float(1.0 / self.linewidth),
            "splittings": [float(v) for v in self.splittings],
            "start_residuals": [float(v) for v in self.start_residuals],
        }


class _Model:
    """Eigen-cached evaluation of ``T(s; a)`` and its gradient."""

    def __init__(self, rd: ReducedDynamics):
        self.rd = rd
        self.S = np.asarray(rd.structure)
        self.C = rd.output_row
        self.x0 = rd.x0

    def eig(self, a):
        lam, V = np.linalg.eigh(1j * np.tensordot(a, self.S, axes=1))
        return -1j * lam, V

    def modes(self, a):
        poles, V = self.eig(a)
        return poles, (self.C @ V) * (V.conj().T @ self.x0)

    def residual(self, a, s, target, weights):
        poles, res = self.modes(a)
        T = (res[None, :] / (s[:, None] - poles[None, :])).sum(axis=1)
        d = weights * (T - target)
        return np.concatenate([d.real, d.imag])

    def jacobian(self, a, s, weights, degenerate=1e-7):
        poles, V = self.eig(a)
        L = self.C @ V
        R = V.conj().T @ self.x0
        U = 1.0 / (s[:, None] - poles[None, :])
        B = L[None, :, None] * (V.conj().T @ self.S @ V) * R[None, None, :]
        # dT/da_m = sum_kl B_kl U_k U_l; split U_k U_l = (U_k - U_l) / (p_k - p_l)
        # into partial fractions except where the poles coincide
        D = poles[:, None] - poles[None, :]
        same = np.abs(D) <= degenerate * (np.abs(poles).max() + 1.0)
        inv = np.where(same, 0.0, 1.0 / np.where(same, 1.0, D))
        Bs = B + B.transpose(0, 2, 1)
        c = (Bs * inv[None]).sum(axis=2)
        d = (B * same[None]).sum(axis=2)
        J = (U @ c.T + (U * U) @ d.T) * weights[:, None]
        return np.concatenate([J.real, J.imag])

    def splittings(self, a, rel_cut=1e-6):
        """Per coefficient, the largest line shift it causes (rad/s), scaled by 2|a_m|."""
        poles, V = self.eig(a)
        res = (self.C @ V) * (V.conj().T @ self.x0)
        active = np.abs(res) > rel_cut * np.abs(res).max()
        out = []
        for am, Am in zip(a, self.S):
            # d(pole_k)/d(a_m) = (V^H A_m V)_kk, purely imaginary
            deriv = np.einsum("ik,ij,jk->k", V.conj(), Am, V)
            out.append(2.0 * abs(am) * np.max(np.abs(deriv[active]), initial=0.0))
        return np.array(out)


def _significant(tf: TransferFunction, rel_cut: float):
    mag = np.abs(tf.residues)
    keep = mag > rel_cut * mag.max()
    return tf.poles[keep], tf.residues[keep]


def _contour_grid(
    centers,
    sigma,
    span,
    max_uniform=40000,
    min_uniform=256,
    min_background=3000,
    half_width=25.0,
    step=0.25,
    tail=48,
):
    """Contour frequencies with trapezoid weights.

    Uniform with spacing ``sigma/4`` up to ``max_uniform`` points; beyond
    that, dense stencils around the line centers, geometric in between, on
    top of a uniform background. The background spacing stays at or below
    ``sigma`` where the point budget allows, so a model line that wanders
    off its stencil cannot slip between samples.
    """
    if span / (0.25 * sigma) <= max_uniform:
        w = np.linspace(0.0, span, max(int(np.ceil(span / (0.25 * sigma))) + 1, min_uniform))
    else:
        dense = np.arange(-half_width, half_width + step / 2, step)
        geo = half_width * np.geomspace(1.0, span / (half_width * sigma), tail)[1:]
        offsets = sigma * np.concatenate([-geo[::-1], dense, geo])
        n_bg = int(np.clip(np.ceil(span / sigma) + 1, min_background, max_uniform))
        pts = [np.linspace(0.0, span, n_bg)]
        pts.extend(c + offsets for c in centers)
        w = np.unique(np.concatenate(pts))
        w = w[(w >= 0.0) & (w <= span)]
    dw = np.diff(w)
    weights = np.zeros_like(w)
    weights[:-1] += dw / 2
    weights[1:] += dw / 2
    return w, weights


def _positive_freqs(poles):
    f = np.abs(poles.imag)
    return np.unique(np.round(f[f > 0], 9))


def _fit_stage(model, a, tf, sigma, span, xtol, max_nfev=200):
    centers = np.concatenate([_positive_freqs(tf.poles), _positive_freqs(model.modes(a)[0])])
    w, quad = _contour_grid(centers, sigma, span)
    s = sigma + 1j * w
    target = tf(s)
    norm = np.sqrt(np.sum(quad * np.abs(target) ** 2))
    weights = np.sqrt(quad) / norm

    fun = lambda x: model.residual(x, s, target, weights)  # noqa: E731
    jac = lambda x: model.jacobian(x, s, weights)  # noqa: E731
    sol = least_squares(fun, a, jac=jac, method="lm", xtol=xtol, ftol=xtol, gtol=1e-15, max_nfev=max_nfev)
    return sol.x, float(np.linalg.norm(sol.fun))


def _sigma_ladder(start, stop, factor=3.0):
    if start <= stop:
        return [stop]
    k = int(np.ceil(np.log(start / stop) / np.log(factor)))
    return list(np.geomspace(start, stop, k + 1))


def _seeds(rng, M, freqs, scale, n_random, hint):
    seeds = []
    if hint is not None:
        seeds.append(np.asarray(hint, dtype=float))
    cand = np.concatenate([freqs / 2.0, np.abs(np.diff(np.sort(freqs))) / 4.0])
    cand = cand[cand > 0]
    for i in range(n_random):
        if i % 2 == 0 and cand.size:
            mags = rng.choice(cand, size=M)
        else:
            mags = scale * 10 ** rng.uniform(-3, np.log10(0.5), size=M)
        seeds.append(mags * rng.choice([-1.0, 1.0], size=M))
    return seeds


def _canonical(a):
    """Representative of the global sign flip a -> -a (T is invariant under it)."""
    i = int(np.argmax(np.abs(a)))
    return a if a[i] >= 0 else -a


def _readout_sigmas(split, gamma, min_gap, readout_factor, readout_floor, gap_cap):
    """Contour abscissa at which each coefficient is read off.

    A coefficient is read where its own lines are still separated
    (``readout_factor`` times its splitting), capped at ``gap_cap`` line gaps
    so large coefficients are not read through a blurred spectrum, and kept
    above ``readout_floor * gamma`` so the model lines stay attached to the
    broadened measured ones.
    """
    return np.maximum(readout_floor * gamma, np.minimum(readout_factor * split, gap_cap * min_gap))


def match_parameters(
    rd: ReducedDynamics,
    tf_hat: TransferFunction,
    strategy: str = "contour",
    n_starts: int = 64,
    seed: int = 0,
    hint=None,
    sigma: float | None = None,
    sigma_factor: float = 0.6,
    readout: bool = True,
    readout_factor: float = 0.05,
    readout_floor: float = 0.2,
    gap_cap: float = 3.0,
    resolve_factor: float = 2.0,
    keep: int = 8,
    polish: int = 2,
    max_residual: float = 1.0,
    rel_cut: float = 1e-8,
) -> MatchResult:
    """Estimate ``|a_m|`` from an identified transfer function.

    Parameters
    ----------
    rd : ReducedDynamics
        Structure of the model for the measured observable and initial state.
    tf_hat : TransferFunction
        Transfer function of the identified realization.
    strategy : {"contour", "coefficients"}
        ``"contour"`` fits on ``Re s = sigma``; ``"coefficients"`` equates
        numerator and denominator coefficients (minimal order <= 4 only).
    n_starts, seed : int
        Number of random starts and the RNG seed.
    hint : array_like, optional
        Approximate coefficients, tried as one extra start and once more
        directly at the final abscissa.
    sigma : float, optional
        Abscissa of the joint fit. Defaults to ``sigma_factor`` times the
        identified decay rate, floored at a tenth of the smallest line gap.
        A model line narrower than half the measured decay rate lowers the
        residual by leaving its line, hence a factor above 1/2.
    readout : bool
        Refit from the joint optimum once per coefficient at the abscissa
        given by `_readout_sigmas` and keep that coefficient only.
    resolve_factor : float
        A coefficient is resolved when the splitting it causes exceeds
        ``resolve_factor`` times the full linewidth ``2 * gamma``.
    keep : int
        Candidates carried from one stage of the continuation to the next.
    polish : int
        Best candidates of the last stage refined to full precision.
    max_residual : float
        Relative residual of the joint fit above which identification fails.
        The empty model scores exactly 1.
    """
    if strategy == "coefficients":
        return _match_coefficients(rd, tf_hat, n_starts, seed, hint, rel_cut)
    if strategy != "contour":
        raise ValidationError(f"unknown strategy {strategy!r}")

    model = _Model(rd)
    M = rd.M
    poles, res = _significant(tf_hat, rel_cut)
    if poles.size == 0:
        raise IdentificationError("identified transfer function has no modes")
    tf = TransferFunction(tf_hat.num, tf_hat.den, poles, res)
    freqs = _positive_freqs(poles)
    scale = float(np.max(np.abs(poles)))
    span = 1.25 * scale + 1.0
    weights = np.abs(res)
    gamma = float(max(np.sum(weights * -poles.real) / np.sum(weights), 0.0))
    gaps = np.diff(np.sort(np.concatenate([[0.0], freqs])))
    gaps = gaps[gaps > 1e-9 * scale]
    min_gap = float(gaps.min()) if gaps.size else scale
    joint_sigma = sigma if sigma is not None else max(sigma_factor * gamma, 0.1 * min_gap)
    ladder = _sigma_ladder(0.25 * scale, joint_sigma)

    rng = np.random.default_rng(seed)
    beam = [(np.inf, i, a) for i, a in enumerate(_seeds(rng, M, freqs, scale, n_starts, hint))]
    for depth, sg in enumerate(ladder):
        last = depth == len(ladder) - 1
        if last and hint is not None and len(ladder) > 1:
            # a good hint needs no continuation, which could drag it off
            beam.append((np.inf, -1, np.asarray(hint, dtype=float)))
        stage = []
        for _, i, a in beam:
            try:
                a, r = _fit_stage(model, a, tf, sg, span, 1e-8, 50)
            except (np.linalg.LinAlgError, ValueError) as exc:  # pragma: no cover - defensive
                log.debug("start %d failed at sigma=%g: %s", i, sg, exc)
                continue
            stage.append((r, i, _canonical(a)))
        stage.sort(key=lambda c: (c[0], c[1]))
        beam = []
        for r, i, a in stage:
            if all(np.max(np.abs(np.abs(a) - np.abs(b))) > 1e-6 * scale for _, _, b in beam):
                beam.append((r, i, a))
            if len(beam) >= keep:
                break
        log.debug("sigma=%g best residuals %s", sg, [round(b[0], 6) for b in beam])
    if not beam:
        raise IdentificationError("every start failed")
    polished = []
    for _, i, a in beam[:polish]:
        a, r = _fit_stage(model, a, tf, joint_sigma, span, 1e-14, 200)
        polished.append((r, i, _canonical(a)))
    polished.sort(key=lambda c: (c[0], c[1]))

    r, _, a = polished[0]
    split = model.splittings(a)
    status = [RESOLVED if sp > resolve_factor * 2.0 * gamma else UNRESOLVED for sp in split]
    estimate = np.abs(a)
    sigmas = np.full(M, joint_sigma)
    if readout and r <= max_residual:
        sigmas = _readout_sigmas(split, gamma, min_gap, readout_factor, readout_floor, gap_cap)
        # a coefficient that moves no line, on undamped data, has no abscissa of its own
        sigmas = np.where(sigmas > 0, sigmas, joint_sigma)
        for sg in np.unique(sigmas):
            b, _ = _fit_stage(model, a, tf, sg, span, 1e-14, 200)
            hit = sigmas == sg
            estimate[hit] = np.abs(b[hit])
    values = np.where(np.array(status) == RESOLVED, estimate, np.nan)
    result = MatchResult(values, a, status, r, joint_sigma, gamma, split, [f[0] for f in polished], "contour", sigmas, estimate)
    if r > max_residual:
        raise IdentificationError(f"no start converged (best relative residual {r:.3g})", best=result)
    return result


def _match_coefficients(rd, tf_hat, n_starts, seed, hint, rel_cut):
    """Equate numerator/denominator coefficients of minimal transfer functions."""
    model = _Model(rd)
    poles, res = _significant(tf_hat, rel_cut)
    if poles.size > 4:
        raise ValidationError("coefficient equating is limited to minimal order <= 4")
    scale = float(np.max(np.abs(poles)))
    den_hat = np.poly(poles).real
    num_hat = _numerator(poles, res)

    def coeffs(a):
        p, r = model.modes(a)
        keep = np.abs(r) > 1e-9 * max(np.abs(r).max(), 1e-300)
        p, r = p[keep], r[keep]
        if p.size != poles.size:
            return None
        return np.poly(p).real, _numerator(p, r)

    powers_den = scale ** -np.arange(len(den_hat))
    powers_num = scale ** -np.arange(1, len(num_hat) + 1)

    def fun(a):
        c = coeffs(a)
        if c is None:
            return np.full(len(den_hat) + len(num_hat), 1e3)
        return np.concatenate([(c[0] - den_hat) * powers_den, (c[1] - num_hat) * powers_num])

    rng = np.random.default_rng(seed)
    starts = _seeds(rng, rd.M, _positive_freqs(poles), scale, n_starts, hint)
    best = None
    for i, a0 in enumerate(starts):
        sol = least_squares(fun, a0, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15)
        r = float(np.linalg.norm(sol.fun))
        if best is None or r < best[0]:
            best = (r, i, _canonical(sol.x))
    r, _, a = best
    split = model.splittings(a)
    status = [RESOLVED] * rd.M
    return MatchResult(np.abs(a), a, status, r, 0.0, 0.0, split, [r], "coefficients")


def _numerator(poles, residues):
    """Numerator coefficients of ``sum_k r_k / (s - p_k)`` over ``prod (s - p_k)``."""
    num = np.zeros(len(poles), dtype=complex)
    for k, r in enumerate(residues):
        others = np.delete(poles, k)
        num += r * np.poly(others)
    return num.real
