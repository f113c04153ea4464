"""
Eigensystem realization from a single output trace, and transfer functions.

The trace is treated as the free response ``y(j) = C Ad^j x0`` of an
unknown state-space model. Hankel matrices of shifted samples give a
balanced minimal realization through a truncated SVD; the continuous-time
generator is the principal logarithm of ``Ad`` divided by ``dt``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import IdentificationError, NyquistError, ValidationError

DEFAULT_SVD_TOL = 1e-8


@dataclass(frozen=True)
class Realization:
    """Continuous-time realization ``y(t) = C exp(A t) x0`` sampled at ``dt``."""

    C: np.ndarray
    A: np.ndarray
    x0: np.ndarray
    dt: float
    singular_values: np.ndarray = field(default_factory=lambda: np.empty(0))

    @property
    def order(self) -> int:
        return self.A.shape[0]

    @property
    def Ad(self) -> np.ndarray:
        lam, W = np.linalg.eig(self.A)
        Ad = W @ np.diag(np.exp(lam * self.dt)) @ np.linalg.inv(W)
        return Ad.real if np.isrealobj(self.A) else Ad

    def modes(self) -> tuple[np.ndarray, np.ndarray]:
        """Poles and residues: ``y(t) = sum_k r_k exp(p_k t)``."""
        lam, W = np.linalg.eig(self.A)
        residues = (self.C @ W) * np.linalg.solve(W, self.x0)
        return lam, residues

    def response(self, N: int, t0: float = 0.0) -> np.ndarray:
        poles, res = self.modes()
        t = t0 + self.dt * np.arange(N)
        y = np.exp(np.outer(t, poles)) @ res
        return y.real if np.isrealobj(self.A) else y

    def shifted(self, tau: float) -> "Realization":
        """Same system observed ``tau`` seconds later (negative ``tau`` rewinds)."""
        lam, W = np.linalg.eig(self.A)
        prop = W @ np.diag(np.exp(lam * tau)) @ np.linalg.inv(W)
        x0 = prop @ self.x0
        if np.isrealobj(self.A):
            x0 = x0.real
        return Realization(self.C, self.A, x0, self.dt, self.singular_values)

    def transfer_function(self) -> "TransferFunction":
        return transfer_function(self.C, self.A, self.x0)


def _hankel(y: np.ndarray, rows: int, cols: int, shift: int) -> np.ndarray:
    idx = np.arange(rows)[:, None] + np.arange(cols)[None, :] + shift
    return y[idx]


def select_order(s: np.ndarray, svd_rel_tol: float) -> int:
    """Number of singular values kept.

    Values at or above ``svd_rel_tol * s[0]`` are kept. If that keeps every
    value, the largest logarithmic gap decides instead.
    """
    if s[0] == 0:
        return 0
    rel = s / s[0]
    order = int(np.sum(rel >= svd_rel_tol))
    if order == len(s) and len(s) > 1:
        logs = np.log10(np.maximum(rel, 1e-300))
        order = int(np.argmax(logs[:-1] - logs[1:])) + 1
    return order


def era(
    y,
    dt: float,
    order: int | None = None,
    svd_rel_tol: float = DEFAULT_SVD_TOL,
    rows: int | None = None,
    growth_tol: float = 1e-6,
) -> Realization:
    """Realization of a sampled free response.

    Parameters
    ----------
    y : array_like
        Real or complex samples ``y(0), y(dt), ...``.
    dt : float
        Sampling interval in seconds.
    order : int, optional
        Force the model order instead of thresholding singular values.
    svd_rel_tol : float
        Relative singular-value threshold for automatic order selection.
    rows : int, optional
        Hankel row count; defaults to half the usable samples.
    growth_tol : float
        Allowed excess of ``|eig(Ad)|`` over one before the data is rejected
        as growing.

    Returns
    -------
    Realization
        Continuous-time ``(C, A, x0)``, real when ``y`` is real.
    """
    y = np.asarray(y)
    if y.ndim != 1 or not np.all(np.isfinite(y)):
        raise ValidationError("ERA needs a finite one-dimensional trace")
    if dt <= 0:
        raise ValidationError("dt must be positive")
    N = len(y)
    if N < 3:
        raise ValidationError("ERA needs at least three samples")
    if np.iscomplexobj(y) and np.all(y.imag == 0):
        y = y.real
    rows = min(rows or N // 2, N - 1)
    cols = N - rows
    H0 = _hankel(y, rows, cols, 0)
    H1 = _hankel(y, rows, cols, 1)
    U, s, Vh = np.linalg.svd(H0, full_matrices=False)
    r = order if order is not None else select_order(s, svd_rel_tol)
    if r < 1:
        raise IdentificationError("trace is identically zero")
    if r > len(s):
        raise ValidationError(f"order {r} exceeds Hankel rank bound {len(s)}")
    sq = np.sqrt(s[:r])
    Ur, Vr = U[:, :r], Vh[:r].conj().T
    Ad = (Ur.conj().T @ H1 @ Vr) / np.outer(sq, sq)
    C = Ur[0] * sq
    x0 = sq * Vh[:r, 0]

    mu, W = np.linalg.eig(Ad)
    if np.any(np.abs(mu) > 1.0 + growth_tol):
        raise IdentificationError(
            f"identified dynamics grow (max |eig(Ad)| = {np.abs(mu).max():.6g}); bad data or order"
        )
    if np.any(np.abs(mu) == 0):
        raise IdentificationError("singular discrete-time model; order too high")
    if np.isrealobj(Ad) and np.any((np.abs(mu.imag) < 1e-12 * np.abs(mu)) & (mu.real < 0)):
        raise NyquistError("eigenvalue on the negative real axis: frequency at Nyquist, log branch unsafe")
    lam = np.log(mu) / dt
    A = W @ np.diag(lam) @ np.linalg.inv(W)
    if np.isrealobj(Ad):
        A = A.real
    return Realization(C, A, x0, dt, s)


@dataclass(frozen=True)
class TransferFunction:
    """``T(s) = num(s) / den(s)`` with monic ``den``.

    Coefficients are highest power first (``numpy.polyval`` order). Poles
    and residues are kept alongside because partial-fraction evaluation
    stays accurate at orders where polynomial evaluation does not.
    """

    num: np.ndarray
    den: np.ndarray
    poles: np.ndarray
    residues: np.ndarray

    @property
    def order(self) -> int:
        return len(self.den) - 1

    def __call__(self, s):
        s = np.asarray(s, dtype=complex)
        return (self.residues[None, :] / (s.reshape(-1, 1) - self.poles[None, :])).sum(axis=1).reshape(s.shape)

    def evaluate_poly(self, s):
        s = np.asarray(s, dtype=complex)
        return np.polyval(self.num, s) / np.polyval(self.den, s)


def transfer_function(C, A, x0) -> TransferFunction:
    """Transfer function ``C (sI - A)^-1 x0``.

    The numerator uses ``C adj(sI - A) x0 = det(sI - A + x0 C) - det(sI - A)``.
    """
    A = np.atleast_2d(np.asarray(A))
    C = np.atleast_1d(np.asarray(C)).ravel()
    x0 = np.atleast_1d(np.asarray(x0)).ravel()
    r = A.shape[0]
    if A.shape != (r, r) or C.shape != (r,) or x0.shape != (r,):
        raise ValidationError("C, A, x0 shapes do not conform")
    den = np.poly(A) if r else np.array([1.0])
    num = (np.poly(A - np.outer(x0, C)) - den)[1:]
    if np.isrealobj(A) and np.isrealobj(C) and np.isrealobj(x0):
        den, num = den.real, num.real
    lam, W = np.linalg.eig(A)
    residues = (C @ W) * np.linalg.solve(W, x0)
    return TransferFunction(np.asarray(num), np.asarray(den), lam, residues)
