"""
Accessible set and the reduced linear dynamics of the measured observable.

Expectation values are normalized as ``x_k = Tr{rho X_k} / 2**n``, so a
deviation state given as a unit-coefficient Pauli sum has 0/1 entries in
``x0``. The reduced generator ``A(a) = sum_m a_m A_m`` is real and
antisymmetric, with ``A[k, l]`` the coefficient of ``X_l`` in
``i[H, X_k]``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionError, ValidationError
from .hamiltonian import HamiltonianModel
from .pauli import PauliString, WeightedSum, expand_commutator


@dataclass(frozen=True)
class AccessibleSet:
    basis: tuple[PauliString, ...]
    seed: tuple[PauliString, ...]
    history: tuple[int, ...] = ()  # |G_i| per iteration

    @property
    def K(self) -> int:
        return len(self.basis)

    def index(self) -> dict[PauliString, int]:
        return {s: i for i, s in enumerate(self.basis)}

    def __contains__(self, s) -> bool:
        s = s if isinstance(s, PauliString) else PauliString(s)
        return s in self.basis

    def to_text(self) -> str:
        return "\n".join(s.letters for s in self.basis) + "\n"


def _as_strings(items: Iterable) -> list[PauliString]:
    return [s if isinstance(s, PauliString) else PauliString(s) for s in items]


def accessible_set(model: HamiltonianModel, observables: Sequence) -> AccessibleSet:
    """Commutator closure of the observable strings under the model's terms.

    Each round appends the strings newly reached from the current set,
    sorted lexicographically, so the ordering is deterministic.
    """
    if isinstance(observables, WeightedSum):
        observables = list(observables)
    seed = _as_strings(observables)
    if not seed:
        raise ValidationError("need at least one observable string")
    if any(s.n != model.n for s in seed):
        raise DimensionError("observable and model qubit counts differ")
    generators = [s for t in model.terms for s in t.strings]
    basis = list(dict.fromkeys(s for s in seed if not s.is_identity))
    members = set(basis)
    history = [len(basis)]
    frontier = list(basis)
    while frontier:
        found = set()
        for g in frontier:
            for h in generators:
                for s in expand_commutator(h, g):
                    if s not in members:
                        found.add(s)
        frontier = sorted(found)
        basis.extend(frontier)
        members.update(frontier)
        history.append(len(basis))
    return AccessibleSet(tuple(basis), tuple(seed), tuple(history))


@dataclass(frozen=True)
class ReducedDynamics:
    acc: AccessibleSet
    structure: tuple[np.ndarray, ...]
    output_row: np.ndarray
    x0: np.ndarray
    labels: tuple[str, ...] = ()

    @property
    def K(self) -> int:
        return self.acc.K

    @property
    def M(self) -> int:
        return len(self.structure)

    def generator(self, a) -> np.ndarray:
        a = np.asarray(a, dtype=float)
        if a.shape != (self.M,):
            raise ValidationError(f"expected {self.M} coefficients, got {a.shape}")
        return np.tensordot(a, np.asarray(self.structure), axes=1)

    def modes(self, a) -> tuple[np.ndarray, np.ndarray]:
        """Poles and residues of ``C (sI - A(a))^-1 x0``.

        Uses the Hermitian eigendecomposition of ``iA``, exact for the
        antisymmetric generator.
        """
        lam, V = np.linalg.eigh(1j * self.generator(a))
        poles = -1j * lam
        residues = (self.output_row @ V) * (V.conj().T @ self.x0)
        return poles, residues

    def spectral_radius(self, a) -> float:
        return float(np.max(np.abs(np.linalg.eigvalsh(1j * self.generator(a))), initial=0.0))

    def default_dt(self, a, margin: float = 4.0) -> float:
        """Sampling interval with ``margin`` times headroom below Nyquist."""
        rho = self.spectral_radius(a)
        if rho == 0:
            raise ValidationError("static dynamics: no natural sampling interval")
        return np.pi / (margin * rho)

    def to_csv(self, a) -> str:
        names = [s.letters for s in self.acc.basis]
        A = self.generator(a)
        lines = ["," + ",".join(names)]
        for name, row in zip(names, A):
            lines.append(name + "," + ",".join(f"{v:.17g}" for v in row))
        return "\n".join(lines) + "\n"


def _observable_sum(observables, n) -> WeightedSum:
    if isinstance(observables, WeightedSum):
        return observables
    items = []
    for entry in observables:
        if isinstance(entry, (str, PauliString)):
            items.append((entry, 1.0))
        else:
            items.append(tuple(entry))
    return WeightedSum(items, n)


def reduce(model: HamiltonianModel, observables, initial_state) -> ReducedDynamics:
    """Reduced realization ``(C, A_m, x0)`` for one observable and initial state.

    ``observables`` is a WeightedSum or a list of strings / ``(string,
    weight)`` pairs; ``initial_state`` is the deviation density matrix as a
    Pauli sum. Initial-state components outside the accessible set never
    reach the output and are dropped with a warning.
    """
    obs = _observable_sum(observables, model.n)
    if isinstance(initial_state, (str, PauliString)):
        initial_state = WeightedSum({initial_state: 1.0})
    if initial_state.n != model.n or obs.n != model.n:
        raise DimensionError("observable, state and model qubit counts differ")
    acc = accessible_set(model, list(obs))
    index = acc.index()
    K = acc.K
    structure = []
    for term in model.terms:
        A = np.zeros((K, K))
        for k, xk in enumerate(acc.basis):
            for h in term.strings:
                for s, c in expand_commutator(h, xk).items():
                    A[k, index[s]] += c
        structure.append(A)
    C = np.zeros(K)
    for s, o in obs.items():
        C[index[s]] = o
    x0 = np.zeros(K)
    dropped = []
    for s, c in initial_state.items():
        if s in index:
            x0[index[s]] = c
        elif not s.is_identity:
            dropped.append(s.letters)
    if dropped:
        warnings.warn(
            f"initial-state components {dropped} lie outside the accessible set and are ignored",
            stacklevel=2,
        )
    return ReducedDynamics(acc, tuple(structure), C, x0, tuple(model.labels))


def evolve_accessible(rd: ReducedDynamics, a, dt: float, N: int, t0: float = 0.0) -> np.ndarray:
    """Output samples ``y(j) = C exp(A (t0 + j dt)) x0`` for ``j = 0..N-1``."""
    if dt <= 0 or N < 1:
        raise ValidationError("need dt > 0 and N >= 1")
    lam, V = np.linalg.eigh(1j * rd.generator(a))
    if np.max(np.abs(lam), initial=0.0) * dt > np.pi:
        warnings.warn("sampling interval exceeds the Nyquist limit; frequencies will alias", stacklevel=2)
    left = rd.output_row @ V
    right = V.conj().T @ rd.x0
    t = t0 + dt * np.arange(N)
    return np.real(np.exp(-1j * np.outer(t, lam)) @ (left * right))
