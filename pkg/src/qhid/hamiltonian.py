"""
Parametrized Hamiltonians ``H = sum_m a_m sum_{s in term m} s`` and the
liquid-state NMR constructors built on top of them.

Coefficients are angular frequencies (rad/s). Larmor offsets and scalar
couplings entered in Hz become ``a = pi*nu`` and ``a = pi*J/2``.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, DimensionError, ValidationError
from .pauli import PauliString, WeightedSum, to_dense

PRESET_DIR = Path(__file__).parent / "presets"


@dataclass(frozen=True)
class HamiltonianTerm:
    param_index: int
    strings: tuple[PauliString, ...]
    label: str = ""

    def __post_init__(self):
        strings = tuple(s if isinstance(s, PauliString) else PauliString(s) for s in self.strings)
        if not strings:
            raise ValidationError("a term needs at least one Pauli string")
        if len({s.n for s in strings}) != 1:
            raise DimensionError("term strings act on different qubit counts")
        if len(set(strings)) != len(strings):
            raise ValidationError(f"duplicate strings in term {self.label or self.param_index}")
        if any(s.is_identity for s in strings):
            raise ValidationError("identity string is not allowed in a term")
        object.__setattr__(self, "strings", strings)

    @property
    def n(self) -> int:
        return self.strings[0].n

    @property
    def name(self) -> str:
        return "+".join(s.letters for s in self.strings)


@dataclass(frozen=True)
class HamiltonianModel:
    """Structure (terms) plus optional ground-truth coefficients."""

    n: int
    terms: tuple[HamiltonianTerm, ...]
    values: np.ndarray | None = None

    def __post_init__(self):
        terms = tuple(self.terms)
        if [t.param_index for t in terms] != list(range(1, len(terms) + 1)):
            raise ValidationError("param_index values must be 1..M in order")
        seen = set()
        for t in terms:
            if t.n != self.n:
                raise DimensionError(f"term {t.name} has {t.n} qubits, model has {self.n}")
            if seen & set(t.strings):
                raise ValidationError(f"string shared between terms: {t.name}")
            seen |= set(t.strings)
        object.__setattr__(self, "terms", terms)
        if self.values is not None:
            values = np.asarray(self.values, dtype=float)
            if values.shape != (len(terms),):
                raise ConfigurationError(f"expected {len(terms)} values, got {values.shape}")
            object.__setattr__(self, "values", values)

    @classmethod
    def from_terms(cls, spec: Sequence, values=None) -> "HamiltonianModel":
        """Build from ``[["ZI"], ["IZ"], ["XX", "YY", "ZZ"]]`` style lists."""
        terms = []
        for i, strings in enumerate(spec, start=1):
            if isinstance(strings, (str, PauliString)):
                strings = [strings]
            terms.append(HamiltonianTerm(i, tuple(strings)))
        if not terms:
            raise ValidationError("model needs at least one term")
        return cls(terms[0].n, tuple(terms), values)

    @property
    def M(self) -> int:
        return len(self.terms)

    @property
    def labels(self) -> list[str]:
        return [t.label or t.name for t in self.terms]

    def with_values(self, values) -> "HamiltonianModel":
        return HamiltonianModel(self.n, self.terms, np.asarray(values, dtype=float))

    def as_sum(self, values=None) -> WeightedSum:
        values = self._values(values)
        return WeightedSum(
            [(s, a) for t, a in zip(self.terms, values) for s in t.strings], self.n
        )

    def _values(self, values):
        if values is None:
            if self.values is None:
                raise ConfigurationError("model has no coefficient values")
            return self.values
        values = np.asarray(values, dtype=float)
        if values.shape != (self.M,):
            raise ConfigurationError(f"expected {self.M} values, got {values.shape}")
        return values


def dense_hamiltonian(model: HamiltonianModel, values=None) -> np.ndarray:
    """Dense ``2**n x 2**n`` Hamiltonian matrix."""
    values = model._values(values)
    dim = 2**model.n
    H = np.zeros((dim, dim), dtype=complex)
    for term, a in zip(model.terms, values):
        for s in term.strings:
            H += a * to_dense(s)
    return H


@dataclass(frozen=True)
class MoleculeSpec:
    """NMR molecule description.

    ``larmor`` holds rotating-frame offsets in Hz and ``couplings`` maps
    1-based pairs ``(i, j)``, ``i < j``, to J in Hz. Couplings of exactly
    zero Hz still produce a term so that the model structure is fixed.
    """

    n: int
    larmor: tuple[float, ...]
    couplings: dict = field(default_factory=dict)
    mode: str = "weak"
    observed_qubits: tuple[int, ...] = (1,)
    initial_states: tuple[str, ...] | None = None
    name: str = ""

    def __post_init__(self):
        if not 1 <= self.n <= 10:
            raise ValidationError(f"qubit count {self.n} outside 1..10")
        if len(self.larmor) != self.n:
            raise ValidationError(f"need {self.n} Larmor offsets, got {len(self.larmor)}")
        if self.mode not in ("strong", "weak"):
            raise ValidationError(f"mode must be strong or weak, not {self.mode!r}")
        for i, j in self.couplings:
            if not 1 <= i < j <= self.n:
                raise ValidationError(f"coupling key {(i, j)} must satisfy 1 <= i < j <= n")
        obs = tuple(self.observed_qubits)
        if not obs or any(not 1 <= q <= self.n for q in obs):
            raise ValidationError(f"observed qubits {obs} must be nonempty within 1..{self.n}")
        object.__setattr__(self, "observed_qubits", obs)
        object.__setattr__(self, "larmor", tuple(float(v) for v in self.larmor))
        object.__setattr__(
            self, "couplings", {tuple(k): float(v) for k, v in sorted(self.couplings.items())}
        )
        if self.initial_states is not None:
            states = tuple(PauliString(s).letters for s in self.initial_states)
            if any(len(s) != self.n for s in states):
                raise DimensionError("initial state strings must have n letters")
            object.__setattr__(self, "initial_states", states)

    @classmethod
    def from_values(cls, n, values, mode, pairs=None, **kwargs) -> "MoleculeSpec":
        """Spec whose model coefficients are exactly ``values`` (rad/s).

        ``values`` lists the n shift coefficients, then one coupling
        coefficient per pair in ``pairs`` (default: all pairs, lexicographic).
        """
        pairs = pairs if pairs is not None else [(i, j) for i in range(1, n + 1) for j in range(i + 1, n + 1)]
        values = list(values)
        if len(values) != n + len(pairs):
            raise ValidationError(f"expected {n + len(pairs)} values, got {len(values)}")
        larmor = [a / np.pi for a in values[:n]]
        couplings = {tuple(p): 2.0 * a / np.pi for p, a in zip(pairs, values[n:])}
        return cls(n, tuple(larmor), couplings, mode, **kwargs)

    @property
    def protocol_states(self) -> list[PauliString]:
        """Initial deviation states, one experiment each (X on each observed qubit by default)."""
        if self.initial_states is not None:
            return [PauliString(s) for s in self.initial_states]
        return [PauliString.single(self.n, q, "X") for q in self.observed_qubits]

    @property
    def observable(self) -> WeightedSum:
        """Real part of the receiver observable: sum of X on observed qubits."""
        return WeightedSum([(PauliString.single(self.n, q, "X"), 1.0) for q in self.observed_qubits])


def nmr_model(spec: MoleculeSpec, with_values: bool = True) -> HamiltonianModel:
    """Liquid-state NMR Hamiltonian in parametrized form.

    One ``Z_j`` term per spin with coefficient ``pi*nu_j``, then one term per
    coupled pair with coefficient ``pi*J/2``: ``{XX, YY, ZZ}`` sharing the
    coefficient in strong mode, the secular ``ZZ`` alone in weak mode.
    """
    n = spec.n
    terms, values = [], []
    for j in range(1, n + 1):
        terms.append(HamiltonianTerm(len(terms) + 1, (PauliString.single(n, j, "Z"),), f"nu{j}"))
        values.append(np.pi * spec.larmor[j - 1])
    letters = "XYZ" if spec.mode == "strong" else "Z"
    for (i, j), J in spec.couplings.items():
        strings = []
        for c in letters:
            word = ["I"] * n
            word[i - 1] = word[j - 1] = c
            strings.append(PauliString("".join(word)))
        terms.append(HamiltonianTerm(len(terms) + 1, tuple(strings), f"J{i}{j}"))
        values.append(np.pi * J / 2.0)
    return HamiltonianModel(n, tuple(terms), np.array(values) if with_values else None)


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.replace(",", " ").split()]


def parse_molecule(text: str, name: str = "") -> MoleculeSpec:
    """Parse the flat key/value molecule format.

    Keys: ``n``, ``larmor``, ``couplings`` (``i-j:J`` entries), ``mode``,
    ``observed_qubits``, optional ``initial_states`` and ``units``
    (``hz``, the default, or ``rad`` for values given directly as model
    coefficients ``pi*nu`` and ``pi*J/2``).
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.read_string("[molecule]\n" + text)
    sec = parser["molecule"]
    try:
        n = sec.getint("n")
        larmor = _floats(sec["larmor"])
        couplings = {}
        for entry in sec.get("couplings", "").replace(",", " ").split():
            pair, value = entry.split(":")
            i, j = (int(v) for v in pair.split("-"))
            couplings[(min(i, j), max(i, j))] = float(value)
        observed = tuple(int(v) for v in _floats(sec.get("observed_qubits", "1")))
        states = sec.get("initial_states")
        states = tuple(states.replace(",", " ").split()) if states else None
        units = sec.get("units", "hz").lower()
        mode = sec.get("mode", "weak").lower()
    except (KeyError, ValueError) as exc:
        raise ConfigurationError(f"bad molecule config: {exc}") from exc
    if n is None:
        raise ConfigurationError("molecule config needs n")
    if units == "rad":
        larmor = [a / np.pi for a in larmor]
        couplings = {k: 2.0 * a / np.pi for k, a in couplings.items()}
    elif units != "hz":
        raise ConfigurationError(f"units must be hz or rad, not {units!r}")
    return MoleculeSpec(n, tuple(larmor), couplings, mode, observed, states, sec.get("name", name))


def load_molecule(path) -> MoleculeSpec:
    """Read a molecule config; bare names resolve to shipped presets (``tce``, ``ala``)."""
    path = Path(path)
    if not path.exists() and (PRESET_DIR / f"{path.stem}.cfg").exists():
        path = PRESET_DIR / f"{path.stem}.cfg"
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read {path}: {exc}") from exc
    return parse_molecule(text, name=path.stem)


def _permuted_letters(word: str, perm) -> str:
    # new qubit q carries the letter of old qubit perm[q]
    return "".join(word[p] for p in perm)


def protocol_relabelings(spec: MoleculeSpec, max_qubits: int = 6) -> list[np.ndarray]:
    """Qubit relabelings that leave the measurement protocol unchanged.

    Each entry is an index array ``idx`` such that ``values[idx]`` are the
    nmr_model coefficients of the relabeled molecule. Such relabelings
    produce identical traces, so data alone cannot tell them apart. The
    identity always comes first; molecules above ``max_qubits`` only get
    the identity.
    """
    from itertools import permutations

    n = spec.n
    pairs = list(spec.couplings)
    pair_index = {p: n + k for k, p in enumerate(pairs)}
    identity = np.arange(n + len(pairs))
    if n > max_qubits:
        return [identity]
    observed = set(spec.observed_qubits)
    states = sorted(s.letters for s in spec.protocol_states)
    out = [identity]
    for perm in permutations(range(n)):
        if perm == tuple(range(n)):
            continue
        if {perm[q - 1] + 1 for q in observed} != observed:
            continue
        if sorted(_permuted_letters(s, perm) for s in states) != states:
            continue
        mapped = [tuple(sorted((perm[i - 1] + 1, perm[j - 1] + 1))) for i, j in pairs]
        if any(p not in pair_index for p in mapped):
            continue
        out.append(np.array(list(perm) + [pair_index[p] for p in mapped]))
    return out


def closest_relabeling(spec: MoleculeSpec, values, reference) -> np.ndarray:
    """Index array mapping ``values`` to the equivalent labeling nearest ``reference``.

    Distance is the sum of squared log ratios of magnitudes over entries
    that are finite and nonzero in both; ties keep the earlier labeling.
    """
    values = np.asarray(values, dtype=float)
    ref = np.abs(np.asarray(reference, dtype=float))
    best, best_cost = None, np.inf
    for idx in protocol_relabelings(spec):
        mag = np.abs(values[idx])
        ok = np.isfinite(mag) & (mag > 0) & np.isfinite(ref) & (ref > 0)
        cost = float(np.sum(np.log(mag[ok] / ref[ok]) ** 2))
        if cost < best_cost - 1e-12:
            best, best_cost = idx, cost
    return best
