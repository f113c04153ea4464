"""
Pauli-string algebra on n qubits.

Strings are stored in symplectic form: one X bit and one Z bit per qubit,
packed into two integers. Qubit 1 is the leftmost letter and the most
significant bit. A single-qubit letter with bits (x, z) denotes
``i**(x*z) X**x Z**z``, so ``Y = i X Z``.

Products carry an exact phase ``i**k`` with integer ``k`` mod 4, and
commutator expansions are exact small integers, so no floating-point
phases ever enter the algebra.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Mapping

import numpy as np

from .errors import CapacityError, DimensionError, ValidationError

MAX_DENSE_QUBITS = 10

_LETTER_BITS = {"I": (0, 0), "X": (1, 0), "Z": (0, 1), "Y": (1, 1)}
_BITS_LETTER = {v: k for k, v in _LETTER_BITS.items()}

_SINGLE = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

_PHASES = (1, 1j, -1, -1j)

_TERM_RE = re.compile(r"([+-]?)((?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)?\*?([IXYZ]+)")


def _popcount(v: int) -> int:
    return bin(v).count("1")


@dataclass(frozen=True, order=False)
class PauliString:
    """Tensor product of single-qubit Paulis, e.g. ``PauliString("IXZ")``."""

    letters: str

    def __post_init__(self):
        letters = self.letters.strip().upper()
        if not letters or any(c not in _LETTER_BITS for c in letters):
            raise ValidationError(f"invalid Pauli string {self.letters!r}")
        object.__setattr__(self, "letters", letters)

    @property
    def n(self) -> int:
        return len(self.letters)

    @property
    def bits(self) -> tuple[int, int]:
        """Symplectic (x, z) integers, qubit 1 in the most significant bit."""
        x = z = 0
        for c in self.letters:
            bx, bz = _LETTER_BITS[c]
            x = (x << 1) | bx
            z = (z << 1) | bz
        return x, z

    @classmethod
    def from_bits(cls, x: int, z: int, n: int) -> "PauliString":
        letters = []
        for q in range(n - 1, -1, -1):
            letters.append(_BITS_LETTER[((x >> q) & 1, (z >> q) & 1)])
        return cls("".join(letters))

    @classmethod
    def identity(cls, n: int) -> "PauliString":
        return cls("I" * n)

    @classmethod
    def single(cls, n: int, qubit: int, letter: str) -> "PauliString":
        """``letter`` on ``qubit`` (1-based), identity elsewhere."""
        if not 1 <= qubit <= n:
            raise ValidationError(f"qubit {qubit} outside 1..{n}")
        return cls("I" * (qubit - 1) + letter + "I" * (n - qubit))

    @property
    def is_identity(self) -> bool:
        return set(self.letters) == {"I"}

    @property
    def support(self) -> tuple[int, ...]:
        """1-based indices of the non-identity letters."""
        return tuple(i + 1 for i, c in enumerate(self.letters) if c != "I")

    def commutes_with(self, other: "PauliString") -> bool:
        _check_dims(self, other)
        x1, z1 = self.bits
        x2, z2 = other.bits
        return (_popcount(x1 & z2) + _popcount(z1 & x2)) % 2 == 0

    def __lt__(self, other: "PauliString") -> bool:
        return self.letters < other.letters

    def __str__(self) -> str:
        return self.letters

    def __repr__(self) -> str:
        return f"PauliString({self.letters!r})"


@dataclass(frozen=True)
class PhasedString:
    """``i**power`` times a Pauli string."""

    power: int
    string: PauliString

    def __post_init__(self):
        object.__setattr__(self, "power", self.power % 4)

    @property
    def phase(self) -> complex:
        return _PHASES[self.power]

    def __str__(self) -> str:
        return ("+", "+i", "-", "-i")[self.power] + self.string.letters


def _check_dims(a: PauliString, b: PauliString) -> None:
    if a.n != b.n:
        raise DimensionError(f"qubit counts differ: {a.n} vs {b.n}")


def _as_string(s) -> PauliString:
    return s if isinstance(s, PauliString) else PauliString(s)


def multiply(a, b) -> PhasedString:
    """Exact product ``a @ b`` of two Pauli strings.

    >>> str(multiply("X", "Y"))
    '+iZ'
    """
    a, b = _as_string(a), _as_string(b)
    _check_dims(a, b)
    x1, z1 = a.bits
    x2, z2 = b.bits
    x, z = x1 ^ x2, z1 ^ z2
    power = (
        _popcount(x1 & z1)
        + _popcount(x2 & z2)
        + 2 * _popcount(z1 & x2)
        - _popcount(x & z)
    )
    return PhasedString(power, PauliString.from_bits(x, z, a.n))


class WeightedSum:
    """Real linear combination of Pauli strings.

    Zero coefficients are dropped on construction. Iteration order is
    insertion order, which the accessible-set builder relies on.
    """

    __slots__ = ("_terms", "n")

    def __init__(self, terms: Mapping | Iterable = (), n: int | None = None):
        items = terms.items() if isinstance(terms, Mapping) else terms
        self._terms: dict[PauliString, float] = {}
        for s, c in items:
            s = _as_string(s)
            if n is None:
                n = s.n
            elif s.n != n:
                raise DimensionError(f"mixed qubit counts in sum: {s.n} vs {n}")
            c = float(np.real_if_close(c))
            if c != 0.0:
                self._terms[s] = self._terms.get(s, 0.0) + c
                if self._terms[s] == 0.0:
                    del self._terms[s]
        self.n = n

    @classmethod
    def parse(cls, text: str) -> "WeightedSum":
        """Parse ``"XII + IXI - 0.5*IIZ"`` style expressions."""
        text = text.replace(" ", "")
        pos, terms = 0, []
        for match in _TERM_RE.finditer(text):
            if match.start() != pos or not match.group(0):
                raise ValidationError(f"cannot parse Pauli sum {text!r}")
            sign, num, word = match.groups()
            coef = float(num) if num else 1.0
            terms.append((word, -coef if sign == "-" else coef))
            pos = match.end()
        if pos != len(text) or not terms:
            raise ValidationError(f"cannot parse Pauli sum {text!r}")
        return cls(terms)

    def items(self):
        return self._terms.items()

    def keys(self):
        return self._terms.keys()

    def get(self, s, default=0.0) -> float:
        return self._terms.get(_as_string(s), default)

    def __getitem__(self, s) -> float:
        return self._terms[_as_string(s)]

    def __contains__(self, s) -> bool:
        return _as_string(s) in self._terms

    def __iter__(self):
        return iter(self._terms)

    def __len__(self) -> int:
        return len(self._terms)

    def __eq__(self, other) -> bool:
        if isinstance(other, Mapping):
            other = WeightedSum(other)
        if not isinstance(other, WeightedSum):
            return NotImplemented
        return self._terms == other._terms

    def __neg__(self) -> "WeightedSum":
        return WeightedSum({s: -c for s, c in self._terms.items()}, self.n)

    def __add__(self, other: "WeightedSum") -> "WeightedSum":
        return WeightedSum(list(self.items()) + list(other.items()), self.n or other.n)

    def __mul__(self, k: float) -> "WeightedSum":
        return WeightedSum({s: k * c for s, c in self._terms.items()}, self.n)

    __rmul__ = __mul__

    def to_dense(self) -> np.ndarray:
        if self.n is None:
            raise ValidationError("empty sum has no qubit count")
        out = np.zeros((2**self.n, 2**self.n), dtype=complex)
        for s, c in self._terms.items():
            out += c * to_dense(s)
        return out

    def __repr__(self) -> str:
        body = ", ".join(f"{s.letters}: {c:g}" for s, c in self._terms.items())
        return f"WeightedSum({{{body}}})"


def expand_commutator(m, k) -> WeightedSum:
    """Pauli expansion of ``i[m, k]``.

    Coefficients are the structure constants divided by ``2**n``: either the
    sum is empty (``m`` and ``k`` commute) or it holds a single string with
    coefficient +2 or -2.
    """
    m, k = _as_string(m), _as_string(k)
    _check_dims(m, k)
    if m.commutes_with(k):
        return WeightedSum({}, m.n)
    prod = multiply(m, k)
    # anticommuting: i[m,k] = 2i m k = 2 i**(power+1) P, and power+1 is even
    coef = 2.0 * _PHASES[(prod.power + 1) % 4].real
    return WeightedSum({prod.string: coef}, m.n)


def to_dense(s) -> np.ndarray:
    """Kronecker-product matrix of a Pauli string."""
    s = _as_string(s)
    if s.n > MAX_DENSE_QUBITS:
        raise CapacityError(f"{s.n} qubits exceeds dense limit {MAX_DENSE_QUBITS}")
    return reduce(np.kron, (_SINGLE[c] for c in s.letters))


def all_strings(n: int, include_identity: bool = False) -> list[PauliString]:
    """Every n-qubit string in lexicographic order."""
    from itertools import product

    out = [PauliString("".join(p)) for p in product("IXYZ", repeat=n)]
    out.sort()
    return out if include_identity else [s for s in out if not s.is_identity]
