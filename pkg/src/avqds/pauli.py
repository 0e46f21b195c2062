"""Pauli strings and real-weighted Pauli sums on N qubits.

A Pauli string is stored as a pair of bit masks ``(x, z)`` plus an exact
phase exponent ``k`` (the string equals ``i**k`` times the tensor product of
its letters).  Bit ``i`` of a mask refers to qubit ``i``; qubit 0 is the
least-significant bit of a computational-basis index throughout the package.

Letters map to masks as::

    I -> (0, 0)   X -> (1, 0)   Z -> (0, 1)   Y -> (1, 1)

Action on basis states is matrix free: with ``Y = i X Z`` a string maps
``|b>`` to ``i**(k + nY) * (-1)**popcount(z & b) * |b ^ x>``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Iterable

import numpy as np

__all__ = [
    "PauliParseError",
    "StateNormError",
    "PauliString",
    "PauliSum",
    "pauli_product",
    "apply_pauli",
    "expectation",
    "variance",
    "parse_pauli",
    "format_pauli",
]

_PHASES = (1.0 + 0j, 1j, -1.0 + 0j, -1j)
_PHASE_TOKENS = {"+": 0, "i": 1, "+i": 1, "-": 2, "-i": 3}
_PHASE_PREFIX = ("", "i ", "- ", "-i ")
_LETTER_BITS = {"I": (0, 0), "X": (1, 0), "Y": (1, 1), "Z": (0, 1)}

COEFF_CUTOFF = 1e-14
NORM_TOL = 1e-8


class PauliParseError(ValueError):
    """Raised for malformed Pauli-string text; ``position`` is a character offset."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class StateNormError(ValueError):
    """Raised when an operation that requires a normalized state receives one that is not."""


@dataclass(frozen=True)
class PauliString:
    """``i**phase`` times a tensor product of single-qubit Pauli letters.

    Parameters
    ----------
    n_qubits : int
        Number of qubits (positive).
    x, z : int
        Bit masks; see module docstring for the letter encoding.
    phase : int
        Exponent of ``i`` in Z_4, i.e. 0 -> +1, 1 -> +i, 2 -> -1, 3 -> -i.
    """

    n_qubits: int
    x: int = 0
    z: int = 0
    phase: int = 0

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ValueError(f"n_qubits must be positive, got {self.n_qubits}")
        limit = 1 << self.n_qubits
        if not (0 <= self.x < limit and 0 <= self.z < limit):
            raise ValueError("Pauli masks exceed the number of qubits")
        object.__setattr__(self, "phase", int(self.phase) % 4)

    @classmethod
    def identity(cls, n_qubits: int) -> PauliString:
        return cls(n_qubits)

    @classmethod
    def from_letters(cls, letters: str, phase: int = 0) -> PauliString:
        """Build from a letter sequence; ``letters[i]`` acts on qubit ``i``."""
        x = z = 0
        for i, ch in enumerate(letters.upper()):
            try:
                bx, bz = _LETTER_BITS[ch]
            except KeyError:
                raise ValueError(f"unknown Pauli letter {ch!r}") from None
            x |= bx << i
            z |= bz << i
        return cls(len(letters), x, z, phase)

    @classmethod
    def from_sites(cls, n_qubits: int, ops: dict[int, str], phase: int = 0) -> PauliString:
        """Build from a ``{site: letter}`` mapping."""
        x = z = 0
        for site, ch in ops.items():
            if not 0 <= site < n_qubits:
                raise ValueError(f"site {site} out of range for {n_qubits} qubits")
            bx, bz = _LETTER_BITS[ch.upper()]
            x |= bx << site
            z |= bz << site
        return cls(n_qubits, x, z, phase)

    @property
    def letters(self) -> str:
        out = []
        for i in range(self.n_qubits):
            bx = (self.x >> i) & 1
            bz = (self.z >> i) & 1
            out.append("IXZY"[bx | (bz << 1)])
        return "".join(out)

    @property
    def coefficient(self) -> complex:
        """The unit phase as a complex number."""
        return _PHASES[self.phase]

    @property
    def weight(self) -> int:
        return (self.x | self.z).bit_count()

    @property
    def support(self) -> tuple[int, ...]:
        mask = self.x | self.z
        return tuple(i for i in range(self.n_qubits) if (mask >> i) & 1)

    @property
    def n_y(self) -> int:
        return (self.x & self.z).bit_count()

    @property
    def is_hermitian(self) -> bool:
        return self.phase % 2 == 0

    def without_phase(self) -> PauliString:
        return PauliString(self.n_qubits, self.x, self.z, 0)

    def commutes_with(self, other: PauliString) -> bool:
        _check_same_size(self, other)
        return ((self.x & other.z).bit_count() + (self.z & other.x).bit_count()) % 2 == 0

    def __mul__(self, other: PauliString) -> PauliString:
        return pauli_product(self, other)

    def __str__(self) -> str:
        return format_pauli(self)

    def matrix(self) -> np.ndarray:
        """Dense ``2**n x 2**n`` matrix (for small-system checks)."""
        perm, fac = _action(self.n_qubits, self.x, self.z, self.phase)
        dim = 1 << self.n_qubits
        mat = np.zeros((dim, dim), dtype=complex)
        mat[np.arange(dim), perm] = fac
        return mat


def _check_same_size(a: PauliString, b: PauliString) -> None:
    if a.n_qubits != b.n_qubits:
        raise ValueError(f"qubit count mismatch: {a.n_qubits} vs {b.n_qubits}")


def pauli_product(a: PauliString, b: PauliString) -> PauliString:
    """Exact product ``a @ b`` including the accumulated unit phase."""
    _check_same_size(a, b)
    x = a.x ^ b.x
    z = a.z ^ b.z
    # (X^x1 Z^z1)(X^x2 Z^z2) = (-1)^{z1.x2} X^{x1^x2} Z^{z1^z2}; letters carry i^{nY}
    k = (
        a.phase
        + b.phase
        + (a.x & a.z).bit_count()
        + (b.x & b.z).bit_count()
        + 2 * (a.z & b.x).bit_count()
        - (x & z).bit_count()
    )
    return PauliString(a.n_qubits, x, z, k % 4)


@lru_cache(maxsize=8192)
def _action(n_qubits: int, x: int, z: int, phase: int) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(perm, fac)`` with ``(P psi)[c] = fac[c] * psi[perm[c]]``."""
    idx = np.arange(1 << n_qubits, dtype=np.int64)
    perm = idx ^ x
    parity = np.bitwise_count(perm & z) & 1
    k = (phase + (x & z).bit_count()) % 4
    fac = _PHASES[k] * (1.0 - 2.0 * parity)
    perm.setflags(write=False)
    fac.setflags(write=False)
    return perm, fac


def pauli_action(p: PauliString) -> tuple[np.ndarray, np.ndarray]:
    """Cached permutation/phase arrays describing ``p`` on the computational basis."""
    return _action(p.n_qubits, p.x, p.z, p.phase)


def apply_pauli(p: PauliString, psi: np.ndarray) -> np.ndarray:
    """Apply ``p`` to a state vector (or to each column of a ``(2**n, k)`` block)."""
    psi = np.asarray(psi)
    if psi.shape[0] != 1 << p.n_qubits:
        raise ValueError(
            f"state dimension {psi.shape[0]} does not match {p.n_qubits} qubits"
        )
    perm, fac = pauli_action(p)
    if psi.ndim == 1:
        return fac * psi[perm]
    return fac[:, None] * psi[perm]


@dataclass(frozen=True, eq=False)
class PauliSum:
    """Real linear combination of phase-free Pauli strings in canonical form.

    Terms keep the order of first appearance; duplicates are merged and
    coefficients with magnitude below ``1e-14`` are dropped.  A string with
    phase -1 is absorbed into its coefficient; strings with phase +-i are
    rejected because the sum would not be Hermitian.
    """

    n_qubits: int
    terms: tuple[tuple[float, PauliString], ...] = field(default=())

    def __post_init__(self):
        merged: dict[tuple[int, int], float] = {}
        for coeff, p in self.terms:
            if p.n_qubits != self.n_qubits:
                raise ValueError("all terms must act on the same number of qubits")
            if not p.is_hermitian:
                raise ValueError(f"term {p} has an imaginary phase")
            c = float(np.real(coeff)) * (1.0 if p.phase == 0 else -1.0)
            if np.imag(coeff) != 0:
                raise ValueError("PauliSum coefficients must be real")
            if not np.isfinite(c):
                raise ValueError(f"non-finite coefficient for term {p}")
            key = (p.x, p.z)
            merged[key] = merged.get(key, 0.0) + c
        canon = tuple(
            (c, PauliString(self.n_qubits, x, z))
            for (x, z), c in merged.items()
            if abs(c) >= COEFF_CUTOFF
        )
        object.__setattr__(self, "terms", canon)

    def __len__(self) -> int:
        return len(self.terms)

    def __iter__(self):
        return iter(self.terms)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PauliSum):
            return NotImplemented
        return self.n_qubits == other.n_qubits and self.terms == other.terms

    def __hash__(self) -> int:
        return hash((self.n_qubits, self.terms))

    def __add__(self, other: PauliSum) -> PauliSum:
        return PauliSum(self.n_qubits, self.terms + other.terms)

    def __mul__(self, scale: float) -> PauliSum:
        return PauliSum(self.n_qubits, tuple((scale * c, p) for c, p in self.terms))

    __rmul__ = __mul__

    @property
    def strings(self) -> tuple[PauliString, ...]:
        return tuple(p for _, p in self.terms)

    @property
    def coefficients(self) -> np.ndarray:
        return np.array([c for c, _ in self.terms], dtype=float)

    def apply(self, psi: np.ndarray) -> np.ndarray:
        out = np.zeros_like(psi, dtype=complex)
        for c, p in self.terms:
            out += c * apply_pauli(p, psi)
        return out

    def matrix(self) -> np.ndarray:
        dim = 1 << self.n_qubits
        mat = np.zeros((dim, dim), dtype=complex)
        rows = np.arange(dim)
        for c, p in self.terms:
            perm, fac = pauli_action(p)
            mat[rows, perm] += c * fac
        return mat

    @cached_property
    def squared(self) -> PauliSum:
        """The operator square, assembled by exact pairwise products."""
        acc: dict[tuple[int, int], complex] = {}
        for ca, pa in self.terms:
            for cb, pb in self.terms:
                prod = pauli_product(pa, pb)
                key = (prod.x, prod.z)
                acc[key] = acc.get(key, 0.0) + ca * cb * prod.coefficient
        terms = []
        for (x, z), c in acc.items():
            # anticommuting pairs contribute +i and -i with identical magnitude
            assert abs(c.imag) <= 1e-12 * max(1.0, abs(c.real)), "non-Hermitian square"
            terms.append((c.real, PauliString(self.n_qubits, x, z)))
        return PauliSum(self.n_qubits, tuple(terms))

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        return " + ".join(f"{c:.12g} [{format_pauli(p)}]" for c, p in self.terms)


def _check_normalized(psi: np.ndarray) -> None:
    norm = np.linalg.norm(psi)
    if abs(norm - 1.0) > NORM_TOL:
        raise StateNormError(f"state is not normalized (norm = {norm:.12g})")


def expectation(h: PauliSum, psi: np.ndarray) -> float:
    """``<psi|h|psi>`` for a normalized state."""
    psi = np.asarray(psi)
    _check_normalized(psi)
    if psi.shape[0] != 1 << h.n_qubits:
        raise ValueError("state dimension does not match the operator")
    val = 0j
    for c, p in h.terms:
        perm, fac = pauli_action(p)
        val += c * np.vdot(psi, fac * psi[perm])
    scale = max(1.0, float(np.sum(np.abs(h.coefficients)))) if len(h) else 1.0
    if abs(val.imag) > 1e-12 * scale:
        raise ArithmeticError(f"expectation has imaginary part {val.imag:.3e}")
    return float(val.real)


def variance(h: PauliSum, psi: np.ndarray) -> float:
    """``<h^2> - <h>^2`` using the cached exact square of ``h``."""
    mean = expectation(h, psi)
    return expectation(h.squared, psi) - mean * mean


_TOKEN = re.compile(r"\S+")
_PAULI_TOKEN = re.compile(r"([IXYZ])(\d+)$")


def parse_pauli(text: str, n_qubits: int) -> PauliString:
    """Parse ``"X0 Y2"``-style text.

    An optional leading phase token (``-``, ``i``, ``-i``) is accepted, and the
    bare token ``I`` (or an empty string) denotes the identity.
    """
    ops: dict[int, str] = {}
    phase = 0
    tokens = list(_TOKEN.finditer(text))
    for k, m in enumerate(tokens):
        tok = m.group(0)
        if k == 0 and tok in _PHASE_TOKENS and len(tokens) > 1:
            phase = _PHASE_TOKENS[tok]
            continue
        if tok == "I":
            continue
        mm = _PAULI_TOKEN.match(tok)
        if mm is None:
            raise PauliParseError(f"bad token {tok!r}", m.start())
        letter, site = mm.group(1), int(mm.group(2))
        if site >= n_qubits:
            raise PauliParseError(
                f"site index {site} out of range for {n_qubits} qubits", m.start()
            )
        if site in ops:
            raise PauliParseError(f"duplicate site {site}", m.start())
        if letter != "I":
            ops[site] = letter
    return PauliString.from_sites(n_qubits, ops, phase)


def format_pauli(p: PauliString) -> str:
    """Inverse of :func:`parse_pauli`; sites appear in increasing order."""
    body = " ".join(f"{p.letters[i]}{i}" for i in p.support) or "I"
    return _PHASE_PREFIX[p.phase] + body
