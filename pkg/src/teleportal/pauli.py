"""Phased Pauli strings with bit-packed storage.

A ``PauliString`` is ``i**phase_exp`` times a tensor product of the letters
I, X, Y, Z.  Letter ``q`` is encoded by bit ``q`` of ``x_bits`` and
``z_bits``::

    (x, z) = (0, 0) -> I
    (x, z) = (1, 0) -> X
    (x, z) = (1, 1) -> Y
    (x, z) = (0, 1) -> Z

so ``Y`` is stored with ``phase_exp = 0``: the phase multiplies the letter
product, not an ``X^x Z^z`` product.  Text form puts qubit 0 leftmost, e.g.
``"+XIZY"`` or ``"-iYZ"``.  Dense export follows the register convention
used everywhere in the package: qubit 0 is the least significant bit of
the amplitude index.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from .config import PHASE_SNAP_TOL, ZERO_TOL, check_dense

_PHASE_TEXT = {0: "+", 1: "+i", 2: "-", 3: "-i"}
_TEXT_PHASE = {"": 0, "+": 0, "i": 1, "+i": 1, "-": 2, "-i": 3}
_LETTER_BITS = {"I": (0, 0), "X": (1, 0), "Y": (1, 1), "Z": (0, 1)}
_BITS_LETTER = {bits: letter for letter, bits in _LETTER_BITS.items()}
_PAULI_TEXT_RE = re.compile(r"^\s*([+-]?i?)([IXYZ]+)\s*$")

_I2 = np.eye(2, dtype=complex)
_X2 = np.array([[0, 1], [1, 0]], dtype=complex)
_Y2 = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z2 = np.array([[1, 0], [0, -1]], dtype=complex)
LETTER_MATRICES = {"I": _I2, "X": _X2, "Y": _Y2, "Z": _Z2}
_PHASES = (1, 1j, -1, -1j)


@dataclass(frozen=True)
class PauliString:
    n: int
    phase_exp: int
    x_bits: int
    z_bits: int

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("qubit count must be non-negative")
        mask = (1 << self.n) - 1
        if self.x_bits & ~mask or self.z_bits & ~mask or self.x_bits < 0 or self.z_bits < 0:
            raise ValueError(f"bit vectors do not fit in {self.n} qubits")
        object.__setattr__(self, "phase_exp", self.phase_exp % 4)

    # construction

    @classmethod
    def identity(cls, n: int) -> "PauliString":
        return cls(n, 0, 0, 0)

    @classmethod
    def from_letters(cls, letters: str, phase_exp: int = 0) -> "PauliString":
        x = z = 0
        for q, letter in enumerate(letters):
            try:
                xb, zb = _LETTER_BITS[letter]
            except KeyError:
                raise ValueError(f"unknown Pauli letter {letter!r}") from None
            x |= xb << q
            z |= zb << q
        return cls(len(letters), phase_exp, x, z)

    @classmethod
    def parse(cls, text: str) -> "PauliString":
        m = _PAULI_TEXT_RE.match(text)
        if not m:
            raise ValueError(f"cannot parse Pauli string {text!r}")
        return cls.from_letters(m.group(2), _TEXT_PHASE[m.group(1)])

    @classmethod
    def single(cls, n: int, qubit: int, letter: str) -> "PauliString":
        if not 0 <= qubit < n:
            raise IndexError(f"qubit {qubit} out of range for {n} qubits")
        xb, zb = _LETTER_BITS[letter]
        return cls(n, 0, xb << qubit, zb << qubit)

    @classmethod
    def from_bit_lists(cls, x: Sequence[int], z: Sequence[int], phase_exp: int = 0) -> "PauliString":
        if len(x) != len(z):
            raise ValueError("x and z bit vectors differ in length")
        xi = sum(int(b) << q for q, b in enumerate(x))
        zi = sum(int(b) << q for q, b in enumerate(z))
        return cls(len(x), phase_exp, xi, zi)

    # views

    def letter(self, q: int) -> str:
        return _BITS_LETTER[((self.x_bits >> q) & 1, (self.z_bits >> q) & 1)]

    @property
    def letters(self) -> str:
        return "".join(self.letter(q) for q in range(self.n))

    @property
    def x_list(self) -> list[int]:
        return [(self.x_bits >> q) & 1 for q in range(self.n)]

    @property
    def z_list(self) -> list[int]:
        return [(self.z_bits >> q) & 1 for q in range(self.n)]

    @property
    def support_mask(self) -> int:
        return self.x_bits | self.z_bits

    @property
    def weight(self) -> int:
        return self.support_mask.bit_count()

    def support(self) -> list[int]:
        mask = self.support_mask
        return [q for q in range(self.n) if (mask >> q) & 1]

    def is_identity(self, ignore_phase: bool = True) -> bool:
        return self.support_mask == 0 and (ignore_phase or self.phase_exp == 0)

    def unsigned(self) -> "PauliString":
        return PauliString(self.n, 0, self.x_bits, self.z_bits)

    def is_hermitian(self) -> bool:
        return self.phase_exp % 2 == 0

    def __str__(self) -> str:
        return _PHASE_TEXT[self.phase_exp] + self.letters

    def __repr__(self) -> str:
        return f"PauliString({str(self)!r})"

    def __mul__(self, other: "PauliString") -> "PauliString":
        return multiply(self, other)

    def __neg__(self) -> "PauliString":
        return PauliString(self.n, self.phase_exp + 2, self.x_bits, self.z_bits)

    def with_phase(self, phase_exp: int) -> "PauliString":
        return PauliString(self.n, phase_exp, self.x_bits, self.z_bits)

    def to_matrix(self) -> np.ndarray:
        return to_matrix(self)

    def restrict(self, qubits: Sequence[int]) -> "PauliString":
        """Sub-string on ``qubits`` (in the given order), phase dropped."""
        x = z = 0
        for j, q in enumerate(qubits):
            x |= ((self.x_bits >> q) & 1) << j
            z |= ((self.z_bits >> q) & 1) << j
        return PauliString(len(qubits), 0, x, z)

    def replace(self, qubits: Sequence[int], sub: "PauliString") -> "PauliString":
        """Overwrite the letters on ``qubits`` with ``sub``; phases multiply."""
        if sub.n != len(qubits):
            raise ValueError("sub-string length does not match qubit list")
        x, z = self.x_bits, self.z_bits
        for j, q in enumerate(qubits):
            bit = 1 << q
            x = (x & ~bit) | (((sub.x_bits >> j) & 1) << q)
            z = (z & ~bit) | (((sub.z_bits >> j) & 1) << q)
        return PauliString(self.n, self.phase_exp + sub.phase_exp, x, z)

    def embed(self, n: int, qubits: Sequence[int]) -> "PauliString":
        return PauliString.identity(n).replace(qubits, self)


def _check_same_size(p: PauliString, q: PauliString) -> None:
    if p.n != q.n:
        raise ValueError(f"Pauli strings act on different qubit counts ({p.n} vs {q.n})")


def multiply(p: PauliString, q: PauliString) -> PauliString:
    """Group product ``p @ q`` with exact phase."""
    _check_same_size(p, q)
    px, pz, qx, qz = p.x_bits, p.z_bits, q.x_bits, q.z_bits
    p_x_only, p_y, p_z_only = px & ~pz, px & pz, pz & ~px
    q_x_only, q_y, q_z_only = qx & ~qz, qx & qz, qz & ~qx
    # XY = iZ, YZ = iX, ZX = iY and the reversed orders give -i.
    plus = (p_x_only & q_y) | (p_y & q_z_only) | (p_z_only & q_x_only)
    minus = (p_x_only & q_z_only) | (p_y & q_x_only) | (p_z_only & q_y)
    phase = p.phase_exp + q.phase_exp + plus.bit_count() - minus.bit_count()
    return PauliString(p.n, phase, px ^ qx, pz ^ qz)


def commutes(p: PauliString, q: PauliString) -> bool:
    """True iff ``pq == qp``; the symplectic inner product is even."""
    _check_same_size(p, q)
    return ((p.x_bits & q.z_bits) ^ (p.z_bits & q.x_bits)).bit_count() % 2 == 0


def to_matrix(p: PauliString) -> np.ndarray:
    check_dense(p.n, "Pauli dense export")
    m = np.array([[_PHASES[p.phase_exp]]], dtype=complex)
    # qubit n-1 is the most significant index bit, so it is the leftmost factor
    for q in reversed(range(p.n)):
        m = np.kron(m, LETTER_MATRICES[p.letter(q)])
    return m


def block_weight(p: PauliString, partition: Iterable[Iterable[int]]) -> list[int]:
    """Number of non-identity letters of ``p`` inside each block."""
    seen: set[int] = set()
    weights = []
    for block in partition:
        block = list(block)
        for q in block:
            if not 0 <= q < p.n:
                raise IndexError(f"qubit {q} outside a {p.n}-qubit string")
            if q in seen:
                raise ValueError(f"qubit {q} appears in more than one block")
            seen.add(q)
        weights.append(sum((p.support_mask >> q) & 1 for q in block))
    return weights


def all_paulis(n: int) -> Iterator[PauliString]:
    """All 4^n unsigned Pauli strings, identity first."""
    for letters in itertools.product("IXYZ", repeat=n):
        yield PauliString.from_letters("".join(reversed(letters)))


def snap_phase(c: complex, tol: float = PHASE_SNAP_TOL) -> int | None:
    """Index k with ``c ~= i**k``, or None if ``c`` is not near a quarter phase."""
    for k, ph in enumerate(_PHASES):
        if abs(c - ph) < tol:
            return k
    return None


def pauli_from_matrix(m: np.ndarray, allow_global_phase: bool = False) -> tuple[PauliString, complex] | None:
    """Recognise ``m`` as a phased Pauli string.

    Returns ``(P, c)`` with ``m == c * to_matrix(P)`` where ``P`` carries the
    snapped phase and ``c`` is the leftover unit scalar (1 unless
    ``allow_global_phase``).  Returns None when ``m`` is not of that form.
    """
    m = np.asarray(m, dtype=complex)
    dim = m.shape[0]
    n = dim.bit_length() - 1
    if m.shape != (dim, dim) or 1 << n != dim:
        raise ValueError("matrix must be square with power-of-two dimension")
    col = np.abs(m[:, 0])
    x = int(np.argmax(col))
    if col[x] < ZERO_TOL:
        return None
    # Column 0 of X^x Z^z is |x>, and X^x m is diagonal with entries +-c.
    rows = np.arange(dim) ^ x
    d = m[rows, np.arange(dim)]
    z = 0
    for q in range(n):
        ratio = d[1 << q] / d[0]
        if abs(ratio + 1) < PHASE_SNAP_TOL:
            z |= 1 << q
        elif abs(ratio - 1) >= PHASE_SNAP_TOL:
            return None
    candidate = PauliString(n, 0, x, z)
    pm = to_matrix(candidate)
    coeff = np.vdot(pm, m) / dim
    if allow_global_phase:
        if abs(abs(coeff) - 1) >= PHASE_SNAP_TOL:
            return None
        k = snap_phase(coeff) or 0
        leftover = coeff / abs(coeff) / (1j ** k)
    else:
        k = snap_phase(coeff)
        if k is None:
            return None
        leftover = 1 + 0j
    result = candidate.with_phase(k)
    if np.max(np.abs(m - leftover * to_matrix(result))) >= ZERO_TOL:
        return None
    return result, leftover
