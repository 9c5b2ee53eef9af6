"""Dense gate unitaries and the named gate library.

Multi-qubit matrices use the register convention: local qubit 0 is the
least significant index bit.  ``CNOT`` therefore has its control on local
qubit 0 and its target on local qubit 1, and ``TOFFOLI`` has controls 0, 1
and target 2.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

UNITARY_TOL = 1e-10

_SQ2 = 1 / np.sqrt(2)
_RZ_RE = re.compile(r"^RZ\(pi(?:/(?:2\^(\d+)|(\d+)))?\)$")


@dataclass(frozen=True, eq=False)
class GateUnitary:
    matrix: np.ndarray
    name: str | None = None
    n: int = field(init=False)

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        dim = m.shape[0]
        n = dim.bit_length() - 1
        if m.ndim != 2 or m.shape != (dim, dim) or 1 << n != dim:
            raise ValueError(f"gate matrix must be square with power-of-two size, got {m.shape}")
        if np.max(np.abs(m @ m.conj().T - np.eye(dim))) > UNITARY_TOL:
            raise ValueError(f"gate {self.name or '<matrix>'} is not unitary")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "n", n)

    @property
    def label(self) -> str:
        return self.name or "matrix"

    def dagger(self) -> "GateUnitary":
        name = None if self.name is None else f"{self.name}^dag"
        return GateUnitary(self.matrix.conj().T, name)

    def __matmul__(self, other: "GateUnitary") -> "GateUnitary":
        return GateUnitary(self.matrix @ other.matrix)

    def __repr__(self) -> str:
        return f"GateUnitary({self.label}, n={self.n})"


def diag_phase(theta: float) -> np.ndarray:
    """diag(1, e^{i theta})."""
    return np.diag([1, np.exp(1j * theta)]).astype(complex)


def _cnot() -> np.ndarray:
    m = np.zeros((4, 4), dtype=complex)
    for i in range(4):
        j = i ^ 2 if i & 1 else i
        m[j, i] = 1
    return m


def _toffoli() -> np.ndarray:
    m = np.eye(8, dtype=complex)
    m[[3, 7]] = m[[7, 3]]
    return m


def _swap() -> np.ndarray:
    m = np.eye(4, dtype=complex)
    m[[1, 2]] = m[[2, 1]]
    return m


_LIBRARY = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
    "H": np.array([[1, 1], [1, -1]], dtype=complex) * _SQ2,
    "P": diag_phase(np.pi / 2),
    "T": diag_phase(np.pi / 4),
    "CNOT": _cnot(),
    "CZ": np.diag([1, 1, 1, -1]).astype(complex),
    "SWAP": _swap(),
    "TOFFOLI": _toffoli(),
    "CPHASE_I": np.diag([1, 1, 1, 1j]).astype(complex),
}

LIBRARY_NAMES = tuple(_LIBRARY)


def rz_name(k: int) -> str:
    return f"RZ(pi/2^{k})"


def rz(k: int) -> GateUnitary:
    """diag(1, e^{i pi / 2^k}); sits at hierarchy level k + 1."""
    return GateUnitary(diag_phase(np.pi / 2**k), rz_name(k))


def resolve(name: str) -> GateUnitary:
    """Look up a library gate by name, e.g. ``"T"``, ``"TOFFOLI"``, ``"RZ(pi/2^3)"``."""
    key = name.strip()
    if key.upper() in _LIBRARY:
        return GateUnitary(_LIBRARY[key.upper()], key.upper())
    m = _RZ_RE.match(key.replace(" ", ""))
    if m:
        if m.group(1) is not None:
            return rz(int(m.group(1)))
        denom = 1 if m.group(2) is None else int(m.group(2))
        if denom < 1:
            raise ValueError(f"bad rotation denominator in {name!r}")
        k = denom.bit_length() - 1
        if 1 << k == denom:
            return rz(k)
        return GateUnitary(diag_phase(np.pi / denom), f"RZ(pi/{denom})")
    raise KeyError(f"unknown gate {name!r}")


def controlled(u: np.ndarray, n_controls: int = 1) -> np.ndarray:
    """Controlled-``u`` with the controls on the lowest local qubits.

    The result acts on ``n_controls + k`` qubits: local qubits
    ``0..n_controls-1`` are controls and ``u`` acts on the rest.
    """
    u = np.asarray(u, dtype=complex)
    c_dim = 1 << n_controls
    on = np.zeros((c_dim, c_dim), dtype=complex)
    on[-1, -1] = 1
    off = np.eye(c_dim, dtype=complex) - on
    return np.kron(np.eye(u.shape[0]), off) + np.kron(u, on)


def tensor(factors: list[np.ndarray]) -> np.ndarray:
    """Tensor product with ``factors[0]`` on qubit 0 (least significant)."""
    m = np.array([[1]], dtype=complex)
    for f in reversed(factors):
        m = np.kron(m, np.asarray(f, dtype=complex))
    return m


def embed_operator(u: np.ndarray, targets: list[int], n: int) -> np.ndarray:
    """Full 2^n x 2^n operator of ``u`` acting on ``targets``.

    Built by explicit index arithmetic; used as an oracle for the strided
    kernel in ``statevector``.
    """
    u = np.asarray(u, dtype=complex)
    k = len(targets)
    dim = 1 << n
    full = np.zeros((dim, dim), dtype=complex)
    rest_mask = dim - 1
    for t in targets:
        rest_mask &= ~(1 << t)
    for col in range(dim):
        local_in = sum(((col >> t) & 1) << j for j, t in enumerate(targets))
        base = col & rest_mask
        for local_out in range(1 << k):
            amp = u[local_out, local_in]
            if amp == 0:
                continue
            row = base | sum(((local_out >> j) & 1) << t for j, t in enumerate(targets))
            full[row, col] += amp
    return full


def permutation_gate(func, n: int, name: str | None = None) -> GateUnitary:
    """Unitary mapping basis index ``i`` to ``func(i)``."""
    dim = 1 << n
    m = np.zeros((dim, dim), dtype=complex)
    for i in range(dim):
        m[func(i), i] = 1
    return GateUnitary(m, name)


def majority_gate(r: int) -> GateUnitary:
    """``|x>|m> -> |x>|m xor maj(x)>`` on r inputs (local 0..r-1) and one target (local r)."""
    if r < 1 or r % 2 == 0:
        raise ValueError("majority needs an odd number of inputs")

    def f(i: int) -> int:
        votes = (i & ((1 << r) - 1)).bit_count()
        return i ^ (1 << r) if 2 * votes > r else i

    return permutation_gate(f, r + 1, f"MAJ{r}")
