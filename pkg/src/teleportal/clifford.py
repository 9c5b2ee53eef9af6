"""Clifford maps and Clifford-hierarchy classification.

A ``CliffordMap`` stores the images of the generators X_i and Z_i under
conjugation ``P -> U P U^dag``.  Images of arbitrary Pauli strings are
assembled from those with exact phase, using ``Y = i X Z`` on each qubit.

Hierarchy membership works on dense matrices with the global phase
quotiented out:

* level 1: a phased Pauli string;
* level 2: every generator conjugate is a phased Pauli (``from_unitary``);
* level k >= 3: ``U g U^dag`` sits in level k-1 for *every* one of the 4^n
  unsigned Pauli strings g.  Levels above 2 are not known to be closed
  under products, so checking generators alone would be unsound.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import ZERO_TOL, check_dense
from .gates import GateUnitary
from .pauli import PauliString, all_paulis, commutes, multiply, pauli_from_matrix, to_matrix


@dataclass(frozen=True)
class CliffordMap:
    n: int
    image_x: tuple[PauliString, ...]
    image_z: tuple[PauliString, ...]
    name: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "image_x", tuple(self.image_x))
        object.__setattr__(self, "image_z", tuple(self.image_z))
        if len(self.image_x) != self.n or len(self.image_z) != self.n:
            raise ValueError("need one X image and one Z image per qubit")
        images = self.image_x + self.image_z
        for p in images:
            if p.n != self.n:
                raise ValueError("generator image has the wrong qubit count")
            if not p.is_hermitian():
                raise ValueError(f"generator image {p} is not Hermitian")
        for i in range(self.n):
            for j in range(self.n):
                want_x_z = i != j
                if commutes(self.image_x[i], self.image_z[j]) != want_x_z:
                    raise ValueError("generator images violate the symplectic condition")
                if j > i:
                    if not commutes(self.image_x[i], self.image_x[j]) or not commutes(
                        self.image_z[i], self.image_z[j]
                    ):
                        raise ValueError("generator images violate the symplectic condition")

    @classmethod
    def identity(cls, n: int) -> "CliffordMap":
        xs = tuple(PauliString.single(n, q, "X") for q in range(n))
        zs = tuple(PauliString.single(n, q, "Z") for q in range(n))
        return cls(n, xs, zs, "I")

    def __call__(self, p: PauliString) -> PauliString:
        return conjugate(self, p)

    def __eq__(self, other) -> bool:
        if not isinstance(other, CliffordMap):
            return NotImplemented
        return self.n == other.n and self.image_x == other.image_x and self.image_z == other.image_z

    def __hash__(self) -> int:
        return hash((self.n, self.image_x, self.image_z))

    def is_identity(self) -> bool:
        return self == CliffordMap.identity(self.n)

    def describe(self) -> dict:
        return {
            "X": [str(p) for p in self.image_x],
            "Z": [str(p) for p in self.image_z],
        }


def conjugate(c: CliffordMap, p: PauliString) -> PauliString:
    """``C P C^dag`` computed from the generator images."""
    if c.n != p.n:
        raise ValueError(f"Clifford map on {c.n} qubits cannot act on a {p.n}-qubit string")
    y_count = (p.x_bits & p.z_bits).bit_count()
    out = PauliString(p.n, p.phase_exp + y_count, 0, 0)
    for q in range(p.n):
        if (p.x_bits >> q) & 1:
            out = multiply(out, c.image_x[q])
        if (p.z_bits >> q) & 1:
            out = multiply(out, c.image_z[q])
    return out


def compose(first: CliffordMap, second: CliffordMap) -> CliffordMap:
    """Map of the circuit ``first`` followed by ``second``."""
    if first.n != second.n:
        raise ValueError("cannot compose Clifford maps of different sizes")
    xs = tuple(conjugate(second, p) for p in first.image_x)
    zs = tuple(conjugate(second, p) for p in first.image_z)
    return CliffordMap(first.n, xs, zs)


def _as_matrix(u) -> np.ndarray:
    if isinstance(u, GateUnitary):
        return u.matrix
    m = np.asarray(u, dtype=complex)
    GateUnitary(m)  # validates shape and unitarity
    return m


def dense_conjugate(u: np.ndarray, p: np.ndarray) -> np.ndarray:
    return u @ p @ u.conj().T


def _clifford_images(m: np.ndarray) -> tuple[list[PauliString], list[PauliString]] | None:
    n = m.shape[0].bit_length() - 1
    xs, zs = [], []
    for q in range(n):
        for letter, bucket in (("X", xs), ("Z", zs)):
            found = pauli_from_matrix(dense_conjugate(m, to_matrix(PauliString.single(n, q, letter))))
            if found is None:
                return None
            bucket.append(found[0])
    return xs, zs


def from_unitary(u) -> CliffordMap | None:
    """CliffordMap of a dense unitary, or None if it is not Clifford."""
    m = _as_matrix(u)
    n = m.shape[0].bit_length() - 1
    check_dense(n, "Clifford recognition")
    images = _clifford_images(m)
    if images is None:
        return None
    name = u.name if isinstance(u, GateUnitary) else None
    return CliffordMap(n, tuple(images[0]), tuple(images[1]), name)


def to_unitary(c: CliffordMap) -> np.ndarray:
    """A dense unitary realising ``c`` (unique up to global phase).

    Found as the unique (up to scale) solution of ``U P = C(P) U`` for all
    generators, via the projector onto the stabilizer of the image basis
    state.  Only for small n.
    """
    n = c.n
    check_dense(n, "Clifford synthesis")
    dim = 1 << n
    cols = []
    # U|j> is the joint eigenvector of C(Z_i) with eigenvalue (-1)^{j_i},
    # phased so that U X^j |0> = C(X)^j U|0>.
    proj = np.eye(dim, dtype=complex)
    for q in range(n):
        proj = proj @ (np.eye(dim) + to_matrix(c.image_z[q])) / 2
    v0 = proj[:, int(np.argmax(np.linalg.norm(proj, axis=0)))]
    v0 = v0 / np.linalg.norm(v0)
    for j in range(dim):
        v = v0
        for q in range(n):
            if (j >> q) & 1:
                v = to_matrix(c.image_x[q]) @ v
        cols.append(v)
    return np.stack(cols, axis=1)


# hierarchy


def normalize_phase(m: np.ndarray) -> np.ndarray:
    """Rescale so the first non-zero entry (column-major) is positive real."""
    flat = m.ravel(order="F")
    idx = int(np.argmax(np.abs(flat) > ZERO_TOL))
    ph = flat[idx] / abs(flat[idx])
    return m / ph


def _fingerprint(m: np.ndarray) -> bytes:
    r = np.round(m, 8) + 0.0  # +0.0 folds -0.0 into 0.0
    return r.tobytes()


_MEMBER_CACHE: dict[tuple[bytes, int], bool] = {}
_PAULI_MATS: dict[int, list[tuple[PauliString, np.ndarray]]] = {}


def _paulis_dense(n: int) -> list[tuple[PauliString, np.ndarray]]:
    if n not in _PAULI_MATS:
        _PAULI_MATS[n] = [(g, to_matrix(g)) for g in all_paulis(n)]
    return _PAULI_MATS[n]


def _is_member(m: np.ndarray, k: int) -> bool:
    m = normalize_phase(m)
    key = (_fingerprint(m), k)
    hit = _MEMBER_CACHE.get(key)
    if hit is not None:
        return hit
    if k == 1:
        result = pauli_from_matrix(m) is not None
    elif k == 2:
        result = _clifford_images(m) is not None
    else:
        n = m.shape[0].bit_length() - 1
        result = all(_is_member(dense_conjugate(m, g), k - 1) for _, g in _paulis_dense(n))
    _MEMBER_CACHE[key] = result
    return result


def in_level(u, k: int) -> bool:
    """Membership predicate for level ``k`` of the Clifford hierarchy."""
    if k < 1:
        raise ValueError("hierarchy levels start at 1")
    m = _as_matrix(u)
    check_dense(m.shape[0].bit_length() - 1, "hierarchy classification")
    return _is_member(m, k)


def _maps_to_plus_minus_self(m: np.ndarray, g: PauliString, gm: np.ndarray) -> bool:
    found = pauli_from_matrix(dense_conjugate(m, gm))
    return found is not None and found[0].unsigned() == g


def _witness(m: np.ndarray, level_failed: int) -> PauliString | None:
    """A Pauli g certifying ``m`` is outside ``level_failed``."""
    n = m.shape[0].bit_length() - 1
    for g, gm in _paulis_dense(n):
        if level_failed == 1:
            if not _maps_to_plus_minus_self(m, g, gm):
                return g
        elif not _is_member(dense_conjugate(m, gm), level_failed - 1):
            return g
    return None


@dataclass(frozen=True)
class HierarchyLevel:
    level: int | None  # None: above k_max
    k_max: int
    witness: PauliString | None = None

    @property
    def above_k_max(self) -> bool:
        return self.level is None

    def __str__(self) -> str:
        return f"C_{self.level}" if self.level is not None else f"above C_{self.k_max}"


def hierarchy_level(u, k_max: int = 5) -> HierarchyLevel:
    """Smallest k <= k_max with ``u`` in level k.

    The witness is a Pauli g whose conjugate ``u g u^dag`` is outside level
    k-2, certifying that ``u`` is not in level k-1 (for k = 2, a g with
    ``u g u^dag != +-g``).
    """
    if k_max < 1:
        raise ValueError("k_max must be at least 1")
    m = _as_matrix(u)
    check_dense(m.shape[0].bit_length() - 1, "hierarchy classification")
    for k in range(1, k_max + 1):
        if _is_member(m, k):
            witness = _witness(m, k - 1) if k >= 2 else None
            return HierarchyLevel(k, k_max, witness)
    return HierarchyLevel(None, k_max, _witness(m, k_max))


def clear_cache() -> None:
    _MEMBER_CACHE.clear()

