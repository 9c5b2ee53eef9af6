"""Dense state-vector simulation with exhaustive branch enumeration.

Index convention: qubit q is bit q of the amplitude index (qubit 0 is the
least significant bit).  Internally amplitudes are viewed as an n-axis
tensor whose axis ``n - 1 - q`` belongs to qubit q, and gates contract
against those axes.

Measurements run in one of two modes.  ``"enumerate"`` keeps every
outcome with non-negligible probability as its own ``Branch``;
``"sample"`` draws one outcome from a seeded generator.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .circuit import BellOp, Circuit, CondGateOp, GateOp, MeasureOp, Op, ResetOp
from .gates import GateUnitary

NORM_TOL = 1e-10
# Outcomes below this probability are dropped from enumerations.
PRUNE_TOL = 1e-14
DEFAULT_BRANCH_CAP = 4**8

_SQ2 = 1 / np.sqrt(2)


@dataclass(frozen=True, eq=False)
class StateVector:
    n: int
    amps: np.ndarray

    def __post_init__(self):
        a = np.array(self.amps, dtype=complex).reshape(-1)
        if a.shape[0] != 1 << self.n:
            raise ValueError(f"{self.n} qubits need {1 << self.n} amplitudes, got {a.shape[0]}")
        a.setflags(write=False)
        object.__setattr__(self, "amps", a)

    @classmethod
    def zero(cls, n: int) -> "StateVector":
        a = np.zeros(1 << n, dtype=complex)
        a[0] = 1
        return cls(n, a)

    @classmethod
    def basis(cls, n: int, index: int) -> "StateVector":
        a = np.zeros(1 << n, dtype=complex)
        a[index] = 1
        return cls(n, a)

    @classmethod
    def from_bits(cls, bits: str) -> "StateVector":
        """``"011"`` is qubit 0 = 0, qubit 1 = 1, qubit 2 = 1."""
        return cls.basis(len(bits), sum(int(b) << q for q, b in enumerate(bits)))

    @classmethod
    def from_amplitudes(cls, amps, normalize: bool = True) -> "StateVector":
        a = np.asarray(amps, dtype=complex).reshape(-1)
        n = a.shape[0].bit_length() - 1
        if normalize:
            a = a / np.linalg.norm(a)
        return cls(n, a)

    @classmethod
    def random(cls, n: int, rng: np.random.Generator) -> "StateVector":
        a = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
        return cls(n, a / np.linalg.norm(a))

    @classmethod
    def plus(cls, n: int = 1) -> "StateVector":
        return cls(n, np.full(1 << n, (1 << n) ** -0.5, dtype=complex))

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def tensor(self, other: "StateVector") -> "StateVector":
        """``self`` on the low qubits, ``other`` on the following ones."""
        return StateVector(self.n + other.n, np.kron(other.amps, self.amps))

    def inner(self, other: "StateVector") -> complex:
        return complex(np.vdot(self.amps, other.amps))

    def fidelity(self, other: "StateVector") -> float:
        if self.n != other.n:
            raise ValueError("states have different qubit counts")
        return abs(self.inner(other)) ** 2

    def probability_one(self, q: int) -> float:
        t = _tensor(self.amps, self.n)
        return float(np.sum(np.abs(np.take(t, 1, axis=self.n - 1 - q)) ** 2))

    def fingerprint(self) -> str:
        a = self.amps
        idx = int(np.argmax(np.abs(a) > 1e-9))
        ph = a[idx] / abs(a[idx]) if abs(a[idx]) > 0 else 1
        r = np.round(a / ph, 9) + 0.0
        return hashlib.sha1(r.tobytes()).hexdigest()[:12]

    def __repr__(self) -> str:
        return f"StateVector(n={self.n})"


def equal_up_to_global_phase(s1: StateVector, s2: StateVector, tol: float = 1e-10) -> bool:
    if s1.n != s2.n:
        raise ValueError(f"states have different qubit counts ({s1.n} vs {s2.n})")
    return abs(s1.inner(s2)) >= 1 - tol


def _tensor(amps: np.ndarray, n: int) -> np.ndarray:
    return amps.reshape((2,) * n) if n else amps.reshape(())


def _axis(n: int, q: int) -> int:
    return n - 1 - q


def _check_targets(n: int, targets: Sequence[int]) -> None:
    if len(set(targets)) != len(targets):
        raise ValueError(f"duplicate targets {list(targets)}")
    for q in targets:
        if not 0 <= q < n:
            raise IndexError(f"qubit {q} out of range for {n} qubits")


def apply_matrix(state: StateVector, u: np.ndarray, targets: Sequence[int]) -> StateVector:
    targets = list(targets)
    n = state.n
    _check_targets(n, targets)
    k = len(targets)
    if u.shape != (1 << k, 1 << k):
        raise ValueError(f"a {u.shape[0]}x{u.shape[1]} matrix cannot act on {k} targets")
    ut = u.reshape((2,) * (2 * k))
    psi = _tensor(state.amps, n)
    # gate input axis k + j belongs to local qubit k-1-j
    state_axes = [_axis(n, targets[k - 1 - j]) for j in range(k)]
    out = np.tensordot(ut, psi, axes=(list(range(k, 2 * k)), state_axes))
    out = np.moveaxis(out, list(range(k)), state_axes)
    return StateVector(n, out.reshape(-1))


def apply_gate(state: StateVector, u: GateUnitary | np.ndarray, targets: Sequence[int]) -> StateVector:
    m = u.matrix if isinstance(u, GateUnitary) else np.asarray(u, dtype=complex)
    return apply_matrix(state, m, targets)


def _project(state: StateVector, q: int, bit: int) -> tuple[float, np.ndarray]:
    n = state.n
    t = np.array(_tensor(state.amps, n))
    sl = [slice(None)] * n
    sl[_axis(n, q)] = 1 - bit
    t[tuple(sl)] = 0
    a = t.reshape(-1)
    return float(np.vdot(a, a).real), a


def _bell_vectors() -> dict[tuple[int, int], np.ndarray]:
    # Local index b1 + 2*b2 for the pair (q1, q2); |0x> + (-1)^z |1 xbar>
    # reads qubit q1 first.
    out = {}
    for x in (0, 1):
        for z in (0, 1):
            v = np.zeros(4, dtype=complex)
            v[0 + 2 * x] += _SQ2
            v[1 + 2 * (1 - x)] += (-1) ** z * _SQ2
            out[(x, z)] = v
    return out


BELL_STATES = _bell_vectors()


def _bell_project(state: StateVector, q1: int, q2: int, x: int, z: int) -> tuple[float, np.ndarray]:
    proj = np.outer(BELL_STATES[(x, z)], BELL_STATES[(x, z)].conj())
    a = apply_matrix(state, proj, [q1, q2]).amps
    return float(np.vdot(a, a).real), np.array(a)


# branches


@dataclass(frozen=True, eq=False)
class Branch:
    bits: tuple[int, ...]
    probability: float
    state: StateVector
    history: tuple = ()

    def with_bits(self, updates: dict[int, int]) -> "Branch":
        bits = list(self.bits)
        for i, v in updates.items():
            bits[i] = v
        return replace(self, bits=tuple(bits))


@dataclass
class BranchSet:
    branches: list[Branch]
    mode: str = "enumerate"
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.branches)

    def __iter__(self):
        return iter(self.branches)

    def __getitem__(self, i) -> Branch:
        return self.branches[i]

    def total_probability(self) -> float:
        return float(sum(b.probability for b in self.branches))

    def probability_of(self, bits: Sequence[int]) -> float:
        """Probability of an outcome; 0 for outcomes pruned as impossible."""
        key = tuple(bits)
        return float(sum(b.probability for b in self.branches if b.bits[: len(key)] == key))

    def outcomes(self) -> dict[tuple[int, ...], float]:
        out: dict[tuple[int, ...], float] = {}
        for b in self.branches:
            out[b.bits] = out.get(b.bits, 0.0) + b.probability
        return out


def _check_mode(mode: str) -> None:
    if mode not in ("enumerate", "sample"):
        raise ValueError(f"mode must be 'enumerate' or 'sample', got {mode!r}")


def _split(branch: Branch, options: list[tuple[float, np.ndarray, dict[int, int]]], mode: str, rng) -> list[Branch]:
    """Turn weighted, unnormalised post-measurement vectors into branches."""
    n = branch.state.n
    if mode == "sample":
        probs = np.array([p for p, _, _ in options])
        probs = probs / probs.sum()
        k = int(rng.choice(len(options), p=probs))
        options = [options[k]]
        scale = [probs[k]]
    else:
        scale = [p for p, _, _ in options]
    out = []
    for (p, vec, updates), w in zip(options, scale):
        if p < PRUNE_TOL:
            continue
        new = branch.with_bits(updates)
        out.append(replace(new, probability=branch.probability * w, state=StateVector(n, vec / np.sqrt(p))))
    return out


def measure_branch(branch: Branch, q: int, cbit: int | None, mode: str, rng=None) -> list[Branch]:
    options = []
    for bit in (0, 1):
        p, vec = _project(branch.state, q, bit)
        options.append((p, vec, {} if cbit is None else {cbit: bit}))
    return _split(branch, options, mode, rng)


def bell_branch(branch: Branch, q1: int, q2: int, cx: int | None, cz: int | None, mode: str, rng=None) -> list[Branch]:
    options = []
    for x in (0, 1):
        for z in (0, 1):
            p, vec = _bell_project(branch.state, q1, q2, x, z)
            updates = {} if cx is None else {cx: x, cz: z}
            options.append((p, vec, updates))
    return _split(branch, options, mode, rng)


def reset_branch(branch: Branch, q: int, mode: str, rng=None) -> list[Branch]:
    out = []
    for b in measure_branch(branch, q, None, mode, rng):
        if b.state.probability_one(q) > 0.5:
            b = replace(b, state=apply_matrix(b.state, _X, [q]))
        out.append(b)
    return out


_X = np.array([[0, 1], [1, 0]], dtype=complex)


def _single(state: StateVector, n_cbits: int) -> list[Branch]:
    return [Branch((0,) * n_cbits, 1.0, state)]


def measure_qubit(state: StateVector, q: int, mode: str = "enumerate", seed: int | None = None) -> BranchSet:
    """Computational-basis measurement; the outcome lands in bit 0."""
    _check_mode(mode)
    _check_targets(state.n, [q])
    rng = np.random.default_rng(seed)
    return BranchSet(measure_branch(_single(state, 1)[0], q, 0, mode, rng), mode)


def bell_measure(state: StateVector, q1: int, q2: int, mode: str = "enumerate", seed: int | None = None) -> BranchSet:
    """Bell-basis measurement of (q1, q2); bits are ``(x, z)``.

    The basis vectors are ``(|0 x> + (-1)^z |1 xbar>) / sqrt 2`` with the
    first ket slot on ``q1``.
    """
    _check_mode(mode)
    if q1 == q2:
        raise ValueError("Bell measurement needs two distinct qubits")
    _check_targets(state.n, [q1, q2])
    rng = np.random.default_rng(seed)
    return BranchSet(bell_branch(_single(state, 2)[0], q1, q2, 0, 1, mode, rng), mode)


def apply_op(branches: list[Branch], op: Op, mode: str, rng=None) -> list[Branch]:
    """Advance every branch through one circuit operation."""
    out: list[Branch] = []
    for b in branches:
        if isinstance(op, GateOp):
            out.append(replace(b, state=apply_matrix(b.state, op.gate.matrix, op.targets)))
        elif isinstance(op, CondGateOp):
            if op.condition.evaluate(b.bits):
                b = replace(b, state=apply_matrix(b.state, op.gate.matrix, op.targets))
            out.append(b)
        elif isinstance(op, MeasureOp):
            out.extend(measure_branch(b, op.qubit, op.cbit, mode, rng))
        elif isinstance(op, BellOp):
            out.extend(bell_branch(b, op.q1, op.q2, op.cbit_x, op.cbit_z, mode, rng))
        elif isinstance(op, ResetOp):
            out.extend(reset_branch(b, op.qubit, mode, rng))
        else:
            raise TypeError(f"unknown operation {op!r}")
    return out


def run_circuit(
    circuit: Circuit,
    initial: StateVector | None = None,
    mode: str = "enumerate",
    seed: int | None = None,
    branch_cap: int = DEFAULT_BRANCH_CAP,
) -> BranchSet:
    _check_mode(mode)
    if initial is None:
        initial = StateVector.zero(circuit.n_qubits)
    if initial.n != circuit.n_qubits:
        raise ValueError(f"circuit has {circuit.n_qubits} qubits but the initial state has {initial.n}")
    if mode == "enumerate" and circuit.measurement_arity() > branch_cap:
        raise ValueError(
            f"enumeration could reach {circuit.measurement_arity()} branches (cap {branch_cap}); use sample mode"
        )
    rng = np.random.default_rng(seed)
    branches = _single(initial, circuit.n_cbits)
    for op in circuit.ops:
        branches = apply_op(branches, op, mode, rng)
    return BranchSet(branches, mode)


# reduced states


def factor_out(state: StateVector, keep: Sequence[int], tol: float = 1e-9) -> StateVector:
    """State of ``keep`` when it is in a product with the other qubits.

    ``keep[j]`` becomes qubit j of the result.  Raises if the kept qubits
    are entangled with the rest.
    """
    keep = list(keep)
    _check_targets(state.n, keep)
    n = state.n
    rest = [q for q in range(n) if q not in keep]
    # order axes: kept qubits (most significant first), then the rest
    t = _tensor(state.amps, n)
    axes = [_axis(n, q) for q in reversed(keep)] + [_axis(n, q) for q in reversed(rest)]
    mat = np.transpose(t, axes).reshape(1 << len(keep), 1 << len(rest))
    col = int(np.argmax(np.linalg.norm(mat, axis=0)))
    v = mat[:, col] / np.linalg.norm(mat[:, col])
    residual = mat - np.outer(v, v.conj() @ mat)
    if np.linalg.norm(residual) > tol:
        raise ValueError(f"qubits {keep} are entangled with the rest of the register")
    return StateVector(len(keep), v)


def reduced_density(state: StateVector, keep: Sequence[int]) -> np.ndarray:
    keep = list(keep)
    n = state.n
    rest = [q for q in range(n) if q not in keep]
    t = _tensor(state.amps, n)
    axes = [_axis(n, q) for q in reversed(keep)] + [_axis(n, q) for q in reversed(rest)]
    mat = np.transpose(t, axes).reshape(1 << len(keep), 1 << len(rest))
    return mat @ mat.conj().T


def permute_qubits(state: StateVector, order: Sequence[int]) -> StateVector:
    """Relabel so that old qubit ``order[j]`` becomes new qubit j."""
    order = list(order)
    if sorted(order) != list(range(state.n)):
        raise ValueError("order must be a permutation of the qubits")
    n = state.n
    t = _tensor(state.amps, n)
    axes = [_axis(n, order[n - 1 - a]) for a in range(n)]
    return StateVector(n, np.transpose(t, axes).reshape(-1))


def expectation(state: StateVector, op: np.ndarray, targets: Sequence[int] | None = None) -> complex:
    targets = list(range(state.n)) if targets is None else list(targets)
    return complex(np.vdot(state.amps, apply_matrix(state, np.asarray(op, dtype=complex), targets).amps))
