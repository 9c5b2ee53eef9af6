"""Operator measurement with cat-state control, and fault analysis.

Protocols are compiled into a ``Protocol``: a flat schedule of circuit
operations cut into segments.  Cat preparation segments are retried
(discard and re-prepare) when a pair comparison fires.  A fault
``FaultSpec(op=i, qubit=q, pauli=P)`` applies ``P`` to qubit ``q`` right
after schedule op ``i`` executes the first time; re-preparations replay
the segment without it.

Register layout used by the builders (data first, so the caller's state
keeps its qubit numbering)::

    ft_measure:      data | cat (one per block qubit) | ancilla
    nested_measure:  data | outer cat | inner decoded bits (one per trial)
                     | inner cat helpers | majority bits | ancilla
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .circuit import (
    Binary,
    Bit,
    Circuit,
    CondGateOp,
    Condition,
    GateOp,
    Majority,
    MeasureOp,
    Not,
    Op,
    ResetOp,
    BellOp,
    cif,
    gate,
)
from .clifford import from_unitary
from .gates import GateUnitary, controlled, majority_gate, resolve, tensor
from .pauli import PauliString, block_weight, pauli_from_matrix, to_matrix
from .statevector import (
    Branch,
    BranchSet,
    StateVector,
    apply_matrix,
    apply_op,
    factor_out,
    reduced_density,
    run_circuit,
)

OP_TOL = 1e-10
MAX_CAT_ATTEMPTS = 10
DEFAULT_TRIALS = 3

_H = resolve("H")
_X = resolve("X")
_CNOT = resolve("CNOT")
_LETTER_FIX = {"X": "Z", "Y": "Z", "Z": "X"}


class CatVerificationError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class MeasurableOperator:
    """A +-1-valued operator M with its eigenspace-flipping correction P."""

    matrix: np.ndarray
    correction: np.ndarray | None = None
    factors: tuple[np.ndarray, ...] | None = None
    correction_factors: tuple[np.ndarray, ...] | None = None
    name: str = "M"

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        dim = m.shape[0]
        object.__setattr__(self, "matrix", m)
        if np.max(np.abs(m @ m - np.eye(dim))) > OP_TOL:
            raise ValueError(f"{self.name} is not an involution (M^2 != I)")
        if np.max(np.abs(m - m.conj().T)) > OP_TOL:
            raise ValueError(f"{self.name} is not Hermitian")
        if self.factors is not None:
            if len(self.factors) != self.n:
                raise ValueError("need one transversal factor per block qubit")
            if np.max(np.abs(tensor(list(self.factors)) - m)) > OP_TOL:
                raise ValueError("transversal factors do not multiply to M")
        if self.correction is not None:
            p = np.asarray(self.correction, dtype=complex)
            object.__setattr__(self, "correction", p)
            if np.max(np.abs(p @ m @ p.conj().T + m)) > OP_TOL:
                raise ValueError(f"correction for {self.name} does not satisfy P M P^dag = -M")
            if self.correction_factors is not None and np.max(
                np.abs(tensor(list(self.correction_factors)) - p)
            ) > OP_TOL:
                raise ValueError("correction factors do not multiply to P")

    @property
    def n(self) -> int:
        return self.matrix.shape[0].bit_length() - 1

    @property
    def is_transversal(self) -> bool:
        return self.factors is not None

    @classmethod
    def from_pauli(cls, text: str, correction: str | None = None) -> "MeasurableOperator":
        """``"ZZZ"`` and friends; default correction fixes the first non-identity letter."""
        p = PauliString.parse(text)
        if p.phase_exp % 2:
            raise ValueError("measured Pauli must be Hermitian")
        if p.is_identity():
            raise ValueError("cannot measure the identity")
        sign = -1 if p.phase_exp == 2 else 1
        factors = [to_matrix(PauliString.from_letters(p.letter(q))) for q in range(p.n)]
        factors[0] = sign * factors[0]
        if correction is None:
            q0 = p.support()[0]
            letters = ["I"] * p.n
            letters[q0] = _LETTER_FIX[p.letter(q0)]
            corr = PauliString.from_letters("".join(letters))
        else:
            corr = PauliString.parse(correction)
        corr_factors = [to_matrix(PauliString.from_letters(corr.letter(q))) for q in range(p.n)]
        corr_factors[0] = corr_factors[0] * (1j**corr.phase_exp)
        return cls(
            to_matrix(p),
            to_matrix(corr),
            tuple(factors),
            tuple(corr_factors),
            name=str(p).lstrip("+"),
        )

    @classmethod
    def from_matrix(cls, matrix, correction=None, name: str = "M") -> "MeasurableOperator":
        return cls(np.asarray(matrix, dtype=complex), correction, None, None, name)

    def projector(self, sign: int = 1) -> np.ndarray:
        return (np.eye(self.matrix.shape[0]) + sign * self.matrix) / 2


@dataclass(frozen=True)
class BlockSpec:
    n_block: int
    code: str = "unencoded"

    def __post_init__(self):
        if self.code not in ("unencoded", "repetition3"):
            raise ValueError(f"unknown block code {self.code!r}")
        if self.n_block < 1:
            raise ValueError("block needs at least one qubit")
        if self.code == "repetition3" and self.n_block % 3:
            raise ValueError("repetition3 blocks need a multiple of 3 qubits")

    @classmethod
    def parse(cls, text: str) -> "BlockSpec":
        """``"unencoded:3"`` or ``"repetition3:3"``."""
        code, _, size = text.partition(":")
        return cls(int(size), code)


@dataclass(frozen=True)
class FaultSpec:
    op: int
    qubit: int
    pauli: str

    def __post_init__(self):
        if self.pauli not in ("X", "Y", "Z"):
            raise ValueError(f"fault Pauli must be X, Y or Z, got {self.pauli!r}")

    def as_dict(self) -> dict:
        return {"op": self.op, "qubit": self.qubit, "pauli": self.pauli}


@dataclass(frozen=True)
class TrialRecord:
    trial: int
    decoded_bit: int
    probability: float
    fingerprint: str


@dataclass(frozen=True)
class Segment:
    kind: str  # "cat-prep", "ops", "trial-end", "snapshot"
    start: int
    stop: int
    trial: int | None = None
    flags: tuple[int, ...] = ()
    qubits: tuple[int, ...] = ()
    label: str = ""


@dataclass
class Protocol:
    """A compiled measurement protocol ready to execute or fault-sweep."""

    n_qubits: int
    n_cbits: int
    ops: list[Op]
    segments: list[Segment]
    data_qubits: tuple[int, ...]
    ancilla_qubits: tuple[int, ...]
    trial_bits: tuple[int, ...]
    initial: StateVector
    roles: dict[str, tuple[int, ...]] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def op_trial(self, index: int) -> int | None:
        for seg in self.segments:
            if seg.start <= index < seg.stop:
                return seg.trial
        return None

    def segment_of(self, index: int) -> Segment:
        for seg in self.segments:
            if seg.start <= index < seg.stop:
                return seg
        raise IndexError(f"op {index} outside the schedule")

    def locations(self) -> list[tuple[int, int]]:
        """Every (op index, qubit) pair the schedule touches."""
        return [(i, q) for i, op in enumerate(self.ops) for q in op.qubits()]

    def as_circuit(self) -> Circuit:
        return Circuit(self.n_qubits, self.n_cbits, list(self.ops))


class _Builder:
    def __init__(self, n_qubits: int):
        self.n_qubits = n_qubits
        self.n_cbits = 0
        self.ops: list[Op] = []
        self.segments: list[Segment] = []
        self._seg_start = 0

    def cbit(self) -> int:
        self.n_cbits += 1
        return self.n_cbits - 1

    def add(self, *ops: Op) -> None:
        self.ops.extend(ops)

    def close(self, kind: str, trial: int | None = None, flags=(), qubits=(), label: str = "") -> None:
        self.segments.append(Segment(kind, self._seg_start, len(self.ops), trial, tuple(flags), tuple(qubits), label))
        self._seg_start = len(self.ops)

    def cat_prep(self, cat: Sequence[int], anc: int, trial: int | None, label: str, verify: bool = True) -> None:
        """Reset, Hadamard, CNOT ladder, then pair comparisons into ``anc``."""
        for q in cat:
            self.add(ResetOp(q))
        self.add(gate(_H, cat[0]))
        for a, b in zip(cat, cat[1:]):
            self.add(gate(_CNOT, a, b))
        flags = []
        if verify:
            for a, b in zip(cat, cat[1:]):
                c = self.cbit()
                flags.append(c)
                self.add(ResetOp(anc), gate(_CNOT, a, anc), gate(_CNOT, b, anc), MeasureOp(anc, c))
        self.close("cat-prep", trial, flags, tuple(cat) + (anc,), label)

    def cat_decode(self, cat: Sequence[int]) -> None:
        for a, b in reversed(list(zip(cat, cat[1:]))):
            self.add(gate(_CNOT, a, b))
        self.add(gate(_H, cat[0]))

    def parity(self, a: int, b: int, anc: int) -> int:
        c = self.cbit()
        self.add(ResetOp(anc), gate(_CNOT, a, anc), gate(_CNOT, b, anc), MeasureOp(anc, c))
        return c

    def correct_triple(self, a: int, b: int, c: int, anc: int) -> None:
        """Bit-flip correction of (a, b, c); syndromes taken twice, acted on only if they agree."""
        first = (self.parity(a, b, anc), self.parity(b, c, anc))
        second = (self.parity(a, b, anc), self.parity(b, c, anc))

        def seen(i: int, value: int) -> Condition:
            both = Binary("&", Bit(first[i]), Bit(second[i]))
            return both if value else Binary("&", Not(Bit(first[i])), Not(Bit(second[i])))

        for target, (v1, v2) in ((a, (1, 0)), (b, (1, 1)), (c, (0, 1))):
            self.add(cif(Binary("&", seen(0, v1), seen(1, v2)), _X, target))

    def repetition_ec(self, data: Sequence[int], anc: int) -> None:
        for g in range(0, len(data), 3):
            self.correct_triple(*data[g : g + 3], anc)


# execution


@dataclass(frozen=True, eq=False)
class RunResult:
    branches: list[Branch]
    snapshots: dict[str, list[Branch]]
    cat_attempts: int

    def total_probability(self) -> float:
        return float(sum(b.probability for b in self.branches))


def _fault_ops(protocol: Protocol, faults: Sequence[FaultSpec]) -> dict[int, list[Op]]:
    table: dict[int, list[Op]] = {}
    for f in faults:
        if not 0 <= f.op < len(protocol.ops):
            raise IndexError(f"fault location op {f.op} outside a schedule of {len(protocol.ops)} ops")
        if not 0 <= f.qubit < protocol.n_qubits:
            raise IndexError(f"fault qubit {f.qubit} outside a {protocol.n_qubits}-qubit register")
        table.setdefault(f.op, []).append(GateOp(resolve(f.pauli), (f.qubit,)))
    return table


def _run_ops(branches, ops, start, fault_table, mode, rng, inject: bool):
    for offset, op in enumerate(ops):
        branches = apply_op(branches, op, mode, rng)
        if inject:
            for fop in fault_table.get(start + offset, ()):
                branches = apply_op(branches, fop, mode, rng)
    return branches


def execute(
    protocol: Protocol,
    faults: Sequence[FaultSpec] = (),
    mode: str = "enumerate",
    seed: int | None = None,
) -> RunResult:
    rng = np.random.default_rng(seed)
    fault_table = _fault_ops(protocol, faults)
    branches = [Branch((0,) * protocol.n_cbits, 1.0, protocol.initial)]
    snapshots: dict[str, list[Branch]] = {}
    attempts_total = 0
    for seg in protocol.segments:
        ops = protocol.ops[seg.start : seg.stop]
        if seg.kind == "cat-prep":
            pending, done = branches, []
            for attempt in range(MAX_CAT_ATTEMPTS):
                attempts_total += 1
                pending = _run_ops(pending, ops, seg.start, fault_table, mode, rng, inject=attempt == 0)
                done += [b for b in pending if not any(b.bits[c] for c in seg.flags)]
                pending = [b for b in pending if any(b.bits[c] for c in seg.flags)]
                if not pending:
                    break
            else:
                raise CatVerificationError(f"cat state failed verification {MAX_CAT_ATTEMPTS} times ({seg.label})")
            branches = done
        else:
            branches = _run_ops(branches, ops, seg.start, fault_table, mode, rng, inject=True)
        if seg.kind == "trial-end":
            bit = protocol.trial_bits[seg.trial]
            branches = [
                replace(
                    b,
                    history=b.history
                    + (TrialRecord(seg.trial, b.bits[bit], b.probability, b.state.fingerprint()),),
                )
                for b in branches
            ]
        elif seg.kind == "snapshot":
            snapshots[seg.label] = list(branches)
    return RunResult(branches, snapshots, attempts_total)


# plain and coherent measurements


def _data_branches(branches, data: Sequence[int], mode: str, meta=None) -> BranchSet:
    out = [replace(b, state=factor_out(b.state, data)) for b in branches]
    return BranchSet(out, mode, **({"meta": meta} if meta else {}))


def nonft_ops(m: np.ndarray, targets: Sequence[int], anc: int, cbit: int) -> list[Op]:
    """Control in |+>, controlled-M, Hadamard, measure the control."""
    cm = GateUnitary(controlled(m), "C-M")
    return [ResetOp(anc), gate(_H, anc), GateOp(cm, (anc, *targets)), gate(_H, anc), MeasureOp(anc, cbit)]


def _extended(state: StateVector, extra: int) -> StateVector:
    return state.tensor(StateVector.zero(extra))


def _targets(state: StateVector, op: MeasurableOperator, targets) -> list[int]:
    targets = list(range(op.n)) if targets is None else list(targets)
    if len(targets) != op.n:
        raise ValueError(f"{op.name} acts on {op.n} qubits, got {len(targets)} targets")
    return targets


def measure_nonft(
    state: StateVector, op: MeasurableOperator, mode: str = "enumerate", seed: int | None = None, targets=None
) -> BranchSet:
    """Non-fault-tolerant measurement; outcome 0 means the +1 eigenspace."""
    targets = _targets(state, op, targets)
    n = state.n
    circ = Circuit(n + 1, 1, nonft_ops(op.matrix, targets, n, 0))
    result = run_circuit(circ, _extended(state, 1), mode, seed)
    return _data_branches(result.branches, range(n), mode)


def measure_coherent(
    state: StateVector, op: MeasurableOperator, mode: str = "enumerate", seed: int | None = None, targets=None
) -> BranchSet:
    """Measurement followed by a controlled-P on the control qubit.

    ``meta["control_factorized"]`` reports whether the control ended up
    disentangled from the data (it does when P maps the -1 component onto
    the +1 component); ``meta["data_state"]`` holds that common data state.
    """
    if op.correction is None:
        raise ValueError(f"{op.name} has no correction operator")
    targets = _targets(state, op, targets)
    n = state.n
    anc = n
    cp = GateUnitary(controlled(op.correction), "C-P")
    ops = nonft_ops(op.matrix, targets, anc, 0)[:-1] + [GateOp(cp, (anc, *targets))]
    pre = run_circuit(Circuit(n + 1, 1, ops), _extended(state, 1), mode, seed)
    meta: dict = {"control_factorized": False, "data_state": None}
    try:
        meta["data_state"] = factor_out(pre.branches[0].state, range(n))
        meta["control_factorized"] = True
    except ValueError:
        pass
    post = run_circuit(Circuit(n + 1, 1, ops + [MeasureOp(anc, 0)]), _extended(state, 1), mode, seed)
    return _data_branches(post.branches, range(n), mode, meta)


def prepare_cat(n: int) -> StateVector:
    """(|0...0> + |1...1>)/sqrt 2 via a Hadamard and a CNOT ladder."""
    if n < 2:
        raise ValueError("a cat state needs at least two qubits")
    s = apply_matrix(StateVector.zero(n), _H.matrix, [0])
    for a in range(n - 1):
        s = apply_matrix(s, _CNOT.matrix, [a, a + 1])
    return s


def verify_cat(state: StateVector, mode: str = "enumerate", seed: int | None = None) -> BranchSet:
    """Compare neighbouring cat qubits through a fresh ancilla.

    Bits are the comparison results, one per neighbouring pair; a branch
    passes when every bit is 0.
    """
    n = state.n
    b = _Builder(n + 1)
    for a in range(n - 1):
        b.parity(a, a + 1, n)
    result = run_circuit(Circuit(n + 1, b.n_cbits, b.ops), _extended(state, 1), mode, seed)
    return _data_branches(result.branches, range(n), mode)


def cat_passes(branch: Branch) -> bool:
    return not any(branch.bits)


# cat-controlled transversal measurement


def ft_measure_protocol(
    state: StateVector, op: MeasurableOperator, block: BlockSpec | None = None, r: int = DEFAULT_TRIALS
) -> Protocol:
    if r < 1:
        raise ValueError("need at least one trial")
    if not op.is_transversal:
        raise ValueError(f"{op.name} has no transversal decomposition")
    if op.correction is None:
        raise ValueError(f"{op.name} has no correction operator")
    block = block or BlockSpec(op.n)
    if block.n_block != op.n or state.n != op.n:
        raise ValueError("operator, block and data sizes disagree")
    nb = op.n
    data = tuple(range(nb))
    cat = tuple(range(nb, 2 * nb))
    anc = 2 * nb
    b = _Builder(2 * nb + 1)
    trial_bits = []
    for t in range(r):
        if nb >= 2:
            b.cat_prep(cat, anc, t, f"trial {t} cat")
        else:
            b.add(ResetOp(cat[0]), gate(_H, cat[0]))
            b.close("ops", t)
        for k in range(nb):
            b.add(GateOp(GateUnitary(controlled(op.factors[k]), f"C-m{k}"), (cat[k], data[k])))
        b.cat_decode(cat)
        bit = b.cbit()
        trial_bits.append(bit)
        b.add(MeasureOp(cat[0], bit))
        for q in cat[1:]:
            b.add(MeasureOp(q, b.cbit()))
        b.close("trial-end", t)
        if t < r - 1 and block.code == "repetition3":
            b.repetition_ec(data, anc)
            b.close("ops", None, label=f"error correction after trial {t}")
    for k in range(nb):
        pk = op.correction_factors[k] if op.correction_factors else None
        if pk is not None and np.allclose(pk, np.eye(2)):
            continue
        if pk is None:
            b.add(CondGateOp(Majority(tuple(trial_bits)), GateUnitary(op.correction, "P"), data))
            break
        b.add(CondGateOp(Majority(tuple(trial_bits)), GateUnitary(pk, f"p{k}"), (data[k],)))
    b.close("ops", None, label="majority correction")
    return Protocol(
        b.n_qubits,
        b.n_cbits,
        b.ops,
        b.segments,
        data,
        cat + (anc,),
        tuple(trial_bits),
        _extended(state, nb + 1),
        roles={"data": data, "cat": cat, "ancilla": (anc,)},
        meta={"kind": "ft_measure", "operator": op.name, "r": r, "code": block.code},
    )


@dataclass(frozen=True, eq=False)
class FTBranch:
    majority: int
    probability: float
    data_state: StateVector
    bits: tuple[int, ...]
    trials: tuple[TrialRecord, ...]


@dataclass(frozen=True, eq=False)
class FTResult:
    branches: list[FTBranch]
    protocol: Protocol
    cat_attempts: int

    @property
    def majority(self) -> int:
        values = {b.majority for b in self.branches}
        if len(values) != 1:
            raise ValueError("majority differs between branches; inspect .branches")
        return values.pop()

    @property
    def data_state(self) -> StateVector:
        if len(self.branches) != 1:
            raise ValueError("several branches; inspect .branches")
        return self.branches[0].data_state


def _majority(bits: Sequence[int], idx: Sequence[int]) -> int:
    return int(Majority(tuple(idx)).evaluate(bits))


def ft_measure(
    state: StateVector,
    op: MeasurableOperator,
    block: BlockSpec | None = None,
    r: int = DEFAULT_TRIALS,
    faults: Sequence[FaultSpec] = (),
    mode: str = "enumerate",
    seed: int | None = None,
) -> FTResult:
    """Fault-tolerant measurement of a transversal M, repeated r times.

    Each trial prepares and verifies a cat state, applies each factor of M
    controlled on the matching cat qubit, decodes the cat and records one
    bit.  The majority bit then drives the correction P.
    """
    protocol = ft_measure_protocol(state, op, block, r)
    run = execute(protocol, faults, mode, seed)
    out = []
    for br in run.branches:
        out.append(
            FTBranch(
                _majority(br.bits, protocol.trial_bits),
                br.probability,
                factor_out(br.state, protocol.data_qubits),
                br.bits,
                tuple(h for h in br.history if isinstance(h, TrialRecord)),
            )
        )
    return FTResult(out, protocol, run.cat_attempts)


# nested (inner measurement under an outer cat)


def eigen_split(op: MeasurableOperator, data: StateVector) -> tuple[complex, complex, StateVector, StateVector | None]:
    """Canonical ``(alpha, beta, phi0, phi1)`` with ``phi = alpha phi0 + beta phi1``.

    ``phi0`` is the normalised +1 component and ``phi1 = P^dag phi0`` so the
    correction maps ``phi1`` onto ``phi0`` exactly.
    """
    plus = op.projector(+1) @ data.amps
    minus = op.projector(-1) @ data.amps
    a = float(np.linalg.norm(plus))
    if a < OP_TOL:
        raise ValueError("data has no +1 component; nothing to map the -1 component onto")
    phi0 = plus / a
    if np.linalg.norm(minus) < OP_TOL:
        return a, 0.0, StateVector(data.n, phi0), None
    phi1 = op.correction.conj().T @ phi0
    beta = complex(np.vdot(phi1, minus))
    if np.linalg.norm(minus - beta * phi1) > 1e-9:
        raise ValueError("P does not map the -1 component of the data onto its +1 component")
    return a, beta, StateVector(data.n, phi0), StateVector(data.n, phi1)


def _check_alpha_beta(op: MeasurableOperator, data: StateVector, alpha: complex, beta: complex):
    if abs(abs(alpha) ** 2 + abs(beta) ** 2 - 1) > 1e-10:
        raise ValueError("|alpha|^2 + |beta|^2 must be 1")
    plus = op.projector(+1) @ data.amps
    minus = op.projector(-1) @ data.amps
    if abs(alpha) < 1e-12:
        if np.linalg.norm(plus) > 1e-9:
            raise ValueError("alpha = 0 but the data has a +1 component")
        raise ValueError("alpha = 0: the data is a -1 eigenstate; phi0 is undefined")
    phi0 = plus / alpha
    if abs(np.linalg.norm(phi0) - 1) > 1e-9:
        raise ValueError("alpha is inconsistent with the data's +1 component")
    if abs(beta) < 1e-12:
        if np.linalg.norm(minus) > 1e-9:
            raise ValueError("beta = 0 but the data has a -1 component")
        return phi0, None
    phi1 = minus / beta
    if abs(np.linalg.norm(phi1) - 1) > 1e-9:
        raise ValueError("beta is inconsistent with the data's -1 component")
    if np.linalg.norm(op.correction @ phi1 - phi0) > 1e-9:
        raise ValueError("alpha/beta phases inconsistent: P phi1 != phi0")
    return phi0, phi1


def unprepare_rotation(alpha: complex, beta: complex) -> np.ndarray:
    """Inverse of the single-qubit unitary with first column (alpha, beta)."""
    v = np.array([[alpha, -np.conj(beta)], [beta, np.conj(alpha)]], dtype=complex)
    return v.conj().T


def nested_protocol(
    state: StateVector,
    inner: MeasurableOperator,
    outer_size: int,
    alpha: complex,
    beta: complex,
    block: BlockSpec | None = None,
    r: int = DEFAULT_TRIALS,
) -> Protocol:
    if r < 1 or r % 2 == 0:
        raise ValueError("nested measurement needs an odd number of trials")
    if outer_size < 1:
        raise ValueError("outer cat needs at least one qubit")
    if not inner.is_transversal or inner.correction_factors is None:
        raise ValueError("inner operator needs transversal M and P factors")
    block = block or BlockSpec(inner.n)
    nb = inner.n
    if state.n != nb or block.n_block != nb:
        raise ValueError("operator, block and data sizes disagree")
    _check_alpha_beta(inner, state, alpha, beta)

    data = tuple(range(nb))
    pos = nb
    oc = tuple(range(pos, pos + outer_size))
    pos += outer_size
    ic = tuple(range(pos, pos + r))
    pos += r
    helpers = tuple(range(pos, pos + nb - 1))
    pos += nb - 1
    maj = tuple(range(pos, pos + nb))
    pos += nb
    anc = pos
    b = _Builder(pos + 1)

    if outer_size >= 2:
        b.cat_prep(oc, anc, None, "outer cat")
    else:
        b.add(gate(_H, oc[0]))
        b.close("ops", None, label="outer cat")

    trial_bits = []
    for t in range(r):
        icat = (ic[t],) + helpers
        if nb >= 2:
            b.cat_prep(icat, anc, t, f"trial {t} inner cat")
        else:
            b.add(gate(_H, icat[0]))
            b.close("ops", t)
        for k in range(nb):
            ccm = GateUnitary(controlled(inner.factors[k], 2), f"CC-m{k}")
            b.add(GateOp(ccm, (oc[k % outer_size], icat[k], data[k])))
        b.cat_decode(icat)
        for q in helpers:
            b.add(ResetOp(q))
        b.close("ops", t, label=f"trial {t} decode")
        if t < r - 1:
            if block.code == "repetition3":
                b.repetition_ec(data, anc)
            if outer_size == 3:
                b.correct_triple(*oc, anc)
            else:
                for x, y in zip(oc, oc[1:]):
                    b.parity(x, y, anc)
            b.close("ops", None, label=f"error correction and outer re-verification after trial {t}")
    b.close("snapshot", None, label="after-trials")

    mg = majority_gate(r)
    for k in range(nb):
        b.add(GateOp(mg, ic + (maj[k],)))
    for k in range(nb):
        pk = inner.correction_factors[k]
        if not np.allclose(pk, np.eye(2)):
            b.add(GateOp(GateUnitary(controlled(pk), f"C-p{k}"), (maj[k], data[k])))
    b.close("ops", None, label="majority and correction")
    inner_qubits = ic + maj
    for q in inner_qubits[1:]:
        b.add(gate(_CNOT, inner_qubits[0], q))
    b.add(GateOp(GateUnitary(controlled(unprepare_rotation(alpha, beta)), "C-Vdag"), (oc[0], inner_qubits[0])))
    b.close("ops", None, label="disentangle")
    return Protocol(
        b.n_qubits,
        b.n_cbits,
        b.ops,
        b.segments,
        data,
        tuple(q for q in range(b.n_qubits) if q not in data),
        tuple(trial_bits),
        _extended(state, b.n_qubits - nb),
        roles={"data": data, "outer": oc, "inner": ic, "helpers": helpers, "majority": maj, "ancilla": (anc,)},
        meta={"kind": "nested", "operator": inner.name, "r": r, "outer_size": outer_size, "alpha": alpha, "beta": beta},
    )


def _place(n_total: int, vec: np.ndarray, qubits: Sequence[int], fixed: dict[int, int]) -> np.ndarray:
    """Embed ``vec`` (on ``qubits``) with the other listed qubits fixed to bits."""
    out = np.zeros(1 << n_total, dtype=complex)
    base = sum(bit << q for q, bit in fixed.items())
    for i, a in enumerate(vec):
        idx = base | sum(((i >> j) & 1) << q for j, q in enumerate(qubits))
        out[idx] += a
    return out


def after_trials_state(protocol: Protocol, phi: StateVector, alpha, beta, phi0, phi1) -> StateVector:
    """The analytic register state once all inner trials are done.

    |0..0>_oc |0..0>_ic |phi> + |1..1>_oc (alpha |0..0>_ic |phi0> + beta |1..1>_ic |phi1>),
    everything else |0>.
    """
    n = protocol.n_qubits
    data = protocol.roles["data"]
    oc0 = {q: 0 for q in protocol.roles["outer"]}
    oc1 = {q: 1 for q in protocol.roles["outer"]}
    ic0 = {q: 0 for q in protocol.roles["inner"]}
    ic1 = {q: 1 for q in protocol.roles["inner"]}
    v = _place(n, phi.amps, data, {**oc0, **ic0})
    v = v + alpha * _place(n, phi0.amps, data, {**oc1, **ic0})
    if phi1 is not None:
        v = v + beta * _place(n, phi1.amps, data, {**oc1, **ic1})
    return StateVector(n, v / np.sqrt(2))


def final_target_state(protocol: Protocol, phi: StateVector, phi0: StateVector) -> StateVector:
    """(|0..0>_oc |phi> + |1..1>_oc |phi0>)/sqrt 2 on data + outer cat."""
    data = protocol.roles["data"]
    oc = protocol.roles["outer"]
    nb = len(data)
    n = nb + len(oc)
    local_oc = list(range(nb, n))
    v = _place(n, phi.amps, range(nb), {q: 0 for q in local_oc})
    v = v + _place(n, phi0.amps, range(nb), {q: 1 for q in local_oc})
    return StateVector(n, v / np.sqrt(2))


@dataclass(frozen=True, eq=False)
class NestedResult:
    protocol: Protocol
    branches: list[Branch]
    after_trials: list[Branch]
    expected_after: StateVector
    expected_final: StateVector
    alpha: complex
    beta: complex

    def final_states(self) -> list[StateVector]:
        """Data + outer cat (data first) per branch; inner qubits must be |0>."""
        keep = self.protocol.roles["data"] + self.protocol.roles["outer"]
        return [factor_out(b.state, keep) for b in self.branches]

    def inner_fidelity(self, branch: Branch) -> float:
        """Probability that every inner qubit reads 0 in ``branch``."""
        inner = self.protocol.roles["inner"] + self.protocol.roles["majority"] + self.protocol.roles["helpers"]
        rho = reduced_density(branch.state, inner)
        return float(rho[0, 0].real)


def nested_measure(
    state: StateVector,
    inner: MeasurableOperator,
    outer_size: int = 2,
    alpha_beta: tuple[complex, complex] | None = None,
    block: BlockSpec | None = None,
    r: int = DEFAULT_TRIALS,
    faults: Sequence[FaultSpec] = (),
    mode: str = "enumerate",
    seed: int | None = None,
) -> NestedResult:
    """Measure ``inner`` on the data under control of an outer cat state.

    ``alpha_beta`` are the known amplitudes of the data on the +1 and -1
    eigencomponents (computed from the data when omitted).  With no faults
    the result is (|0..0>_oc |phi> + |1..1>_oc |phi0>)/sqrt 2 with all
    inner qubits back in |0>.
    """
    if alpha_beta is None:
        alpha, beta, _, _ = eigen_split(inner, state)
    else:
        alpha, beta = alpha_beta
    protocol = nested_protocol(state, inner, outer_size, alpha, beta, block, r)
    phi0, phi1 = _check_alpha_beta(inner, state, alpha, beta)
    phi0_s = StateVector(state.n, phi0)
    phi1_s = None if phi1 is None else StateVector(state.n, phi1)
    run = execute(protocol, faults, mode, seed)
    return NestedResult(
        protocol,
        run.branches,
        run.snapshots.get("after-trials", []),
        after_trials_state(protocol, state, alpha, beta, phi0_s, phi1_s),
        final_target_state(protocol, state, phi0_s),
        alpha,
        beta,
    )


# fault propagation


_CLIFFORD_CACHE: dict[bytes, object] = {}


def _gate_clifford(g: GateUnitary):
    key = g.matrix.tobytes()
    if key not in _CLIFFORD_CACHE:
        _CLIFFORD_CACHE[key] = from_unitary(g) or False
    return _CLIFFORD_CACHE[key] or None


def _conj_frame(frame: PauliString, g: GateUnitary, targets) -> PauliString:
    from .clifford import conjugate

    c = _gate_clifford(g)
    sub = frame.restrict(targets)
    if sub.is_identity():
        return frame
    return frame.replace(targets, conjugate(c, sub)).unsigned()


def _clear(frame: PauliString, qubits) -> PauliString:
    return frame.replace(list(qubits), PauliString.identity(len(qubits)))


def _update_fresh(fresh: set[int], op: Op) -> None:
    """Track qubits known to sit in a computational basis state."""
    if isinstance(op, (ResetOp, MeasureOp)):
        fresh.add(op.qubit)
    else:
        fresh.difference_update(op.qubits())


def _drop_z(frame: PauliString, fresh: set[int]) -> PauliString:
    """Z acts as a phase on a basis state, so only the X part matters there."""
    mask = sum(1 << q for q in fresh)
    if not frame.z_bits & mask:
        return frame
    return PauliString(frame.n, 0, frame.x_bits, frame.z_bits & ~mask)


def _reduce_on_cat(frame: PauliString, cat: Sequence[int]) -> PauliString:
    """Lightest frame equal to ``frame`` up to the cat's stabilizers.

    The cat is fixed by X on every qubit and by Z on any pair, so the X part
    can be complemented and the Z part reduced to its parity.
    """
    sub = frame.restrict(cat)
    x = [(sub.x_bits >> j) & 1 for j in range(len(cat))]
    if 2 * sum(x) > len(cat):
        x = [1 - b for b in x]
    z = [0] * len(cat)
    z[0] = (sub.z_bits.bit_count()) & 1
    return frame.replace(list(cat), PauliString.from_bit_lists(x, z)).unsigned()


def _is_clifford_tail(protocol: Protocol, start: int) -> bool:
    for op in protocol.ops[start:]:
        if isinstance(op, GateOp) and _gate_clifford(op.gate) is None:
            return False
        if isinstance(op, CondGateOp) and pauli_from_matrix(op.gate.matrix, allow_global_phase=True) is None:
            return False
    return True


@dataclass(frozen=True)
class FaultReport:
    fault: FaultSpec
    method: str  # "frame" or "dual"
    data_weight_per_block: list[int]
    data_weight_after_feedforward: list[int]
    decoded_bit_flipped: bool
    flipped_trials: tuple[int, ...]
    majority_changed: bool
    cat_rejected: bool
    confined_to_one_trial: bool
    residual: str | None = None
    residual_after_feedforward: str | None = None
    outer_collapse: bool = False

    def as_dict(self) -> dict:
        return {
            "fault": self.fault.as_dict(),
            "method": self.method,
            "data_weight_per_block": [int(w) for w in self.data_weight_per_block],
            "data_weight_after_feedforward": [int(w) for w in self.data_weight_after_feedforward],
            "decoded_bit_flipped": bool(self.decoded_bit_flipped),
            "flipped_trials": list(self.flipped_trials),
            "majority_changed": bool(self.majority_changed),
            "cat_rejected": bool(self.cat_rejected),
            "confined_to_one_trial": bool(self.confined_to_one_trial),
            "residual": self.residual,
            "residual_after_feedforward": self.residual_after_feedforward,
            "outer_collapse": bool(self.outer_collapse),
        }


def reference_bits(protocol: Protocol) -> tuple[int, ...]:
    """Classical record of the first fault-free enumerated branch."""
    if "reference_bits" not in protocol.meta:
        protocol.meta["reference_bits"] = _clean_run(protocol).branches[0].bits
    return protocol.meta["reference_bits"]


def _confined(protocol: Protocol, fault: FaultSpec) -> bool:
    return protocol.op_trial(fault.op) is not None and fault.qubit not in protocol.data_qubits


def propagate_fault(
    protocol: Protocol, fault: FaultSpec, partition: Sequence[Sequence[int]] | None = None
) -> FaultReport:
    """Track one Pauli fault to the end of the schedule.

    When everything after the fault is Clifford the fault is pushed through
    as a Pauli frame.  Two frames are kept: one that holds every classical
    decision at its fault-free value (pure propagation), and one that also
    follows the decisions the flipped bits would change (feed-forward).
    Measurements flip their recorded bit when the frame has an X component
    there; a cat preparation whose comparisons fire is discarded, which
    removes the fault.  Otherwise the protocol is run twice as state
    vectors and the outputs compared.
    """
    _fault_ops(protocol, [fault])
    if partition is None:
        partition = [protocol.data_qubits]
    if not _is_clifford_tail(protocol, fault.op + 1) or not _is_clifford_tail(protocol, fault.op):
        return _dual_report(protocol, fault, partition)

    n = protocol.n_qubits
    ref = reference_bits(protocol)
    fresh = set(protocol.ancilla_qubits)
    for op in protocol.ops[: fault.op + 1]:
        _update_fresh(fresh, op)
    frame = _drop_z(PauliString.single(n, fault.qubit, fault.pauli), fresh)
    frame_ff = frame
    flips = [0] * protocol.n_cbits
    rejected = False
    seg = protocol.segment_of(fault.op)
    for i in range(fault.op + 1, len(protocol.ops) + 1):
        if i == seg.stop:
            if seg.kind == "cat-prep" and any(flips[c] for c in seg.flags):
                rejected = True
                frame = _clear(frame, seg.qubits)
                frame_ff = _clear(frame_ff, seg.qubits)
                for c in seg.flags:
                    flips[c] = 0
            elif seg.kind == "cat-prep":
                frame = _reduce_on_cat(frame, seg.qubits[:-1])
                frame_ff = _reduce_on_cat(frame_ff, seg.qubits[:-1])
            if i < len(protocol.ops):
                seg = protocol.segment_of(i)
        if i == len(protocol.ops):
            break
        op = protocol.ops[i]
        if isinstance(op, GateOp):
            frame = _conj_frame(frame, op.gate, op.targets)
            frame_ff = _conj_frame(frame_ff, op.gate, op.targets)
        elif isinstance(op, MeasureOp):
            q = op.qubit
            flips[op.cbit] = (frame_ff.x_bits >> q) & 1
            frame = frame.replace([q], PauliString(1, 0, (frame.x_bits >> q) & 1, 0))
            frame_ff = frame_ff.replace([q], PauliString(1, 0, (frame_ff.x_bits >> q) & 1, 0))
        elif isinstance(op, BellOp):
            pair = [op.q1, op.q2]
            sub = frame_ff.restrict(pair)
            flips[op.cbit_x] = int(not sub_commutes(sub, "ZZ"))
            flips[op.cbit_z] = int(not sub_commutes(sub, "XX"))
            frame, frame_ff = _clear(frame, pair), _clear(frame_ff, pair)
        elif isinstance(op, ResetOp):
            frame, frame_ff = _clear(frame, [op.qubit]), _clear(frame_ff, [op.qubit])
        elif isinstance(op, CondGateOp):
            actual = tuple(r ^ f for r, f in zip(ref, flips))
            if op.condition.evaluate(ref) != op.condition.evaluate(actual):
                found = pauli_from_matrix(op.gate.matrix, allow_global_phase=True)
                toggle = found[0].unsigned().embed(n, op.targets)
                frame_ff = (frame_ff * toggle).unsigned()
        _update_fresh(fresh, op)
        frame, frame_ff = _drop_z(frame, fresh), _drop_z(frame_ff, fresh)
    flipped_trials = tuple(t for t, c in enumerate(protocol.trial_bits) if flips[c])
    actual = tuple(r ^ f for r, f in zip(ref, flips))
    majority_changed = bool(protocol.trial_bits) and _majority(ref, protocol.trial_bits) != _majority(
        actual, protocol.trial_bits
    )
    return FaultReport(
        fault,
        "frame",
        block_weight(frame, partition),
        block_weight(frame_ff, partition),
        bool(flipped_trials),
        flipped_trials,
        majority_changed,
        rejected,
        _confined(protocol, fault),
        residual=str(frame.restrict(protocol.data_qubits)),
        residual_after_feedforward=str(frame_ff.restrict(protocol.data_qubits)),
    )


def sub_commutes(p: PauliString, letters: str) -> bool:
    from .pauli import commutes

    return commutes(p, PauliString.from_letters(letters))


def support_weight(state: StateVector, ref: StateVector, block: Sequence[int], tol: float = 1e-8) -> int:
    """Fewest block qubits S such that ``state`` and ``ref`` agree on block minus S.

    Two pure states with equal marginals on a set are related by a unitary
    on its complement, so this is the size of the smallest part of the
    block the difference has to touch.
    """
    block = list(block)
    for w in range(len(block) + 1):
        for s in itertools.combinations(block, w):
            rest = [q for q in block if q not in s]
            if not rest:
                return w
            if np.max(np.abs(reduced_density(state, rest) - reduced_density(ref, rest))) < tol:
                return w
    return len(block)


def _clean_run(protocol: Protocol) -> RunResult:
    if "clean_run" not in protocol.meta:
        protocol.meta["clean_run"] = execute(protocol)
    return protocol.meta["clean_run"]


def _dual_report(protocol: Protocol, fault: FaultSpec, partition) -> FaultReport:
    clean = _clean_run(protocol)
    faulty = execute(protocol, [fault])
    weights = [0] * len(partition)
    ref_records = {tuple(b.bits[c] for c in protocol.trial_bits) for b in clean.branches}
    ref_majorities = {_majority(b.bits, protocol.trial_bits) for b in clean.branches}
    flipped: set[int] = set()
    majority_changed = False
    for fb in faulty.branches:
        for j, blk in enumerate(partition):
            w = min(support_weight(fb.state, cb.state, blk) for cb in clean.branches)
            weights[j] = max(weights[j], w)
        record = tuple(fb.bits[c] for c in protocol.trial_bits)
        if record not in ref_records:
            nearest = min(ref_records, key=lambda rr: sum(a != b for a, b in zip(rr, record)))
            flipped.update(t for t, (a, b) in enumerate(zip(nearest, record)) if a != b)
        if protocol.trial_bits and _majority(fb.bits, protocol.trial_bits) not in ref_majorities:
            majority_changed = True
    collapse = False
    if "outer" in protocol.roles:
        oc = protocol.roles["outer"]
        last = (1 << len(oc)) - 1

        def coherence(branches):
            return sum(b.probability * abs(reduced_density(b.state, oc)[0, last]) for b in branches)

        collapse = coherence(faulty.branches) < 0.5 * coherence(clean.branches)
    return FaultReport(
        fault,
        "dual",
        weights,
        weights,
        bool(flipped),
        tuple(sorted(flipped)),
        majority_changed,
        faulty.cat_attempts > clean.cat_attempts,
        _confined(protocol, fault),
        outer_collapse=collapse,
    )


def fault_sweep(
    protocol: Protocol, paulis: str = "XYZ", partition: Sequence[Sequence[int]] | None = None
) -> list[FaultReport]:
    """One report per (schedule location, Pauli type)."""
    return [
        propagate_fault(protocol, FaultSpec(i, q, p), partition)
        for i, q in protocol.locations()
        for p in paulis
    ]


def sweep_json(reports: Sequence[FaultReport]) -> str:
    return json.dumps([r.as_dict() for r in reports], sort_keys=True)
