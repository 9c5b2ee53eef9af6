"""Circuit model: gates, measurements, classical control, resets."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

from .gates import GateUnitary


# classical conditions


class Condition:
    def evaluate(self, bits: Sequence[int]) -> bool:
        raise NotImplementedError

    def value(self, bits: Sequence[int]) -> int:
        return int(self.evaluate(bits))

    def bits_used(self) -> set[int]:
        raise NotImplementedError

    def render(self) -> str:
        raise NotImplementedError

    def __str__(self) -> str:
        return self.render()


@dataclass(frozen=True)
class Bit(Condition):
    index: int

    def evaluate(self, bits):
        return bool(bits[self.index])

    def bits_used(self):
        return {self.index}

    def render(self):
        return f"c{self.index}"


@dataclass(frozen=True)
class Const(Condition):
    val: int

    def evaluate(self, bits):
        return bool(self.val)

    def bits_used(self):
        return set()

    def render(self):
        return str(int(bool(self.val)))


@dataclass(frozen=True)
class Not(Condition):
    operand: Condition

    def evaluate(self, bits):
        return not self.operand.evaluate(bits)

    def bits_used(self):
        return self.operand.bits_used()

    def render(self):
        return f"!{_wrap(self.operand)}"


@dataclass(frozen=True)
class Binary(Condition):
    op: str  # "==", "&", "|"
    left: Condition
    right: Condition

    def evaluate(self, bits):
        a, b = self.left.evaluate(bits), self.right.evaluate(bits)
        if self.op == "==":
            return a == b
        if self.op == "&":
            return a and b
        return a or b

    def bits_used(self):
        return self.left.bits_used() | self.right.bits_used()

    def render(self):
        return f"{_wrap(self.left)} {self.op} {_wrap(self.right)}"


@dataclass(frozen=True)
class Majority(Condition):
    indices: tuple[int, ...]

    def evaluate(self, bits):
        votes = sum(int(bits[i]) for i in self.indices)
        return 2 * votes > len(self.indices)

    def bits_used(self):
        return set(self.indices)

    def render(self):
        return "maj(" + ",".join(f"c{i}" for i in self.indices) + ")"


def _wrap(c: Condition) -> str:
    return f"({c.render()})" if isinstance(c, Binary) else c.render()


def xor(*conds: Condition) -> Condition:
    """Parity of the given conditions, written with == and !."""
    if not conds:
        return Const(0)
    acc = conds[0]
    for c in conds[1:]:
        acc = Not(Binary("==", acc, c))
    return acc


def parity_of_bits(indices: Sequence[int]) -> Condition:
    return xor(*(Bit(i) for i in indices))


# operations


@dataclass(frozen=True)
class GateOp:
    gate: GateUnitary
    targets: tuple[int, ...]

    def qubits(self) -> tuple[int, ...]:
        return self.targets


@dataclass(frozen=True)
class MeasureOp:
    qubit: int
    cbit: int

    def qubits(self):
        return (self.qubit,)


@dataclass(frozen=True)
class BellOp:
    """Bell-basis measurement; x goes to ``cbit_x`` and z to ``cbit_z``."""

    q1: int
    q2: int
    cbit_x: int
    cbit_z: int

    def qubits(self):
        return (self.q1, self.q2)


@dataclass(frozen=True)
class CondGateOp:
    condition: Condition
    gate: GateUnitary
    targets: tuple[int, ...]

    def qubits(self):
        return self.targets


@dataclass(frozen=True)
class ResetOp:
    qubit: int

    def qubits(self):
        return (self.qubit,)


Op = Union[GateOp, MeasureOp, BellOp, CondGateOp, ResetOp]


def gate(g: GateUnitary, *targets: int) -> GateOp:
    return GateOp(g, tuple(targets))


def cif(cond: Condition, g: GateUnitary, *targets: int) -> CondGateOp:
    return CondGateOp(cond, g, tuple(targets))


@dataclass
class Circuit:
    n_qubits: int
    n_cbits: int = 0
    ops: list[Op] = field(default_factory=list)

    def __post_init__(self):
        for op in self.ops:
            self._check(op)

    def append(self, op: Op) -> "Circuit":
        self._check(op)
        self.ops.append(op)
        return self

    def extend(self, ops) -> "Circuit":
        for op in ops:
            self.append(op)
        return self

    def _check(self, op: Op) -> None:
        qs = op.qubits()
        if len(set(qs)) != len(qs):
            raise ValueError(f"duplicate qubits in {op}")
        for q in qs:
            if not 0 <= q < self.n_qubits:
                raise IndexError(f"qubit {q} out of range for {self.n_qubits} qubits")
        if isinstance(op, (GateOp, CondGateOp)) and op.gate.n != len(op.targets):
            raise ValueError(f"gate {op.gate.label} acts on {op.gate.n} qubits, got {len(op.targets)} targets")
        cbits: set[int] = set()
        if isinstance(op, MeasureOp):
            cbits = {op.cbit}
        elif isinstance(op, BellOp):
            if op.cbit_x == op.cbit_z:
                raise ValueError("Bell measurement needs two distinct classical bits")
            cbits = {op.cbit_x, op.cbit_z}
        elif isinstance(op, CondGateOp):
            cbits = op.condition.bits_used()
        for c in cbits:
            if not 0 <= c < self.n_cbits:
                raise IndexError(f"classical bit {c} out of range for {self.n_cbits} bits")

    def lint(self) -> list[str]:
        """Warnings for gates on measured qubits that were never reset."""
        measured: set[int] = set()
        warnings = []
        for i, op in enumerate(self.ops):
            if isinstance(op, ResetOp):
                measured.discard(op.qubit)
            elif isinstance(op, MeasureOp):
                measured.add(op.qubit)
            elif isinstance(op, BellOp):
                measured.update((op.q1, op.q2))
            else:
                stale = measured.intersection(op.qubits())
                if stale:
                    warnings.append(f"op {i}: gate {op.gate.label} acts on measured qubit(s) {sorted(stale)} without reset")
        return warnings

    def measurement_arity(self) -> int:
        """Upper bound on the number of enumerated branches."""
        count = 1
        for op in self.ops:
            if isinstance(op, (MeasureOp, ResetOp)):
                count *= 2
            elif isinstance(op, BellOp):
                count *= 4
        return count
