"""Teleportation, gate teleportation and the resource states they consume.

Bell outcomes are pairs ``(x, z)``: the measured pair was projected onto
``(|0x> + (-1)^z |1 xbar>)/sqrt 2``.  After that outcome the receiving qubit
holds ``X^x Z^z |input>``, so the correction is ``(X^x Z^z)^dag``.

For an n-qubit gate U, ``Psi_U`` lives on 2n qubits: upper qubits
``0..n-1`` and lower qubits ``n..2n-1``, prepared as n EPR pairs
``(i, n+i)`` with U applied to the lower half.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .circuit import BellOp, Bit, Circuit, cif, gate, parity_of_bits
from .clifford import CliffordMap, from_unitary, hierarchy_level
from .ftmeasure import nonft_ops
from .gates import GateUnitary, resolve
from .pauli import PauliString, multiply, pauli_from_matrix, to_matrix
from .statevector import (
    Branch,
    BranchSet,
    StateVector,
    apply_matrix,
    equal_up_to_global_phase,
    factor_out,
    run_circuit,
)

_H, _X, _Z, _CNOT = (resolve(g) for g in ("H", "X", "Z", "CNOT"))
MAX_TABLE_QUBITS = 3

# X^x Z^z for each single-pair outcome (x, z); checked against a brute-force
# derivation in the tests and in scripts/derive_corrections.py.
TELEPORT_CORRECTIONS: dict[tuple[int, int], PauliString] = {
    (0, 0): PauliString.parse("I"),
    (1, 0): PauliString.parse("X"),
    (0, 1): PauliString.parse("Z"),
    (1, 1): PauliString.parse("-iY"),
}


def outcome_pauli(bits: Sequence[int]) -> PauliString:
    """Tensor product of the per-pair residual Paulis for ``(x0, z0, x1, z1, ...)``."""
    if len(bits) % 2:
        raise ValueError("outcome needs an (x, z) pair per qubit")
    n = len(bits) // 2
    out = PauliString.identity(n)
    for i in range(n):
        one = TELEPORT_CORRECTIONS[(bits[2 * i], bits[2 * i + 1])]
        out = multiply(out, one.embed(n, [i]))
    return out


def all_outcomes(n: int) -> list[tuple[int, ...]]:
    return [tuple((j >> (2 * n - 1 - b)) & 1 for b in range(2 * n)) for j in range(4**n)]


# resource states


@dataclass(frozen=True, eq=False)
class ResourceState:
    kind: str
    state: StateVector
    roles: dict[str, tuple[int, ...]] = field(default_factory=dict)
    branches: BranchSet | None = None


def epr() -> StateVector:
    """(|00> + |11>)/sqrt 2."""
    return StateVector.from_amplitudes(np.array([1, 0, 0, 1]) / np.sqrt(2))


def ghz(n: int = 3) -> StateVector:
    amps = np.zeros(1 << n, dtype=complex)
    amps[0] = amps[-1] = 1 / np.sqrt(2)
    return StateVector(n, amps)


def chi_direct() -> StateVector:
    """Half-amplitude superposition of |a, a^c, c, c> over bits a, c."""
    amps = np.zeros(16, dtype=complex)
    for a in (0, 1):
        for c in (0, 1):
            bits = (a, a ^ c, c, c)
            amps[sum(b << q for q, b in enumerate(bits))] = 0.5
    return StateVector(4, amps)


CHI_ROLES = {"target_in": (0,), "target_out": (1,), "control_in": (2,), "control_out": (3,)}


def _chi_from_epr() -> ResourceState:
    c = Circuit(4, 0, [gate(_H, 0), gate(_CNOT, 0, 1), gate(_H, 2), gate(_CNOT, 2, 3), gate(_CNOT, 2, 1)])
    return ResourceState("chi", run_circuit(c)[0].state, CHI_ROLES)


def _chi_from_ghz() -> ResourceState:
    # GHZ on (p, q, r) = (0, 1, 2) and (s, t, u) = (3, 4, 5); fuse r with u.
    ops = [gate(_H, 0), gate(_CNOT, 0, 1), gate(_CNOT, 1, 2)]
    ops += [gate(_H, 3), gate(_CNOT, 3, 4), gate(_CNOT, 4, 5)]
    ops += [gate(_H, 5), BellOp(2, 5, 0, 1), cif(Bit(0), _Z, 3), cif(Bit(1), _Z, 0), gate(_H, 0), gate(_H, 1)]
    result = run_circuit(Circuit(6, 2, ops))
    outs = [factor_out(b.state, [0, 1, 3, 4]) for b in result]
    for s in outs[1:]:
        if not equal_up_to_global_phase(s, outs[0]):
            raise RuntimeError("GHZ fusion branches disagree")
    return ResourceState("chi", outs[0], CHI_ROLES, result)


def make_chi(source: str = "from_epr") -> ResourceState:
    """The four-qubit CNOT-teleportation resource.

    ``from_epr``: two EPR pairs joined by a CNOT.  ``from_ghz``: two GHZ
    states fused by a Hadamard and a Bell measurement, with Pauli fix-ups.
    ``direct``: written down amplitude by amplitude.
    """
    if source == "from_epr":
        return _chi_from_epr()
    if source == "from_ghz":
        return _chi_from_ghz()
    if source == "direct":
        return ResourceState("chi", chi_direct(), CHI_ROLES)
    raise ValueError(f"unknown chi source {source!r}")


# one-qubit teleportation


def teleport_circuit() -> Circuit:
    """Input on qubit 0, EPR pair on (1, 2), output on qubit 2."""
    return Circuit(
        3,
        2,
        [gate(_H, 1), gate(_CNOT, 1, 2), BellOp(0, 1, 0, 1), cif(Bit(0), _X, 2), cif(Bit(1), _Z, 2)],
    )


def _outputs(result: BranchSet, keep: Sequence[int], mode: str) -> BranchSet:
    return BranchSet([replace(b, state=factor_out(b.state, keep)) for b in result], mode)


def teleport(input: StateVector, mode: str = "enumerate", seed: int | None = None) -> BranchSet:
    """Teleport a single qubit; each branch holds the corrected output qubit."""
    if input.n != 1:
        raise ValueError("teleport takes a single-qubit state")
    initial = input.tensor(StateVector.zero(2))
    return _outputs(run_circuit(teleport_circuit(), initial, mode, seed), [2], mode)


# CNOT by teleportation through chi


def _cnot_residual_rules() -> tuple[list[list[int]], list[list[int]]]:
    """Which outcome bits feed the X and Z fix-ups on (control, target).

    Outcome bits are (x_t, z_t, x_c, z_c).  A residual X^x Z^z on each input
    wire passes through the CNOT; conjugating each unit residual tells us
    which output letters it lights up.
    """
    cmap = from_unitary(_CNOT)
    x_rule = [[], []]
    z_rule = [[], []]
    # local qubit 0 = control, 1 = target
    units = {
        0: PauliString.single(2, 1, "X"),  # x_t
        1: PauliString.single(2, 1, "Z"),  # z_t
        2: PauliString.single(2, 0, "X"),  # x_c
        3: PauliString.single(2, 0, "Z"),  # z_c
    }
    for bit, p in units.items():
        img = cmap(p)
        for q in (0, 1):
            if (img.x_bits >> q) & 1:
                x_rule[q].append(bit)
            if (img.z_bits >> q) & 1:
                z_rule[q].append(bit)
    return x_rule, z_rule


def cnot_teleport_circuit() -> Circuit:
    """Target on qubit 0, control on qubit 1, chi on qubits 2..5.

    The target is Bell-measured with chi's ``target_in`` and the control
    with ``control_in``; outputs appear on chi's ``target_out`` (qubit 3)
    and ``control_out`` (qubit 5).
    """
    x_rule, z_rule = _cnot_residual_rules()
    out = {0: 5, 1: 3}  # local control/target -> register qubit
    ops = [BellOp(0, 2, 0, 1), BellOp(1, 4, 2, 3)]
    for q in (0, 1):
        if x_rule[q]:
            ops.append(cif(parity_of_bits(x_rule[q]), _X, out[q]))
        if z_rule[q]:
            ops.append(cif(parity_of_bits(z_rule[q]), _Z, out[q]))
    return Circuit(6, 4, ops)


def teleport_cnot(
    alpha: StateVector,
    beta: StateVector,
    mode: str = "enumerate",
    seed: int | None = None,
    chi: StateVector | None = None,
) -> BranchSet:
    """CNOT with control ``beta`` and target ``alpha``, consuming chi.

    Output qubit 0 is the control and qubit 1 the target, so every branch
    should hold ``CNOT (beta (x) alpha)``.  Branch bits are
    ``(x_t, z_t, x_c, z_c)``.
    """
    if alpha.n != 1 or beta.n != 1:
        raise ValueError("teleport_cnot takes two single-qubit states")
    chi = chi if chi is not None else make_chi("from_epr").state
    initial = alpha.tensor(beta).tensor(chi)
    return _outputs(run_circuit(cnot_teleport_circuit(), initial, mode, seed), [5, 3], mode)


# gate teleportation


def _as_gate(u, n: int | None = None) -> GateUnitary:
    """Accept a GateUnitary, a library name or a matrix; widen I to n qubits."""
    if isinstance(u, str):
        g = resolve(u)
    elif isinstance(u, GateUnitary):
        g = u
    else:
        g = GateUnitary(np.asarray(u, dtype=complex))
    if n is None or n == g.n:
        return g
    if g.n == 1 and np.allclose(g.matrix, np.eye(2)):
        return GateUnitary(np.eye(1 << n), "I")
    raise ValueError(f"gate {g.label} acts on {g.n} qubits, not {n}")


def prepare_psi_u_direct(u) -> StateVector:
    g = _as_gate(u)
    n = g.n
    s = StateVector.zero(2 * n)
    for i in range(n):
        s = apply_matrix(s, _H.matrix, [i])
        s = apply_matrix(s, _CNOT.matrix, [i, n + i])
    return apply_matrix(s, g.matrix, list(range(n, 2 * n)))


@dataclass(frozen=True)
class StabilizerCondition:
    label: str
    matrix: np.ndarray
    upper_qubit: int
    fix: str  # Pauli applied to the upper qubit on a -1 outcome


def stabilizer_conditions(u) -> list[StabilizerCondition]:
    """``X_i (x) U X_i U^dag`` and ``Z_i (x) U Z_i U^dag`` on the 2n-qubit register."""
    g = _as_gate(u)
    n = g.n
    eye_n = np.eye(1 << n)
    out = []
    for letter, fix in (("X", "Z"), ("Z", "X")):
        for i in range(n):
            p = to_matrix(PauliString.single(n, i, letter))
            lower = g.matrix @ p @ g.matrix.conj().T
            # upper qubits are the low index bits
            full = np.kron(lower, eye_n) @ np.kron(eye_n, p)
            label = f"{'M' if letter == 'X' else 'N'}_{i}"
            out.append(StabilizerCondition(label, full, i, fix))
    return out


def prepare_psi_u(
    u, n: int | None = None, method: str = "direct", mode: str = "enumerate", seed: int | None = None
) -> ResourceState:
    """Build Psi_U.

    ``direct`` applies U to half of n EPR pairs.  ``measurement`` starts
    from the EPR pairs, measures each stabilizer condition with a control
    qubit, and flips the upper qubit on every -1 outcome.  The measured
    branches all land on the same state.
    """
    g = _as_gate(u, n)
    n = g.n
    roles = {"upper": tuple(range(n)), "lower": tuple(range(n, 2 * n))}
    if method == "direct":
        return ResourceState("psi_u", prepare_psi_u_direct(g), roles)
    if method != "measurement":
        raise ValueError(f"unknown preparation method {method!r}")
    conds = stabilizer_conditions(g)
    anc = 2 * n
    ops = []
    for i in range(n):
        ops += [gate(_H, i), gate(_CNOT, i, n + i)]
    for c, cond in enumerate(conds):
        ops += nonft_ops(cond.matrix, list(range(2 * n)), anc, c)
    for c, cond in enumerate(conds):
        ops.append(cif(Bit(c), resolve(cond.fix), cond.upper_qubit))
    result = run_circuit(Circuit(2 * n + 1, len(conds), ops), None, mode, seed)
    outs = BranchSet([replace(b, state=factor_out(b.state, range(2 * n))) for b in result], mode)
    for b in outs.branches[1:]:
        if not equal_up_to_global_phase(b.state, outs[0].state):
            raise RuntimeError("measured preparation branches disagree")
    return ResourceState("psi_u", outs[0].state, roles, outs)


@dataclass(frozen=True, eq=False)
class CorrectionEntry:
    outcome: tuple[int, ...]
    pauli: PauliString  # R: residual before the gate
    conjugated: GateUnitary  # R' = U R U^dag
    level: int | None
    symbolic: object  # PauliString, CliffordMap or GateUnitary

    def describe(self) -> str:
        if isinstance(self.symbolic, PauliString):
            return str(self.symbolic)
        if isinstance(self.symbolic, CliffordMap):
            return json.dumps(self.symbolic.describe(), sort_keys=True)
        return "dense"


@dataclass(frozen=True, eq=False)
class CorrectionTable:
    gate: GateUnitary
    gate_level: int | None
    entries: dict[tuple[int, ...], CorrectionEntry]

    def __getitem__(self, outcome) -> CorrectionEntry:
        return self.entries[tuple(outcome)]

    def __len__(self) -> int:
        return len(self.entries)

    def max_level(self) -> int | None:
        levels = [e.level for e in self.entries.values()]
        return None if None in levels else max(levels)


def correction_table(u, n: int | None = None, k_max: int = 5) -> CorrectionTable:
    """Residual operator U R U^dag for each of the 4^n Bell outcomes.

    For U in level k every entry lands in level k - 1 (Pauli U gives Pauli
    entries, since level 0 would only hold phases).
    """
    g = _as_gate(u, n)
    n = g.n
    if n > MAX_TABLE_QUBITS:
        raise ValueError(f"correction tables are limited to {MAX_TABLE_QUBITS} qubits")
    glevel = hierarchy_level(g, k_max).level
    entries = {}
    for outcome in all_outcomes(n):
        r = outcome_pauli(outcome)
        rp = g.matrix @ to_matrix(r) @ g.matrix.conj().T
        lvl = hierarchy_level(rp, max(1, (glevel or k_max + 1) - 1)).level
        sym: object
        if lvl == 1:
            sym = pauli_from_matrix(rp, allow_global_phase=True)[0]
        elif lvl == 2:
            sym = from_unitary(rp)
        else:
            sym = GateUnitary(rp)
        entries[outcome] = CorrectionEntry(outcome, r, GateUnitary(rp), lvl, sym)
    return CorrectionTable(g, glevel, entries)


def teleport_gate(
    u,
    input: StateVector,
    mode: str = "enumerate",
    seed: int | None = None,
    table: CorrectionTable | None = None,
) -> BranchSet:
    """Apply U to ``input`` by teleporting through Psi_U.

    Register: input ``0..n-1``, Psi_U upper ``n..2n-1``, lower ``2n..3n-1``.
    Input qubit i is Bell-measured with upper qubit i, then the lower half
    gets the inverse of ``U R U^dag`` for the observed outcome.  Branch bits
    are ``(x0, z0, x1, z1, ...)``.
    """
    g = _as_gate(u, input.n)
    n = g.n
    if input.n != n:
        raise ValueError(f"gate acts on {n} qubits but the input has {input.n}")
    table = table or correction_table(g)
    initial = input.tensor(prepare_psi_u_direct(g))
    ops = [BellOp(i, n + i, 2 * i, 2 * i + 1) for i in range(n)]
    measured = run_circuit(Circuit(3 * n, 2 * n, ops), initial, mode, seed)
    lower = list(range(2 * n, 3 * n))
    out = []
    for b in measured:
        fix = table[b.bits].conjugated.matrix.conj().T
        state = apply_matrix(b.state, fix, lower)
        out.append(Branch(b.bits, b.probability, factor_out(state, lower), b.history))
    return BranchSet(out, mode)


def amplitudes_json(state: StateVector, digits: int = 12) -> list[dict]:
    """Amplitudes as ``{"index", "re", "im"}`` records, rounded."""
    return [
        {"index": i, "re": round(float(a.real), digits) + 0.0, "im": round(float(a.imag), digits) + 0.0}
        for i, a in enumerate(state.amps)
    ]


def psi_cnot_to_chi_order() -> list[int]:
    """Qubit order that relabels Psi_CNOT as chi.

    chi's target_in/target_out are Psi's upper/lower target qubits (1, 3)
    and control_in/control_out are the control qubits (0, 2).
    """
    return [1, 3, 0, 2]


__all__ = [
    "TELEPORT_CORRECTIONS",
    "ResourceState",
    "CorrectionEntry",
    "CorrectionTable",
    "StabilizerCondition",
    "all_outcomes",
    "amplitudes_json",
    "chi_direct",
    "cnot_teleport_circuit",
    "correction_table",
    "epr",
    "ghz",
    "make_chi",
    "outcome_pauli",
    "prepare_psi_u",
    "prepare_psi_u_direct",
    "psi_cnot_to_chi_order",
    "stabilizer_conditions",
    "teleport",
    "teleport_circuit",
    "teleport_cnot",
    "teleport_gate",
]
