"""Acceptance criteria 1-11, one test per criterion.

Each check returns ``(ok, detail)``; the tests record the result so the
pytest summary prints one PASS/FAIL line per criterion.  Running this file
directly prints the same lines without pytest.
"""

from __future__ import annotations

import subprocess
import sys
import time
from pathlib import Path

import numpy as np

from teleportal.clifford import clear_cache, hierarchy_level, in_level
from teleportal.ftmeasure import (
    BlockSpec,
    MeasurableOperator,
    execute,
    fault_sweep,
    ft_measure,
    ft_measure_protocol,
    measure_coherent,
    measure_nonft,
    nested_measure,
)
from teleportal.gates import LIBRARY_NAMES, resolve, rz
from teleportal.statevector import (
    StateVector,
    apply_gate,
    equal_up_to_global_phase,
    expectation,
    factor_out,
)
from teleportal.teleport import (
    chi_direct,
    correction_table,
    make_chi,
    prepare_psi_u,
    stabilizer_conditions,
    teleport,
    teleport_cnot,
    teleport_gate,
)

FID_TOL = 1e-10
PROB_TOL = 1e-12


def _min_fidelity(branches, want) -> float:
    return min(b.state.fidelity(want) for b in branches)


def check_ac1():
    rng = np.random.default_rng(1)
    start = time.perf_counter()
    worst_fid, worst_prob, counts = 1.0, 0.0, set()
    for _ in range(100):
        psi = StateVector.random(1, rng)
        bs = teleport(psi)
        counts.add(len(bs))
        worst_fid = min(worst_fid, _min_fidelity(bs, psi))
        worst_prob = max(worst_prob, max(abs(b.probability - 0.25) for b in bs))
    elapsed = time.perf_counter() - start
    ok = counts == {4} and worst_fid >= 1 - FID_TOL and worst_prob <= PROB_TOL and elapsed < 1.0
    return ok, f"branches={sorted(counts)} min fidelity={worst_fid:.15f} max |p-1/4|={worst_prob:.1e} time={elapsed:.2f}s"


def check_ac2():
    rng = np.random.default_rng(2)
    cnot = resolve("CNOT")
    chi = make_chi("from_epr").state
    start = time.perf_counter()
    worst, counts = 1.0, set()
    for _ in range(100):
        alpha, beta = StateVector.random(1, rng), StateVector.random(1, rng)
        want = apply_gate(beta.tensor(alpha), cnot, [0, 1])  # control beta on qubit 0
        bs = teleport_cnot(alpha, beta, chi=chi)
        counts.add(len(bs))
        worst = min(worst, _min_fidelity(bs, want))
    elapsed = time.perf_counter() - start
    ok = counts == {16} and worst >= 1 - FID_TOL and elapsed < 5.0
    return ok, f"branches={sorted(counts)} min fidelity={worst:.15f} time={elapsed:.2f}s"


def check_ac3():
    states = {s: make_chi(s).state for s in ("from_epr", "from_ghz", "direct")}
    names = list(states)
    pairs_ok = all(
        equal_up_to_global_phase(states[a], states[b], tol=1e-12) for i, a in enumerate(names) for b in names[i + 1 :]
    )
    expected = np.zeros(16, dtype=complex)
    for ket in ("0000", "1100", "0111", "1011"):  # ket position j is qubit j
        expected[sum(int(c) << j for j, c in enumerate(ket))] = 0.5
    exact = bool(np.array_equal(chi_direct().amps, expected))
    return pairs_ok and exact, f"pairwise equal (1e-12)={pairs_ok} direct exact={exact}"


def check_ac4():
    clear_cache()
    start = time.perf_counter()
    want: dict[str, int] = {}
    want.update({g: 1 for g in ("X", "Y", "Z")})
    want.update({g: 2 for g in ("H", "P", "CNOT", "CZ", "SWAP")})
    want.update({g: 3 for g in ("T", "TOFFOLI", "CPHASE_I")})
    gates = {g: resolve(g) for g in want}
    for k in range(1, 6):
        gates[f"RZ(pi/2^{k - 1})"] = rz(k - 1)
        want[f"RZ(pi/2^{k - 1})"] = k
    wrong = []
    for name, g in gates.items():
        level = hierarchy_level(g, k_max=6).level
        below = want[name] - 1
        if level != want[name] or (below >= 1 and in_level(g, below)):
            wrong.append(f"{name}->{level}")
    elapsed = time.perf_counter() - start
    ok = not wrong and elapsed < 30
    return ok, f"{len(gates)} gates, mismatches={wrong or 'none'} time={elapsed:.2f}s"


def check_ac5():
    bad = []
    for g in ("T", "TOFFOLI", "CPHASE_I"):
        table = correction_table(g)
        bad += [f"{g}{o}" for o, e in table.entries.items() if not in_level(e.conjugated, 2)]
    for g in ("H", "CNOT"):
        table = correction_table(g)
        bad += [f"{g}{o}" for o, e in table.entries.items() if not in_level(e.conjugated, 1)]
    return not bad, f"entries outside the bound: {bad or 'none'}"


def check_ac6():
    worst = 0.0
    checked = 0
    for g in ("I", "H", "CNOT", "T", "TOFFOLI"):
        conds = stabilizer_conditions(g)
        for method in ("direct", "measurement"):
            res = prepare_psi_u(g, method=method)
            states = [res.state] + ([b.state for b in res.branches] if res.branches is not None else [])
            for s in states:
                for c in conds:
                    worst = max(worst, abs(expectation(s, c.matrix) - 1))
                    checked += 1
    return worst <= 1e-10, f"{checked} expectation values, max |<M>-1|={worst:.1e}"


def check_ac7():
    rng = np.random.default_rng(7)
    gates = {name: resolve(name) for name in LIBRARY_NAMES}
    gates.update({f"RZ(pi/2^{k})": rz(k) for k in range(3)})
    start = time.perf_counter()
    worst, used, counts = 1.0, [], {}
    for name, g in gates.items():
        if g.n > 3 or hierarchy_level(g, 3).level is None:
            continue
        used.append(name)
        table = correction_table(g)
        for _ in range(20):
            psi = StateVector.random(g.n, rng)
            bs = teleport_gate(g, psi, table=table)
            counts[name] = len(bs)
            if len(bs) != 4**g.n:
                worst = 0.0
            worst = min(worst, _min_fidelity(bs, apply_gate(psi, g, list(range(g.n)))))
    elapsed = time.perf_counter() - start
    ok = worst >= 1 - FID_TOL and elapsed < 120
    return ok, f"{len(used)} gates x 20 inputs, min fidelity={worst:.15f} time={elapsed:.1f}s"


AC8_CASES = [("Z", "+"), ("X", "0"), ("ZZ", "++"), ("XX", "00"), ("ZZZ", "+++")]


def _ket(spec: str) -> StateVector:
    return StateVector.plus(len(spec)) if spec[0] == "+" else StateVector.from_bits(spec)


def check_ac8():
    bad = []
    for text, spec in AC8_CASES:
        op = MeasurableOperator.from_pauli(text)
        psi = _ket(spec)
        coherent = measure_coherent(psi, op)
        target = coherent.meta["data_state"]
        plus_nonft = [b.state for b in measure_nonft(psi, op) if b.bits == (0,)]
        plus_ft = [b.data_state for b in ft_measure(psi, op, r=3).branches if b.majority == 0]
        corrected_ft = [b.data_state for b in ft_measure(psi, op, r=3).branches]
        ok = (
            coherent.meta["control_factorized"]
            and all(equal_up_to_global_phase(b.state, target) for b in coherent)
            and len(plus_nonft) == 1
            and equal_up_to_global_phase(plus_nonft[0], target)
            and plus_ft
            and all(equal_up_to_global_phase(s, target) for s in plus_ft + corrected_ft)
        )
        if not ok:
            bad.append(text)
    return not bad, f"operators disagreeing: {bad or 'none'} ({len(AC8_CASES)} checked)"


def _confined_majority_check(protocol, reports) -> int:
    """State-vector confirmation: confined faults keep each branch's majority."""
    def majority(bits) -> int:
        return int(2 * sum(bits[c] for c in protocol.trial_bits) > len(protocol.trial_bits))

    clean_majorities = {majority(b.bits) for b in execute(protocol).branches}
    changed = 0
    for r in reports:
        if not r.confined_to_one_trial:
            continue
        for b in execute(protocol, [r.fault]).branches:
            if majority(b.bits) not in clean_majorities:
                changed += 1
                break
    return changed


def check_ac9():
    start = time.perf_counter()
    lines, ok = [], True
    for text, spec in (("ZZZ", "000"), ("XXX", "+++")):
        op = MeasurableOperator.from_pauli(text)
        protocol = ft_measure_protocol(_ket(spec), op, BlockSpec(3, "unencoded"), r=3)
        reports = fault_sweep(protocol)
        heavy = sum(max(r.data_weight_per_block) > 1 for r in reports)
        confined = [r for r in reports if r.confined_to_one_trial]
        flipped = sum(r.majority_changed for r in confined)
        sv_flipped = _confined_majority_check(protocol, reports)
        ok &= heavy == 0 and flipped == 0 and sv_flipped == 0
        lines.append(
            f"{text}: {len(reports)} faults, weight>1 in {heavy}, confined {len(confined)} with majority changes {flipped} (state-vector {sv_flipped})"
        )
    elapsed = time.perf_counter() - start
    ok &= elapsed < 120
    return ok, "; ".join(lines) + f"; time={elapsed:.1f}s"


def check_ac10():
    worst_after, worst_final, worst_inner = 1.0, 1.0, 1.0
    cases = 0
    for text, spec in (("Z", "+"), ("XX", "00")):
        op = MeasurableOperator.from_pauli(text)
        psi = _ket(spec)
        for outer in (2, 3):
            res = nested_measure(psi, op, outer_size=outer, r=3)
            cases += 1
            for b in res.after_trials:
                worst_after = min(worst_after, abs(np.vdot(res.expected_after.amps, b.state.amps)) ** 2 / b.probability)
            for b in res.branches:
                worst_inner = min(worst_inner, res.inner_fidelity(b))
            for s in res.final_states():
                worst_final = min(worst_final, s.fidelity(res.expected_final))
    ok = min(worst_after, worst_final, worst_inner) >= 1 - 1e-10
    return ok, f"{cases} cases, after-trials overlap={worst_after:.15f} final fidelity={worst_final:.15f} inner |0> fidelity={worst_inner:.15f}"


AC11_COMMANDS = [
    ["simulate", "{circuit}", "--mode", "sample", "--seed", "5", "--input", "+00"],
    ["classify", "TOFFOLI"],
    ["teleport", "--gate", "TOFFOLI", "--input", "random", "--seed", "7"],
    ["prepare-ancilla", "--gate", "T", "--method", "measurement", "--mode", "sample", "--seed", "3"],
    ["ft-demo", "--operator", "ZZZ", "--input", "+++", "--mode", "sample", "--seed", "11"],
    ["ft-demo", "--operator", "ZZ", "--nested", "--inner", "XX", "--seed", "11"],
    ["fault-sweep", "--protocol", "ft:ZZZ", "--seed", "4"],
]

TELEPORT_CIRCUIT = """qubits 3
cbits 2
gate H 1
gate CNOT 1 2
bell 0 1 -> c0 c1
cif c0 gate X 2
cif c1 gate Z 2
"""


def check_ac11(tmp_dir: Path):
    circuit = tmp_dir / "teleport.circ"
    circuit.write_text(TELEPORT_CIRCUIT)
    differing = []
    for cmd in AC11_COMMANDS:
        argv = [sys.executable, "-m", "teleportal"] + [a.format(circuit=circuit) for a in cmd]
        outs = [subprocess.run(argv, capture_output=True, check=False) for _ in range(2)]
        if any(o.returncode != 0 for o in outs) or outs[0].stdout != outs[1].stdout or not outs[0].stdout:
            differing.append(cmd[0])
    return not differing, f"{len(AC11_COMMANDS)} invocations, non-identical or failing: {differing or 'none'}"


def _run(record, number, title, check, *args):
    ok, detail = check(*args)
    record(number, title, ok, detail)
    assert ok, detail


def test_ac1_teleportation_identity(record_criterion):
    _run(record_criterion, 1, "teleportation identity", check_ac1)


def test_ac2_cnot_teleportation(record_criterion):
    _run(record_criterion, 2, "CNOT teleportation", check_ac2)


def test_ac3_chi_builders(record_criterion):
    _run(record_criterion, 3, "chi builders", check_ac3)


def test_ac4_hierarchy_classification(record_criterion):
    _run(record_criterion, 4, "hierarchy classification", check_ac4)


def test_ac5_correction_level_bound(record_criterion):
    _run(record_criterion, 5, "correction-level bound", check_ac5)


def test_ac6_ancilla_stabilization(record_criterion):
    _run(record_criterion, 6, "ancilla stabilization", check_ac6)


def test_ac7_generic_gate_teleportation(record_criterion):
    _run(record_criterion, 7, "generic gate teleportation", check_ac7)


def test_ac8_measurement_chain(record_criterion):
    _run(record_criterion, 8, "measurement chain agreement", check_ac8)


def test_ac9_fault_sweep(record_criterion):
    _run(record_criterion, 9, "single-fault sweep", check_ac9)


def test_ac10_nested_measurement(record_criterion):
    _run(record_criterion, 10, "nested measurement", check_ac10)


def test_ac11_cli_determinism(record_criterion, tmp_path):
    _run(record_criterion, 11, "CLI determinism", check_ac11, tmp_path)


if __name__ == "__main__":
    import tempfile

    checks = [check_ac1, check_ac2, check_ac3, check_ac4, check_ac5, check_ac6, check_ac7, check_ac8, check_ac9, check_ac10]
    failed = 0
    for i, check in enumerate(checks, start=1):
        ok, detail = check()
        failed += not ok
        print(f"AC{i:<2} {'PASS' if ok else 'FAIL'}  {detail}")
    with tempfile.TemporaryDirectory() as d:
        ok, detail = check_ac11(Path(d))
        failed += not ok
        print(f"AC11 {'PASS' if ok else 'FAIL'}  {detail}")
    sys.exit(1 if failed else 0)
