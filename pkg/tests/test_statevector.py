import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from teleportal.circuit import Bit, Circuit, MeasureOp, cif, gate
from teleportal.gates import resolve
from teleportal.statevector import (
    StateVector,
    apply_gate,
    bell_measure,
    equal_up_to_global_phase,
    expectation,
    factor_out,
    measure_qubit,
    permute_qubits,
    reduced_density,
    run_circuit,
)

H, X, CNOT = resolve("H"), resolve("X"), resolve("CNOT")
EPR = StateVector.from_amplitudes([1, 0, 0, 1])


def test_hadamard_on_zero():
    s = apply_gate(StateVector.zero(1), H, [0])
    np.testing.assert_allclose(s.amps, [2**-0.5, 2**-0.5])


def test_epr_from_circuit():
    s = apply_gate(apply_gate(StateVector.zero(2), H, [0]), CNOT, [0, 1])
    assert equal_up_to_global_phase(s, EPR)


def test_x_on_qubit_one_sets_index_bit_one():
    s = apply_gate(StateVector.zero(3), X, [1])
    assert s.amps[2] == 1
    assert equal_up_to_global_phase(s, StateVector.from_bits("010"))


def test_from_bits_leftmost_is_qubit_zero():
    assert StateVector.from_bits("100").amps[1] == 1


def test_bell_measure_epr():
    res = bell_measure(EPR, 0, 1)
    assert res.probability_of((0, 0)) == pytest.approx(1.0)
    assert len(res) == 1


def test_bell_measure_zero_zero():
    res = bell_measure(StateVector.zero(2), 0, 1)
    assert res.probability_of((0, 0)) == pytest.approx(0.5)
    assert res.probability_of((0, 1)) == pytest.approx(0.5)
    assert res.probability_of((1, 0)) == 0 and res.probability_of((1, 1)) == 0


def test_bell_measure_half_of_epr_is_uniform(rng):
    s = StateVector.random(1, rng).tensor(EPR)
    res = bell_measure(s, 0, 1)
    for out in [(0, 0), (0, 1), (1, 0), (1, 1)]:
        assert res.probability_of(out) == pytest.approx(0.25)


def test_bell_measure_rejects_same_qubit():
    with pytest.raises(ValueError):
        bell_measure(EPR, 0, 0)


def test_measure_one():
    res = measure_qubit(StateVector.from_bits("1"), 0)
    assert len(res) == 1 and res[0].bits == (1,) and res[0].probability == pytest.approx(1)


def test_measure_plus_branches():
    res = measure_qubit(StateVector.plus(), 0)
    assert res.outcomes() == pytest.approx({(0,): 0.5, (1,): 0.5})


def test_measure_epr_collapses_partner():
    res = measure_qubit(EPR, 0)
    for b in res:
        want = "00" if b.bits == (0,) else "11"
        assert equal_up_to_global_phase(b.state, StateVector.from_bits(want))


def test_sample_mode_is_seeded():
    a = measure_qubit(StateVector.plus(), 0, mode="sample", seed=3)
    b = measure_qubit(StateVector.plus(), 0, mode="sample", seed=3)
    assert len(a) == 1 and a[0].bits == b[0].bits


def test_bad_mode():
    with pytest.raises(ValueError):
        measure_qubit(StateVector.plus(), 0, mode="guess")


def test_empty_circuit_is_identity(rng):
    s = StateVector.random(2, rng)
    res = run_circuit(Circuit(2), s)
    assert len(res) == 1 and res[0].probability == 1
    assert equal_up_to_global_phase(res[0].state, s)


def test_feedforward_x_on_outcome_one_resets_to_zero():
    c = Circuit(1, 1)
    c.append(gate(H, 0)).append(MeasureOp(0, 0)).append(cif(Bit(0), X, 0))
    res = run_circuit(c)
    assert len(res) == 2
    for b in res:
        assert equal_up_to_global_phase(b.state, StateVector.zero(1))


def test_branch_cap():
    c = Circuit(1, 1)
    for _ in range(3):
        c.append(MeasureOp(0, 0))
    with pytest.raises(ValueError, match="sample"):
        run_circuit(c, branch_cap=4)


def test_initial_size_mismatch():
    with pytest.raises(ValueError):
        run_circuit(Circuit(2), StateVector.zero(1))


def test_global_phase_equality(rng):
    s = StateVector.random(2, rng)
    t = StateVector.from_amplitudes(np.exp(1j * np.pi / 3) * s.amps)
    assert equal_up_to_global_phase(s, t)
    assert not equal_up_to_global_phase(StateVector.zero(1), StateVector.from_bits("1"))
    assert equal_up_to_global_phase(apply_gate(StateVector.zero(1), H, [0]), StateVector.plus())


def test_factor_out_and_reduced_density(rng):
    a, b = StateVector.random(1, rng), StateVector.random(2, rng)
    s = a.tensor(b)
    assert equal_up_to_global_phase(factor_out(s, [1, 2]), b)
    rho = reduced_density(EPR, [0])
    np.testing.assert_allclose(rho, np.eye(2) / 2, atol=1e-12)
    with pytest.raises(ValueError):
        factor_out(EPR, [0])


def test_expectation_of_zz_on_epr():
    zz = np.kron(resolve("Z").matrix, resolve("Z").matrix)
    assert expectation(EPR, zz).real == pytest.approx(1)


@given(st.integers(0, 2**32 - 1), st.permutations([0, 1, 2]))
def test_permute_matches_gate_relabelling(seed, order):
    rng = np.random.default_rng(seed)
    s = StateVector.random(3, rng)
    p = permute_qubits(s, order)
    # measuring new qubit j equals measuring old qubit order[j]
    for j in range(3):
        assert p.probability_one(j) == pytest.approx(s.probability_one(order[j]))


@given(st.integers(0, 2**32 - 1))
def test_gates_preserve_norm(seed):
    rng = np.random.default_rng(seed)
    s = StateVector.random(3, rng)
    for name, targets in [("H", [2]), ("CNOT", [2, 0]), ("T", [1]), ("TOFFOLI", [1, 2, 0])]:
        s = apply_gate(s, resolve(name), targets)
    assert s.norm() == pytest.approx(1)


@given(st.integers(0, 2**32 - 1))
def test_enumeration_probabilities_sum_to_one(seed):
    rng = np.random.default_rng(seed)
    s = StateVector.random(3, rng)
    res = bell_measure(s, 2, 0)
    assert res.total_probability() == pytest.approx(1)
