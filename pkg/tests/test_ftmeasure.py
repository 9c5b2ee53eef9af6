import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from teleportal.ftmeasure import (
    MAX_CAT_ATTEMPTS,
    BlockSpec,
    FaultSpec,
    MeasurableOperator,
    _dual_report,
    eigen_split,
    execute,
    fault_sweep,
    ft_measure,
    ft_measure_protocol,
    measure_coherent,
    measure_nonft,
    nested_measure,
    prepare_cat,
    propagate_fault,
    support_weight,
    sweep_json,
    unprepare_rotation,
    verify_cat,
)
from teleportal.gates import resolve
from teleportal.statevector import StateVector, apply_gate, equal_up_to_global_phase

ZERO, ONE, PLUS = StateVector.from_bits("0"), StateVector.from_bits("1"), StateVector.plus()
BELL_PLUS = StateVector.from_amplitudes([1, 0, 0, 1])


def ket(spec):
    s = StateVector.from_bits("0" * len(spec))
    for q, ch in enumerate(spec):
        if ch in "1-":
            s = apply_gate(s, resolve("X"), [q])
        if ch in "+-":
            s = apply_gate(s, resolve("H"), [q])
    return s


def close(a, b, tol=1e-10):
    return equal_up_to_global_phase(a, b, tol)


# operators


def test_from_pauli_default_corrections():
    assert MeasurableOperator.from_pauli("ZZ").correction_factors is not None
    z = MeasurableOperator.from_pauli("Z")
    np.testing.assert_allclose(z.correction, resolve("X").matrix)
    x = MeasurableOperator.from_pauli("X")
    np.testing.assert_allclose(x.correction, resolve("Z").matrix)


def test_operator_validation():
    with pytest.raises(ValueError):
        MeasurableOperator.from_matrix(resolve("H").matrix * 2)
    with pytest.raises(ValueError):
        # Z commutes with Z, so it cannot swap the eigenspaces
        MeasurableOperator.from_pauli("Z", correction="Z")


def test_block_spec_parse():
    b = BlockSpec.parse("repetition3:3")
    assert b.code == "repetition3" and b.n_block == 3
    with pytest.raises(ValueError):
        BlockSpec.parse("steane:7")


def test_fault_spec_pauli_letter():
    with pytest.raises(ValueError):
        FaultSpec(0, 0, "W")


# plain and coherent measurement


def test_nonft_z_on_zero():
    res = measure_nonft(ZERO, MeasurableOperator.from_pauli("Z"))
    assert len(res) == 1 and res[0].bits == (0,)
    assert close(res[0].state, ZERO)


def test_nonft_z_on_plus():
    res = measure_nonft(PLUS, MeasurableOperator.from_pauli("Z"))
    assert res.outcomes() == pytest.approx({(0,): 0.5, (1,): 0.5})
    for b in res:
        assert close(b.state, ZERO if b.bits == (0,) else ONE)


def test_nonft_xx_on_zero_zero():
    res = measure_nonft(ket("00"), MeasurableOperator.from_pauli("XX"))
    assert res.probability_of((0,)) == pytest.approx(0.5)
    plus_branch = next(b for b in res if b.bits == (0,))
    assert close(plus_branch.state, BELL_PLUS)


@pytest.mark.parametrize(
    "text, data, want",
    [("Z", PLUS, ZERO), ("X", ZERO, PLUS)],
)
def test_coherent_single_qubit(text, data, want):
    res = measure_coherent(data, MeasurableOperator.from_pauli(text))
    assert res.meta["control_factorized"]
    for b in res:
        assert close(b.state, want)


def test_coherent_zz_with_x_on_first_qubit():
    data = StateVector.from_amplitudes([0, 1, 1, 0])
    res = measure_coherent(data, MeasurableOperator.from_pauli("ZZ", correction="XI"))
    assert close(res.meta["data_state"], BELL_PLUS)
    for b in res:
        assert close(b.state, BELL_PLUS)


# cat states


def test_clean_cat_passes():
    res = verify_cat(prepare_cat(3))
    assert len(res) == 1 and not any(res[0].bits)


def test_cat_x_fault_is_caught():
    bad = apply_gate(prepare_cat(3), resolve("X"), [1])
    res = verify_cat(bad)
    assert all(any(b.bits) for b in res)


def test_cat_z_fault_is_invisible():
    bad = apply_gate(prepare_cat(3), resolve("Z"), [1])
    res = verify_cat(bad)
    assert all(not any(b.bits) for b in res)


def test_cat_needs_two_qubits():
    with pytest.raises(ValueError):
        prepare_cat(1)


# ft_measure


def test_ft_zzz_on_zero_state():
    res = ft_measure(ket("000"), MeasurableOperator.from_pauli("ZZZ"), BlockSpec(3, "unencoded"), r=3)
    assert res.majority == 0
    for b in res.branches:
        assert close(b.data_state, ket("000"))


def test_ft_trials_agree_after_first_collapse():
    res = ft_measure(ket("+++"), MeasurableOperator.from_pauli("ZZZ"), r=3)
    assert {b.majority for b in res.branches} == {0, 1}
    for b in res.branches:
        decoded = [t.decoded_bit for t in b.trials]
        assert len(set(decoded)) == 1
    # the majority correction lands every branch in the +1 eigenspace
    zzz = MeasurableOperator.from_pauli("ZZZ").matrix
    for b in res.branches:
        np.testing.assert_allclose(zzz @ b.data_state.amps, b.data_state.amps, atol=1e-10)


def test_ft_repetition_block_runs_clean():
    res = ft_measure(ket("000"), MeasurableOperator.from_pauli("ZZZ"), BlockSpec(3, "repetition3"), r=3)
    assert res.majority == 0


def test_ft_rejects_bad_trials():
    with pytest.raises(ValueError):
        ft_measure(ket("000"), MeasurableOperator.from_pauli("ZZZ"), r=0)


def _controlled_factor_index(protocol, k, trial=0):
    hits = [
        i
        for i, op in enumerate(protocol.ops)
        if getattr(getattr(op, "gate", None), "label", None) == f"C-m{k}" and protocol.op_trial(i) == trial
    ]
    return hits[0]


@pytest.mark.parametrize("k", [0, 1, 2])
def test_cat_x_fault_before_controlled_factor(k):
    data = ket("000")
    op = MeasurableOperator.from_pauli("ZZZ")
    protocol = ft_measure_protocol(data, op, r=3)
    idx = _controlled_factor_index(protocol, k)
    cat_k = protocol.roles["cat"][k]
    # faults land after their op: pick the last op on cat qubit k before C-m_k
    prev = max(i for i in range(idx) if cat_k in protocol.ops[i].qubits())
    fault = FaultSpec(prev, cat_k, "X")
    report = propagate_fault(protocol, fault)
    assert report.data_weight_per_block == [1]
    assert report.residual[1 + k] == "Z" and report.residual.count("I") == 2
    assert not report.majority_changed
    clean = ft_measure(data, op, r=3)
    faulty = ft_measure(data, op, r=3, faults=[fault])
    assert faulty.majority == clean.majority
    for b in faulty.branches:
        assert support_weight(b.data_state, clean.branches[0].data_state, range(3)) <= 1


def test_cat_x_fault_on_data_path_with_x_measurement():
    # For XXX the controlled factor is CNOT; an X on the cat qubit becomes X on data k.
    data = ket("000")
    op = MeasurableOperator.from_pauli("XXX")
    protocol = ft_measure_protocol(data, op, r=3)
    idx = _controlled_factor_index(protocol, 1)
    prev = max(i for i in range(idx) if protocol.roles["cat"][1] in protocol.ops[i].qubits())
    report = propagate_fault(protocol, FaultSpec(prev, protocol.roles["cat"][1], "X"))
    assert report.residual == "+IXI"
    assert report.data_weight_per_block == [1]


def test_cat_z_fault_flips_decoded_bit_only():
    data = ket("000")
    op = MeasurableOperator.from_pauli("ZZZ")
    protocol = ft_measure_protocol(data, op, r=3)
    idx = _controlled_factor_index(protocol, 2)
    report = propagate_fault(protocol, FaultSpec(idx, protocol.roles["cat"][1], "Z"))
    assert report.data_weight_per_block == [0]
    assert report.decoded_bit_flipped
    assert report.flipped_trials == (0,)
    assert not report.majority_changed


def test_clean_run_prepares_each_cat_once():
    protocol = ft_measure_protocol(ket("000"), MeasurableOperator.from_pauli("ZZZ"), r=3)
    run = execute(protocol)
    assert run.total_probability() == pytest.approx(1)
    assert run.cat_attempts == sum(seg.kind == "cat-prep" for seg in protocol.segments)
    assert len(run.branches) == 1 and not any(run.branches[0].bits[c] for c in protocol.trial_bits)


def test_x_fault_in_cat_prep_triggers_retry():
    protocol = ft_measure_protocol(ket("000"), MeasurableOperator.from_pauli("ZZZ"), r=1)
    seg = next(s for s in protocol.segments if s.kind == "cat-prep")
    cat = protocol.roles["cat"]
    first = next(i for i in range(seg.start, seg.stop) if cat[1] in protocol.ops[i].qubits())
    run = execute(protocol, [FaultSpec(first, cat[1], "X")])
    assert 1 < run.cat_attempts <= MAX_CAT_ATTEMPTS
    assert propagate_fault(protocol, FaultSpec(first, cat[1], "X")).cat_rejected


def test_fault_out_of_range():
    protocol = ft_measure_protocol(ket("000"), MeasurableOperator.from_pauli("ZZZ"), r=1)
    with pytest.raises((IndexError, ValueError)):
        propagate_fault(protocol, FaultSpec(len(protocol.ops) + 5, 0, "X"))


@pytest.mark.parametrize("text, spec", [("ZZZ", "000"), ("XXX", "+++")])
@pytest.mark.parametrize("code", ["unencoded", "repetition3"])
def test_sweep_weight_bound(text, spec, code):
    protocol = ft_measure_protocol(ket(spec), MeasurableOperator.from_pauli(text), BlockSpec(3, code), r=3)
    reports = fault_sweep(protocol)
    assert reports
    assert all(max(r.data_weight_per_block) <= 1 for r in reports)
    assert not any(r.majority_changed for r in reports if r.confined_to_one_trial)


def test_sweep_json_shape():
    protocol = ft_measure_protocol(ket("00"), MeasurableOperator.from_pauli("ZZ"), r=1)
    rows = json.loads(sweep_json(fault_sweep(protocol, paulis="X")))
    for key in ("fault", "data_weight_per_block", "decoded_bit_flipped", "majority_changed"):
        assert key in rows[0]
    assert set(rows[0]["fault"]) == {"op", "qubit", "pauli"}


_PROTOCOLS = {}


def _protocol(text, spec):
    if (text, spec) not in _PROTOCOLS:
        _PROTOCOLS[text, spec] = ft_measure_protocol(ket(spec), MeasurableOperator.from_pauli(text), r=3)
    return _PROTOCOLS[text, spec]


@settings(max_examples=30)
@given(st.sampled_from([("ZZZ", "000"), ("XXX", "+++")]), st.data())
def test_frame_never_understates_state_vector(case, data):
    protocol = _protocol(*case)
    i, q = data.draw(st.sampled_from(protocol.locations()))
    fault = FaultSpec(i, q, data.draw(st.sampled_from("XYZ")))
    frame = propagate_fault(protocol, fault)
    dual = _dual_report(protocol, fault, [protocol.data_qubits])
    assert frame.method == "frame"
    assert dual.data_weight_per_block[0] <= frame.data_weight_after_feedforward[0]
    assert dual.majority_changed == frame.majority_changed


# nested measurement


def test_eigen_split_reconstructs_data(rng):
    op = MeasurableOperator.from_pauli("XX")
    plus = op.projector(+1) @ StateVector.random(2, rng).amps
    plus /= np.linalg.norm(plus)
    data = StateVector.from_amplitudes(0.6 * plus + 0.8j * (op.correction.conj().T @ plus))
    a, b, phi0, phi1 = eigen_split(op, data)
    np.testing.assert_allclose(a * phi0.amps + b * phi1.amps, data.amps, atol=1e-12)
    np.testing.assert_allclose(op.correction @ phi1.amps, phi0.amps, atol=1e-12)


def test_unprepare_rotation_sends_column_to_zero():
    a, b = 0.6, 0.8j
    v = unprepare_rotation(a, b)
    np.testing.assert_allclose(v @ np.array([a, b]), [1, 0], atol=1e-12)


def test_nested_z_on_zero_single_trial():
    res = nested_measure(ZERO, MeasurableOperator.from_pauli("Z"), outer_size=2, alpha_beta=(1, 0), r=1)
    want = StateVector.from_amplitudes([1, 0, 0, 0, 0, 0, 1, 0])  # data first, then oc
    for s in res.final_states():
        assert close(s, want)
    for b in res.branches:
        assert res.inner_fidelity(b) == pytest.approx(1, abs=1e-10)


def test_nested_z_on_plus_matches_analytic_states():
    s = 2**-0.5
    res = nested_measure(PLUS, MeasurableOperator.from_pauli("Z"), outer_size=2, alpha_beta=(s, s), r=1)
    for b in res.after_trials:
        overlap = abs(np.vdot(res.expected_after.amps, b.state.amps)) ** 2 / b.probability
        assert overlap == pytest.approx(1, abs=1e-12)
    # (|00>_oc |+> + |11>_oc |0>) / sqrt 2, data qubit first
    want = StateVector.from_amplitudes(np.array([s, s, 0, 0, 0, 0, 1, 0]))
    for st_ in res.final_states():
        assert close(st_, want)


def test_nested_xx_on_zero_zero():
    res = nested_measure(ket("00"), MeasurableOperator.from_pauli("XX"), outer_size=2, r=3)
    assert res.alpha == pytest.approx(2**-0.5)
    for s in res.final_states():
        assert s.fidelity(res.expected_final) == pytest.approx(1, abs=1e-10)
    outer1 = res.expected_final.amps.reshape(4, 4)[3]  # oc = |11>, data free
    assert close(StateVector.from_amplitudes(outer1), BELL_PLUS)


def test_nested_inconsistent_alpha_beta():
    with pytest.raises(ValueError):
        nested_measure(PLUS, MeasurableOperator.from_pauli("Z"), alpha_beta=(1, 0), r=1)
    with pytest.raises(ValueError):
        nested_measure(PLUS, MeasurableOperator.from_pauli("Z"), alpha_beta=(0.5, 0.5), r=1)


def test_nested_requires_odd_trials():
    with pytest.raises(ValueError):
        nested_measure(PLUS, MeasurableOperator.from_pauli("Z"), r=2)
