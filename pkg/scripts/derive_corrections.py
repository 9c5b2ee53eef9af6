"""Re-derive the one-qubit teleportation residuals by brute force.

For each Bell outcome, run the uncorrected circuit on random inputs and
identify the Pauli relating the received qubit to the input.  Prints the
derived table next to the frozen one and exits non-zero on a mismatch.
"""

import argparse
import sys

import numpy as np

from teleportal.circuit import BellOp, Circuit, gate
from teleportal.gates import resolve
from teleportal.pauli import PauliString, to_matrix
from teleportal.statevector import StateVector, factor_out, run_circuit
from teleportal.teleport import TELEPORT_CORRECTIONS


def derive(samples: int, seed: int) -> dict:
    rng = np.random.default_rng(seed)
    circuit = Circuit(3, 2, [gate(resolve("H"), 1), gate(resolve("CNOT"), 1, 2), BellOp(0, 1, 0, 1)])
    candidates = [PauliString.parse(t) for t in ("I", "X", "Z", "-iY")]
    found = {}
    for _ in range(samples):
        psi = StateVector.random(1, rng)
        for b in run_circuit(circuit, psi.tensor(StateVector.zero(2))):
            out = factor_out(b.state, [2]).amps
            hits = [p for p in candidates if abs(abs(np.vdot(out, to_matrix(p) @ psi.amps)) - 1) < 1e-10]
            if len(hits) != 1:
                raise RuntimeError(f"outcome {b.bits}: no unique residual")
            found.setdefault(b.bits, set()).add(str(hits[0]))
    return found


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--samples", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    found = derive(args.samples, args.seed)
    ok = True
    print(f"{'outcome':>8}  {'derived':>8}  {'frozen':>8}")
    for bits in sorted(TELEPORT_CORRECTIONS):
        derived = found.get(bits, set())
        frozen = TELEPORT_CORRECTIONS[bits]
        # residuals are defined up to a global phase; compare letters
        match = {PauliString.parse(d).unsigned() for d in derived} == {frozen.unsigned()}
        ok &= match
        print(f"{str(bits):>8}  {','.join(sorted(derived)):>8}  {str(frozen):>8}  {'ok' if match else 'MISMATCH'}")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
