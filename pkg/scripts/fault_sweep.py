"""Single-fault sweeps over the cat-controlled measurement schedules.

Prints a summary per protocol and optionally writes every report as JSON.
"""

import argparse
import json
from collections import Counter

from teleportal.ftmeasure import (
    BlockSpec,
    MeasurableOperator,
    eigen_split,
    fault_sweep,
    ft_measure_protocol,
    nested_protocol,
)
from teleportal.statevector import StateVector

CASES = [
    ("ft", "ZZZ", "unencoded", None),
    ("ft", "XXX", "unencoded", None),
    ("ft", "ZZZ", "repetition3", None),
    ("nested", "Z", "unencoded", 2),
    ("nested", "XX", "unencoded", 2),
    ("nested", "XX", "unencoded", 3),
]


def data_for(op: MeasurableOperator) -> StateVector:
    return StateVector.zero(op.n) if "X" in op.name else StateVector.plus(op.n)


def build(kind, text, code, outer, r):
    op = MeasurableOperator.from_pauli(text)
    data = data_for(op)
    block = BlockSpec(op.n, code)
    if kind == "ft":
        return ft_measure_protocol(data, op, block, r)
    alpha, beta, _, _ = eigen_split(op, data)
    return nested_protocol(data, op, outer, alpha, beta, block, r)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--r", type=int, default=3)
    ap.add_argument("--json", help="write all reports to this file")
    args = ap.parse_args()
    dump = {}
    for kind, text, code, outer in CASES:
        name = f"{kind}:{text}:{code}" + (f":outer{outer}" if outer else "")
        protocol = build(kind, text, code, outer, args.r)
        reports = fault_sweep(protocol)
        weights = Counter(max(r.data_weight_per_block) for r in reports)
        confined = [r for r in reports if r.confined_to_one_trial]
        heavy = [r.fault.as_dict() for r in reports if max(r.data_weight_per_block) > 1]
        print(
            f"{name:<34} faults={len(reports):4d} weights={dict(sorted(weights.items()))} "
            f"confined={len(confined)} confined-majority-changes={sum(r.majority_changed for r in confined)} "
            f"collapses={sum(r.outer_collapse for r in reports)} methods={dict(Counter(r.method for r in reports))}"
        )
        for f in heavy:
            print(f"    weight>1: {f}")
        dump[name] = [r.as_dict() for r in reports]
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(dump, fh, sort_keys=True, indent=1)


if __name__ == "__main__":
    main()
