"""Classify library gates and the Z-rotation ladder, then tabulate the
teleportation correction levels for each gate."""

import argparse
import time

from teleportal.clifford import hierarchy_level
from teleportal.gates import resolve, rz
from teleportal.teleport import correction_table


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--kmax", type=int, default=6)
    ap.add_argument("--ladder", type=int, default=5, help="largest k in RZ(pi/2^k)")
    args = ap.parse_args()

    gates = [resolve(n) for n in ("X", "H", "P", "CNOT", "CZ", "T", "CPHASE_I", "TOFFOLI")]
    gates += [rz(k) for k in range(1, args.ladder + 1)]
    print(f"{'gate':<14}{'level':>7}{'worst correction':>18}{'witness':>10}{'seconds':>9}")
    for g in gates:
        start = time.perf_counter()
        h = hierarchy_level(g, args.kmax)
        table = correction_table(g, k_max=args.kmax)
        worst = table.max_level()
        elapsed = time.perf_counter() - start
        witness = "-" if h.witness is None else str(h.witness)
        print(f"{g.label:<14}{str(h.level):>7}{str(worst):>18}{witness:>10}{elapsed:>9.2f}")


if __name__ == "__main__":
    main()
