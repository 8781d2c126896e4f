"""Symmetric maximal-overlap LP for growing n against the overlap bound.

Points where no symmetric n-site model reproduces the target are reported
as Infeasible with omega_star = -inf.
"""

import argparse
import math

from ontoscope.definetti import theorem3_bound
from ontoscope.ontology import TOY_SPACE, toy_responses
from ontoscope.optimize import orbit_count, symmetric_sweep_point
from ontoscope.quantum import born_table, canonical_pair, pbr_measurement


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, nargs="+", default=[4, 5, 6, 8, 12, 16])
    args = ap.parse_args()
    pair = canonical_pair(math.pi / 4)
    target = born_table(pair, pbr_measurement(pair))
    print(f"{'n':>3}{'orbits':>8}{'omega*':>10}{'bound':>10}{'status':>12}{'pivots':>8}{'ms':>8}")
    for n in args.n:
        row = symmetric_sweep_point(n, 2, target, toy_responses(), TOY_SPACE, theorem3_bound(n, 2, 3))
        print(f"{n:>3}{orbit_count(n, 2, 3):>8}{row.omega_star:>10.4f}{row.bound:>10.4f}"
              f"{row.lp_status:>12}{row.pivots:>8}{row.wall_ms:>8}")


if __name__ == "__main__":
    main()
