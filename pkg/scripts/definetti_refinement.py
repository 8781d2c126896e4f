"""Closest i.i.d. mixture to the symmetrised toy extension as the grid is refined."""

import argparse

from ontoscope.definetti import BoundInputs, best_iid_mixture, ct_bound
from ontoscope.ontology import toy_extension


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=4)
    ap.add_argument("--grids", type=int, nargs="+", default=[4, 8, 16, 32])
    args = ap.parse_args()
    sigma = toy_extension(args.n)
    bound = ct_bound(BoundInputs(args.n, 2, 2, 3))
    print(f"bound for n={args.n}, m=2: {bound}")
    for g in args.grids:
        w = best_iid_mixture(sigma, 2, grid_resolution=g)
        print(f"grid 1/{g:<3} distance {w.achieved_distance:.6f}  components {len(w.components)}"
              f"  columns priced {w.columns_priced}")


if __name__ == "__main__":
    main()
