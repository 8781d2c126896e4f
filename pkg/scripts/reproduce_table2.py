"""Print the quantum exclusion table next to the toy model's table, plus sampled frequencies."""

import argparse
import math

from ontoscope.ontology import binomial_sigma, operational_table, sample, toy_model
from ontoscope.quantum import born_table, canonical_pair, pbr_measurement


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--shots", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()

    pair = canonical_pair(math.pi / 4)
    quantum = born_table(pair, pbr_measurement(pair))
    model = toy_model()
    toy = operational_table(model)
    print(f"{'preps':<10}{'outcome':<16}{'quantum':>10}{'toy':>10}{'sampled':>10}{'5 sigma':>10}")
    for shard, ctx in enumerate(quantum.contexts()):
        freqs = sample(model, ctx, args.shots, args.seed, shard).frequencies()
        for o in quantum.outcomes:
            p = quantum.entry(o, ctx)
            print(f"{','.join(ctx):<10}{o:<16}{p:>10.4f}{toy.entry(o, ctx):>10.4f}"
                  f"{freqs[o]:>10.4f}{5 * binomial_sigma(p, args.shots):>10.4f}")
    print(f"max |quantum - toy| = {quantum.max_difference(toy):.3e}")


if __name__ == "__main__":
    main()
