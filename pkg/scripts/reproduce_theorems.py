"""Recompute the headline numbers for each property of the four mechanisms.

Prints exact values for the worked examples, then a randomized sweep of the
properties claimed for the weighted mechanisms.
"""
import argparse
import random
import sys
from fractions import Fraction
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))

from helpers import random_instance  # noqa: E402
from likefair.analysis import (  # noqa: E402
    best_adaptive_response,
    check_bounded_ef_ex_post,
    check_ef_ex_ante,
    check_strategyproof,
)
from likefair.core import parse_instance_file, truthful_bids  # noqa: E402
from likefair.corpus import balanced_envy_instance, like_envy_instance, load_raw  # noqa: E402
from likefair.gametree import expected_utilities  # noqa: E402
from likefair.mechanisms import MechanismKind as K  # noqa: E402


def worked_examples():
    thm3 = parse_instance_file(load_raw("thm3")).instance
    rep = check_strategyproof(thm3, K.BALANCED_LIKE, 0)
    adaptive = best_adaptive_response(thm3, K.BALANCED_LIKE, 0)
    print(f"three agents, Balanced LIKE: sincere {rep.sincere_value}, best {rep.best_value} "
          f"via {rep.best_misreport}, adaptive {adaptive.value}")

    thm4 = parse_instance_file(load_raw("thm4")).instance
    rep = check_strategyproof(thm4, K.BALANCED_LIKE, 1)
    print(f"two agents, general utilities: sincere {rep.sincere_value}, best {rep.best_value} "
          f"via {rep.best_misreport}")

    for m in (1, 3, 5):
        inst = parse_instance_file(like_envy_instance(m)).instance
        ex = check_bounded_ef_ex_post(inst, K.LIKE, Fraction(0))
        print(f"LIKE, m={m}: worst envy {ex.worst_envy} with probability {ex.witness.probability}")

    for p in ("3", "10", "101/4"):
        inst = parse_instance_file(balanced_envy_instance(p)).instance
        ex = check_bounded_ef_ex_post(inst, K.BALANCED_LIKE, Fraction(0))
        print(f"Balanced LIKE, p={p}: envy {ex.worst_envy}")

    fig2 = parse_instance_file(load_raw("fig2")).instance
    E = expected_utilities(fig2, K.WEIGHTED_BALANCED_LIKE, truthful_bids(fig2))
    print(f"60/40 weights: expected own values {[str(E.own(i)) for i in range(fig2.n)]}")


def sweep(trials, seed):
    rng = random.Random(seed)
    tally = {"weighted-like sp": 0, "weighted-like ef ante": 0, "wbl 2-agent sp": 0,
             "wbl ex-post bound 1 (w>=1)": 0, "wbl ef ante (unequal w)": 0}
    for _ in range(trials):
        inst = random_instance(rng, n=(1, 4), m=(1, 6))
        tally["weighted-like sp"] += all(
            check_strategyproof(inst, K.WEIGHTED_LIKE, a).gain == 0 for a in range(inst.n))
        tally["weighted-like ef ante"] += check_ef_ex_ante(inst, K.WEIGHTED_LIKE).holds

        two = random_instance(rng, n=2, m=(1, 6), binary=True)
        tally["wbl 2-agent sp"] += all(
            check_strategyproof(two, K.WEIGHTED_BALANCED_LIKE, a).gain == 0 for a in range(2))
        tally["wbl ef ante (unequal w)"] += check_ef_ex_ante(two, K.WEIGHTED_BALANCED_LIKE).holds

        heavy = random_instance(rng, n=(2, 4), m=(1, 6), binary=True, weights="at_least_one")
        tally["wbl ex-post bound 1 (w>=1)"] += check_bounded_ef_ex_post(
            heavy, K.WEIGHTED_BALANCED_LIKE, Fraction(1)).bound_holds
    for key, held in tally.items():
        print(f"{key:30s} held on {held}/{trials}")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    worked_examples()
    print()
    sweep(args.trials, args.seed)


if __name__ == "__main__":
    main()
