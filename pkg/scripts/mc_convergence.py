"""Monte Carlo convergence of the simulated expected utility toward the exact one.

Writes a CSV of runs, empirical mean, standard error and z-score per agent.
"""
import argparse
import csv
import sys

from likefair.cli import resolve_instance_path
from likefair.core import load_instance, truthful_bids
from likefair.gametree import expected_utilities
from likefair.mechanisms import MechanismKind
from likefair.simulate import SimulationConfig, simulate


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("instance", nargs="?", default="corpus/thm3.json")
    ap.add_argument("--mechanism", default=None)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--max-exp", type=int, default=6, help="largest run count is 10**max_exp")
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    doc = load_instance(resolve_instance_path(args.instance))
    kind = MechanismKind.parse(args.mechanism or doc.mechanism or "weighted-balanced-like")
    inst, bids = doc.instance, doc.bids
    exact = expected_utilities(inst, kind, bids if bids is not None else truthful_bids(inst))

    out = csv.writer(sys.stdout)
    out.writerow(["runs", "agent", "exact", "empirical", "stderr", "z"])
    for e in range(2, args.max_exp + 1):
        stats = simulate(inst, SimulationConfig(seed=args.seed, runs=10**e, kind=kind, bids=bids,
                                                workers=args.workers))
        for i in range(inst.n):
            mean = float(stats.mean_utility(i))
            se = stats.utility_stderr(i)
            z = (mean - float(exact.own(i))) / se if se else 0.0
            out.writerow([10**e, inst.names[i], str(exact.own(i)), f"{mean:.6f}", f"{se:.3e}", f"{z:.2f}"])


if __name__ == "__main__":
    main()
