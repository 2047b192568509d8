"""How loose the approximation-error bound is as residuals grow.

    python scripts/bound_tightness.py --instances 200
"""
import argparse

import numpy as np

from subsplit.optim import Mode
from subsplit.tensor import RngState
from subsplit.verify import check_theorem1, random_aux, random_labels, random_network, scale_residuals


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--instances", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = RngState(args.seed)
    scales = (0.01, 0.1, 1.0, 10.0)
    ratios = {t: [] for t in scales}
    violations = 0
    for _ in range(args.instances):
        net = random_network(rng, int(rng.integers(2, 5)))
        aux = random_aux(net, rng, 8, Mode.GSAM)
        Y = random_labels(rng, 8, net.d_out, net.loss)
        for t in scales:
            rep = check_theorem1(net, scale_residuals(net, aux, t), Y)
            violations += not rep.holds
            if rep.rhs > 0:
                ratios[t].append(rep.lhs / rep.rhs)
    print(f"violations: {violations}")
    print(f"{'scale':>7}{'median lhs/rhs':>16}{'max lhs/rhs':>13}")
    for t in scales:
        r = np.array(ratios[t])
        print(f"{t:>7g}{np.median(r):>16.2e}{r.max():>13.2e}")


if __name__ == "__main__":
    main()
