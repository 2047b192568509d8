"""Does a huge penalty make the two-subnetwork split behave like the unsplit net?

    python scripts/large_alpha_probe.py --alpha 1 1e2 1e4 1e6
"""
import argparse

from subsplit.verify import large_alpha_probe


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--alpha", type=float, nargs="+", default=[1.0, 1e2, 1e4, 1e6])
    ap.add_argument("--tau-scale", type=float, default=100.0)
    ap.add_argument("--epochs", type=int, default=50)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    print(f"{'alpha':>8}{'split loss':>12}{'sgd loss':>10}{'rel gap':>9}  degenerate")
    for a in args.alpha:
        r = large_alpha_probe(args.seed, a, args.epochs, args.tau_scale)
        print(f"{a:>8g}{r.split_loss:>12.4f}{r.baseline_loss:>10.4f}{r.relative_gap:>9.3f}  {r.degenerate}")


if __name__ == "__main__":
    main()
