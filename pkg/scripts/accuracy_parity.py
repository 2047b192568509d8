"""Training accuracy of SGD, Adam, gsADMM and gsAM on synthetic blobs.

    python scripts/accuracy_parity.py --epochs 200 --epoch-mode shuffle --out runs/parity
"""
import argparse
from pathlib import Path

from subsplit.experiment import RunConfig, load_data, run_train

RUNS = (("sgd", 1), ("adam", 1), ("gsadmm", 2), ("gsam", 2))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--epochs", type=int, default=200)
    ap.add_argument("--epoch-mode", choices=("single", "shuffle"), default="shuffle")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default="runs/parity")
    args = ap.parse_args()

    out = Path(args.out)
    base = RunConfig(widths=(64,) * 6, blob_classes=4, blob_dim=20, blob_train=2000, blob_test=500,
                     epochs=args.epochs, seed=args.seed, epoch_mode=args.epoch_mode,
                     workers=args.workers)
    data = load_data(base)
    print(f"{'method':<8}{'n':>3}{'train_acc':>11}{'test_acc':>10}{'first>=95%':>12}")
    for method, splits in RUNS:
        cfg = RunConfig(**{**vars(base), "method": method, "splits": splits,
                           "out": str(out / f"{method}.csv")})
        rows = run_train(cfg, data)
        first = next((r.epoch for r in rows if r.train_acc >= 0.95), "-")
        print(f"{method:<8}{splits:>3}{rows[-1].train_acc:>11.4f}{rows[-1].test_acc:>10.4f}{first:>12}")


if __name__ == "__main__":
    main()
