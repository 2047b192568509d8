"""Command line: ``subsplit {train,verify,bench}``."""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import fields

from . import verify
from .experiment import DATASETS, METHODS, ConfigError, RunConfig, run_bench, run_train


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(t) for t in text.split(",") if t.strip())


def _add_run_args(p: argparse.ArgumentParser, out_default: str):
    d = RunConfig()
    p.add_argument("--method", choices=METHODS, default=d.method)
    p.add_argument("--splits", type=int, default=d.splits, help="number of subnetworks n")
    p.add_argument("--widths", type=_int_list, default=d.widths,
                   help="hidden layer widths, comma separated")
    p.add_argument("--split-at", type=_int_list, default=None,
                   help="layer indices where subnetworks 2..n begin (default: balanced)")
    p.add_argument("--dataset", choices=DATASETS, default=d.dataset)
    p.add_argument("--data-root", default=None,
                   help="directory holding <name>/{train,test}-{images,labels}.idx; "
                        "SUBSPLIT_DATA overrides it")
    p.add_argument("--blob-classes", type=int, default=d.blob_classes)
    p.add_argument("--blob-dim", type=int, default=d.blob_dim)
    p.add_argument("--blob-train", type=int, default=d.blob_train)
    p.add_argument("--blob-test", type=int, default=d.blob_test)
    p.add_argument("--blob-separation", type=float, default=d.blob_separation)
    p.add_argument("--epochs", type=int, default=d.epochs)
    p.add_argument("--seed", type=int, default=d.seed)
    p.add_argument("--alpha", type=float, default=d.alpha)
    p.add_argument("--rho", type=float, default=d.rho)
    p.add_argument("--tau1", type=float, default=d.tau1)
    p.add_argument("--tau2", type=float, default=d.tau2)
    p.add_argument("--batch", type=int, default=d.batch)
    p.add_argument("--inner-opt", choices=("sgd", "adam"), default=d.inner_opt,
                   help="weight optimizer inside gsADMM/gsAM")
    p.add_argument("--epoch-mode", choices=("single", "shuffle"), default=d.epoch_mode,
                   help="single: one sampled batch per epoch; shuffle: full pass")
    p.add_argument("--lr", type=float, default=None, help="baseline learning rate")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out", default=out_default)


def _config(args) -> RunConfig:
    names = {f.name for f in fields(RunConfig)}
    return RunConfig(**{k: v for k, v in vars(args).items() if k in names})


def _parse_variant(text: str) -> dict:
    allowed = {"method": str, "splits": int, "workers": int,
               "split_at": lambda s: _int_list(s.replace(":", ","))}
    out = {}
    for item in filter(None, text.split(",")):
        key, _, val = item.partition("=")
        key = key.strip().replace("-", "_")
        if key not in allowed:
            raise ConfigError(f"variant key {key!r} not allowed; use one of {sorted(allowed)}")
        out[key] = allowed[key](val.strip())
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="subsplit", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    tr = sub.add_parser("train", help="train one configuration, write per-epoch CSV metrics")
    _add_run_args(tr, "metrics.csv")

    ve = sub.add_parser("verify", help="run the numerical oracle suite")
    ve.add_argument("--only", default=None,
                    help=f"comma-separated subset of {','.join(verify.CHECKS)}; empty runs nothing")

    be = sub.add_parser("bench", help="compare epoch times across method/splits/workers")
    _add_run_args(be, "bench.csv")
    be.add_argument("--variant", action="append", default=[],
                    help="override like 'splits=2,workers=2' (repeatable); "
                         "the base flags form the first configuration")
    be.add_argument("--bench-epochs", type=int, default=20)
    be.add_argument("--warmup", type=int, default=3)
    be.add_argument("--blas-threads", type=int, default=1)
    return parser


def cmd_train(args) -> int:
    rows = run_train(_config(args))
    last = rows[-1]
    print(f"wrote {args.out}: {len(rows)} epochs, train_acc={last.train_acc:.4f} "
          f"test_acc={last.test_acc:.4f} loss={last.train_loss:.4f}")
    return 0


def cmd_verify(args) -> int:
    names = None if args.only is None else [s for s in args.only.split(",") if s.strip()]
    results = verify.run_suite(names)
    print(f"{'check':<15}{'value':>12}{'threshold':>12}{'seconds':>9}  status  detail")
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"{r.name:<15}{r.value:>12.3e}{r.threshold:>12.3e}{r.seconds:>9.2f}  {status}    {r.detail}")
    failed = [r.name for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return 1 if failed else 0


def cmd_bench(args) -> int:
    base = _config(args)
    configs = [base]
    for text in args.variant:
        configs.append(RunConfig(**{**vars(base), **_parse_variant(text)}))
    results = run_bench(configs, args.bench_epochs, args.warmup, args.out,
                        blas_threads=args.blas_threads)
    ref = results[0].mean
    for r in results:
        print(f"{r.label:<24} mean {r.mean:.4f}s  std {r.std:.4f}s  ratio {r.mean / ref:.3f}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return {"train": cmd_train, "verify": cmd_verify, "bench": cmd_bench}[args.command](args)
    except (ConfigError, FileNotFoundError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
