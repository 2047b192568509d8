"""Training and benchmarking runs driven by a ``RunConfig``."""
from __future__ import annotations

import csv
import json
import logging
import statistics
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from threadpoolctl import threadpool_limits

from .data import IDX_NAMES, Dataset, data_root, load_named, synthetic_blobs, train_test_split
from .network import LossKind, build_mlp
from .optim import (ADAM_LR, SGD_LR, EpochMode, Hyperparams, InnerOpt, Mode, TrainState,
                    augmented_lagrangian, baseline_epoch, constraint_residual, evaluate,
                    gsadmm_epoch, gsam_epoch, init_aux, objective_F)
from .runtime import PhaseRunner, default_workers
from .tensor import RngState

log = logging.getLogger(__name__)

METHODS = ("sgd", "adam", "gsadmm", "gsam")
DATASETS = IDX_NAMES + ("blobs",)
METRIC_FIELDS = ("epoch", "wall_s", "train_loss", "train_acc", "test_acc", "residual",
                 "objective", "phase_w_s", "phase_p_s", "phase_q_s", "phase_u_s")
TIME_FIELDS = ("wall_s", "phase_w_s", "phase_p_s", "phase_q_s", "phase_u_s")
BENCH_FIELDS = ("config", "method", "splits", "workers", "epochs", "mean_epoch_s",
                "std_epoch_s", "speedup", "final_train_loss", "final_train_acc")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    method: str = "gsadmm"
    splits: int = 2
    widths: tuple[int, ...] = (64, 64, 64, 64, 64, 64)
    split_at: tuple[int, ...] | None = None
    dataset: str = "blobs"
    data_root: str | None = None
    blob_classes: int = 4
    blob_dim: int = 20
    blob_train: int = 2000
    blob_test: int = 500
    blob_separation: float = 6.0
    epochs: int = 100
    seed: int = 0
    alpha: float = 1.0
    rho: float = 1.0
    tau1: float = 100.0
    tau2: float = 100.0
    batch: int = 120
    inner_opt: str = "sgd"
    epoch_mode: str = "single"
    lr: float | None = None
    workers: int | None = None
    out: str = "metrics.csv"

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.dataset not in DATASETS:
            raise ConfigError(f"dataset must be one of {DATASETS}, got {self.dataset!r}")
        if self.splits < 1:
            raise ConfigError("splits must be >= 1")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        self.widths = tuple(int(w) for w in self.widths)
        n_layers = len(self.widths) + 1
        if self.splits > n_layers:
            raise ConfigError(f"{n_layers} layers cannot form {self.splits} subnetworks")
        if self.split_at is not None:
            self.split_at = tuple(int(s) for s in self.split_at)
            valid = list(range(1, n_layers))
            if len(self.split_at) != self.splits - 1 or any(s not in valid for s in self.split_at):
                raise ConfigError(f"split points {list(self.split_at)} invalid; need "
                                  f"{self.splits - 1} distinct layer boundaries from {valid}")

    def hyperparams(self) -> Hyperparams:
        return Hyperparams(alpha=self.alpha, rho=self.rho, tau1=self.tau1, tau2=self.tau2,
                           batch_size=self.batch, inner_opt=InnerOpt(self.inner_opt),
                           epoch_mode=EpochMode(self.epoch_mode))


@dataclass
class MetricsRow:
    epoch: int
    wall_s: float
    train_loss: float
    train_acc: float
    test_acc: float
    residual: float
    objective: float
    phase_w_s: float = 0.0
    phase_p_s: float = 0.0
    phase_q_s: float = 0.0
    phase_u_s: float = 0.0

    def as_csv(self) -> list[str]:
        return [str(self.epoch)] + [format(getattr(self, f), ".17g") for f in METRIC_FIELDS[1:]]


def load_data(cfg: RunConfig) -> tuple[Dataset, Dataset]:
    if cfg.dataset == "blobs":
        total = cfg.blob_train + cfg.blob_test
        per_class = -(-total // cfg.blob_classes)
        ds = synthetic_blobs(cfg.blob_classes, cfg.blob_dim, per_class, cfg.blob_separation,
                             RngState(cfg.seed))
        rng = RngState(cfg.seed).spawn(3)
        train, test = train_test_split(ds, cfg.blob_train / ds.M, rng, stratified=True)
        return train, test
    root = data_root(cfg.data_root)
    return load_named(root, cfg.dataset, "train"), load_named(root, cfg.dataset, "test")


@dataclass
class Trainer:
    """Holds the evolving network, auxiliary state and RNG of one run."""
    cfg: RunConfig
    train: Dataset
    runner: PhaseRunner
    hp: Hyperparams = field(init=False)

    def __post_init__(self):
        cfg = self.cfg
        self.hp = cfg.hyperparams()
        self.hp.check_samples(self.train.M)
        widths = [self.train.inputs.shape[1], *cfg.widths, self.train.n_classes]
        base = RngState(cfg.seed)
        self.net = build_mlp(widths, base.spawn(1), n=cfg.splits, split_at=cfg.split_at,
                             loss=LossKind.SOFTMAX_CROSS_ENTROPY)
        self.state = TrainState(base.spawn(2))
        self.aux = None
        if cfg.method in ("gsadmm", "gsam"):
            self.aux = init_aux(self.net, self.train.inputs, Mode(cfg.method))

    def epoch(self):
        cfg, Y = self.cfg, self.train.labels_onehot
        if cfg.method in ("gsadmm", "gsam"):
            epoch = gsadmm_epoch if cfg.method == "gsadmm" else gsam_epoch
            self.net, self.aux, _, t = epoch(self.net, self.aux, self.hp, self.state, Y, self.runner)
        else:
            lr = cfg.lr if cfg.lr is not None else (SGD_LR if cfg.method == "sgd" else ADAM_LR)
            self.net, t = baseline_epoch(self.net, self.hp, self.state, self.train.inputs, Y,
                                         InnerOpt(cfg.method), lr, self.runner)
        return t

    def objective(self, train_loss: float) -> float:
        Y = self.train.labels_onehot
        if self.cfg.method == "gsadmm":
            return augmented_lagrangian(self.net, self.aux, self.hp, None, Y)
        if self.cfg.method == "gsam":
            return objective_F(self.net, self.aux, self.hp, None, Y)
        return train_loss

    def residual(self) -> float:
        return constraint_residual(self.net, self.aux) if self.aux is not None else 0.0


def _workers(cfg: RunConfig) -> int:
    return cfg.workers if cfg.workers is not None else default_workers(cfg.splits)


def run_train(cfg: RunConfig, data: tuple[Dataset, Dataset] | None = None) -> list[MetricsRow]:
    """Train for ``cfg.epochs`` epochs, writing one CSV row per epoch to ``cfg.out``.

    A JSON summary of the run lands next to it in ``<out>.summary.json``.
    """
    train, test = data if data is not None else load_data(cfg)
    rows: list[MetricsRow] = []
    out = Path(cfg.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with PhaseRunner(_workers(cfg)) as runner, open(out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(METRIC_FIELDS)
        trainer = Trainer(cfg, train, runner)
        for k in range(1, cfg.epochs + 1):
            t = trainer.epoch()
            loss, acc = evaluate(trainer.net, train.inputs, train.labels_onehot)
            test_acc = evaluate(trainer.net, test.inputs, test.labels_onehot)[1] if test.M else 0.0
            ph = t.phases
            row = MetricsRow(k, t.total, loss, acc, test_acc, trainer.residual(),
                             trainer.objective(loss), ph.get("w", 0.0), ph.get("p", 0.0),
                             ph.get("q", 0.0), ph.get("u", 0.0))
            rows.append(row)
            writer.writerow(row.as_csv())
            fh.flush()
            log.debug("epoch %d loss %.4f acc %.4f", k, loss, acc)
    summary = {"config": asdict(cfg), "epochs": len(rows),
               "final": asdict(rows[-1]), "mean_epoch_s": statistics.fmean(r.wall_s for r in rows)}
    Path(str(out) + ".summary.json").write_text(json.dumps(summary, indent=2))
    log.info("%s n=%d: final train acc %.4f, test acc %.4f, loss %.4f",
             cfg.method, cfg.splits, rows[-1].train_acc, rows[-1].test_acc, rows[-1].train_loss)
    return rows


def read_metrics(path) -> list[dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def numeric_columns(rows: list[dict[str, str]]) -> list[tuple[str, ...]]:
    """Metric rows with the wall-clock columns dropped."""
    keep = [f for f in METRIC_FIELDS if f not in TIME_FIELDS]
    return [tuple(r[f] for f in keep) for r in rows]


# ---------------------------------------------------------------- benchmarking

BENCH_KEYS = {"method", "splits", "split_at", "workers", "out"}


def check_comparable(configs: list[RunConfig]):
    if len(configs) < 2:
        raise ConfigError("bench needs at least two configurations")
    ref = configs[0]
    for cfg in configs[1:]:
        diff = [f.name for f in fields(RunConfig)
                if f.name not in BENCH_KEYS and getattr(cfg, f.name) != getattr(ref, f.name)]
        if diff:
            raise ConfigError(f"configurations differ beyond method/splits/workers: {diff}")


@dataclass
class BenchResult:
    label: str
    cfg: RunConfig
    epoch_times: list[float]
    final_loss: float
    final_acc: float
    phases: dict[str, float]

    @property
    def mean(self) -> float:
        return statistics.fmean(self.epoch_times)

    @property
    def std(self) -> float:
        return statistics.stdev(self.epoch_times) if len(self.epoch_times) > 1 else 0.0


def bench_config(cfg: RunConfig, data: tuple[Dataset, Dataset], epochs: int = 20,
                 warmup: int = 3, blas_threads: int | None = 1) -> BenchResult:
    """Time ``epochs`` training epochs after ``warmup`` untimed ones."""
    train = data[0]
    times = []
    with threadpool_limits(blas_threads), PhaseRunner(_workers(cfg)) as runner:
        trainer = Trainer(cfg, train, runner)
        phases: dict[str, float] = {}
        for k in range(warmup + epochs):
            t = trainer.epoch()
            if k >= warmup:
                times.append(t.total)
                for name, sec in t.phases.items():
                    phases[name] = phases.get(name, 0.0) + sec / epochs
    loss, acc = evaluate(trainer.net, train.inputs, train.labels_onehot)
    label = f"{cfg.method}/n={cfg.splits}/w={_workers(cfg)}"
    return BenchResult(label, cfg, times, loss, acc, phases)


def run_bench(configs: list[RunConfig], epochs: int = 20, warmup: int = 3,
              out: str | None = None, data: tuple[Dataset, Dataset] | None = None,
              blas_threads: int | None = 1) -> list[BenchResult]:
    """Mean/stddev epoch time per configuration and speedup against the first."""
    check_comparable(configs)
    if epochs < 1:
        raise ConfigError("bench needs at least one timed epoch")
    data = data if data is not None else load_data(configs[0])
    results = [bench_config(c, data, epochs, warmup, blas_threads) for c in configs]
    if out is not None:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(BENCH_FIELDS)
            for r in results:
                w.writerow([r.label, r.cfg.method, r.cfg.splits, _workers(r.cfg), len(r.epoch_times),
                            format(r.mean, ".6g"), format(r.std, ".6g"),
                            format(r.mean / results[0].mean, ".6g"),
                            format(r.final_loss, ".17g"), format(r.final_acc, ".17g")])
    return results

