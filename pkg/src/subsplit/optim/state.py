from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

from ..network import NetworkSpec, forward
from ..tensor import DimensionError, RngState, as_tensor


class InnerOpt(str, enum.Enum):
    SGD = "sgd"
    ADAM = "adam"


class EpochMode(str, enum.Enum):
    # one sampled batch per epoch, as the algorithms are written
    SINGLE = "single"
    # a full shuffled pass in batches of batch_size
    SHUFFLE = "shuffle"


@dataclass(frozen=True)
class Hyperparams:
    alpha: float = 1.0
    rho: float = 1.0
    tau1: float = 100.0
    tau2: float = 100.0
    batch_size: int = 120
    inner_opt: InnerOpt = InnerOpt.SGD
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    epoch_mode: EpochMode = EpochMode.SINGLE

    def __post_init__(self):
        for name in ("alpha", "rho", "tau1", "tau2"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        object.__setattr__(self, "inner_opt", InnerOpt(self.inner_opt))
        object.__setattr__(self, "epoch_mode", EpochMode(self.epoch_mode))

    def check_samples(self, M: int):
        if self.batch_size > M:
            raise ValueError(f"batch_size {self.batch_size} exceeds training set size {M}")


class Mode(str, enum.Enum):
    GSADMM = "gsadmm"
    GSAM = "gsam"


@dataclass(frozen=True)
class AuxState:
    """Per-sample auxiliary variables over the full training set.

    ``p[l]`` is the input of subnetwork ``l`` (``p[0]`` is the data and
    never changes), ``q[l]`` its relaxed output and ``u[l]`` the dual of
    ``p[l+1] = q[l]``. In gsAM mode ``q`` and ``u`` are empty.
    """
    p: tuple[np.ndarray, ...]
    q: tuple[np.ndarray, ...] = ()
    u: tuple[np.ndarray, ...] = ()
    mode: Mode = Mode.GSADMM

    @property
    def M(self) -> int:
        return self.p[0].shape[0]

    def replace_p(self, l: int, value: np.ndarray) -> "AuxState":
        if l == 0:
            raise ValueError("p[0] holds the training inputs and cannot be updated")
        p = list(self.p)
        p[l] = value
        return replace(self, p=tuple(p))

    def with_lists(self, p=None, q=None, u=None) -> "AuxState":
        if p is not None and p[0] is not self.p[0] and not np.array_equal(p[0], self.p[0]):
            raise ValueError("p[0] holds the training inputs and cannot be updated")
        return replace(
            self,
            p=tuple(self.p if p is None else p),
            q=tuple(self.q if q is None else q),
            u=tuple(self.u if u is None else u),
        )


def init_aux(net: NetworkSpec, inputs, mode: Mode = Mode.GSADMM) -> AuxState:
    """Feasible warm start by chaining the subnetworks over the inputs."""
    x = as_tensor(inputs, 2)
    if x.shape[1] != net.d_in:
        raise DimensionError(f"inputs {x.shape} do not match network d_in={net.d_in}")
    x = x.copy()
    x.flags.writeable = False
    p, q = [x], []
    for sub in net.subnetworks[:-1]:
        out = forward(sub, p[-1])
        q.append(out)
        p.append(out.copy())
    mode = Mode(mode)
    if mode is Mode.GSAM:
        return AuxState(tuple(p), (), (), mode)
    u = [np.zeros_like(v) for v in q]
    return AuxState(tuple(p), tuple(q), tuple(u), mode)


@dataclass
class AdamSlot:
    t: int
    m: list[tuple[np.ndarray, np.ndarray]]
    v: list[tuple[np.ndarray, np.ndarray]]


@dataclass
class TrainState:
    rng: RngState
    k: int = 0
    # per-subnetwork Adam accumulators, keyed by subnetwork index
    adam: dict[int, AdamSlot] = field(default_factory=dict)


def sample_batch(rng: RngState, M: int, b: int) -> np.ndarray:
    """``b`` distinct row indices drawn uniformly without replacement."""
    if not 1 <= b <= M:
        raise ValueError(f"batch size {b} must lie in [1, {M}]")
    return rng.choice(M, b)


def epoch_batches(rng: RngState, M: int, hp: Hyperparams) -> list[np.ndarray]:
    hp.check_samples(M)
    if hp.epoch_mode is EpochMode.SINGLE:
        return [sample_batch(rng, M, hp.batch_size)]
    perm = rng.permutation(M)
    return [perm[i:i + hp.batch_size] for i in range(0, M, hp.batch_size)]
