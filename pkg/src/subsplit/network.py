"""Fully connected ReLU subnetworks, their vector-Jacobian products and losses.

A layer maps a batch ``X`` (rows are samples) to ``act(X @ W.T + bias)``
with ``W`` stored as ``d_out x d_in``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .tensor import DTYPE, DimensionError, RngState, as_tensor


class Activation(str, enum.Enum):
    RELU = "relu"
    IDENTITY = "identity"


class LossKind(str, enum.Enum):
    SOFTMAX_CROSS_ENTROPY = "softmax_cross_entropy"
    LEAST_SQUARES = "least_squares"


@dataclass(frozen=True)
class DenseLayer:
    W: np.ndarray
    bias: np.ndarray
    activation: Activation = Activation.RELU

    def __post_init__(self):
        W = as_tensor(self.W, 2)
        bias = as_tensor(self.bias, 1)
        if W.shape[0] < 1 or W.shape[1] < 1:
            raise DimensionError(f"layer extents must be >= 1, got {W.shape}")
        if bias.shape != (W.shape[0],):
            raise DimensionError(f"bias {bias.shape} does not match W {W.shape}")
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "bias", bias)
        object.__setattr__(self, "activation", Activation(self.activation))

    @property
    def d_in(self) -> int:
        return self.W.shape[1]

    @property
    def d_out(self) -> int:
        return self.W.shape[0]

    @property
    def n_params(self) -> int:
        return self.W.size + self.bias.size


@dataclass(frozen=True)
class Subnetwork:
    layers: tuple[DenseLayer, ...]

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise DimensionError("a subnetwork needs at least one layer")
        for a, b in zip(layers, layers[1:]):
            if a.d_out != b.d_in:
                raise DimensionError(
                    f"consecutive layers do not chain: {a.W.shape} then {b.W.shape}"
                )
        object.__setattr__(self, "layers", layers)

    @property
    def d_in(self) -> int:
        return self.layers[0].d_in

    @property
    def d_out(self) -> int:
        return self.layers[-1].d_out

    @property
    def n_params(self) -> int:
        return sum(layer.n_params for layer in self.layers)

    def params(self) -> list[tuple[np.ndarray, np.ndarray]]:
        return [(layer.W, layer.bias) for layer in self.layers]

    def with_params(self, params: Sequence[tuple[np.ndarray, np.ndarray]]) -> "Subnetwork":
        if len(params) != len(self.layers):
            raise DimensionError("parameter list length does not match layer count")
        layers = []
        for layer, (W, b) in zip(self.layers, params):
            if W.shape != layer.W.shape or b.shape != layer.bias.shape:
                raise DimensionError("replacement parameters change layer shapes")
            layers.append(replace(layer, W=W, bias=b))
        return Subnetwork(tuple(layers))


@dataclass(frozen=True)
class NetworkSpec:
    subnetworks: tuple[Subnetwork, ...]
    loss: LossKind = LossKind.SOFTMAX_CROSS_ENTROPY
    # index of the first global layer in each subnetwork, for reporting only
    split_at: tuple[int, ...] = field(default=())

    def __post_init__(self):
        subs = tuple(self.subnetworks)
        if not subs:
            raise DimensionError("a network needs at least one subnetwork")
        for a, b in zip(subs, subs[1:]):
            if a.d_out != b.d_in:
                raise DimensionError(
                    f"adjacent subnetworks do not chain: {a.d_out} -> {b.d_in}"
                )
        object.__setattr__(self, "subnetworks", subs)
        object.__setattr__(self, "loss", LossKind(self.loss))

    @property
    def n(self) -> int:
        return len(self.subnetworks)

    @property
    def d_in(self) -> int:
        return self.subnetworks[0].d_in

    @property
    def d_out(self) -> int:
        return self.subnetworks[-1].d_out

    def with_subnetwork(self, l: int, sub: Subnetwork) -> "NetworkSpec":
        subs = list(self.subnetworks)
        subs[l] = sub
        return replace(self, subnetworks=tuple(subs))

    def layers(self) -> list[DenseLayer]:
        return [layer for sub in self.subnetworks for layer in sub.layers]


# ---------------------------------------------------------------- construction

def init_layer(d_in: int, d_out: int, rng: RngState,
               activation: Activation = Activation.RELU) -> DenseLayer:
    limit = math.sqrt(6.0 / (d_in + d_out))
    W = rng.uniform(-limit, limit, (d_out, d_in))
    return DenseLayer(W, np.zeros(d_out, dtype=DTYPE), activation)


def balanced_split_points(param_counts: Sequence[int], n: int) -> list[int]:
    """Cut points giving ``n`` contiguous groups with the smallest max parameter count.

    Returns the layer index at which each group after the first starts.
    """
    L = len(param_counts)
    if not 1 <= n <= L:
        raise ValueError(f"cannot split {L} layers into {n} groups")
    prefix = np.concatenate([[0], np.cumsum(param_counts)])
    INF = float("inf")
    # best[k][j]: minimal max-group cost splitting the first j layers into k groups
    best = [[INF] * (L + 1) for _ in range(n + 1)]
    arg = [[0] * (L + 1) for _ in range(n + 1)]
    best[0][0] = 0.0
    for k in range(1, n + 1):
        for j in range(k, L + 1):
            for i in range(k - 1, j):
                cost = max(best[k - 1][i], prefix[j] - prefix[i])
                if cost < best[k][j]:
                    best[k][j], arg[k][j] = cost, i
    cuts, j = [], L
    for k in range(n, 0, -1):
        j = arg[k][j]
        cuts.append(j)
    return sorted(cuts)[1:]


def build_mlp(widths: Sequence[int], rng: RngState, n: int = 1,
              split_at: Sequence[int] | None = None,
              loss: LossKind = LossKind.SOFTMAX_CROSS_ENTROPY) -> NetworkSpec:
    """Dense network ``widths[0] -> ... -> widths[-1]`` cut into ``n`` subnetworks.

    Hidden layers use ReLU, the output layer is linear (logits).
    ``split_at`` lists global layer indices where new subnetworks begin;
    by default the cut balances parameter counts.
    """
    widths = [int(w) for w in widths]
    if len(widths) < 2:
        raise ValueError("need at least input and output widths")
    n_layers = len(widths) - 1
    layers = []
    for i in range(n_layers):
        act = Activation.IDENTITY if i == n_layers - 1 else Activation.RELU
        layers.append(init_layer(widths[i], widths[i + 1], rng, act))
    if split_at is None:
        split_at = balanced_split_points([layer.n_params for layer in layers], n)
    split_at = sorted(int(s) for s in split_at)
    valid = list(range(1, n_layers))
    if any(s not in valid for s in split_at) or len(set(split_at)) != len(split_at):
        raise ValueError(f"split points {split_at} must be distinct values in {valid}")
    if len(split_at) != n - 1:
        raise ValueError(f"{n} subnetworks need {n - 1} split points, got {split_at}")
    bounds = [0, *split_at, n_layers]
    subs = tuple(Subnetwork(tuple(layers[a:b])) for a, b in zip(bounds, bounds[1:]))
    return NetworkSpec(subs, loss, tuple(bounds[:-1]))


# ---------------------------------------------------------------- forward / vjp

def _check_in(sub: Subnetwork, P) -> np.ndarray:
    P = as_tensor(P, 2)
    if P.shape[1] != sub.d_in:
        raise DimensionError(f"input {P.shape} does not match subnetwork d_in={sub.d_in}")
    return P


def _forward_trace(sub: Subnetwork, P: np.ndarray):
    inputs, pre = [], []
    x = P
    for layer in sub.layers:
        inputs.append(x)
        z = x @ layer.W.T + layer.bias
        pre.append(z)
        x = np.maximum(z, 0.0) if layer.activation is Activation.RELU else z
    return x, inputs, pre


def forward(sub: Subnetwork, P) -> np.ndarray:
    return _forward_trace(sub, _check_in(sub, P))[0]


def composed_forward(net: NetworkSpec, X, upto: int | None = None) -> np.ndarray:
    """Output of subnetworks ``0..upto-1`` chained (all of them by default)."""
    x = as_tensor(X, 2)
    for sub in net.subnetworks[: net.n if upto is None else upto]:
        x = forward(sub, x)
    return x


def min_abs_preactivation(sub: Subnetwork, P) -> float:
    """Distance of the nearest ReLU pre-activation from its kink."""
    _, _, pre = _forward_trace(sub, _check_in(sub, P))
    vals = [np.abs(z).min() for z, layer in zip(pre, sub.layers)
            if layer.activation is Activation.RELU and z.size]
    return float(min(vals)) if vals else float("inf")


def vjp(sub: Subnetwork, P, G):
    """Pull ``G`` back through ``sub`` at ``P``.

    Returns ``(dP, [(dW, dbias), ...])``; ReLU derivative at 0 is taken as 0.
    """
    P = _check_in(sub, P)
    G = as_tensor(G, 2)
    if G.shape != (P.shape[0], sub.d_out):
        raise DimensionError(f"cotangent {G.shape} does not match output "
                             f"({P.shape[0]}, {sub.d_out})")
    _, inputs, pre = _forward_trace(sub, P)
    grads = [None] * len(sub.layers)
    g = G
    for i in range(len(sub.layers) - 1, -1, -1):
        layer = sub.layers[i]
        if layer.activation is Activation.RELU:
            g = g * (pre[i] > 0)
        grads[i] = (g.T @ inputs[i], g.sum(axis=0))
        g = g @ layer.W
    return g, grads


def vjp_input(sub: Subnetwork, P, G) -> np.ndarray:
    return vjp(sub, P, G)[0]


def vjp_weights(sub: Subnetwork, P, G) -> list[tuple[np.ndarray, np.ndarray]]:
    return vjp(sub, P, G)[1]


# ---------------------------------------------------------------- losses

def loss_and_grad(kind: LossKind, Z, Y) -> tuple[float, np.ndarray]:
    """Mean-over-rows loss and its gradient with respect to ``Z``."""
    Z = as_tensor(Z, 2)
    Y = as_tensor(Y, 2)
    if Z.shape != Y.shape:
        raise DimensionError(f"logits {Z.shape} and targets {Y.shape} differ")
    b = Z.shape[0]
    kind = LossKind(kind)
    if kind is LossKind.LEAST_SQUARES:
        diff = Z - Y
        return 0.5 * float(np.vdot(diff, diff)) / b, diff / b
    if not (np.all((Y == 0) | (Y == 1)) and np.all(Y.sum(axis=1) == 1)):
        raise ValueError("cross-entropy targets must be one-hot rows")
    shifted = Z - Z.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    logp = shifted - logsum
    loss = -float((logp * Y).sum()) / b
    return loss, (np.exp(logp) - Y) / b


def loss_value(kind: LossKind, Z, Y) -> float:
    return loss_and_grad(kind, Z, Y)[0]


# ---------------------------------------------------------------- Lipschitz

def spectral_norm(W, min_iter: int = 30, max_iter: int = 2000, rtol: float = 1e-10) -> float:
    """Largest singular value of ``W`` by power iteration on ``W.T @ W``."""
    W = as_tensor(W, 2)
    v = np.random.default_rng(0).standard_normal(W.shape[1])
    v /= np.linalg.norm(v)
    sigma = 0.0
    for it in range(max_iter):
        w = W.T @ (W @ v)
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            return 0.0
        v = w / nrm
        new = math.sqrt(nrm)
        if it >= min_iter and abs(new - sigma) <= rtol * new:
            sigma = new
            break
        sigma = new
    return sigma


def lipschitz_upper_bound(sub: Subnetwork, inflate: float = 1.001) -> float:
    """Product of inflated layer spectral norms; ReLU and identity are 1-Lipschitz."""
    h = 1.0
    for layer in sub.layers:
        h *= spectral_norm(layer.W) * inflate
    return h
