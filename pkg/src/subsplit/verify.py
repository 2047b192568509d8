"""Independent numerical checks of the update rules and the approximation bound.

None of the oracles here call the code path they check: gradients are
compared against central differences of the objectives, the closed-form
q-step against a ternary search, and the bound against exact loss gaps.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .data import Dataset, synthetic_blobs
from .network import (Activation, DenseLayer, LossKind, NetworkSpec, Subnetwork, build_mlp,
                      composed_forward, forward, lipschitz_upper_bound, loss_value,
                      min_abs_preactivation)
from .optim import (AuxState, EpochMode, Hyperparams, InnerOpt, Mode, TrainState,
                    augmented_lagrangian, baseline_epoch, gsadmm_epoch, gsam_epoch, init_aux,
                    objective_F)
from .optim.updates import (grad_p_gsadmm, grad_p_gsam, hidden_weight_grads, last_weight_grads,
                            update_duals, update_p_gsadmm, update_q_closed_form)
from .tensor import RngState, frobenius_sq, gather_rows


class EvaluationError(FloatingPointError):
    pass


# ---------------------------------------------------------------- gradient check

def grad_check(fn: Callable[[np.ndarray], float], x, grad, step: float = 1e-5,
               max_coords: int = 64, rng: RngState | None = None) -> float:
    """Max relative error between ``grad`` and central differences of ``fn`` at ``x``.

    Every coordinate is probed when ``x`` has at most ``max_coords`` entries,
    otherwise ``max_coords`` random unit directions are. The error of a
    probe is ``|analytic - numeric| / max(1, |numeric|)``.
    """
    x = np.array(x, dtype=np.float64)
    grad = np.asarray(grad, dtype=np.float64).reshape(x.shape)
    f0 = fn(x)
    if not np.isfinite(f0):
        raise EvaluationError("objective is not finite at the check point")
    if x.size <= max_coords:
        dirs = (np.eye(x.size)[i].reshape(x.shape) for i in range(x.size))
    else:
        rng = rng or RngState(0)
        dirs = []
        for _ in range(max_coords):
            v = rng.normal(x.shape)
            dirs.append(v / np.linalg.norm(v))
    worst = 0.0
    for v in dirs:
        fp, fm = fn(x + step * v), fn(x - step * v)
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise EvaluationError("objective is not finite near the check point")
        numeric = (fp - fm) / (2.0 * step)
        analytic = float(np.vdot(grad, v))
        worst = max(worst, abs(analytic - numeric) / max(1.0, abs(numeric)))
    return worst


# ---------------------------------------------------------------- q-step oracle

def q_argmin_oracle(f: float, p_next: float, u: float, alpha: float, rho: float, m: float,
                    tol: float = 1e-10) -> float:
    """Minimize ``(alpha/2m)(q-f)^2 + u(p_next-q) + (rho/2)(p_next-q)^2`` by ternary search."""
    def diff(a, b):
        # phi(a) - phi(b), factored so that nearby points still compare exactly
        s = a + b
        return (a - b) * (alpha / (2 * m) * (s - 2 * f) - u + 0.5 * rho * (s - 2 * p_next))

    # the minimizer of a sum of two convex quadratics lies between their minimizers
    c = 0.5 * (f + p_next)
    w = abs(f - p_next) + abs(u) / rho + 1.0
    lo, hi = c - w, c + w
    while hi - lo > tol * max(1.0, abs(lo), abs(hi)):
        a = lo + (hi - lo) / 3.0
        b = hi - (hi - lo) / 3.0
        if diff(a, b) < 0:
            hi = b
        else:
            lo = a
        if not a < b:
            break
    return 0.5 * (lo + hi)


def q_sweep(n: int = 1000, seed: int = 0) -> float:
    """Max gap between the closed-form q-step and the ternary-search argmin."""
    rng = RngState(seed)
    worst = 0.0
    for _ in range(n):
        f, p, u = rng.uniform(-5.0, 5.0, 3)
        alpha, rho = rng.uniform(0.1, 10.0, 2)
        m = float(rng.integers(1, 201))
        hp = Hyperparams(alpha=alpha, rho=rho)
        sub = _scalar_identity_sub()
        closed = update_q_closed_form(sub, [[f]], [[p]], [[u]], hp, m)[0, 0]
        worst = max(worst, abs(q_argmin_oracle(f, p, u, alpha, rho, m) - closed))
    return worst


def _scalar_identity_sub(w: float = 1.0) -> Subnetwork:
    return Subnetwork((DenseLayer([[w]], [0.0], Activation.IDENTITY),))


# ---------------------------------------------------------------- random instances

def random_network(rng: RngState, n: int, max_width: int = 8, d_in: int | None = None,
                   c: int | None = None, loss: LossKind = LossKind.SOFTMAX_CROSS_ENTROPY,
                   max_layers_per_sub: int = 2) -> NetworkSpec:
    n_layers = sum(int(rng.integers(1, max_layers_per_sub + 1)) for _ in range(n))
    widths = [int(w) for w in rng.integers(2, max_width + 1, n_layers + 1)]
    if d_in is not None:
        widths[0] = d_in
    if c is not None:
        widths[-1] = c
    net = build_mlp(widths, rng, n=n, loss=loss)
    # nonzero biases keep pre-activations away from exact ties
    subs = []
    for sub in net.subnetworks:
        params = [(W, rng.uniform(-0.5, 0.5, b.shape)) for W, b in sub.params()]
        subs.append(sub.with_params(params))
    return NetworkSpec(tuple(subs), net.loss, net.split_at)


def random_labels(rng: RngState, M: int, c: int, loss: LossKind) -> np.ndarray:
    if LossKind(loss) is LossKind.LEAST_SQUARES:
        return rng.normal((M, c))
    Y = np.zeros((M, c))
    Y[np.arange(M), rng.integers(0, c, M)] = 1.0
    return Y


def random_aux(net: NetworkSpec, rng: RngState, M: int, mode: Mode, noise: float = 0.3) -> AuxState:
    """Warm-started state with every free block perturbed."""
    aux = init_aux(net, rng.uniform(0.0, 1.0, (M, net.d_in)), mode)
    p = [aux.p[0]] + [v + noise * rng.normal(v.shape) for v in aux.p[1:]]
    q = [v + noise * rng.normal(v.shape) for v in aux.q]
    u = [noise * rng.normal(v.shape) for v in aux.u]
    return aux.with_lists(p=p, q=q, u=u)


def _clear_of_kinks(net: NetworkSpec, aux: AuxState, margin: float) -> bool:
    return all(min_abs_preactivation(sub, aux.p[l]) > margin
               for l, sub in enumerate(net.subnetworks))


def _param_vector(sub: Subnetwork) -> np.ndarray:
    return np.concatenate([np.concatenate([W.ravel(), b.ravel()]) for W, b in sub.params()])


def _sub_from_vector(sub: Subnetwork, vec: np.ndarray) -> Subnetwork:
    params, i = [], 0
    for W, b in sub.params():
        nW, nb = W.size, b.size
        params.append((vec[i:i + nW].reshape(W.shape), vec[i + nW:i + nW + nb].copy()))
        i += nW + nb
    return sub.with_params(params)


def _grads_vector(grads) -> np.ndarray:
    return np.concatenate([np.concatenate([dW.ravel(), db.ravel()]) for dW, db in grads])


# ---------------------------------------------------------------- gradient sweep

@dataclass
class GradSweepResult:
    max_error: float
    per_block: dict[str, float] = field(default_factory=dict)
    instances: int = 0


def gradient_sweep(instances: int = 50, seed: int = 1, max_width: int = 8, max_n: int = 4,
                   margin: float = 1e-4) -> GradSweepResult:
    """Analytic W- and p-gradients of both algorithms against central differences.

    Each instance draws a network with ``n`` in ``1..max_n`` subnetworks, a
    perturbed auxiliary state and a batch; instances with a ReLU
    pre-activation within ``margin`` of zero are redrawn.
    """
    rng = RngState(seed)
    result = GradSweepResult(0.0)

    def record(key, err):
        result.per_block[key] = max(result.per_block.get(key, 0.0), err)
        result.max_error = max(result.max_error, err)

    done = 0
    while done < instances:
        n = int(rng.integers(1, max_n + 1))
        loss = LossKind.SOFTMAX_CROSS_ENTROPY if done % 2 == 0 else LossKind.LEAST_SQUARES
        net = random_network(rng, n, max_width, loss=loss)
        M = int(rng.integers(3, 9))
        Y = random_labels(rng, M, net.d_out, loss)
        hp = Hyperparams(alpha=float(rng.uniform(0.5, 2.0)), rho=float(rng.uniform(0.5, 2.0)),
                         batch_size=M)
        admm = random_aux(net, rng, M, Mode.GSADMM)
        am = random_aux(net, rng, M, Mode.GSAM)
        if not (_clear_of_kinks(net, admm, margin) and _clear_of_kinks(net, am, margin)):
            continue
        b = int(rng.integers(1, M + 1))
        idx = np.sort(rng.choice(M, b))
        for name, aux, objective in (("gsadmm", admm, augmented_lagrangian), ("gsam", am, objective_F)):
            for l, sub in enumerate(net.subnetworks):
                P = gather_rows(aux.p[l], idx)
                if l == n - 1:
                    grads = last_weight_grads(sub, P, gather_rows(Y, idx), net.loss)
                else:
                    T = aux.q[l] if name == "gsadmm" else aux.p[l + 1]
                    grads = hidden_weight_grads(sub, P, gather_rows(T, idx), hp.alpha, b)

                def f_w(vec, l=l, sub=sub, aux=aux, objective=objective):
                    return objective(net.with_subnetwork(l, _sub_from_vector(sub, vec)), aux, hp, idx, Y)

                record(f"{name}:W", grad_check(f_w, _param_vector(sub), _grads_vector(grads), rng=rng))
            for l in range(1, n):
                grad_fn = grad_p_gsadmm if name == "gsadmm" else grad_p_gsam
                g = grad_fn(net, aux, hp, idx, Y, l)

                def f_p(rows, l=l, aux=aux, objective=objective):
                    full = aux.p[l].copy()
                    full[idx] = rows
                    return objective(net, aux.replace_p(l, full), hp, idx, Y)

                record(f"{name}:p", grad_check(f_p, gather_rows(aux.p[l], idx), g, rng=rng))
        done += 1
    result.instances = done
    return result


# ---------------------------------------------------------------- approximation bound

@dataclass
class BoundReport:
    lhs: float
    rhs: float
    residual_norms: list[float]
    lipschitz: list[float]
    holds: bool


def loss_lipschitz(kind: LossKind, Z_a: np.ndarray, Z_b: np.ndarray, Y: np.ndarray,
                   inflate: float = 1.1) -> float:
    """Lipschitz constant of the mean loss in the logits, valid on the segment ``[Z_a, Z_b]``.

    Cross-entropy: every row gradient is ``(softmax - y)/b`` with norm at most
    ``sqrt(2)/b``, so the Frobenius bound is ``sqrt(2/b)`` everywhere.
    Least squares is only locally Lipschitz; its gradient norm
    ``||Z - Y||/b`` is convex, so its max over the segment sits at an end.
    """
    b = Z_a.shape[0]
    if LossKind(kind) is LossKind.SOFTMAX_CROSS_ENTROPY:
        return math.sqrt(2.0 / b)
    ends = max(math.sqrt(frobenius_sq(Z_a - Y)), math.sqrt(frobenius_sq(Z_b - Y)))
    return inflate * ends / b


def bound_rhs(residual_norms: Sequence[float], h_between: Sequence[float], h_last: float) -> float:
    """``h_last * sum_l ||r_l|| * prod_{j>l} h_j`` over the boundaries ``l = 0..n-2``.

    ``h_between[j]`` is the bound for subnetwork ``j``; only ``j = 1..n-2`` are used.
    """
    total = 0.0
    for l, r in enumerate(residual_norms):
        prod = 1.0
        for j in range(l + 1, len(residual_norms)):
            prod *= h_between[j]
        total += r * prod
    return h_last * total


def check_theorem1(net: NetworkSpec, aux: AuxState, Y, h_n_bound: float | None = None) -> BoundReport:
    """Compare the exact loss gap of the relaxation with its Lipschitz bound.

    The gap is ``|R(f_n(f_{n-1}(...f_1(p_1)))) - R(f_n(p_n))|`` over all rows
    of ``aux``. Residuals are ``r_l = p_{l+1} - f_l(p_l)`` (equal to
    ``q_l - f_l(p_l)`` whenever ``p_{l+1} = q_l``). ``h_n_bound`` is the
    Lipschitz constant of ``R`` in ``p_n``; by default it is the loss bound
    in the logits times the last subnetwork's bound.
    """
    Y = np.asarray(Y, dtype=np.float64)
    n = net.n
    if n == 1:
        return BoundReport(0.0, 0.0, [], [lipschitz_upper_bound(net.subnetworks[0])], True)
    last = net.subnetworks[-1]
    chained = composed_forward(net, aux.p[0], upto=n - 1)
    Z_a, Z_b = forward(last, chained), forward(last, aux.p[-1])
    lhs = abs(loss_value(net.loss, Z_a, Y) - loss_value(net.loss, Z_b, Y))
    residuals = [math.sqrt(frobenius_sq(aux.p[l + 1] - forward(net.subnetworks[l], aux.p[l])))
                 for l in range(n - 1)]
    H = [lipschitz_upper_bound(sub) for sub in net.subnetworks]
    if h_n_bound is None:
        h_n_bound = loss_lipschitz(net.loss, Z_a, Z_b, Y) * H[-1]
    H[-1] = h_n_bound
    rhs = bound_rhs(residuals, H, h_n_bound)
    return BoundReport(lhs, rhs, residuals, H, lhs <= rhs)


def scale_residuals(net: NetworkSpec, aux: AuxState, t: float) -> AuxState:
    """Rebuild the p-chain so that every residual ``p_{l+1} - f_l(p_l)`` is multiplied by ``t``."""
    p = [aux.p[0]]
    for l in range(net.n - 1):
        sub = net.subnetworks[l]
        r = aux.p[l + 1] - forward(sub, aux.p[l])
        p.append(forward(sub, p[l]) + t * r)
    return aux.with_lists(p=p)


@dataclass
class TheoremSweepResult:
    instances: int
    violations: int
    worst_ratio: float
    linearity_error: float


def theorem1_sweep(instances: int = 100, seed: int = 2, max_width: int = 8,
                   scales: Sequence[float] = (2.0, 10.0)) -> TheoremSweepResult:
    rng = RngState(seed)
    violations, worst_ratio, lin_err = 0, 0.0, 0.0
    for i in range(instances):
        n = int(rng.integers(2, 5))
        loss = LossKind.SOFTMAX_CROSS_ENTROPY if i % 2 == 0 else LossKind.LEAST_SQUARES
        net = random_network(rng, n, max_width, loss=loss)
        M = int(rng.integers(2, 17))
        Y = random_labels(rng, M, net.d_out, loss)
        noise = float(rng.uniform(0.01, 1.0))
        aux = random_aux(net, rng, M, Mode.GSAM, noise=noise)
        rep = check_theorem1(net, aux, Y)
        violations += not rep.holds
        if rep.rhs > 0:
            worst_ratio = max(worst_ratio, rep.lhs / rep.rhs)
        if loss is LossKind.SOFTMAX_CROSS_ENTROPY:
            for t in scales:
                scaled = check_theorem1(net, scale_residuals(net, aux, t), Y)
                violations += not scaled.holds
                lin_err = max(lin_err, abs(scaled.rhs - t * rep.rhs) / max(1.0, t * rep.rhs))
    return TheoremSweepResult(instances, violations, worst_ratio, lin_err)


# ---------------------------------------------------------------- algorithm reductions

def _blobs(seed: int, M: int = 240, d: int = 8, c: int = 3) -> Dataset:
    return synthetic_blobs(c, d, M // c, 4.0, RngState(seed))


def _weight_divergence(a: NetworkSpec, b: NetworkSpec) -> float:
    worst = 0.0
    for la, lb in zip(a.layers(), b.layers()):
        worst = max(worst, float(np.abs(la.W - lb.W).max()), float(np.abs(la.bias - lb.bias).max()))
    return worst


def check_sgd_reduction(seed: int, dataset: Dataset | None = None, depth: int = 3,
                        tau1: float = 100.0, epochs: int = 20, width: int = 16,
                        baseline_seed: int | None = None, batch_size: int = 32) -> float:
    """Largest weight gap between single-subnetwork gsAM and plain SGD over ``epochs``."""
    ds = dataset if dataset is not None else _blobs(seed)
    widths = [ds.inputs.shape[1]] + [width] * (depth - 1) + [ds.n_classes]
    net = build_mlp(widths, RngState(seed + 1), n=1)
    hp = Hyperparams(tau1=tau1, batch_size=min(batch_size, ds.M), inner_opt=InnerOpt.SGD)
    aux = init_aux(net, ds.inputs, Mode.GSAM)
    split_net, base_net = net, net
    st_split = TrainState(RngState(seed))
    st_base = TrainState(RngState(seed if baseline_seed is None else baseline_seed))
    worst = 0.0
    for _ in range(epochs):
        split_net, aux, st_split, _ = gsam_epoch(split_net, aux, hp, st_split, ds.labels_onehot)
        base_net, _ = baseline_epoch(base_net, hp, st_base, ds.inputs, ds.labels_onehot,
                                     InnerOpt.SGD, lr=1.0 / tau1)
        worst = max(worst, _weight_divergence(split_net, base_net))
    return worst


def dual_residual_trend(iters: int = 30, dual_update: Callable = update_duals,
                        inner_steps: int = 500, seed: int = 3) -> list[float]:
    """Coupling gap ``||p_2 - q_1||`` per iteration on a tiny convex instance.

    Two scalar linear subnetworks with least-squares loss; the weights stay
    fixed, p is driven to its minimizer by repeated gradient steps, then q
    and u are updated over the full set.
    """
    rng = RngState(seed)
    net = NetworkSpec((_scalar_identity_sub(0.8), _scalar_identity_sub(1.5)), LossKind.LEAST_SQUARES)
    M = 4
    X = rng.uniform(0.0, 1.0, (M, 1))
    Y = rng.normal((M, 1))
    hp = Hyperparams(alpha=1.0, rho=1.0, tau1=1.0, tau2=2.0, batch_size=M)
    aux = init_aux(net, X, Mode.GSADMM)
    aux = aux.with_lists(q=[aux.q[0] + 1.0])
    idx = np.arange(M)
    gaps = []
    for _ in range(iters):
        for _ in range(inner_steps):
            aux = update_p_gsadmm(net, aux, hp, idx, Y)
        q = update_q_closed_form(net.subnetworks[0], aux.p[0], aux.p[1], aux.u[0], hp, M)
        u = dual_update(aux.u[0], aux.p[1], q, hp.rho)
        aux = aux.with_lists(q=[q], u=[u])
        gaps.append(math.sqrt(frobenius_sq(aux.p[1] - aux.q[0])))
    return gaps


@dataclass
class ProbeResult:
    split_loss: float
    baseline_loss: float
    relative_gap: float
    # split network predicts one class everywhere (or a constant distribution)
    degenerate: bool


def large_alpha_probe(seed: int = 0, alpha: float = 1e6, epochs: int = 50,
                      tau_scale: float = 100.0, width: int = 16, depth: int = 4,
                      batch_size: int = 32) -> ProbeResult:
    """Two-subnetwork gsADMM with a huge penalty versus SGD on the composed network.

    ``tau1 = tau2 = tau_scale * alpha`` keeps the penalty-driven steps at the
    size the default setting gives them; both runs see the same batches.
    """
    ds = _blobs(seed)
    widths = [ds.inputs.shape[1]] + [width] * (depth - 1) + [ds.n_classes]
    net = build_mlp(widths, RngState(seed + 1), n=2)
    base = build_mlp(widths, RngState(seed + 1), n=1)
    tau = tau_scale * alpha
    hp = Hyperparams(alpha=alpha, rho=1.0, tau1=tau, tau2=tau, batch_size=batch_size,
                     epoch_mode=EpochMode.SHUFFLE)
    hp_base = Hyperparams(batch_size=batch_size, epoch_mode=EpochMode.SHUFFLE)
    aux = init_aux(net, ds.inputs, Mode.GSADMM)
    st_split, st_base = TrainState(RngState(seed)), TrainState(RngState(seed))
    for _ in range(epochs):
        net, aux, st_split, _ = gsadmm_epoch(net, aux, hp, st_split, ds.labels_onehot)
        base, _ = baseline_epoch(base, hp_base, st_base, ds.inputs, ds.labels_onehot, InnerOpt.SGD)
    Z = composed_forward(net, ds.inputs)
    split_loss = loss_value(net.loss, Z, ds.labels_onehot)
    base_loss = loss_value(base.loss, composed_forward(base, ds.inputs), ds.labels_onehot)
    degenerate = len(np.unique(Z.argmax(1))) == 1 or float(np.ptp(Z, axis=0).max()) < 1e-6
    gap = abs(split_loss - base_loss) / max(abs(base_loss), 1e-300)
    return ProbeResult(split_loss, base_loss, gap, degenerate)


def is_nonincreasing(values: Sequence[float], atol: float = 1e-12) -> bool:
    return all(b <= a + atol for a, b in zip(values, values[1:]))


# ---------------------------------------------------------------- suite

@dataclass
class CheckResult:
    name: str
    value: float
    threshold: float
    passed: bool
    seconds: float
    detail: str = ""


def _timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


def _check_q():
    err, dt = _timed(lambda: q_sweep(1000))
    return CheckResult("q_argmin", err, 1e-8, err < 1e-8, dt, "1000 scalar instances")


def _check_grad():
    res, dt = _timed(lambda: gradient_sweep(50))
    detail = ", ".join(f"{k}={v:.1e}" for k, v in sorted(res.per_block.items()))
    return CheckResult("gradients", res.max_error, 1e-6, res.max_error < 1e-6, dt, detail)


def _check_theorem():
    res, dt = _timed(lambda: theorem1_sweep(100))
    ok = res.violations == 0 and res.linearity_error < 1e-9
    return CheckResult("theorem1", res.worst_ratio, 1.0, ok, dt,
                       f"violations={res.violations} linearity_err={res.linearity_error:.1e}")


def _check_reduction():
    err, dt = _timed(lambda: check_sgd_reduction(0, epochs=20))
    return CheckResult("sgd_reduction", err, 1e-12, err < 1e-12, dt, "n=1 gsAM vs SGD, 20 epochs")


def _check_duals(dual_update=update_duals):
    gaps, dt = _timed(lambda: dual_residual_trend(dual_update=dual_update))
    return CheckResult("dual_residual", gaps[-1], gaps[0], is_nonincreasing(gaps), dt,
                       f"start={gaps[0]:.2e} end={gaps[-1]:.2e}")


CHECKS: dict[str, Callable[[], CheckResult]] = {
    "q_argmin": _check_q,
    "gradients": _check_grad,
    "theorem1": _check_theorem,
    "sgd_reduction": _check_reduction,
    "dual_residual": _check_duals,
}


def run_suite(names: Sequence[str] | None = None,
              overrides: dict[str, Callable[[], CheckResult]] | None = None) -> list[CheckResult]:
    """Run the named checks (all of them by default, none for an empty list)."""
    table = dict(CHECKS, **(overrides or {}))
    names = list(table) if names is None else list(names)
    unknown = [n for n in names if n not in table]
    if unknown:
        raise ValueError(f"unknown checks {unknown}; available: {sorted(table)}")
    return [table[n]() for n in names]
