"""Per-block updates of gsADMM and gsAM.

Index convention: subnetworks ``0..n-1``; ``p[l]`` feeds subnetwork ``l``;
``q[l]``/``u[l]`` live on the boundary between ``l`` and ``l+1``. All row
arguments are already restricted to the sampled batch.
"""
from __future__ import annotations

import numpy as np

from ..network import NetworkSpec, Subnetwork, forward, loss_and_grad, vjp, vjp_input
from ..tensor import DimensionError, as_tensor, gather_rows, scatter_rows
from .state import AdamSlot, AuxState, Hyperparams, InnerOpt


# ---------------------------------------------------------------- weights

def hidden_weight_grads(sub: Subnetwork, P, T, alpha: float, m_scale: float):
    """Gradient of ``alpha/(2m) * ||T - f(P)||^2`` with respect to the parameters."""
    out = forward(sub, P)
    if out.shape != np.shape(T):
        raise DimensionError(f"target {np.shape(T)} does not match output {out.shape}")
    return vjp(sub, P, (alpha / m_scale) * (out - T))[1]


def last_weight_grads(sub: Subnetwork, P, Y, loss) -> list:
    _, g = loss_and_grad(loss, forward(sub, P), Y)
    return vjp(sub, P, g)[1]


def sgd_step(params, grads, lr: float):
    return [(W - lr * dW, b - lr * db) for (W, b), (dW, db) in zip(params, grads)]


def adam_step(params, grads, slot: AdamSlot | None, lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
    if slot is None:
        zeros = [(np.zeros_like(W), np.zeros_like(b)) for W, b in params]
        slot = AdamSlot(0, zeros, [(a.copy(), c.copy()) for a, c in zeros])
    t = slot.t + 1
    new_params, new_m, new_v = [], [], []
    c1, c2 = 1.0 - beta1 ** t, 1.0 - beta2 ** t
    for (W, b), (dW, db), (mW, mb), (vW, vb) in zip(params, grads, slot.m, slot.v):
        pair_p, pair_m, pair_v = [], [], []
        for x, g, m, v in ((W, dW, mW, vW), (b, db, mb, vb)):
            m = beta1 * m + (1.0 - beta1) * g
            v = beta2 * v + (1.0 - beta2) * g * g
            pair_p.append(x - lr * (m / c1) / (np.sqrt(v / c2) + eps))
            pair_m.append(m)
            pair_v.append(v)
        new_params.append(tuple(pair_p))
        new_m.append(tuple(pair_m))
        new_v.append(tuple(pair_v))
    return new_params, AdamSlot(t, new_m, new_v)


def apply_step(sub: Subnetwork, grads, hp: Hyperparams, slot: AdamSlot | None,
               lr: float | None = None, opt: InnerOpt | None = None):
    """One SGD or Adam step of size ``lr`` (default ``1/tau1``)."""
    lr = 1.0 / hp.tau1 if lr is None else lr
    opt = hp.inner_opt if opt is None else InnerOpt(opt)
    if opt is InnerOpt.SGD:
        return sub.with_params(sgd_step(sub.params(), grads, lr)), slot
    new, slot = adam_step(sub.params(), grads, slot, lr,
                          hp.adam_beta1, hp.adam_beta2, hp.adam_eps)
    return sub.with_params(new), slot


def update_weights(sub: Subnetwork, P, T, hp: Hyperparams, slot: AdamSlot | None = None,
                   loss=None):
    """Inner-optimizer step for one subnetwork on its batch subproblem.

    With ``loss=None`` the subnetwork is hidden and ``T`` is its target
    (q rows for gsADMM, next p rows for gsAM); otherwise ``T`` holds labels.
    Returns ``(new_sub, new_slot)``.
    """
    b = np.shape(P)[0]
    if loss is None:
        grads = hidden_weight_grads(sub, P, T, hp.alpha, b)
    else:
        grads = last_weight_grads(sub, P, T, loss)
    return apply_step(sub, grads, hp, slot)


# ---------------------------------------------------------------- gsADMM

def _downstream_grad(net: NetworkSpec, l: int, p_l, target, Y_s, alpha, b):
    """Gradient w.r.t. ``p_l`` of the term that consumes it as an input."""
    sub = net.subnetworks[l]
    out = forward(sub, p_l)
    if l == net.n - 1:
        _, g = loss_and_grad(net.loss, out, Y_s)
    else:
        g = (alpha / b) * (out - target)
    return vjp_input(sub, p_l, g)


def grad_p_gsadmm(net: NetworkSpec, aux: AuxState, hp: Hyperparams, idx, Y, l: int) -> np.ndarray:
    """Batch gradient of the augmented Lagrangian w.r.t. ``p[l]`` rows (``l >= 1``)."""
    if l < 1:
        raise ValueError("p[0] holds the training inputs and cannot be updated")
    b = len(idx)
    p_l = gather_rows(aux.p[l], idx)
    target = gather_rows(aux.q[l], idx) if l < net.n - 1 else None
    Y_s = gather_rows(Y, idx) if l == net.n - 1 else None
    g = _downstream_grad(net, l, p_l, target, Y_s, hp.alpha, b)
    q_prev = gather_rows(aux.q[l - 1], idx)
    u_prev = gather_rows(aux.u[l - 1], idx)
    return g + u_prev + hp.rho * (p_l - q_prev)


def p_rows_gsadmm(net, aux, hp, idx, Y, l: int) -> np.ndarray:
    return gather_rows(aux.p[l], idx) - grad_p_gsadmm(net, aux, hp, idx, Y, l) / hp.tau2


def update_p_gsadmm(net: NetworkSpec, aux: AuxState, hp: Hyperparams, idx, Y) -> AuxState:
    """Gradient step on every ``p[l]``, ``l >= 1``, all read from the same snapshot."""
    p = list(aux.p)
    for l in range(1, net.n):
        p[l] = scatter_rows(aux.p[l], idx, p_rows_gsadmm(net, aux, hp, idx, Y, l))
    return aux.with_lists(p=p)


def update_q_closed_form(sub: Subnetwork, P, P_next, U, hp: Hyperparams, m_scale: float) -> np.ndarray:
    """Exact minimizer over q of ``Omega + u.(p_next - q) + rho/2 ||p_next - q||^2``."""
    f = forward(sub, P)
    P_next, U = as_tensor(P_next, 2), as_tensor(U, 2)
    if f.shape != np.shape(P_next) or f.shape != np.shape(U):
        raise DimensionError("q-update operands have inconsistent shapes")
    rm = hp.rho * m_scale
    return (hp.alpha * f + rm * P_next + m_scale * U) / (rm + hp.alpha)


def update_duals(U, P_next, Q, rho: float) -> np.ndarray:
    U, P_next, Q = as_tensor(U), as_tensor(P_next), as_tensor(Q)
    if U.shape != P_next.shape or U.shape != Q.shape:
        raise DimensionError("dual update operands have inconsistent shapes")
    return U + rho * (P_next - Q)


# ---------------------------------------------------------------- gsAM

def grad_p_gsam(net: NetworkSpec, aux: AuxState, hp: Hyperparams, idx, Y, l: int) -> np.ndarray:
    """Batch gradient of F w.r.t. ``p[l]`` rows (``l >= 1``) at the current ``aux``."""
    if l < 1:
        raise ValueError("p[0] holds the training inputs and cannot be updated")
    b = len(idx)
    p_l = gather_rows(aux.p[l], idx)
    upstream = forward(net.subnetworks[l - 1], gather_rows(aux.p[l - 1], idx))
    target = gather_rows(aux.p[l + 1], idx) if l < net.n - 1 else None
    Y_s = gather_rows(Y, idx) if l == net.n - 1 else None
    g = _downstream_grad(net, l, p_l, target, Y_s, hp.alpha, b)
    return (hp.alpha / b) * (p_l - upstream) + g


def update_p_gsam(net: NetworkSpec, aux: AuxState, hp: Hyperparams, idx, Y) -> AuxState:
    """Sweep ``l = 1..n-1`` in order; each step sees the already-updated ``p[l-1]``."""
    for l in range(1, net.n):
        rows = gather_rows(aux.p[l], idx) - grad_p_gsam(net, aux, hp, idx, Y, l) / hp.tau2
        aux = aux.replace_p(l, scatter_rows(aux.p[l], idx, rows))
    return aux
