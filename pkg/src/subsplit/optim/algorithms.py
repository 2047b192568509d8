"""Epoch drivers for gsADMM, gsAM and the backpropagation baselines."""
from __future__ import annotations

import numpy as np

from ..network import NetworkSpec, forward, loss_and_grad, loss_value, vjp
from ..runtime import PhaseRunner
from ..tensor import as_tensor, gather_rows, scatter_rows
from .state import AuxState, Hyperparams, InnerOpt, Mode, TrainState, epoch_batches
from .updates import (apply_step, p_rows_gsadmm, update_duals, update_p_gsam, update_q_closed_form,
                      update_weights)

SGD_LR = 1e-2
ADAM_LR = 1e-3


def _sequential() -> PhaseRunner:
    return PhaseRunner(1)


def _weight_phase(net: NetworkSpec, targets, inputs, Y_s, hp, state, runner) -> NetworkSpec:
    def task(l):
        sub = net.subnetworks[l]
        slot = state.adam.get(l)
        if l == net.n - 1:
            return update_weights(sub, inputs[l], Y_s, hp, slot, loss=net.loss)
        return update_weights(sub, inputs[l], targets[l], hp, slot)

    results = runner.run("w", [lambda l=l: task(l) for l in range(net.n)])
    for l, (sub, slot) in enumerate(results):
        net = net.with_subnetwork(l, sub)
        if slot is not None:
            state.adam[l] = slot
    return net


def gsadmm_step(net: NetworkSpec, aux: AuxState, hp: Hyperparams, state: TrainState,
                idx, Y, runner: PhaseRunner | None = None):
    """One pass of the gsADMM loop body on batch rows ``idx``.

    Phases run in order W, p, q, u; within a phase every subnetwork reads
    the snapshot left by the previous phase.
    """
    runner = runner or _sequential()
    idx = np.asarray(idx)
    b = len(idx)
    n = net.n
    inputs = [gather_rows(v, idx) for v in aux.p]
    targets = [gather_rows(v, idx) for v in aux.q]
    net = _weight_phase(net, targets, inputs, gather_rows(Y, idx), hp, state, runner)
    if n == 1:
        return net, aux

    snap = aux
    new_p_rows = runner.run(
        "p", [lambda l=l: p_rows_gsadmm(net, snap, hp, idx, Y, l) for l in range(1, n)],
        indices=range(1, n))
    p = [aux.p[0]] + [scatter_rows(aux.p[l], idx, r) for l, r in zip(range(1, n), new_p_rows)]
    p_rows = [inputs[0]] + new_p_rows

    def q_task(l):
        rows = update_q_closed_form(net.subnetworks[l], p_rows[l], p_rows[l + 1],
                                    gather_rows(aux.u[l], idx), hp, b)
        return rows, scatter_rows(aux.q[l], idx, rows)

    q_out = runner.run("q", [lambda l=l: q_task(l) for l in range(n - 1)])
    q_rows = [r for r, _ in q_out]
    q = [full for _, full in q_out]

    def u_task(l):
        rows = update_duals(gather_rows(aux.u[l], idx), p_rows[l + 1], q_rows[l], hp.rho)
        return scatter_rows(aux.u[l], idx, rows)

    u = runner.run("u", [lambda l=l: u_task(l) for l in range(n - 1)])
    return net, aux.with_lists(p=p, q=q, u=u)


def gsam_step(net: NetworkSpec, aux: AuxState, hp: Hyperparams, state: TrainState,
              idx, Y, runner: PhaseRunner | None = None):
    """One pass of the gsAM loop body: parallel W phase, then the ordered p sweep."""
    runner = runner or _sequential()
    idx = np.asarray(idx)
    inputs = [gather_rows(v, idx) for v in aux.p]
    net = _weight_phase(net, inputs[1:], inputs, gather_rows(Y, idx), hp, state, runner)
    if net.n > 1:
        aux = runner.run("p", [lambda: update_p_gsam(net, aux, hp, idx, Y)])[0]
    return net, aux


def _epoch(step, net, aux, hp, state, Y, runner):
    Y = as_tensor(Y, 2)
    runner = runner or _sequential()
    with runner.epoch_timer() as timings:
        for idx in epoch_batches(state.rng, aux.M, hp):
            net, aux = step(net, aux, hp, state, idx, Y, runner)
    state.k += 1
    return net, aux, state, timings


def gsadmm_epoch(net: NetworkSpec, aux: AuxState, hp: Hyperparams, state: TrainState,
                 Y, runner: PhaseRunner | None = None):
    """Returns ``(net, aux, state, timings)``; ``state`` is advanced in place."""
    if aux.mode is not Mode.GSADMM:
        raise ValueError("gsadmm_epoch needs gsADMM auxiliary state")
    return _epoch(gsadmm_step, net, aux, hp, state, Y, runner)


def gsam_epoch(net: NetworkSpec, aux: AuxState, hp: Hyperparams, state: TrainState,
               Y, runner: PhaseRunner | None = None):
    if aux.mode is not Mode.GSAM:
        raise ValueError("gsam_epoch needs gsAM auxiliary state")
    return _epoch(gsam_step, net, aux, hp, state, Y, runner)


# ---------------------------------------------------------------- baselines

def full_gradient(net: NetworkSpec, X, Y):
    """Backpropagation through the composed network.

    Returns ``(loss, grads)`` with ``grads[l]`` the per-layer gradients of
    subnetwork ``l``.
    """
    acts = [as_tensor(X, 2)]
    for sub in net.subnetworks:
        acts.append(forward(sub, acts[-1]))
    loss, g = loss_and_grad(net.loss, acts[-1], Y)
    grads = [None] * net.n
    for l in range(net.n - 1, -1, -1):
        g, grads[l] = vjp(net.subnetworks[l], acts[l], g)
    return loss, grads


def baseline_step(net: NetworkSpec, hp: Hyperparams, state: TrainState, X_s, Y_s,
                  opt: InnerOpt, lr: float) -> NetworkSpec:
    _, grads = full_gradient(net, X_s, Y_s)
    for l, sub in enumerate(net.subnetworks):
        new, slot = apply_step(sub, grads[l], hp, state.adam.get(l), lr=lr, opt=opt)
        if slot is not None:
            state.adam[l] = slot
        net = net.with_subnetwork(l, new)
    return net


def baseline_epoch(net: NetworkSpec, hp: Hyperparams, state: TrainState, X, Y,
                   opt: InnerOpt = InnerOpt.SGD, lr: float | None = None,
                   runner: PhaseRunner | None = None):
    """Mini-batch SGD or Adam on the unsplit network, same batch schedule as the splits.

    Returns ``(net, timings)``.
    """
    opt = InnerOpt(opt)
    lr = (SGD_LR if opt is InnerOpt.SGD else ADAM_LR) if lr is None else lr
    X = as_tensor(X, 2)
    Y = as_tensor(Y, 2)
    runner = runner or _sequential()
    with runner.epoch_timer() as timings:
        for idx in epoch_batches(state.rng, X.shape[0], hp):
            net = runner.run("w", [lambda idx=idx: baseline_step(
                net, hp, state, X[idx], Y[idx], opt, lr)])[0]
    state.k += 1
    return net, timings


def evaluate(net: NetworkSpec, X, Y) -> tuple[float, float]:
    """Loss and accuracy of the composed network; argmax ties go to the lowest class."""
    X = as_tensor(X, 2)
    Y = as_tensor(Y, 2)
    Z = X
    for sub in net.subnetworks:
        Z = forward(sub, Z)
    loss = loss_value(net.loss, Z, Y) if Z.shape[0] else 0.0
    acc = float(np.mean(np.argmax(Z, axis=1) == np.argmax(Y, axis=1))) if Z.shape[0] else 0.0
    return loss, acc

