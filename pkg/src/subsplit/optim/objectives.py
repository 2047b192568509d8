"""Batch objectives of the relaxed training problem.

Everything is evaluated on the rows ``idx`` with ``b = len(idx)``. The
loss and the penalties are normalized by ``b``; the dual and quadratic
coupling terms are plain sums, which is what makes the closed-form q-step
with ``m = b`` an exact minimizer of the batch Lagrangian.
"""
from __future__ import annotations

import numpy as np

from ..network import NetworkSpec, Subnetwork, composed_forward, forward, loss_value
from ..tensor import DimensionError, frobenius_sq, gather_rows
from .state import AuxState, Hyperparams, Mode


def penalty_omega(sub: Subnetwork, P, Q, alpha: float, m_scale: float) -> float:
    out = forward(sub, P)
    if np.shape(Q) != out.shape:
        raise DimensionError(f"target {np.shape(Q)} does not match output {out.shape}")
    return alpha / (2.0 * m_scale) * frobenius_sq(np.asarray(Q) - out)


def _rows(aux: AuxState, idx):
    idx = np.arange(aux.M) if idx is None else np.asarray(idx)
    return idx, len(idx)


def augmented_lagrangian(net: NetworkSpec, aux: AuxState, hp: Hyperparams, idx, Y) -> float:
    if aux.mode is not Mode.GSADMM or len(aux.q) != net.n - 1 or len(aux.u) != net.n - 1:
        raise ValueError("augmented Lagrangian needs gsADMM auxiliary state (q and u)")
    idx, b = _rows(aux, idx)
    p = [gather_rows(v, idx) for v in aux.p]
    value = loss_value(net.loss, forward(net.subnetworks[-1], p[-1]), gather_rows(Y, idx))
    for l in range(net.n - 1):
        q = gather_rows(aux.q[l], idx)
        u = gather_rows(aux.u[l], idx)
        gap = p[l + 1] - q
        value += penalty_omega(net.subnetworks[l], p[l], q, hp.alpha, b)
        value += float(np.vdot(u, gap)) + 0.5 * hp.rho * frobenius_sq(gap)
    return value


def objective_F(net: NetworkSpec, aux: AuxState, hp: Hyperparams, idx, Y) -> float:
    idx, b = _rows(aux, idx)
    p = [gather_rows(v, idx) for v in aux.p]
    value = loss_value(net.loss, forward(net.subnetworks[-1], p[-1]), gather_rows(Y, idx))
    for l in range(net.n - 1):
        value += penalty_omega(net.subnetworks[l], p[l], p[l + 1], hp.alpha, b)
    return value


def composed_loss(net: NetworkSpec, X, Y) -> float:
    """Loss of the unsplit network ``f_n o ... o f_1`` on ``X``."""
    return loss_value(net.loss, composed_forward(net, X), Y)


def constraint_residual(net: NetworkSpec, aux: AuxState) -> float:
    """Largest RMS coupling gap over subnetwork boundaries.

    ``p[l+1] - q[l]`` in gsADMM mode, ``p[l+1] - f_l(p[l])`` in gsAM mode.
    """
    worst = 0.0
    for l in range(net.n - 1):
        nxt = aux.p[l + 1]
        other = aux.q[l] if aux.mode is Mode.GSADMM else forward(net.subnetworks[l], aux.p[l])
        worst = max(worst, np.sqrt(frobenius_sq(nxt - other) / nxt.size))
    return float(worst)
