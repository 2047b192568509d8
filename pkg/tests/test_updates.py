import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import central_diff, rel_err, scalar_sub
from subsplit.network import LossKind, NetworkSpec, forward
from subsplit.optim import (Hyperparams, Mode, augmented_lagrangian, grad_p_gsadmm,
                            grad_p_gsam, init_aux, objective_F, update_duals, update_p_gsadmm,
                            update_p_gsam, update_q_closed_form, update_weights)
from subsplit.optim.updates import adam_step
from subsplit.tensor import RngState
from subsplit.verify import q_argmin_oracle, random_aux, random_labels

reals = st.floats(-5, 5, allow_nan=False)
positive = st.floats(0.05, 20)


def test_weight_step_scalar():
    # f(p) = w p, target 3, p = 1, alpha = 1, m = 1: grad = (w - 3) = -2, lr 1/2
    sub = scalar_sub(1.0)
    new, slot = update_weights(sub, [[1.0]], [[3.0]], Hyperparams(tau1=2.0))
    assert new.layers[0].W[0, 0] == 2.0 and new.layers[0].bias[0] == 1.0 and slot is None


def test_adam_first_step_is_lr_sized():
    params = [(np.array([[1.0, -2.0]]), np.array([0.5]))]
    grads = [(np.array([[3.0, -0.1]]), np.array([0.0]))]
    new, slot = adam_step(params, grads, None, lr=0.01)
    # bias-corrected first step moves each nonzero coordinate by lr * sign(g)
    np.testing.assert_allclose(new[0][0], [[0.99, -1.99]], atol=1e-8)
    assert new[0][1][0] == 0.5 and slot.t == 1


def test_q_examples():
    hp = Hyperparams(alpha=1.0, rho=1.0)
    sub = scalar_sub(1.0)
    # f = 1, p_next = 5, u = 0: (1 + 5) / 2
    assert update_q_closed_form(sub, [[1.0]], [[5.0]], [[0.0]], hp, 1)[0, 0] == 3.0
    # feasible and dual-free point is a fixed point
    assert update_q_closed_form(sub, [[2.5]], [[2.5]], [[0.0]], hp, 7)[0, 0] == 2.5


@settings(max_examples=200, deadline=None)
@given(reals, reals, reals, positive, positive, st.integers(1, 200))
def test_q_is_argmin(f, p_next, u, alpha, rho, m):
    hp = Hyperparams(alpha=alpha, rho=rho)
    q = update_q_closed_form(scalar_sub(1.0), [[f]], [[p_next]], [[u]], hp, m)[0, 0]
    oracle = q_argmin_oracle(f, p_next, u, alpha, rho, m)
    assert abs(q - oracle) <= 1e-6 * max(1.0, abs(oracle))


def test_q_step_never_increases_lagrangian(small_net, rng):
    M = 8
    Y = random_labels(rng, M, 3, small_net.loss)
    hp = Hyperparams(alpha=1.3, rho=0.6)
    for _ in range(10):
        aux = random_aux(small_net, rng, M, Mode.GSADMM)
        before = augmented_lagrangian(small_net, aux, hp, None, Y)
        q = [update_q_closed_form(small_net.subnetworks[l], aux.p[l], aux.p[l + 1], aux.u[l], hp, M)
             for l in range(2)]
        after = augmented_lagrangian(small_net, aux.with_lists(q=q), hp, None, Y)
        assert after <= before + 1e-12


def test_dual_examples():
    assert update_duals([[0.5]], [[3.0]], [[1.0]], 1.0)[0, 0] == 2.5
    assert update_duals([[0.5]], [[1.0]], [[1.0]], 3.0)[0, 0] == 0.5


@settings(max_examples=100, deadline=None)
@given(st.lists(reals, min_size=5, max_size=5), positive)
def test_dual_update_is_additive(v, rho):
    u, p1, q1, p2, q2 = ([[x]] for x in v)
    twice = update_duals(update_duals(u, p1, q1, rho), p2, q2, rho)
    once = np.asarray(u) + rho * (np.asarray(p1) - q1 + np.asarray(p2) - q2)
    assert abs(twice[0, 0] - once[0, 0]) <= 1e-12 * max(1.0, abs(once[0, 0]))


def test_p_stationary_at_feasible_zero_dual_point(small_net, rng):
    X = rng.normal((6, 4))
    aux = init_aux(small_net, X)
    Y = random_labels(rng, 6, 3, small_net.loss)
    hp = Hyperparams()
    idx = np.arange(6)
    # only the last boundary feels the loss; middle boundaries are stationary
    assert not grad_p_gsadmm(small_net, aux, hp, idx, Y, 1).any()


def test_p_pure_coupling_gradient():
    # identity downstream with q = f(p) on the far side: only u + rho (p - q_prev) remains
    net = NetworkSpec((scalar_sub(1.0), scalar_sub(1.0), scalar_sub(1.0)), LossKind.LEAST_SQUARES)
    aux = init_aux(net, [[0.0]])
    aux = aux.with_lists(p=[aux.p[0], np.array([[2.0]]), np.array([[2.0]])],
                         q=[np.array([[1.5]]), np.array([[2.0]])],
                         u=[np.array([[0.25]]), np.array([[0.0]])])
    g = grad_p_gsadmm(net, aux, Hyperparams(rho=2.0), np.array([0]), np.array([[9.0]]), 1)
    assert g[0, 0] == 0.25 + 2.0 * 0.5


def test_p_gsam_linear_gradient():
    # F = 1/2 (w2 p - y)^2 + alpha/2 (p - w1 x)^2 with b = 1
    w1, w2, x, p, y, alpha = 1.5, -0.5, 2.0, 1.0, 0.25, 3.0
    net = NetworkSpec((scalar_sub(w1), scalar_sub(w2)), LossKind.LEAST_SQUARES)
    aux = init_aux(net, [[x]], Mode.GSAM).replace_p(1, np.array([[p]]))
    g = grad_p_gsam(net, aux, Hyperparams(alpha=alpha), np.array([0]), np.array([[y]]), 1)
    assert g[0, 0] == pytest.approx(w2 * (w2 * p - y) + alpha * (p - w1 * x), abs=1e-15)


@pytest.mark.parametrize("seed", range(3))
def test_p_gradients_match_finite_differences(small_net, seed):
    rng = RngState(seed)
    M = 5
    idx = np.array([3, 1])
    Y = random_labels(rng, M, 3, small_net.loss)
    hp = Hyperparams(alpha=1.7, rho=0.8)
    for mode, grad, obj in ((Mode.GSADMM, grad_p_gsadmm, augmented_lagrangian),
                            (Mode.GSAM, grad_p_gsam, objective_F)):
        aux = random_aux(small_net, rng, M, mode)
        for l in (1, 2):
            def f(rows, l=l):
                p = aux.p[l].copy()
                p[idx] = rows
                return obj(small_net, aux.replace_p(l, p), hp, idx, Y)
            assert rel_err(grad(small_net, aux, hp, idx, Y, l), central_diff(f, aux.p[l][idx])) < 1e-6


def test_p_updates_touch_only_batch_rows(small_net, rng):
    M = 6
    idx = np.array([0, 4])
    Y = random_labels(rng, M, 3, small_net.loss)
    others = [1, 2, 3, 5]
    for mode, upd in ((Mode.GSADMM, update_p_gsadmm), (Mode.GSAM, update_p_gsam)):
        aux = random_aux(small_net, rng, M, mode)
        new = upd(small_net, aux, Hyperparams(), idx, Y)
        assert new.p[0] is aux.p[0]
        for l in (1, 2):
            np.testing.assert_array_equal(new.p[l][others], aux.p[l][others])
            assert not np.array_equal(new.p[l][idx], aux.p[l][idx])


def test_gsam_sweep_uses_updated_upstream():
    net = NetworkSpec((scalar_sub(1.0), scalar_sub(1.0), scalar_sub(1.0)), LossKind.LEAST_SQUARES)
    aux = init_aux(net, [[0.0]], Mode.GSAM)
    aux = aux.replace_p(1, np.array([[1.0]])).replace_p(2, np.array([[0.0]]))
    hp = Hyperparams(alpha=1.0, tau2=2.0)
    Y = np.array([[0.0]])
    new = update_p_gsam(net, aux, hp, np.array([0]), Y)
    # p1: grad (1 - 0) + (1 - 0) = 2 -> 0; p2 then sees f(p1) = 0: grad 0 + 0 = 0
    assert new.p[1][0, 0] == 0.0 and new.p[2][0, 0] == 0.0
