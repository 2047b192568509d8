import math

import numpy as np
import pytest

from conftest import scalar_sub
from subsplit.network import LossKind, NetworkSpec
from subsplit.optim import Mode, init_aux, update_duals
from subsplit.tensor import RngState
from subsplit.verify import (CHECKS, CheckResult, EvaluationError, _check_duals, check_sgd_reduction,
                             check_theorem1, dual_residual_trend, grad_check, is_nonincreasing,
                             large_alpha_probe, q_argmin_oracle, random_aux, random_labels,
                             random_network, run_suite, scale_residuals)


def test_grad_check_trivial_functions():
    x = np.array([0.3, -1.2, 2.0])
    assert grad_check(lambda v: 0.5 * float(v @ v), x, x) < 1e-10
    c = np.array([1.0, -2.0, 0.5])
    assert grad_check(lambda v: float(c @ v), x, c) < 1e-10
    # directional probes; f is ~100 here so cancellation limits accuracy to ~1e-9
    big = RngState(0).normal((20, 10))
    assert grad_check(lambda v: 0.5 * float(np.sum(v * v)), big, big, max_coords=16) < 1e-7


def test_grad_check_catches_wrong_gradient():
    x = np.array([1.0, 2.0])
    assert grad_check(lambda v: 0.5 * float(v @ v), x, 2 * x) > 0.5


def test_grad_check_non_finite():
    with pytest.raises(EvaluationError):
        grad_check(lambda v: float("nan"), np.zeros(2), np.zeros(2))


def test_q_oracle_examples():
    assert q_argmin_oracle(2.0, 4.0, 0.0, 1.0, 1.0, 1.0) == pytest.approx(3.0, abs=1e-9)
    qs = [q_argmin_oracle(0.0, 1.0, u, 1.0, 1.0, 4.0) for u in (-2.0, 0.0, 2.0, 8.0)]
    assert qs == sorted(qs) and qs[0] < qs[-1]


def test_theorem_feasible_state():
    net = random_network(RngState(0), 3)
    aux = init_aux(net, RngState(1).uniform(0, 1, (5, net.d_in)))
    rep = check_theorem1(net, aux, random_labels(RngState(2), 5, net.d_out, net.loss))
    assert rep.lhs == 0.0 and rep.rhs == 0.0 and rep.holds


def test_theorem_scalar_hand_case():
    w1, w2, x, y, p = 2.0, -1.5, 1.0, 0.5, 2.4
    net = NetworkSpec((scalar_sub(w1), scalar_sub(w2)), LossKind.LEAST_SQUARES)
    aux = init_aux(net, [[x]], Mode.GSAM).replace_p(1, np.array([[p]]))
    rep = check_theorem1(net, aux, [[y]])
    za, zb = w2 * w1 * x, w2 * p
    lhs = abs(0.5 * (za - y) ** 2 - 0.5 * (zb - y) ** 2)
    h2 = 1.1 * max(abs(za - y), abs(zb - y)) * abs(w2) * 1.001
    assert rep.lhs == pytest.approx(lhs, rel=1e-12)
    assert rep.residual_norms == pytest.approx([abs(p - w1 * x)], rel=1e-12)
    assert rep.rhs == pytest.approx(h2 * abs(p - w1 * x), rel=1e-9)
    assert rep.holds


def test_theorem_single_subnetwork_is_degenerate():
    net = random_network(RngState(0), 1)
    aux = init_aux(net, np.ones((2, net.d_in)), Mode.GSAM)
    rep = check_theorem1(net, aux, random_labels(RngState(1), 2, net.d_out, net.loss))
    assert (rep.lhs, rep.rhs, rep.holds) == (0.0, 0.0, True)


@pytest.mark.parametrize("seed", range(10))
def test_theorem_random_instances_and_linearity(seed):
    rng = RngState(seed)
    n = 2 + seed % 3
    loss = LossKind.LEAST_SQUARES if seed % 2 else LossKind.SOFTMAX_CROSS_ENTROPY
    net = random_network(rng, n, loss=loss)
    aux = random_aux(net, rng, 6, Mode.GSADMM)
    Y = random_labels(rng, 6, net.d_out, loss)
    rep = check_theorem1(net, aux, Y)
    assert rep.holds and rep.rhs >= 0
    for t in (2.0, 10.0):
        scaled = check_theorem1(net, scale_residuals(net, aux, t), Y, h_n_bound=rep.lipschitz[-1])
        assert scaled.residual_norms == pytest.approx([t * r for r in rep.residual_norms], rel=1e-9)
        assert scaled.rhs == pytest.approx(t * rep.rhs, rel=1e-9)


def test_sgd_reduction_and_harness_sanity():
    assert check_sgd_reduction(0, epochs=5) < 1e-12
    assert check_sgd_reduction(0, epochs=5, baseline_seed=1) > 0.0


@pytest.mark.xfail(strict=True, reason="one tau1 for every subnetwork cannot serve both an "
                   "alpha-scaled penalty and the unscaled loss; the split net does not track SGD")
def test_large_alpha_tracks_baseline():
    res = large_alpha_probe(seed=0, alpha=1e6, epochs=50)
    assert res.relative_gap < 0.05 and not res.degenerate


def test_dual_residual_decreases():
    gaps = dual_residual_trend(iters=10)
    assert is_nonincreasing(gaps) and gaps[-1] < gaps[0]


def test_flipped_dual_sign_is_caught():
    def flipped(U, P_next, Q, rho):
        return update_duals(U, P_next, Q, -rho)
    res = run_suite(["dual_residual"], overrides={"dual_residual": lambda: _check_duals(flipped)})
    assert not res[0].passed


def test_suite_selection():
    assert run_suite([]) == []
    res = run_suite(["q_argmin"])
    assert len(res) == 1 and isinstance(res[0], CheckResult) and res[0].passed
    with pytest.raises(ValueError):
        run_suite(["nope"])
    assert set(CHECKS) == {"q_argmin", "gradients", "theorem1", "sgd_reduction", "dual_residual"}


def test_is_nonincreasing():
    assert is_nonincreasing([3, 2, 2, 1]) and not is_nonincreasing([1, 2])
    assert is_nonincreasing([]) and is_nonincreasing([math.inf])
