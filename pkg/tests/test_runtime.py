import time

import pytest

from subsplit.runtime import PhaseError, PhaseRunner, default_workers


def test_single_task_and_noops():
    with PhaseRunner(1) as r:
        assert r.run("a", [lambda: 7]) == [7]
        assert r.run("b", [lambda: None] * 3) == [None, None, None]
        assert r.run("c", []) == []


@pytest.mark.parametrize("workers", [1, 2, 4])
def test_results_keep_task_order(workers):
    with PhaseRunner(workers) as r:
        out = r.run("x", [lambda i=i: (time.sleep(0.01 * (3 - i)), i * i)[1] for i in range(4)])
    assert out == [0, 1, 4, 9]


def test_two_workers_overlap_blocking_tasks():
    tasks = [lambda: time.sleep(0.2)] * 2
    with PhaseRunner(1) as seq, PhaseRunner(2) as par:
        t0 = time.perf_counter()
        seq.run("s", tasks)
        t_seq = time.perf_counter() - t0
        t0 = time.perf_counter()
        par.run("s", tasks)
        t_par = time.perf_counter() - t0
    assert t_par < 0.75 * t_seq


def test_phases_do_not_overlap():
    with PhaseRunner(3, record=True) as r:
        for name in ("w", "p", "q", "u"):
            r.run(name, [lambda: time.sleep(0.005)] * 3)
        log = r.log
    by_phase = {}
    for rec in log:
        by_phase.setdefault(rec.phase, []).append(rec)
    order = ["w", "p", "q", "u"]
    for a, b in zip(order, order[1:]):
        assert max(t.end for t in by_phase[a]) <= min(t.start for t in by_phase[b])


def test_error_names_subnetwork():
    def boom():
        raise ZeroDivisionError("x")
    for workers in (1, 2):
        with PhaseRunner(workers) as r, pytest.raises(PhaseError) as info:
            r.run("p", [lambda: 1, boom, lambda: 2], indices=[1, 2, 3])
        assert info.value.index == 2 and info.value.phase == "p"
        assert isinstance(info.value.__cause__, ZeroDivisionError)


def test_epoch_timer_accumulates():
    with PhaseRunner(2) as r:
        with r.epoch_timer() as t:
            r.run("w", [lambda: time.sleep(0.02)] * 2)
            r.run("p", [lambda: time.sleep(0.01)])
    assert set(t.phases) == {"w", "p"}
    assert sum(t.phases.values()) <= t.total + 1e-6
    assert t.total >= 0.03 and sum(t.worker_busy.values()) >= 0.05 - 1e-3


def test_default_workers():
    assert default_workers(1) == 1
    assert 1 <= default_workers(64) <= 64
