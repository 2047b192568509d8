"""Barrier-synchronous execution of per-subnetwork tasks.

Each phase is a list of independent tasks (one per subnetwork). Tasks only
read the snapshot they close over and return new values; the caller
commits those values after the barrier, so results never depend on how
tasks were scheduled. numpy releases the GIL inside BLAS calls, which is
where threads buy real parallelism.
"""
from __future__ import annotations

import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence


class PhaseError(RuntimeError):
    def __init__(self, phase: str, index: int, cause: BaseException):
        super().__init__(f"phase {phase!r}: task for subnetwork {index} failed: {cause!r}")
        self.phase = phase
        self.index = index
        self.__cause__ = cause


@dataclass
class PhasePlan:
    name: str
    tasks: Sequence[Callable[[], Any]]
    # subnetwork index of each task; defaults to its position
    indices: Sequence[int] | None = None


@dataclass
class TaskRecord:
    phase: str
    index: int
    worker: str
    start: float
    end: float


@dataclass
class PhaseTimings:
    phases: dict[str, float] = field(default_factory=dict)
    total: float = 0.0
    worker_busy: dict[str, float] = field(default_factory=dict)

    def add_phase(self, name: str, seconds: float):
        self.phases[name] = self.phases.get(name, 0.0) + seconds

    def merge(self, other: "PhaseTimings"):
        for k, v in other.phases.items():
            self.add_phase(k, v)
        for k, v in other.worker_busy.items():
            self.worker_busy[k] = self.worker_busy.get(k, 0.0) + v


def default_workers(n: int) -> int:
    try:
        cores = len(os.sched_getaffinity(0))
    except AttributeError:
        cores = os.cpu_count() or 1
    return max(1, min(n, cores))


class PhaseRunner:
    """Runs phases on a fixed pool of ``workers`` threads.

    With ``workers=1`` tasks run inline on the calling thread, in order.
    Set ``record=True`` to keep a per-task log of start/end times.
    """

    def __init__(self, workers: int = 1, record: bool = False):
        if workers < 1:
            raise ValueError("workers must be >= 1")
        self.workers = workers
        self.record = record
        self.log: list[TaskRecord] = []
        self.timings = PhaseTimings()
        self._lock = threading.Lock()
        self._pool = ThreadPoolExecutor(workers, thread_name_prefix="subsplit") if workers > 1 else None

    def close(self):
        if self._pool is not None:
            self._pool.shutdown(wait=True)
            self._pool = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _wrap(self, phase: str, index: int, task: Callable[[], Any]):
        def run():
            t0 = time.perf_counter()
            try:
                return task()
            except BaseException as e:
                raise PhaseError(phase, index, e) from e
            finally:
                t1 = time.perf_counter()
                worker = threading.current_thread().name
                with self._lock:
                    busy = self.timings.worker_busy
                    busy[worker] = busy.get(worker, 0.0) + (t1 - t0)
                    if self.record:
                        self.log.append(TaskRecord(phase, index, worker, t0, t1))
        return run

    def run_phase(self, plan: PhasePlan) -> list[Any]:
        """Run every task of ``plan`` and wait for all of them (the barrier)."""
        indices = list(plan.indices) if plan.indices is not None else list(range(len(plan.tasks)))
        wrapped = [self._wrap(plan.name, i, t) for i, t in zip(indices, plan.tasks)]
        t0 = time.perf_counter()
        if self._pool is None or len(wrapped) <= 1:
            results = [w() for w in wrapped]
        else:
            futures = [self._pool.submit(w) for w in wrapped]
            results, first_error = [], None
            for f in futures:
                try:
                    results.append(f.result())
                except PhaseError as e:
                    results.append(None)
                    first_error = first_error or e
            if first_error is not None:
                raise first_error
        self.timings.add_phase(plan.name, time.perf_counter() - t0)
        return results

    def run(self, name: str, tasks: Sequence[Callable[[], Any]],
            indices: Sequence[int] | None = None) -> list[Any]:
        return self.run_phase(PhasePlan(name, tasks, indices))

    @contextmanager
    def epoch_timer(self):
        """Measure one epoch; yields the ``PhaseTimings`` filled in on exit."""
        saved = self.timings
        self.timings = PhaseTimings()
        t0 = time.perf_counter()
        try:
            yield self.timings
        finally:
            self.timings.total = time.perf_counter() - t0
            current = self.timings
            self.timings = saved
            saved.merge(current)
