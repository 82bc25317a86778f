"""Execution strategies, worker pools and run statistics.

This module owns all thread creation.  Two parallel modes exist besides
serial execution:

* ``method1``: every Gauss-Seidel sweep is split into ``workers`` contiguous
  batches of the ordered node list; workers relax their batch concurrently
  (Gauss-Seidel inside a batch, stale reads across batches) and meet at a
  barrier before the convergence norm is taken.  Patches/subdomains are
  processed one after another.
* ``method2``: sweeps stay serial but whole tasks (patch solves, subdomain
  sweeps, color transports) are distributed over workers.  Patch tasks write
  disjoint node sets and read only their own/frozen data, so this mode needs
  no communication at all.

Workers are threads; the compiled kernels release the GIL, so batches and
tasks genuinely overlap.  Counters are reduced per batch/task in plan order,
which keeps them byte-identical for identical configurations regardless of
scheduling.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

from .grid import ConfigurationError

SERIAL = "serial"
METHOD1 = "method1"
METHOD2 = "method2"
_KINDS = (SERIAL, METHOD1, METHOD2)


@dataclass(frozen=True)
class ExecutionStrategy:
    """How work is scheduled: ``serial``, ``method1`` or ``method2``."""

    kind: str = SERIAL
    workers: int = 1

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ConfigurationError(f"unknown strategy {self.kind!r}")
        if self.workers < 1:
            raise ConfigurationError("workers must be >= 1")
        if self.kind == SERIAL and self.workers != 1:
            raise ConfigurationError("serial strategy implies workers=1")

    @property
    def batch_parallel(self) -> bool:
        return self.kind == METHOD1 and self.workers > 1

    @property
    def task_parallel(self) -> bool:
        return self.kind == METHOD2 and self.workers > 1


@dataclass
class RunStats:
    """Work counters and per-phase wall times for one run."""

    node_relaxations: int = 0
    candidate_evals: int = 0
    transport_updates: int = 0
    sweeps: int = 0
    phases: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    speedup_vs_serial: float | None = None

    @contextmanager
    def phase(self, name: str):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.phases[name] = self.phases.get(name, 0.0) + (time.perf_counter() - t0)

    def merge_counts(self, other):
        """Accumulate counters from another stats object (RunStats or the
        solver's SweepStats; missing fields count as zero)."""
        self.node_relaxations += getattr(other, "node_relaxations", 0)
        self.candidate_evals += getattr(other, "candidate_evals", 0)
        self.transport_updates += getattr(other, "transport_updates", 0)
        self.sweeps += getattr(other, "sweeps", 0)
        self.warnings.extend(getattr(other, "warnings", ()))

    def phases_ms(self) -> dict:
        return {k: 1000.0 * v for k, v in self.phases.items()}


_pools: dict[int, ThreadPoolExecutor] = {}


def _pool(workers: int) -> ThreadPoolExecutor:
    # pools are only ever driven from the main thread, never nested
    if workers not in _pools:
        _pools[workers] = ThreadPoolExecutor(max_workers=workers)
    return _pools[workers]


class SweepPlan:
    """Batch layout for repeated sweeps over one ordered node list.

    Batches are contiguous runs of ``order`` computed once per solve, so a
    by-value ordering and batching compose (each worker gets a contiguous
    run of the sorted list).
    """

    def __init__(self, n_nodes: int, strategy: ExecutionStrategy):
        self.strategy = strategy
        nb = strategy.workers if strategy.batch_parallel else 1
        splits = np.linspace(0, n_nodes, nb + 1).astype(np.int64)
        self.bounds = [(int(splits[i]), int(splits[i + 1])) for i in range(nb)]

    def run_sweep(self, batch_fn):
        """Run ``batch_fn(start, stop) -> tuple`` over all batches.

        Under method1 batches execute concurrently and this call is the
        barrier.  Results reduce as (max of first element, sum of the rest);
        an empty plan returns None.
        """
        bounds = [b for b in self.bounds if b[1] > b[0]]
        if not bounds:
            return None
        if len(bounds) == 1 or not self.strategy.batch_parallel:
            results = [batch_fn(s, e) for s, e in bounds]
        else:
            pool = _pool(self.strategy.workers)
            futures = [pool.submit(batch_fn, s, e) for s, e in bounds]
            results = [f.result() for f in futures]
        out = list(results[0])
        for r in results[1:]:
            out[0] = max(out[0], r[0])
            for i in range(1, len(out)):
                out[i] += r[i]
        return tuple(out)


def run_parallel_sweep(n_nodes: int, batch_fn, strategy: ExecutionStrategy):
    """One-off batched sweep (plan built and used once)."""
    return SweepPlan(n_nodes, strategy).run_sweep(batch_fn)


def run_patch_pool(tasks, strategy: ExecutionStrategy, label: str = "patch"):
    """Run independent task callables, returning results in task order.

    Under method2 tasks are distributed over the worker pool; any exception
    aborts the pool and is re-raised annotated with the failing task id.
    """
    if not strategy.task_parallel:
        out = []
        for i, task in enumerate(tasks):
            try:
                out.append(task())
            except Exception as exc:
                raise RuntimeError(f"{label} task {i} failed: {exc}") from exc
        return out
    pool = _pool(strategy.workers)
    futures = [pool.submit(task) for task in tasks]
    out = []
    for i, fut in enumerate(futures):
        try:
            out.append(fut.result())
        except Exception as exc:
            for other in futures[i + 1:]:
                other.cancel()
            raise RuntimeError(f"{label} task {i} failed: {exc}") from exc
    return out
