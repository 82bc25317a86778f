"""Classical overlapping domain decomposition for the value iteration.

The grid is cut into a static product of axis slabs (dynamics-independent).
One outer iteration sweeps every subdomain once, each working on a private
copy of the iteration-start field restricted to its box (feet leaning on
out-of-box nodes are rejected, i.e. internal interfaces act as state
constraints), then a coupling step takes the node-wise minimum over all
subdomains containing a node.  Because adjacent boxes overlap by at least one full cell, every node
is interior to some box and the fixed point coincides with the plain
single-domain solution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .grid import ConfigurationError, Grid, NodeField
from .problems import ProblemSpec
from .runtime import ExecutionStrategy, RunStats, SweepPlan, run_patch_pool
from .solver import CandidateTable, SolverConfig, SweepStats, init_value_field

# R -> per-axis slab counts
_FACTORS = {
    2: {1: (1, 1), 2: (2, 1), 4: (2, 2), 8: (4, 2), 16: (4, 4)},
    3: {1: (1, 1, 1), 2: (2, 1, 1), 4: (2, 2, 1), 8: (2, 2, 2), 16: (4, 2, 2)},
}


@dataclass
class Subdomain:
    """One box of the decomposition: inclusive node-index bounds plus its
    node serials (lexicographic) and the flat readable mask."""

    lo: tuple
    hi: tuple
    serials: np.ndarray
    active: np.ndarray


@dataclass
class StaticDecomposition:
    grid: Grid
    n_subdomains: int
    overlap_cells: int
    subdomains: list


def _axis_ranges(n_nodes: int, parts: int, overlap: int) -> list[tuple]:
    splits = np.linspace(0, n_nodes, parts + 1).astype(int)
    ranges = []
    for p in range(parts):
        lo, hi = int(splits[p]), int(splits[p + 1]) - 1
        if p > 0:
            lo -= overlap
        if p < parts - 1:
            hi += overlap
        ranges.append((max(lo, 0), min(hi, n_nodes - 1)))
    return ranges


def make_static_decomposition(grid: Grid, n_subdomains: int,
                              overlap_cells: int = 1) -> StaticDecomposition:
    """Overlapping axis-slab decomposition into R boxes.

    R must be one of {1, 2, 4, 8, 16} (fixed per-axis factorizations; other
    counts raise :class:`ConfigurationError`).  Adjacent boxes share at
    least ``overlap_cells`` full cells.
    """
    factors = _FACTORS[grid.dim].get(n_subdomains)
    if factors is None:
        raise ConfigurationError(
            f"cannot decompose into {n_subdomains} subdomains "
            f"(supported: {sorted(_FACTORS[grid.dim])})"
        )
    if overlap_cells < 1:
        raise ConfigurationError("overlap_cells must be >= 1")
    for m, p in zip(grid.shape, factors):
        if m < 2 * p:
            raise ConfigurationError("grid too small for this subdomain count")

    per_axis = [_axis_ranges(grid.shape[ax], factors[ax], overlap_cells)
                for ax in range(grid.dim)]
    subs = []
    for combo in np.ndindex(*factors):
        lo = tuple(per_axis[ax][combo[ax]][0] for ax in range(grid.dim))
        hi = tuple(per_axis[ax][combo[ax]][1] for ax in range(grid.dim))
        axes_idx = [np.arange(lo[ax], hi[ax] + 1) for ax in range(grid.dim)]
        mesh = np.meshgrid(*axes_idx, indexing="ij")
        serials = np.ravel_multi_index([m.ravel() for m in mesh], grid.shape)
        serials = np.sort(serials).astype(np.int64)
        active = np.zeros(grid.n_ext, dtype=np.uint8)
        active[grid.interior_flat()[serials]] = 1
        subs.append(Subdomain(lo=lo, hi=hi, serials=serials, active=active))
    return StaticDecomposition(grid=grid, n_subdomains=n_subdomains,
                               overlap_cells=overlap_cells, subdomains=subs)


def solve_dd(spec: ProblemSpec, grid: Grid,
             decomp: StaticDecomposition | None = None,
             cfg: SolverConfig | None = None,
             strategy: ExecutionStrategy | None = None, *,
             table: CandidateTable | None = None,
             field: NodeField | None = None):
    """Domain-decomposition value iteration.

    Per outer iteration: every subdomain runs one Gauss-Seidel sweep of its
    box on a copy of the iteration-start field (other boxes invisible), then
    overlap nodes take the minimum over their owners and the iteration
    converges when no node moved more than ``tol``.  Subdomain sweeps run
    concurrently under a method2 strategy (batch-parallel inside each sweep
    under method1); values are exchanged only at the coupling barrier, so
    results do not depend on scheduling.

    Returns ``(field, SweepStats)`` with ``sweeps`` counting outer
    iterations.
    """
    cfg = cfg or SolverConfig()
    strategy = strategy or ExecutionStrategy()
    if decomp is None:
        decomp = make_static_decomposition(grid, 1)
    if table is None:
        table = CandidateTable(grid, spec)
    if field is None:
        field = init_value_field(grid, spec, kind=table.kind)

    u = field.flat
    sentinel_bc = np.full(grid.n_ext, field.sentinel)
    iflat = table.iflat
    subs = decomp.subdomains
    # out-of-box nodes are structurally impassable for this box's sweeps
    hards = [np.where(s.active != 0, table.hard_base, np.uint8(1))
             for s in subs]
    plans = [SweepPlan(s.serials.size, strategy) for s in subs]
    key = cfg.sweep_order
    orders = []
    for s in subs:
        order = s.serials
        if key == "by-value":
            vals = u[iflat[order]]
            order = order[np.argsort(vals, kind="stable")]
        orders.append(order)

    stats = SweepStats()
    limit = cfg.sweep_limit(grid)
    prev = u[iflat].copy()
    acc = np.empty(grid.n_interior)
    while stats.sweeps < limit:
        snap = u.copy()

        def sub_sweep(j):
            w = snap.copy()
            res = plans[j].run_sweep(
                lambda s, e: _kernels.sweep_batch(
                    w, orders[j], s, e, iflat, table.kind, table.base,
                    table.locs, table.cost, grid.corner_offsets,
                    subs[j].active, sentinel_bc, hards[j],
                    table._no_allowed, False, field.sentinel, grid.dim,
                )
            )
            return w, res

        tasks = [(lambda j=j: sub_sweep(j)) for j in range(len(subs))]
        results = run_patch_pool(tasks, strategy, label="subdomain")

        # Coupling never raises a node: in-box Gauss-Seidel can overshoot
        # near internal interfaces (feet blocked by the state constraint),
        # and without the clamp those overshoots become a spurious fixed
        # point above the single-domain solution.
        acc[:] = prev
        for sub, (w, res) in zip(subs, results):
            _, nrelax, nevals = res
            stats.node_relaxations += int(nrelax)
            stats.candidate_evals += int(nevals)
            sl = sub.serials
            acc[sl] = np.minimum(acc[sl], w[iflat[sl]])
        u[iflat] = acc
        stats.sweeps += 1
        stats.max_change = float(np.abs(acc - prev).max())
        prev[:] = acc
        if stats.max_change <= cfg.tol:
            return field, stats
    stats.converged = False
    stats.warning = (
        f"domain decomposition: no convergence after {stats.sweeps} outer "
        f"iterations (max change {stats.max_change:.3e} > tol {cfg.tol:.1e})"
    )
    return field, stats


def solve_single(spec: ProblemSpec, grid: Grid,
                 cfg: SolverConfig | None = None,
                 strategy: ExecutionStrategy | None = None, *,
                 table: CandidateTable | None = None):
    """Plain single-domain solve (R=1 limit), returns ``(field, stats)``."""
    from .solver import solve

    if table is None:
        table = CandidateTable(grid, spec)
    field = init_value_field(grid, spec, kind=table.kind)
    stats = solve(field, spec, cfg=cfg, strategy=strategy, table=table)
    return field, stats


def dd_stats_to_runstats(stats: SweepStats) -> RunStats:
    rs = RunStats(node_relaxations=stats.node_relaxations,
                  candidate_evals=stats.candidate_evals, sweeps=stats.sweeps)
    if stats.warning:
        rs.warnings.append(stats.warning)
    return rs
