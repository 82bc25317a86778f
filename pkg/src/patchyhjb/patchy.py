"""Dynamics-driven decomposition: coarse guidance, color transport, patches.

The pipeline solves a cheap coarse problem, lifts it to the fine grid,
extracts the coarse-optimal control at every fine node and lets that flow
field transport target colors upstream.  Each color's support becomes a
patch; patches are then solved independently (optionally warm started,
value ordered and control reduced) and merged into the final field.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field as _field

import numpy as np

from . import _kernels
from .decomp import make_static_decomposition, solve_dd
from .grid import ConfigurationError, Grid, NodeField, interpolate_many
from .problems import ProblemSpec, partition_target
from .runtime import ExecutionStrategy, RunStats, run_patch_pool
from .solver import (
    DIRICHLET,
    KIND_FREE,
    KIND_OBSTACLE,
    KIND_TARGET,
    LEXICOGRAPHIC,
    STATE_CONSTRAINT,
    CandidateTable,
    FeedbackField,
    SolverConfig,
    SweepStats,
    allowed_mask,
    extract_feedback,
    init_value_field,
    solve,
)

# Patch-map codes for non-patch nodes.  Patch colors are 0..R-1.
UNREACHABLE = -1
TARGET = -2
OBSTACLE = -3
UNCOVERED = -4

_EDGE = -9  # padding value outside the interior, never a valid color


@dataclass
class PatchyConfig:
    """Knobs for the full pipeline.

    ``n_patches`` doubles as the coarse decomposition's subdomain count.
    The three accelerators: ``warm_start`` seeds patches with the lifted
    coarse field, ``order_by_value`` sweeps patch nodes in ascending lifted
    value, ``reduction`` restricts candidates to a cone of angle pi/r
    around the coarse feedback (unit control geometries only).

    ``unreachable_threshold`` governs which lifted values mark a node as
    unreachable (None = half the sentinel).  Pass ``inf`` to disable the
    mask when huge coarse values are resolution artifacts rather than a
    genuinely forbidden region; the patches then re-solve that territory
    on the fine grid.
    """

    n_patches: int = 1
    coarse_nodes: int = 51
    fine_nodes: int = 101
    bc_mode: str = STATE_CONSTRAINT
    warm_start: bool = False
    order_by_value: bool = False
    reduction: float | None = None
    color_tol: float = 1.0e-2
    unreachable_threshold: float | None = None

    def __post_init__(self) -> None:
        if self.n_patches < 1:
            raise ConfigurationError("n_patches must be >= 1")
        if self.fine_nodes < self.coarse_nodes:
            raise ConfigurationError(
                "fine grid must be at least as fine as the coarse grid"
            )
        if self.bc_mode not in (STATE_CONSTRAINT, DIRICHLET):
            raise ConfigurationError(f"unknown bc_mode {self.bc_mode!r}")
        if self.color_tol <= 0.0:
            raise ConfigurationError("color_tol must be positive")
        if self.reduction is not None and self.reduction <= 1.0:
            raise ConfigurationError("reduction factor must exceed 1")


@dataclass
class PatchMap:
    """Node-to-patch assignment on the fine grid.

    ``color`` holds a patch index 0..R-1 per interior serial, or one of the
    negative codes above.  ``patch_nodes[j]`` are the serials solved by
    patch ``j`` (repaired leftovers fold into patch 0).  ``boundary`` flags
    nodes whose face neighbor belongs to a different patch.
    """

    grid: Grid
    n_patches: int
    color: np.ndarray
    patch_nodes: tuple
    boundary: np.ndarray
    uncovered_serials: np.ndarray

    def size_report(self) -> tuple[int, int, float]:
        sizes = [len(p) for p in self.patch_nodes]
        return min(sizes), max(sizes), float(np.mean(sizes))

    def imbalance_warning(self) -> str | None:
        lo, hi, mean = self.size_report()
        if self.n_patches > 1 and hi > 10.0 * max(mean, 1.0):
            return (
                f"patch sizes vary widely (min {lo}, max {hi}, "
                f"mean {mean:.1f}); expect uneven worker load"
            )
        return None


def coarse_solve_and_lift(spec: ProblemSpec, coarse_grid: Grid,
                          fine_grid: Grid, n_subdomains: int = 1,
                          cfg: SolverConfig | None = None,
                          strategy: ExecutionStrategy | None = None, *,
                          fine_table: CandidateTable | None = None,
                          stats: RunStats | None = None):
    """Coarse solve, multilinear lift, coarse feedback on fine nodes.

    The coarse problem runs through the same static decomposition as the
    fine one so both stages exercise identical machinery.  Lift saturates:
    a fine node inside a coarse cell with any unreachable corner lifts to
    the sentinel.  Feedback is the candidate argmin of the lifted field
    with plain (Dirichlet-style) reads.

    Returns ``(lifted NodeField, FeedbackField, coarse SweepStats)``.
    """
    stats = stats if stats is not None else RunStats()
    with stats.phase("coarse"):
        decomp = make_static_decomposition(coarse_grid, n_subdomains)
        coarse_field, coarse_stats = solve_dd(
            spec, coarse_grid, decomp, cfg, strategy)
        stats.merge_counts(coarse_stats)
        if coarse_stats.warning:
            stats.warnings.append(coarse_stats.warning)
    with stats.phase("lift"):
        lifted = NodeField(fine_grid, sentinel=coarse_field.sentinel)
        vals = interpolate_many(coarse_field, fine_grid.interior_points())
        lifted.flat[fine_grid.interior_flat()] = vals
        if fine_table is None:
            fine_table = CandidateTable(fine_grid, spec)
        feedback, evals = extract_feedback(
            lifted, spec, table=fine_table, strategy=strategy)
        stats.candidate_evals += evals
    return lifted, feedback, coarse_stats


def mask_unreachable(lifted: NodeField, threshold: float | None = None
                     ) -> np.ndarray:
    """Interior mask of nodes the coarse stage deems unreachable."""
    if threshold is None:
        threshold = 0.5 * lifted.sentinel
    return lifted.flat[lifted.grid.interior_flat()] >= threshold


def _transport_feet(table: CandidateTable, feedback: FeedbackField):
    """Per-node foot cell of the feedback control; movers update, rest hold.

    A node moves when it is free and its feedback is defined; everything
    else (targets, obstacles, unreachable or zero-speed nodes) keeps its
    initial color value.
    """
    fb = feedback.indices
    ni = fb.size
    rows = np.arange(ni)
    safe = np.where(fb >= 0, fb, 0)
    tbase = table.base[rows, safe]
    tlocs = table.locs[rows, safe]
    movers = (fb >= 0) & (table.kind == KIND_FREE) & (
        table.cost[rows, safe] >= 0.0)
    return tbase, tlocs, np.where(movers)[0].astype(np.int64)


def transport_color(spec: ProblemSpec, grid: Grid, feedback: FeedbackField,
                    part_serials: np.ndarray, color_tol: float = 1.0e-2, *,
                    table: CandidateTable | None = None,
                    max_sweeps: int | None = None,
                    feet=None):
    """Membership fraction of one target part, advected upstream.

    Gauss-Seidel on ``phi_i <- I[phi](x_i + h f(x_i, a*_i))`` with the same
    step normalization as the value sweeps, holding the part at 1 and the
    rest of the target at 0, until the largest change drops to
    ``color_tol`` (rough on purpose: colors are projected afterwards).

    Returns ``(ColorField, sweeps, updates, warning | None)``.
    """
    if table is None:
        table = CandidateTable(grid, spec)
    if feet is None:
        feet = _transport_feet(table, feedback)
    tbase, tlocs, order = feet
    phi = NodeField(grid, np.zeros(grid.ext_shape))
    phi.flat[table.iflat[np.asarray(part_serials, dtype=np.int64)]] = 1.0
    limit = max_sweeps if max_sweeps is not None else 10 * max(grid.shape)
    sweeps = 0
    updates = 0
    while sweeps < limit:
        maxch, nupd = _kernels.transport_batch(
            phi.flat, order, 0, order.size, table.iflat, tbase, tlocs,
            grid.corner_offsets, grid.dim)
        sweeps += 1
        updates += int(nupd)
        if maxch <= color_tol:
            return phi, sweeps, updates, None
    warning = (
        f"color transport: no convergence after {sweeps} sweeps "
        f"(change {maxch:.3e} > color_tol {color_tol:.1e})"
    )
    return phi, sweeps, updates, warning


def _face_shifts(colors: np.ndarray):
    """Per-direction face-neighbor color arrays (edge-padded)."""
    padded = np.pad(colors, 1, constant_values=_EDGE)
    dim = colors.ndim
    core = tuple(slice(1, -1) for _ in range(dim))
    shifts = []
    for ax in range(dim):
        for step in (-1, 1):
            sl = list(core)
            sl[ax] = slice(1 + step, padded.shape[ax] - 1 + step)
            shifts.append(padded[tuple(sl)])
    return shifts


def assemble_patches(color_fields, mask: np.ndarray, grid: Grid, *,
                     kind: np.ndarray, warnings: list | None = None
                     ) -> PatchMap:
    """Project streamed color fields onto a single patch map.

    Only the running argmax and its value are kept, so ``color_fields`` may
    be a lazy iterable of ``(j, ColorField)`` pairs.  Nodes no color
    reached take the iterated face-neighbor majority; stubborn leftovers
    are folded into patch 0 and reported.
    """
    ni = grid.n_interior
    iflat = grid.interior_flat()
    best_val = np.zeros(ni)
    best_idx = np.zeros(ni, dtype=np.int32)
    n_colors = 0
    for j, phi in color_fields:
        v = phi.flat[iflat]
        take = v > best_val
        best_val[take] = v[take]
        best_idx[take] = j
        n_colors = max(n_colors, j + 1)

    color = np.full(ni, UNCOVERED, dtype=np.int32)
    color[best_val > 0.0] = best_idx[best_val > 0.0]
    color[mask] = UNREACHABLE
    color[kind == KIND_OBSTACLE] = OBSTACLE
    color[kind == KIND_TARGET] = TARGET

    # Iterated majority fill: every pass recolors from the previous pass's
    # state only, so the result is order-free.
    shaped = color.reshape(grid.shape)
    while True:
        open_nodes = shaped == UNCOVERED
        if not open_nodes.any():
            break
        neigh = _face_shifts(shaped)
        best_count = np.zeros(grid.shape, dtype=np.int32)
        best_color = np.full(grid.shape, UNCOVERED, dtype=np.int32)
        for c in range(n_colors):
            count = sum((nb == c).astype(np.int32) for nb in neigh)
            take = open_nodes & (count > best_count)
            best_count[take] = count[take]
            best_color[take] = c
        filled = open_nodes & (best_count > 0)
        if not filled.any():
            break
        shaped[filled] = best_color[filled]

    uncovered = np.where(color == UNCOVERED)[0].astype(np.int64)
    if uncovered.size:
        color[uncovered] = 0
        if warnings is not None:
            warnings.append(
                f"{uncovered.size} reachable nodes reached by no color; "
                f"folded into patch 0"
            )

    patch_nodes = tuple(
        np.where(color == j)[0].astype(np.int64) for j in range(n_colors)
    )
    boundary = np.zeros(ni, dtype=bool)
    shaped = color.reshape(grid.shape)
    own_patch = shaped >= 0
    for nb in _face_shifts(shaped):
        boundary |= (own_patch & (nb >= 0) & (nb != shaped)).reshape(-1)
    return PatchMap(grid, n_colors, color, patch_nodes, boundary, uncovered)


def solve_patches(spec: ProblemSpec, grid: Grid, patch_map: PatchMap,
                  lifted: NodeField, pcfg: PatchyConfig,
                  cfg: SolverConfig | None = None,
                  strategy: ExecutionStrategy | None = None, *,
                  table: CandidateTable | None = None,
                  feedback: FeedbackField | None = None,
                  field: NodeField | None = None):
    """Independent fine solves, one per patch, into a shared field.

    Each patch sweeps only its own serials; feet leaning on out-of-patch
    nodes are rejected (state-constraint mode) or read the frozen lifted
    field (dirichlet mode), and live reads extend to target nodes so feet
    may land on the target.  Writes are disjoint across patches, so order
    and scheduling cannot change the result.

    Returns ``(NodeField, list[SweepStats], warnings)``.
    """
    cfg = cfg or SolverConfig()
    strategy = strategy or ExecutionStrategy()
    if table is None:
        table = CandidateTable(grid, spec)
    if pcfg.reduction is not None and feedback is None:
        raise ConfigurationError("conical reduction needs a feedback field")
    if field is None:
        field = init_value_field(grid, spec, kind=table.kind)

    iflat = table.iflat
    half = 0.5 * field.sentinel
    lifted_vals = lifted.flat[iflat]

    if pcfg.warm_start:
        seeds = np.concatenate(patch_map.patch_nodes) if \
            patch_map.patch_nodes else np.empty(0, dtype=np.int64)
        lv = lifted_vals[seeds]
        field.flat[iflat[seeds]] = np.where(lv < half, lv, field.sentinel)

    if pcfg.bc_mode == DIRICHLET:
        # Masked nodes sit at the sentinel for good; feet leaning on them
        # read that sentinel arithmetically, the same way a live solve
        # reads a not-yet-reached neighbor, so candidates near the mask
        # lose by magnitude instead of being rejected outright.
        frozen = lifted.flat.copy()
        frozen[iflat[patch_map.color == UNREACHABLE]] = field.sentinel
        hard = None
    else:
        # no frozen data: solve() blocks out-of-patch feet structurally
        frozen = None
        hard = None

    allowed = None
    if pcfg.reduction is not None:
        allowed = allowed_mask(
            spec.control_set, feedback.indices, pcfg.reduction)

    target_flat = iflat[table.kind == KIND_TARGET]
    inner_cfg = dataclasses.replace(cfg, sweep_order=LEXICOGRAPHIC)
    inner_strategy = ExecutionStrategy() if strategy.task_parallel else strategy

    def patch_task(j):
        serials = patch_map.patch_nodes[j]
        if serials.size == 0:
            return SweepStats()
        if pcfg.order_by_value:
            keys = lifted_vals[serials]
            serials = serials[np.argsort(keys, kind="stable")]
        active = np.zeros(grid.n_ext, dtype=np.uint8)
        active[iflat[serials]] = 1
        active[target_flat] = 1
        return solve(field, spec, serials, inner_cfg, inner_strategy,
                     table=table, active=active, frozen=frozen, hard=hard,
                     allowed=allowed)

    tasks = [(lambda j=j: patch_task(j)) for j in range(patch_map.n_patches)]
    results = run_patch_pool(tasks, strategy, label="patch")

    warnings = []
    for j, st in enumerate(results):
        if st.warning:
            warnings.append(f"patch {j}: {st.warning}")

    # Merge: shared-field writes were disjoint, so only the held node
    # classes need (re)asserting.
    field.flat[target_flat] = 0.0
    blocked = patch_map.color < 0
    field.flat[iflat[blocked & (patch_map.color != TARGET)]] = field.sentinel
    return field, list(results), warnings


@dataclass
class PatchyResult:
    """Everything the pipeline produced, including instrumentation."""

    value: NodeField
    patch_map: PatchMap
    lifted: NodeField
    feedback: FeedbackField
    stats: RunStats
    coarse_stats: SweepStats
    patch_stats: list = _field(default_factory=list)


def run_patchy(spec: ProblemSpec, pcfg: PatchyConfig,
               cfg: SolverConfig | None = None,
               strategy: ExecutionStrategy | None = None) -> PatchyResult:
    """Full pipeline: coarse guidance, patch creation, patch solves, merge."""
    cfg = cfg or SolverConfig()
    strategy = strategy or ExecutionStrategy()
    stats = RunStats()

    coarse_grid = spec.make_grid(pcfg.coarse_nodes)
    fine_grid = spec.make_grid(pcfg.fine_nodes)
    with stats.phase("tables"):
        table = CandidateTable(fine_grid, spec)

    lifted, feedback, coarse_stats = coarse_solve_and_lift(
        spec, coarse_grid, fine_grid, pcfg.n_patches, cfg, strategy,
        fine_table=table, stats=stats)

    with stats.phase("transport"):
        mask = mask_unreachable(lifted, pcfg.unreachable_threshold)
        parts = partition_target(spec.target, fine_grid, pcfg.n_patches)
        feet = _transport_feet(table, feedback)
        transport_sweeps = []

        def transport_task(j):
            phi, sweeps, updates, warning = transport_color(
                spec, fine_grid, feedback, parts[j], pcfg.color_tol,
                table=table, feet=feet)
            return j, phi, sweeps, updates, warning

        def stream():
            order = range(pcfg.n_patches)
            if strategy.task_parallel:
                w = strategy.workers
                waves = [list(order)[i:i + w] for i in range(0, pcfg.n_patches, w)]
            else:
                waves = [[j] for j in order]
            for wave in waves:
                tasks = [(lambda j=j: transport_task(j)) for j in wave]
                for j, phi, sweeps, updates, warning in run_patch_pool(
                        tasks, strategy, label="transport"):
                    stats.transport_updates += updates
                    transport_sweeps.append(sweeps)
                    if warning:
                        stats.warnings.append(f"color {j}: {warning}")
                    yield j, phi

        patch_map = assemble_patches(
            stream(), mask, fine_grid, kind=table.kind,
            warnings=stats.warnings)
        imbalance = patch_map.imbalance_warning()
        if imbalance:
            stats.warnings.append(imbalance)

    with stats.phase("patch_solve"):
        field, patch_stats, warnings = solve_patches(
            spec, fine_grid, patch_map, lifted, pcfg, cfg, strategy,
            table=table, feedback=feedback)
        stats.warnings.extend(warnings)
        for st in patch_stats:
            stats.merge_counts(st)

    return PatchyResult(field, patch_map, lifted, feedback, stats,
                        coarse_stats, patch_stats)
