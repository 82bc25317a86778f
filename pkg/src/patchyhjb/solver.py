"""Semi-Lagrangian value iteration for minimum-time / running-cost problems.

The scheme: at node ``x_i`` and control ``a`` take the step ``h = k / |f|``
so the foot ``x_i + h f(x_i, a)`` lands exactly one grid step away, and relax

    u_i  <-  min_a  I[u](x_i + h f(x_i, a)) + h * l(x_i, a)

with ``I`` multilinear interpolation, 0 on target nodes and the sentinel on
obstacles/ghost nodes.  Feet are fixed (autonomous dynamics), so the foot
cell, local coordinates and step cost are precomputed once per grid/problem
into a :class:`CandidateTable` and the sweeps run in compiled kernels.

A pure-Python reference path (:func:`evaluate_candidates`, :func:`relax_node`)
implements the same update off the public interpolation routines; the kernel
is tested against it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels
from .grid import (SENTINEL, ConfigurationError, Grid, NodeField,
                   interpolation_weights)
from .problems import ProblemSpec
from .runtime import ExecutionStrategy, SweepPlan

LEXICOGRAPHIC = "lexicographic"
BY_VALUE = "by-value"

STATE_CONSTRAINT = "state-constraint"
DIRICHLET = "dirichlet"

KIND_FREE = 0
KIND_TARGET = 1
KIND_OBSTACLE = 2

#: relative threshold under which a control is degenerate at a node
EPS_SPEED_REL = 1.0e-12


@dataclass
class SolverConfig:
    """Knobs for the value iteration.

    ``max_sweeps`` defaults to ``10 * max(nodes_per_axis)``.  ``bc_mode``
    selects how patch solves treat out-of-patch reads (state constraint vs
    frozen Dirichlet data); ``control_reduction`` is the conical reduction
    factor r (None = full control set); ``warm_start`` seeds patch solves
    with the lifted coarse field.
    """

    tol: float = 1.0e-6
    max_sweeps: Optional[int] = None
    bc_mode: str = STATE_CONSTRAINT
    sweep_order: str = LEXICOGRAPHIC
    control_reduction: Optional[float] = None
    warm_start: bool = False

    def __post_init__(self):
        if self.bc_mode not in (STATE_CONSTRAINT, DIRICHLET):
            raise ConfigurationError(f"unknown bc_mode {self.bc_mode!r}")
        if self.sweep_order not in (LEXICOGRAPHIC, BY_VALUE):
            raise ConfigurationError(f"unknown sweep_order {self.sweep_order!r}")
        if self.tol <= 0.0:
            raise ConfigurationError("tol must be positive")
        if self.max_sweeps is not None and self.max_sweeps < 1:
            raise ConfigurationError("max_sweeps must be at least 1")
        if self.control_reduction is not None and self.control_reduction <= 1.0:
            raise ConfigurationError("control_reduction factor must exceed 1")

    def sweep_limit(self, grid: Grid) -> int:
        return self.max_sweeps if self.max_sweeps is not None else 10 * max(grid.shape)


@dataclass
class SweepStats:
    """Outcome of one solve: effort counters and convergence status."""

    sweeps: int = 0
    node_relaxations: int = 0
    candidate_evals: int = 0
    converged: bool = True
    max_change: float = 0.0
    warning: Optional[str] = None


@dataclass
class CandidateEvaluation:
    """One (node, control) evaluation of the relaxation functional."""

    control_index: int
    step_h: float
    foot: np.ndarray
    value: float


def classify_nodes(grid: Grid, spec: ProblemSpec) -> np.ndarray:
    """Per-interior-serial node kind: free / target / obstacle."""
    pts = grid.interior_points()
    kind = np.zeros(grid.n_interior, dtype=np.uint8)
    kind[spec.target.contains(pts)] = KIND_TARGET
    if spec.obstacles is not None:
        kind[spec.obstacles.contains(pts)] = KIND_OBSTACLE
    return kind


def hard_node_mask(grid: Grid, spec: ProblemSpec,
                   kind: np.ndarray | None = None) -> np.ndarray:
    """Flat extended-grid mask of structurally impassable nodes.

    Ghost and obstacle nodes: any candidate whose foot cell puts nonzero
    weight on one is rejected outright.  (Merely unreached nodes are not
    in this mask; their sentinel values flow through the interpolation and
    lose arithmetically.)
    """
    if kind is None:
        kind = classify_nodes(grid, spec)
    iflat = grid.interior_flat()
    hard = np.ones(grid.n_ext, dtype=np.uint8)
    hard[iflat] = 0
    hard[iflat[kind == KIND_OBSTACLE]] = 1
    return hard


def init_value_field(grid: Grid, spec: ProblemSpec,
                     kind: np.ndarray | None = None) -> NodeField:
    """Sentinel-initialized field with 0 on target nodes."""
    field = NodeField(grid)
    if kind is None:
        kind = classify_nodes(grid, spec)
    # interior views are non-contiguous; write through flat indices
    field.flat[grid.interior_flat()[kind == KIND_TARGET]] = 0.0
    return field


class CandidateTable:
    """Precomputed per-(node, control) foot data for one grid + problem.

    Arrays are indexed ``[serial, control]``: ``base`` flat lower-corner
    index of the foot cell, ``locs`` local cell coordinates, ``cost`` the
    step cost ``h * l(x, a)`` with -1 flagging degenerate controls
    (``|f| < eps_speed``).  ``hard_base`` is the default structural-block
    mask (ghost and obstacle nodes) the sweeps reject feet against.
    """

    def __init__(self, grid: Grid, spec: ProblemSpec):
        if spec.dim != grid.dim:
            raise ConfigurationError("grid/problem dimension mismatch")
        self.grid = grid
        self.spec = spec
        self.kind = classify_nodes(grid, spec)
        self.iflat = grid.interior_flat()
        controls = spec.control_set.controls
        nc = controls.shape[0]
        ni = grid.n_interior
        X = grid.interior_points()

        max_speed = 0.0
        for a in controls:
            speed = np.linalg.norm(spec.dynamics(X, a), axis=1)
            max_speed = max(max_speed, float(speed.max()))
        if max_speed == 0.0:
            raise ConfigurationError("dynamics vanish identically")
        self.eps_speed = EPS_SPEED_REL * max_speed

        self.base = np.zeros((ni, nc), dtype=np.int64)
        self.locs = np.zeros((ni, nc, grid.dim))
        self.cost = np.full((ni, nc), -1.0)
        k = grid.k_step
        for c, a in enumerate(controls):
            F = spec.dynamics(X, a)
            speed = np.linalg.norm(F, axis=1)
            adm = speed >= self.eps_speed
            if not adm.any():
                continue
            h = k / speed[adm]
            feet = X[adm] + h[:, None] * F[adm]
            cell, local = grid.locate_many(feet)
            self.base[adm, c] = grid.cell_flat_base(cell)
            self.locs[adm, c, :] = local
            if spec.running_cost is None:
                self.cost[adm, c] = h
            else:
                self.cost[adm, c] = h * np.asarray(spec.running_cost(X[adm], a))
        self._all_active = np.ones(grid.n_ext, dtype=np.uint8)
        self._no_allowed = np.empty((0, 0), dtype=np.uint8)
        self.hard_base = hard_node_mask(grid, spec, self.kind)

    @property
    def n_controls(self) -> int:
        return self.base.shape[1]

    def all_active(self) -> np.ndarray:
        return self._all_active


def solve(field: NodeField, spec: ProblemSpec, node_set: np.ndarray | None = None,
          cfg: SolverConfig | None = None,
          strategy: ExecutionStrategy | None = None, *,
          table: CandidateTable | None = None,
          active: np.ndarray | None = None,
          frozen: np.ndarray | None = None,
          hard: np.ndarray | None = None,
          allowed: np.ndarray | None = None) -> SweepStats:
    """Gauss-Seidel value iteration over ``node_set`` until converged.

    ``field`` is updated in place, starting from whatever it holds (caller
    initializes; see :func:`init_value_field`).  ``node_set`` is an array of
    interior serials (None = all interior, lexicographic C-order).  ``active``
    is a flat extended-grid mask choosing which nodes are read live; reads
    elsewhere use ``frozen`` when given (Dirichlet data) and are otherwise
    blocked structurally (state constraint: a candidate whose foot cell
    touches such a node is rejected).  ``hard`` overrides that structural
    block mask; the default is ghost plus obstacle nodes, widened to the
    complement of ``active`` in the state-constraint case.  Sentinel values
    at readable corners are not special: those candidates evaluate huge and
    lose on their own.  ``allowed`` is an optional per-(serial, control)
    mask (conical reduction).  Under a method1 strategy each sweep is split
    into contiguous worker batches; the convergence norm (max change <=
    tol) is taken after the barrier.  Non-convergence within the sweep
    limit sets a warning on the returned stats, not an error.
    """
    cfg = cfg or SolverConfig()
    strategy = strategy or ExecutionStrategy()
    grid = field.grid
    if table is None:
        table = CandidateTable(grid, spec)
    if node_set is None:
        order = np.arange(grid.n_interior, dtype=np.int64)
    else:
        order = np.asarray(node_set, dtype=np.int64)
    if cfg.sweep_order == BY_VALUE and order.size:
        vals = field.flat[table.iflat[order]]
        order = order[np.argsort(vals, kind="stable")]

    u = field.flat
    active_arr = table.all_active() if active is None else active
    frozen_arr = u if frozen is None else frozen
    if hard is None:
        if active is None or frozen is not None:
            hard_arr = table.hard_base
        else:
            hard_arr = np.where(active_arr != 0, table.hard_base, np.uint8(1))
    else:
        hard_arr = hard
    use_allowed = allowed is not None
    allowed_arr = allowed if use_allowed else table._no_allowed

    plan = SweepPlan(order.size, strategy)
    stats = SweepStats()
    limit = cfg.sweep_limit(grid)
    while stats.sweeps < limit:
        res = plan.run_sweep(
            lambda s, e: _kernels.sweep_batch(
                u, order, s, e, table.iflat, table.kind, table.base,
                table.locs, table.cost, grid.corner_offsets, active_arr,
                frozen_arr, hard_arr, allowed_arr, use_allowed,
                field.sentinel, grid.dim,
            )
        )
        if res is None:
            return stats
        maxch, nrelax, nevals = res
        stats.sweeps += 1
        stats.node_relaxations += int(nrelax)
        stats.candidate_evals += int(nevals)
        stats.max_change = float(maxch)
        if maxch <= cfg.tol:
            return stats
    stats.converged = False
    stats.warning = (
        f"no convergence after {stats.sweeps} sweeps "
        f"(max change {stats.max_change:.3e} > tol {cfg.tol:.1e})"
    )
    return stats


# -- reference (uncompiled) relaxation path --------------------------------


def _as_serial(grid: Grid, index) -> int:
    if np.ndim(index) == 0:
        return int(index)
    return grid.index_to_serial(index)


def _normalize_active(grid: Grid, active_set) -> np.ndarray | None:
    """Accept a flat/ext-shaped mask or a multi-index predicate."""
    if active_set is None:
        return None
    if callable(active_set):
        g = grid.ghost_width
        mask = np.zeros(grid.n_ext, dtype=bool)
        for flat in range(grid.n_ext):
            ext_idx = np.unravel_index(flat, grid.ext_shape)
            mask[flat] = bool(active_set(tuple(int(i) - g for i in ext_idx)))
        return mask
    arr = np.asarray(active_set)
    if arr.shape == grid.ext_shape:
        arr = arr.reshape(-1)
    return arr.astype(bool)


def evaluate_candidates(field: NodeField, spec: ProblemSpec, index,
                        active_set=None, frozen: NodeField | None = None,
                        eps_speed: float | None = None) -> list[CandidateEvaluation]:
    """All admissible candidate evaluations at one node (reference path).

    Candidates whose foot cell puts nonzero weight on a structurally
    blocked corner (ghost/obstacle, or outside ``active_set`` with no
    ``frozen`` data to fall back on) are returned with ``value`` equal to
    the sentinel.  Readable corners contribute whatever they hold, so a
    candidate leaning on unreached (sentinel-valued) nodes evaluates huge
    and loses on its own.  ``eps_speed`` defaults to ``1e-12 * max |f|``
    over this node's controls.
    """
    grid = field.grid
    serial = _as_serial(grid, index)
    x = grid.interior_points()[serial]
    controls = spec.control_set.controls
    speeds = [float(np.linalg.norm(spec.dynamics(x[None, :], a)[0])) for a in controls]
    if eps_speed is None:
        eps_speed = EPS_SPEED_REL * max(speeds)
    active = _normalize_active(grid, active_set)
    hard = hard_node_mask(grid, spec)
    out = []
    for c, a in enumerate(controls):
        if speeds[c] < eps_speed:
            continue
        f = spec.dynamics(x[None, :], a)[0]
        h = grid.k_step / speeds[c]
        foot = x + h * f
        cell, local = grid.locate_many(foot[None, :])
        base = grid.cell_flat_base(cell)[0]
        corners = base + grid.corner_offsets
        w = interpolation_weights(local)[0]
        value = 0.0
        for corner, wc in zip(corners, w):
            if wc == 0.0:
                continue
            if hard[corner]:
                value = field.sentinel
                break
            if active is None or active[corner]:
                cv = field.flat[corner]
            elif frozen is not None:
                cv = frozen.flat[corner]
            else:
                # state constraint: the foot may not lean on this node
                value = field.sentinel
                break
            value += wc * cv
        else:
            cost = 1.0 if spec.running_cost is None else float(
                np.asarray(spec.running_cost(x[None, :], a))[0])
            value += h * cost
        out.append(CandidateEvaluation(control_index=c, step_h=h,
                                       foot=foot, value=value))
    return out


def relax_node(field: NodeField, spec: ProblemSpec, index, active_set=None,
               frozen: NodeField | None = None,
               eps_speed: float | None = None):
    """One node relaxation (pure, does not write the field).

    Returns ``(new_value, control_index)``; the index is None on target,
    obstacle and kept-current nodes.  Target nodes give 0, obstacle nodes
    the sentinel.  The best candidate wins (ties to the lowest control
    index) only when it beats the current value; degenerate, blocked and
    non-improving candidates leave the node unchanged.
    """
    grid = field.grid
    serial = _as_serial(grid, index)
    x = grid.interior_points()[serial]
    if spec.obstacles is not None and bool(spec.obstacles.contains(x[None, :])[0]):
        return field.sentinel, None
    if bool(spec.target.contains(x[None, :])[0]):
        return 0.0, None
    cands = evaluate_candidates(field, spec, serial, active_set=active_set,
                                frozen=frozen, eps_speed=eps_speed)
    half = 0.5 * field.sentinel
    live = [c for c in cands if c.value < half]
    current = float(field.flat[grid.interior_flat()[serial]])
    if not live:
        return current, None
    best = min(live, key=lambda c: (c.value, c.control_index))
    if best.value >= current:
        return current, None
    return best.value, best.control_index


# -- feedback extraction and control reduction -----------------------------


@dataclass
class FeedbackField:
    """Optimal (discrete-argmin) control index per interior node; -1 = none."""

    grid: Grid
    control_set: "object"
    indices: np.ndarray

    def control_vector(self, serial: int) -> np.ndarray | None:
        c = int(self.indices[serial])
        return None if c < 0 else self.control_set.controls[c]


def extract_feedback(field: NodeField, spec: ProblemSpec,
                     table: CandidateTable | None = None,
                     strategy: ExecutionStrategy | None = None,
                     allowed: np.ndarray | None = None):
    """Argmin control of the relaxation functional at every interior node.

    Reads are Dirichlet-style: every corner except ghost/obstacle nodes is
    readable from the field itself, sentinel values included.  Nodes that
    are target/obstacle, hold values >= sentinel/2 or have no surviving
    candidate get index -1.

    Returns ``(FeedbackField, candidate_evals)``.
    """
    grid = field.grid
    if table is None:
        table = CandidateTable(grid, spec)
    strategy = strategy or ExecutionStrategy()
    order = np.arange(grid.n_interior, dtype=np.int64)
    out = np.full(grid.n_interior, -1, dtype=np.int32)
    use_allowed = allowed is not None
    allowed_arr = allowed if use_allowed else table._no_allowed
    plan = SweepPlan(order.size, strategy)
    res = plan.run_sweep(
        lambda s, e: (0.0, _kernels.feedback_batch(
            field.flat, order, s, e, table.iflat, table.kind, table.base,
            table.locs, table.cost, grid.corner_offsets, table.hard_base,
            allowed_arr, use_allowed, field.sentinel, grid.dim, out,
        ))
    )
    evals = int(res[1]) if res is not None else 0
    return FeedbackField(grid, spec.control_set, out), evals


def reduce_controls(control_set, a_star: np.ndarray, r: float) -> np.ndarray:
    """Indices of controls within angle ``pi/r`` of ``a_star``.

    Only meaningful for unit-norm control geometries; lattice/explicit sets
    are returned whole (reduction silently skipped).  ``a_star`` itself
    always qualifies (``cos(pi/r) < 1`` for r > 1).
    """
    if r <= 1.0:
        raise ConfigurationError("reduction factor must exceed 1")
    if not control_set.is_unit:
        return np.arange(len(control_set.controls), dtype=np.int64)
    thresh = np.cos(np.pi / r) - 1.0e-12
    dots = control_set.controls @ np.asarray(a_star, dtype=float)
    return np.where(dots >= thresh)[0]


def allowed_mask(control_set, feedback: np.ndarray, r: float) -> np.ndarray:
    """Per-(node, control) conical-reduction mask from a feedback field.

    Nodes with feedback -1, and every node of a non-unit (lattice/explicit)
    control geometry, keep the full control set.
    """
    controls = control_set.controls
    mask = np.ones((feedback.size, controls.shape[0]), dtype=np.uint8)
    if not control_set.is_unit:
        return mask
    thresh = np.cos(np.pi / r) - 1.0e-12
    pair_ok = (controls @ controls.T >= thresh).astype(np.uint8)
    has = feedback >= 0
    mask[has] = pair_ok[feedback[has]]
    return mask
