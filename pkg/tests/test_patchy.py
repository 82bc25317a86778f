from __future__ import annotations

import numpy as np
import pytest

from patchyhjb import (
    OBSTACLE,
    SENTINEL,
    TARGET,
    UNCOVERED,
    UNREACHABLE,
    CandidateTable,
    ConfigurationError,
    Grid,
    NodeField,
    PatchMap,
    PatchyConfig,
    ProblemSpec,
    SolverConfig,
    assemble_patches,
    coarse_solve_and_lift,
    discretize_circle,
    mask_unreachable,
    preset,
    run_patchy,
    solve_patches,
    solve_single,
    transport_color,
)
from patchyhjb.problems import TargetSpec
from patchyhjb.solver import FeedbackField


def _leftflow(nodes=(21, 21)) -> tuple[ProblemSpec, Grid]:
    """Unit-speed straight-line dynamics toward the plane x1 = 0."""

    def dyn(X, a):
        X = np.atleast_2d(X)
        return np.tile(np.asarray(a, dtype=float), (X.shape[0], 1))

    spec = ProblemSpec(
        name="leftflow", dim=2, box_lo=(-2.0, -2.0), box_hi=(2.0, 2.0),
        dynamics=dyn, control_set=discretize_circle(4),
        target=TargetSpec.plane(axis=0, offset=0.0),
    )
    return spec, Grid(spec.box_lo, spec.box_hi, nodes)


def _plain_map(grid: Grid, color: np.ndarray, n_patches: int) -> PatchMap:
    nodes = tuple(
        np.where(color == j)[0].astype(np.int64) for j in range(n_patches)
    )
    return PatchMap(grid, n_patches, color, nodes,
                    np.zeros(grid.n_interior, dtype=bool),
                    np.empty(0, dtype=np.int64))


# -- configuration ---------------------------------------------------------


def test_patchy_config_validation():
    with pytest.raises(ConfigurationError):
        PatchyConfig(n_patches=0)
    with pytest.raises(ConfigurationError):
        PatchyConfig(coarse_nodes=101, fine_nodes=51)
    with pytest.raises(ConfigurationError):
        PatchyConfig(bc_mode="neumann")
    with pytest.raises(ConfigurationError):
        PatchyConfig(color_tol=0.0)
    with pytest.raises(ConfigurationError):
        PatchyConfig(reduction=1.0)


# -- coarse solve and lift -------------------------------------------------


def test_lift_reproduces_coarse_solution_at_equal_resolution():
    spec = preset("eikonal2d", controls=16)
    g = Grid(spec.box_lo, spec.box_hi, (41, 41))
    lifted, feedback, _ = coarse_solve_and_lift(spec, g, g)
    direct, _ = solve_single(spec, g)
    assert np.array_equal(lifted.interior, direct.interior)
    assert feedback.indices.size == g.n_interior


def test_lift_carries_coarse_accuracy():
    spec = preset("eikonal2d", controls=32)
    coarse = Grid(spec.box_lo, spec.box_hi, (51, 51))
    fine = Grid(spec.box_lo, spec.box_hi, (101, 101))
    lifted, _, _ = coarse_solve_and_lift(spec, coarse, fine)
    pts = fine.interior_points()
    exact = np.maximum(np.linalg.norm(pts, axis=1) - 0.5, 0.0)
    m = lifted.reachable_mask().ravel()
    assert np.abs(lifted.interior.ravel()[m] - exact[m]).max() \
        <= 2.0 * coarse.k_step


def test_lift_saturates_unreachable_and_clears_feedback():
    spec = preset("fan2d", controls=16)
    g = Grid(spec.box_lo, spec.box_hi, (41, 41))
    lifted, feedback, _ = coarse_solve_and_lift(spec, g, g)
    pts = g.interior_points()
    dead = (np.abs(pts[:, 0] + pts[:, 1] + 0.1) < 1e-9) \
        & (np.abs(pts[:, 0]) > 1e-9)
    assert dead.any()
    assert np.all(lifted.interior.ravel()[dead] == SENTINEL)
    assert np.all(feedback.indices[dead] == -1)


# -- unreachable masking ---------------------------------------------------


def test_mask_unreachable_defaults_to_half_sentinel():
    spec = preset("fan2d", controls=16)
    g = Grid(spec.box_lo, spec.box_hi, (41, 41))
    lifted, _, _ = coarse_solve_and_lift(spec, g, g)
    mask = mask_unreachable(lifted)
    pts = g.interior_points()
    dead = (np.abs(pts[:, 0] + pts[:, 1] + 0.1) < 1e-9) \
        & (np.abs(pts[:, 0]) > 1e-9)
    assert np.all(mask[dead])
    assert mask.mean() < 0.2


def test_mask_unreachable_empty_for_eikonal():
    spec = preset("eikonal2d", controls=16)
    coarse = Grid(spec.box_lo, spec.box_hi, (31, 31))
    fine = Grid(spec.box_lo, spec.box_hi, (41, 41))
    lifted, _, _ = coarse_solve_and_lift(spec, coarse, fine)
    assert not mask_unreachable(lifted).any()


def test_mask_unreachable_custom_threshold():
    spec = preset("eikonal2d", controls=16)
    g = Grid(spec.box_lo, spec.box_hi, (31, 31))
    lifted, _, _ = coarse_solve_and_lift(spec, g, g)
    mask = mask_unreachable(lifted, threshold=1.0)
    vals = lifted.interior.ravel()
    assert np.array_equal(mask, vals >= 1.0)
    assert mask.any() and not mask.all()


# -- color transport -------------------------------------------------------


def test_transport_fills_downstream_band():
    # every node points left; the held target column floods everything on
    # its right with 1 and leaves the left half at 0
    spec, g = _leftflow((21, 21))
    fb = FeedbackField(g, spec.control_set,
                       np.full(g.n_interior, 2, dtype=np.int32))
    part = np.where(spec.target.contains(g.interior_points()))[0]
    phi, sweeps, updates, warning = transport_color(spec, g, fb, part)
    assert warning is None
    vals = phi.interior
    assert np.array_equal(vals[10:, :], np.ones((11, 21)))
    assert np.array_equal(vals[:10, :], np.zeros((10, 21)))
    assert sweeps <= 3 and updates > 0


def test_transport_midway_foot_blends_half():
    # x spacing is twice the step, so a leftward foot lands midway between
    # the held column (1) and the not-yet-updated node itself (0)
    spec, g = _leftflow((11, 21))
    assert g.k_step == pytest.approx(0.2)
    fb = FeedbackField(g, spec.control_set,
                       np.full(g.n_interior, 2, dtype=np.int32))
    part = np.where(spec.target.contains(g.interior_points()))[0]
    phi, _, _, _ = transport_color(spec, g, fb, part, max_sweeps=1)
    assert phi.interior[6, 10] == pytest.approx(0.5, abs=1e-12)


def test_transport_keeps_zero_without_feedback():
    spec, g = _leftflow((21, 21))
    idx = np.full(g.n_interior, 2, dtype=np.int32)
    idx[g.index_to_serial((15, 10))] = -1
    fb = FeedbackField(g, spec.control_set, idx)
    part = np.where(spec.target.contains(g.interior_points()))[0]
    phi, _, _, _ = transport_color(spec, g, fb, part)
    assert phi.interior[15, 10] == 0.0  # no feedback, keeps 0
    assert phi.interior[16, 10] == 0.0  # downstream of the hole
    assert phi.interior[16, 11] == 1.0  # unaffected row


def test_transport_single_color_covers_reachable():
    spec = preset("eikonal2d", controls=16)
    g = Grid(spec.box_lo, spec.box_hi, (41, 41))
    lifted, feedback, _ = coarse_solve_and_lift(spec, g, g)
    part = np.where(spec.target.contains(g.interior_points()))[0]
    color_tol = 1e-2
    phi, _, _, _ = transport_color(spec, g, feedback, part,
                                   color_tol=color_tol)
    target = spec.target.contains(g.interior_points())
    vals = phi.interior.ravel()
    assert np.all(vals[~target] >= 1.0 - color_tol)
    assert np.all(vals <= 1.0 + 1e-12)


def test_transport_conserves_color_mass():
    spec = preset("zermelo2d", controls=16)
    fine = Grid(spec.box_lo, spec.box_hi, (41, 41))
    coarse = Grid(spec.box_lo, spec.box_hi, (21, 21))
    lifted, feedback, _ = coarse_solve_and_lift(spec, coarse, fine)
    from patchyhjb import partition_target

    parts = partition_target(spec.target, fine, 4)
    total = np.zeros(fine.n_interior)
    for part in parts:
        phi, _, _, _ = transport_color(spec, fine, feedback, part)
        total += phi.interior.ravel()
    assert total.max() <= 1.0 + 1e-6


# -- patch assembly --------------------------------------------------------


def _phi(grid: Grid, entries: dict) -> NodeField:
    f = NodeField(grid)
    f.values[...] = 0.0
    flat = grid.interior_flat()
    for serial, v in entries.items():
        f.flat[flat[serial]] = v
    return f


def test_assembly_argmax_tie_and_relaxed_rules():
    g = Grid((0.0, 0.0), (1.0, 1.0), (5, 5))
    kind = np.zeros(g.n_interior, dtype=np.int8)
    mask = np.zeros(g.n_interior, dtype=bool)
    phi0 = _phi(g, {0: 0.8, 1: 0.5, 2: 0.3})
    phi1 = _phi(g, {0: 0.2, 1: 0.5, 2: 0.4})
    pm = assemble_patches([(0, phi0), (1, phi1)], mask, g, kind=kind)
    assert pm.color[0] == 0  # clear majority
    assert pm.color[1] == 0  # exact tie goes to the lowest color
    assert pm.color[2] == 1  # below 1/2 still takes the argmax


def test_assembly_majority_repair():
    g = Grid((0.0, 0.0), (1.0, 1.0), (5, 5))
    kind = np.zeros(g.n_interior, dtype=np.int8)
    mask = np.zeros(g.n_interior, dtype=bool)
    x = g.index_to_serial((2, 2))
    phi1 = _phi(g, {g.index_to_serial((2, 1)): 0.8})
    phi2 = _phi(g, {g.index_to_serial((1, 2)): 0.9,
                    g.index_to_serial((3, 2)): 0.9,
                    g.index_to_serial((2, 3)): 0.9})
    warnings: list = []
    pm = assemble_patches([(1, phi1), (2, phi2)], mask, g, kind=kind,
                          warnings=warnings)
    # x itself had no color mass; two of its neighbors say 2, one says 1
    assert pm.color[x] == 2
    assert pm.uncovered_serials.size == 0
    assert not any("uncovered" in w for w in warnings)


def test_assembly_records_unrepairable_nodes():
    g = Grid((0.0, 0.0), (1.0, 1.0), (4, 4))
    kind = np.zeros(g.n_interior, dtype=np.int8)
    mask = np.zeros(g.n_interior, dtype=bool)
    warnings: list = []
    pm = assemble_patches([(0, _phi(g, {}))], mask, g, kind=kind,
                          warnings=warnings)
    assert pm.uncovered_serials.size == g.n_interior
    assert np.all(pm.color == 0)  # fallback assignment
    assert warnings  # loudly reported


def test_assembly_classifies_special_nodes():
    spec = preset("eikonal2d-obstacles", controls=8)
    g = Grid(spec.box_lo, spec.box_hi, (21, 21))
    table = CandidateTable(g, spec)
    mask = np.zeros(g.n_interior, dtype=bool)
    mask[0] = True  # pretend one node is coarse-unreachable
    ones = NodeField(g)
    ones.values[...] = 1.0
    pm = assemble_patches([(0, ones)], mask, g, kind=table.kind)
    pts = g.interior_points()
    assert np.all(pm.color[spec.target.contains(pts)] == TARGET)
    obst = spec.obstacles.contains(pts)
    assert np.all(pm.color[obst] == OBSTACLE)
    assert pm.color[0] == UNREACHABLE
    assert UNCOVERED not in pm.color


def test_assembly_boundary_flags():
    g = Grid((0.0, 0.0), (1.0, 1.0), (6, 6))
    kind = np.zeros(g.n_interior, dtype=np.int8)
    mask = np.zeros(g.n_interior, dtype=bool)
    left = NodeField(g)
    right = NodeField(g)
    left.values[...] = 0.0
    right.values[...] = 0.0
    left.interior[:3, :] = 1.0
    right.interior[3:, :] = 1.0
    pm = assemble_patches([(0, left), (1, right)], mask, g, kind=kind)
    b = pm.boundary.reshape(g.shape)
    assert np.all(b[2, :]) and np.all(b[3, :])
    assert not b[0].any() and not b[5].any()


def test_patch_size_report_and_imbalance():
    g = Grid((0.0, 0.0), (1.0, 1.0), (20, 20))
    color = np.zeros(g.n_interior, dtype=np.int32)
    color[:15] = np.arange(15) % 15 + 1  # 15 singleton patches
    pm = _plain_map(g, color, 16)
    lo, hi, mean = pm.size_report()
    assert (lo, hi) == (1, g.n_interior - 15)
    assert pm.imbalance_warning() is not None
    balanced = run_patchy(
        preset("eikonal2d", controls=8),
        PatchyConfig(n_patches=4, coarse_nodes=21, fine_nodes=31),
    ).patch_map
    assert balanced.imbalance_warning() is None


# -- patch solves ----------------------------------------------------------


def test_single_patch_dirichlet_matches_single_domain():
    spec = preset("eikonal2d", controls=16)
    cfg = SolverConfig()
    res = run_patchy(
        spec,
        PatchyConfig(n_patches=1, coarse_nodes=31, fine_nodes=41,
                     bc_mode="dirichlet"),
        cfg,
    )
    g = Grid(spec.box_lo, spec.box_hi, (41, 41))
    direct, _ = solve_single(spec, g)
    assert np.abs(res.value.interior - direct.interior).max() <= 10.0 * cfg.tol


def test_trapped_patch_node_keeps_seed_or_sentinel():
    # a one-node patch under state constraint: every candidate foot leaves
    # the patch, so the node keeps its warm-start seed (or the sentinel)
    spec = preset("eikonal2d", controls=8)
    g = Grid(spec.box_lo, spec.box_hi, (21, 21))
    lifted, feedback, _ = coarse_solve_and_lift(spec, g, g)
    x = g.index_to_serial((15, 15))
    color = np.zeros(g.n_interior, dtype=np.int32)
    color[spec.target.contains(g.interior_points())] = TARGET
    color[x] = 1
    pm = _plain_map(g, color, 2)
    pm.color[spec.target.contains(g.interior_points())] = TARGET

    warm, _, _ = solve_patches(
        spec, g, pm, lifted, PatchyConfig(n_patches=2, warm_start=True))
    assert warm.interior[15, 15] == lifted.interior[15, 15]

    cold, _, _ = solve_patches(
        spec, g, pm, lifted, PatchyConfig(n_patches=2))
    assert cold.interior[15, 15] == SENTINEL


def test_patch_solves_are_order_independent():
    spec = preset("eikonal2d", controls=16)
    pcfg = PatchyConfig(n_patches=4, coarse_nodes=21, fine_nodes=41)
    res = run_patchy(spec, pcfg)
    pm = res.patch_map
    flipped_color = pm.color.copy()
    live = pm.color >= 0
    flipped_color[live] = pm.n_patches - 1 - pm.color[live]
    flipped = PatchMap(pm.grid, pm.n_patches, flipped_color,
                       tuple(reversed(pm.patch_nodes)), pm.boundary,
                       pm.uncovered_serials)
    g = pm.grid
    table = CandidateTable(g, spec)
    a, _, _ = solve_patches(spec, g, pm, res.lifted,
                            PatchyConfig(n_patches=4), table=table)
    b, _, _ = solve_patches(spec, g, flipped, res.lifted,
                            PatchyConfig(n_patches=4), table=table)
    assert np.array_equal(a.interior, b.interior)


def test_patchy_close_to_reference_on_zermelo():
    spec = preset("zermelo2d", controls=16)
    res = run_patchy(
        spec, PatchyConfig(n_patches=4, coarse_nodes=31, fine_nodes=61))
    from patchyhjb import error_report, make_static_decomposition, solve_dd

    g = Grid(spec.box_lo, spec.box_hi, (61, 61))
    ref, _ = solve_dd(spec, g, make_static_decomposition(g, 4))
    rep = error_report(res.value, ref)
    assert rep.e1 <= 0.05
    assert rep.einf >= rep.e1


def test_run_patchy_reports_phases_and_counters():
    spec = preset("eikonal2d", controls=8)
    res = run_patchy(
        spec, PatchyConfig(n_patches=2, coarse_nodes=21, fine_nodes=31))
    for key in ("tables", "coarse", "lift", "transport", "patch_solve"):
        assert key in res.stats.phases
    assert res.stats.node_relaxations > 0
    assert res.stats.candidate_evals > 0
    assert res.stats.transport_updates > 0
    assert res.coarse_stats.converged


def test_obstacle_preset_full_pipeline():
    spec = preset("eikonal2d-obstacles", controls=16)
    res = run_patchy(
        spec, PatchyConfig(n_patches=4, coarse_nodes=31, fine_nodes=41))
    g = res.value.grid
    blocked = spec.obstacles.contains(g.interior_points())
    assert np.all(res.value.interior.ravel()[blocked] == SENTINEL)
    assert np.all(res.patch_map.color[blocked] == OBSTACLE)
