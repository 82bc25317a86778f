from __future__ import annotations

import numpy as np
import pytest

from patchyhjb import (
    SENTINEL,
    ConfigurationError,
    Grid,
    SolverConfig,
    make_static_decomposition,
    preset,
    solve_dd,
    solve_single,
)


def _grid(nodes: int, dim: int = 2) -> Grid:
    return Grid((-2.0,) * dim, (2.0,) * dim, (nodes,) * dim)


# -- decomposition geometry ------------------------------------------------


def test_single_subdomain_is_whole_interior():
    g = _grid(30)
    dec = make_static_decomposition(g, 1)
    assert len(dec.subdomains) == 1
    sub = dec.subdomains[0]
    assert sub.lo == (0, 0) and sub.hi == (29, 29)
    assert sub.serials.size == g.n_interior


def test_two_slabs_share_one_cell():
    g = _grid(100)
    dec = make_static_decomposition(g, 2)
    (a, b) = dec.subdomains
    assert (a.lo[0], a.hi[0]) == (0, 50)
    assert (b.lo[0], b.hi[0]) == (49, 99)
    assert (a.lo[1], a.hi[1]) == (0, 99)


def test_four_boxes_cover_and_overlap():
    g = _grid(100)
    dec = make_static_decomposition(g, 4)
    assert len(dec.subdomains) == 4
    covered = np.zeros(g.n_interior, dtype=int)
    for sub in dec.subdomains:
        np.add.at(covered, sub.serials, 1)
        assert sub.serials.size == 51 * 51
    assert covered.min() >= 1  # union is the whole interior
    assert (covered >= 2).any()  # bands are shared


def test_wider_overlap_respected():
    g = _grid(100)
    dec = make_static_decomposition(g, 2, overlap_cells=2)
    (a, b) = dec.subdomains
    shared_nodes = a.hi[0] - b.lo[0] + 1
    assert shared_nodes - 1 >= 2  # shared full cells


def test_unsupported_counts_raise():
    g = _grid(40)
    for bad in (3, 5, 6, 32):
        with pytest.raises(ConfigurationError):
            make_static_decomposition(g, bad)
    with pytest.raises(ConfigurationError):
        make_static_decomposition(g, 2, overlap_cells=0)


def test_three_dimensional_factorizations():
    g = _grid(20, dim=3)
    for r, want in [(2, (2, 1, 1)), (4, (2, 2, 1)), (8, (2, 2, 2)),
                    (16, (4, 2, 2))]:
        dec = make_static_decomposition(g, r)
        assert len(dec.subdomains) == r
        covered = np.zeros(g.n_interior, dtype=int)
        for sub in dec.subdomains:
            np.add.at(covered, sub.serials, 1)
        assert covered.min() >= 1, r
        spans = {ax: len({(s.lo[ax], s.hi[ax]) for s in dec.subdomains})
                 for ax in range(3)}
        assert tuple(spans[ax] for ax in range(3)) == want


def test_tiny_grid_rejected():
    g = _grid(6)
    with pytest.raises(ConfigurationError):
        make_static_decomposition(g, 16)  # needs >= 8 nodes per axis


# -- the four-step algorithm -----------------------------------------------


def test_r1_matches_single_domain_exactly():
    spec = preset("eikonal2d", controls=16)
    g = _grid(31)
    u_single, _ = solve_single(spec, g)
    u_dd, _ = solve_dd(spec, g, make_static_decomposition(g, 1))
    assert np.array_equal(u_dd.interior, u_single.interior)


@pytest.mark.parametrize("name", ["eikonal2d", "fan2d", "zermelo2d"])
def test_splitting_equivalence(name):
    spec = preset(name, controls=16)
    g = _grid(31)
    cfg = SolverConfig()
    u1, _ = solve_dd(spec, g, make_static_decomposition(g, 1), cfg)
    for r in (2, 4):
        ur, _ = solve_dd(spec, g, make_static_decomposition(g, r), cfg)
        assert np.abs(ur.interior - u1.interior).max() <= 10.0 * cfg.tol, r


def test_outer_iterations_never_increase_values():
    spec = preset("eikonal2d", controls=16)
    g = _grid(31)
    dec = make_static_decomposition(g, 4)
    from patchyhjb import init_value_field

    field = init_value_field(g, spec)
    prev = field.interior.copy()
    for _ in range(5):
        solve_dd(spec, g, dec, SolverConfig(max_sweeps=1), field=field)
        assert np.all(field.interior <= prev + 1e-12)
        prev = field.interior.copy()


def test_obstacles_hold_sentinel():
    spec = preset("eikonal2d-obstacles", controls=16)
    g = _grid(41)
    u, _ = solve_dd(spec, g, make_static_decomposition(g, 4))
    blocked = spec.obstacles.contains(g.interior_points())
    assert np.all(u.interior.ravel()[blocked] == SENTINEL)
    assert u.reachable_mask().ravel()[~blocked].mean() > 0.9


def test_fan_zero_speed_lines_stay_unreachable():
    spec = preset("fan2d", controls=16)
    g = _grid(41)
    u, _ = solve_dd(spec, g, make_static_decomposition(g, 4))
    pts = g.interior_points()
    on_line = np.abs(pts[:, 0] + pts[:, 1] + 0.1) < 1e-9
    off_target = np.abs(pts[:, 0]) > 1e-9
    dead = on_line & off_target
    assert dead.any()
    assert np.all(u.interior.ravel()[dead] == SENTINEL)


def test_outer_iteration_count_reported():
    spec = preset("eikonal2d", controls=8)
    g = _grid(21)
    _, stats = solve_dd(spec, g, make_static_decomposition(g, 4))
    assert stats.converged
    assert stats.sweeps >= 1
    assert stats.node_relaxations > 0


def test_nonconvergence_flagged_not_raised():
    spec = preset("eikonal2d", controls=8)
    g = _grid(31)
    _, stats = solve_dd(spec, g, make_static_decomposition(g, 4),
                        SolverConfig(max_sweeps=2))
    assert not stats.converged
    assert stats.warning is not None
