"""Convergence of the single-domain solver on the analytic eikonal case.

The minimum-time function for unit-speed straight-line motion to the ball
of radius 0.5 is dist(x, ball) = max(|x| - 0.5, 0), so the discrete error
can be measured exactly.  Halving the grid step should roughly halve the
error (the scheme is first order).
"""
from __future__ import annotations

import numpy as np

from patchyhjb import preset, solve_single


def max_error(nodes: int) -> tuple[float, int]:
    spec = preset("eikonal2d", controls=32)
    grid = spec.make_grid(nodes)
    field, stats = solve_single(spec, grid)
    pts = grid.interior_points()
    exact = np.maximum(np.linalg.norm(pts, axis=1) - 0.5, 0.0)
    err = np.abs(field.interior.ravel() - exact).max()
    return float(err), stats.sweeps


def main() -> None:
    print(f"{'nodes':>6} {'k':>7} {'max error':>10} {'sweeps':>7} {'ratio':>6}")
    prev = None
    for nodes in (51, 101, 201):
        err, sweeps = max_error(nodes)
        k = 4.0 / (nodes - 1)
        ratio = "" if prev is None else f"{prev / err:6.2f}"
        print(f"{nodes:>6} {k:7.3f} {err:10.5f} {sweeps:>7} {ratio:>6}")
        prev = err


if __name__ == "__main__":
    main()
