"""Error metrics, trajectory tracing and field export/import.

The error report follows the two-normalization convention: ``e1`` averages
over nodes finite in both fields, ``e1_allnodes`` divides the same sum by
the full interior node count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import Grid, NodeField, OutOfDomainError, interpolate
from .patchy import PatchMap
from .problems import ProblemSpec

REACHED_TARGET = "reached_target"
LEFT_DOMAIN = "left_domain"
STEP_LIMIT = "step_limit"
STALLED = "stalled"


@dataclass(frozen=True)
class ErrorReport:
    """Mean/max absolute difference between two fields on one grid."""

    e1: float
    einf: float
    e1_allnodes: float
    compared_count: int
    excluded_count: int
    against: str = "dd_reference"

    def as_dict(self) -> dict:
        return {"E1": self.e1, "Einf": self.einf,
                "E1_allnodes": self.e1_allnodes,
                "compared": self.compared_count,
                "excluded": self.excluded_count}


def _interior_values(field) -> tuple[np.ndarray, float]:
    if isinstance(field, NodeField):
        return field.flat[field.grid.interior_flat()], 0.5 * field.sentinel
    arr = np.asarray(field, dtype=float).reshape(-1)
    return arr, 0.5 * 1.0e9


def error_report(a, b, against: str = "dd_reference") -> ErrorReport:
    """Compare two fields; nodes unreachable in either side are excluded."""
    va, ha = _interior_values(a)
    vb, hb = _interior_values(b)
    if va.size != vb.size:
        raise ValueError("fields live on different grids")
    both = (va < ha) & (vb < hb)
    n = va.size
    compared = int(both.sum())
    if compared == 0:
        return ErrorReport(0.0, 0.0, 0.0, 0, n, against)
    diff = np.abs(va[both] - vb[both])
    return ErrorReport(float(diff.mean()), float(diff.max()),
                       float(diff.sum() / n), compared, n - compared, against)


@dataclass(frozen=True)
class Trajectory:
    """Discrete path from a start point; steps have length exactly k."""

    points: np.ndarray
    termination: str

    @property
    def n_steps(self) -> int:
        return self.points.shape[0] - 1

    @property
    def length(self) -> float:
        return float(np.linalg.norm(np.diff(self.points, axis=0), axis=1).sum())


def trace_trajectory(field: NodeField, spec: ProblemSpec, start,
                     max_steps: int | None = None) -> Trajectory:
    """Follow the value function's greedy feedback from ``start``.

    Each step minimizes interpolated-value-plus-step-cost over the control
    set with the same step normalization as the solver (|h f| = k), so the
    path advances one grid step at a time.  Terminates on target entry,
    domain exit, the step cap, or when no control yields a finite candidate
    (zero speed or fully saturated surroundings).
    """
    grid = field.grid
    x = np.asarray(start, dtype=float)
    if x.shape != (grid.dim,):
        raise ValueError(f"start must be a {grid.dim}-vector")
    if spec.obstacles is not None and bool(spec.obstacles.contains(x[None, :])[0]):
        raise ValueError("trajectory start lies inside an obstacle")
    if max_steps is None:
        max_steps = 10 * sum(grid.shape)
    half = 0.5 * field.sentinel
    k = grid.k_step
    controls = spec.control_set.controls
    points = [x.copy()]

    for _ in range(max_steps):
        if spec.target.contains(x[None, :])[0]:
            return Trajectory(np.array(points), REACHED_TARGET)
        F = np.stack([np.asarray(spec.dynamics(x[None, :], a))[0]
                      for a in controls])
        speeds = np.linalg.norm(F, axis=1)
        eps = 1.0e-12 * max(float(speeds.max()), 1.0)
        best_val = math.inf
        best_foot = None
        for c in range(controls.shape[0]):
            if speeds[c] < eps:
                continue
            h = k / speeds[c]
            foot = x + h * F[c]
            try:
                v = interpolate(field, foot)
            except OutOfDomainError:
                continue
            if v >= half:
                continue
            if spec.running_cost is None:
                v += h
            else:
                v += h * float(np.asarray(
                    spec.running_cost(x[None, :], controls[c]))[0])
            if v < best_val:
                best_val = v
                best_foot = foot
        if best_foot is None:
            return Trajectory(np.array(points), STALLED)
        x = best_foot
        points.append(x.copy())
        if np.any(x < grid.lo) or np.any(x > grid.hi):
            return Trajectory(np.array(points), LEFT_DOMAIN)
    return Trajectory(np.array(points), STEP_LIMIT)


# -- exports ----------------------------------------------------------------


def _xfastest_columns(grid: Grid) -> list[np.ndarray]:
    """Interior node coordinates raveled first-axis-fastest."""
    axes = np.meshgrid(*[grid.axis_nodes(ax) for ax in range(grid.dim)],
                       indexing="ij")
    return [a.ravel(order="F") for a in axes]


def _field_export_values(field: NodeField) -> np.ndarray:
    vals = field.flat[field.grid.interior_flat()].reshape(field.grid.shape)
    out = vals.ravel(order="F").copy()
    out[out >= 0.5 * field.sentinel] = np.inf
    return out


def export_field(obj, path, fmt: str = "csv") -> None:
    """Write a value field or patch map as CSV or legacy VTK.

    CSV rows are interior nodes with the first coordinate varying fastest;
    values keep 9 significant digits and unreachable nodes read ``inf``
    (patch maps use their integer codes instead).  VTK output is ASCII
    STRUCTURED_POINTS with the raw sentinel value, loadable by standard
    viewers.
    """
    if fmt == "csv":
        _export_csv(obj, path)
    elif fmt == "vtk":
        _export_vtk(obj, path)
    else:
        raise ValueError(f"unknown export format {fmt!r}")


def _export_csv(obj, path) -> None:
    if isinstance(obj, PatchMap):
        grid = obj.grid
        cols = _xfastest_columns(grid)
        vals = obj.color.reshape(grid.shape).ravel(order="F")
        value_fmt, name = "%d", "patch"
    else:
        grid = obj.grid
        cols = _xfastest_columns(grid)
        vals = _field_export_values(obj)
        value_fmt, name = "%.9g", "value"
    header = ",".join(f"x{i + 1}" for i in range(grid.dim)) + f",{name}"
    arr = np.column_stack(cols + [vals])
    fmts = ["%.9g"] * grid.dim + [value_fmt]
    np.savetxt(path, arr, fmt=fmts, delimiter=",", header=header, comments="")


def read_field_csv(path, grid: Grid | None = None):
    """Read an exported CSV back.

    Without a grid, returns ``(points, values)`` row-wise as written.  With
    a grid, returns a NodeField (``inf`` rows become the sentinel).
    """
    data = np.genfromtxt(path, delimiter=",", skip_header=1)
    data = np.atleast_2d(data)
    points, values = data[:, :-1], data[:, -1]
    if grid is None:
        return points, values
    field = NodeField(grid)
    shaped = values.reshape(grid.shape, order="F")
    finite = np.isfinite(shaped)
    out = np.where(finite, shaped, field.sentinel)
    field.flat[grid.interior_flat()] = out.reshape(-1)
    return field


def _export_vtk(obj, path) -> None:
    grid = obj.grid
    if isinstance(obj, PatchMap):
        vals = obj.color.reshape(grid.shape).ravel(order="F")
        scalar = "SCALARS patch int 1"
        lines_fmt = "%d"
    else:
        vals = obj.flat[grid.interior_flat()].reshape(grid.shape)
        vals = vals.ravel(order="F")
        scalar = "SCALARS value float 1"
        lines_fmt = "%.9g"
    dims = list(grid.shape) + [1] * (3 - grid.dim)
    origin = list(grid.lo) + [0.0] * (3 - grid.dim)
    spacing = list(grid.spacing) + [1.0] * (3 - grid.dim)
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write("minimum-time value field\n")
        fh.write("ASCII\n")
        fh.write("DATASET STRUCTURED_POINTS\n")
        fh.write(f"DIMENSIONS {dims[0]} {dims[1]} {dims[2]}\n")
        fh.write(f"ORIGIN {origin[0]:.9g} {origin[1]:.9g} {origin[2]:.9g}\n")
        fh.write(f"SPACING {spacing[0]:.9g} {spacing[1]:.9g} {spacing[2]:.9g}\n")
        fh.write(f"POINT_DATA {vals.size}\n")
        fh.write(scalar + "\n")
        fh.write("LOOKUP_TABLE default\n")
        for v in vals:
            fh.write((lines_fmt % v) + "\n")
