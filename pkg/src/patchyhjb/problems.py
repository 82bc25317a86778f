"""Minimum-time control problems on boxes: dynamics, controls, targets.

Each preset bundles autonomous dynamics ``f(x, a)``, a finite control set, a
target region (value 0), optional obstacles and, where known, the exact value
function.  Dynamics callables are vectorized over points: ``f(X, a)`` takes
``X`` of shape ``(n, dim)`` and a single control vector ``a`` and returns an
``(n, dim)`` velocity array.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .grid import ConfigurationError, Grid

# control-set geometries
UNIT_CIRCLE = "unit-circle"
UNIT_SPHERE = "unit-sphere-geodesic"
BOX_LATTICE = "box-lattice"
EXPLICIT = "explicit-list"


@dataclass(frozen=True)
class ControlSet:
    """Finite control discretization.

    ``controls`` has shape ``(n, m)`` (``m`` is the control dimension, not
    necessarily the state dimension).  ``geometry`` tags how the set was
    built; only unit-norm geometries support conical reduction.
    """

    controls: np.ndarray
    geometry: str

    def __len__(self) -> int:
        return self.controls.shape[0]

    @property
    def is_unit(self) -> bool:
        return self.geometry in (UNIT_CIRCLE, UNIT_SPHERE)


def discretize_circle(n_controls: int) -> ControlSet:
    """``n`` unit vectors at angles ``2*pi*m/n``, m = 0..n-1."""
    if n_controls < 2:
        raise ConfigurationError("need at least 2 controls on the circle")
    ang = 2.0 * np.pi * np.arange(n_controls) / n_controls
    return ControlSet(np.stack([np.cos(ang), np.sin(ang)], axis=1), UNIT_CIRCLE)


# icosahedron: 12 vertices, 20 faces (standard golden-ratio construction)
_PHI = (1.0 + np.sqrt(5.0)) / 2.0
_ICO_VERTS = [
    (-1, _PHI, 0), (1, _PHI, 0), (-1, -_PHI, 0), (1, -_PHI, 0),
    (0, -1, _PHI), (0, 1, _PHI), (0, -1, -_PHI), (0, 1, -_PHI),
    (_PHI, 0, -1), (_PHI, 0, 1), (-_PHI, 0, -1), (-_PHI, 0, 1),
]
_ICO_FACES = [
    (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
    (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
    (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
    (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
]

GEODESIC_COUNTS = {0: 12, 1: 42, 2: 162, 3: 642}


def discretize_sphere_geodesic(level: int) -> ControlSet:
    """Unit sphere directions from icosahedron subdivision.

    Level ``l`` has ``10 * 4**l + 2`` vertices (12/42/162/642 for levels
    0-3).  Vertex order is deterministic: the 12 icosahedron vertices first,
    then edge midpoints in face-iteration order at each refinement.
    """
    if level not in GEODESIC_COUNTS:
        raise ConfigurationError(f"geodesic level must be in {sorted(GEODESIC_COUNTS)}")
    verts = [np.array(v, dtype=float) / np.linalg.norm(v) for v in _ICO_VERTS]
    faces = list(_ICO_FACES)
    for _ in range(level):
        midpoint = {}

        def mid(i, j):
            key = (i, j) if i < j else (j, i)
            if key not in midpoint:
                m = verts[i] + verts[j]
                verts.append(m / np.linalg.norm(m))
                midpoint[key] = len(verts) - 1
            return midpoint[key]

        new_faces = []
        for (i, j, k) in faces:
            ij, jk, ki = mid(i, j), mid(j, k), mid(k, i)
            new_faces += [(i, ij, ki), (j, jk, ij), (k, ki, jk), (ij, jk, ki)]
        faces = new_faces
    return ControlSet(np.array(verts), UNIT_SPHERE)


def lattice_controls(axis_values, m: int) -> ControlSet:
    """Cartesian product lattice ``axis_values^m`` in C order."""
    vals = np.asarray(axis_values, dtype=float)
    mesh = np.meshgrid(*([vals] * m), indexing="ij")
    return ControlSet(np.stack([g.ravel() for g in mesh], axis=1), BOX_LATTICE)


# -- targets ---------------------------------------------------------------


@dataclass(frozen=True)
class TargetSpec:
    """Target region: ``ball`` (center/radius), ``plane`` (axis/offset with a
    half-width, 0 meaning the grid nodes on the plane) or an explicit
    predicate.  Ball targets partition into angular sectors, plane targets
    into equal-width slabs along the first axis the plane spans."""

    kind: str
    center: Optional[np.ndarray] = None
    radius: float = 0.0
    axis: int = 0
    offset: float = 0.0
    half_width: float = 0.0
    predicate: Optional[Callable[[np.ndarray], np.ndarray]] = None

    @classmethod
    def ball(cls, center, radius: float) -> "TargetSpec":
        return cls(kind="ball", center=np.asarray(center, dtype=float),
                   radius=float(radius))

    @classmethod
    def plane(cls, axis: int, offset: float, half_width: float = 0.0) -> "TargetSpec":
        return cls(kind="plane", axis=axis, offset=float(offset),
                   half_width=float(half_width))

    def contains(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(points)
        if self.kind == "ball":
            return np.linalg.norm(pts - self.center, axis=1) <= self.radius
        if self.kind == "plane":
            # tolerance so nodes land on the plane despite fp spacing error
            tol = self.half_width + 1.0e-9 * (1.0 + abs(self.offset))
            return np.abs(pts[:, self.axis] - self.offset) <= tol
        return np.asarray(self.predicate(pts), dtype=bool)


def partition_target(target: TargetSpec, grid: Grid, n_parts: int) -> list[np.ndarray]:
    """Split target grid nodes into ``n_parts`` non-empty index sets.

    Returns a list of interior-serial arrays, one per part.  Ball targets are
    split into equal angular sectors about the center (longitude about the
    last axis in 3D); plane targets into equal-width slabs along the first
    axis the plane spans.  Raises :class:`ConfigurationError` when a part
    would be empty (target too small for ``n_parts`` on this grid).
    """
    if n_parts < 1:
        raise ConfigurationError("need at least one target part")
    pts = grid.interior_points()
    mask = target.contains(pts)
    serials = np.where(mask)[0]
    if serials.size == 0:
        raise ConfigurationError("target contains no grid node")
    if serials.size < n_parts:
        raise ConfigurationError(
            f"target has {serials.size} nodes, cannot form {n_parts} parts"
        )
    tp = pts[serials]

    if target.kind == "ball":
        rel = tp - target.center
        # 2D: sectors about the center; 3D: longitude about the last axis
        ang = np.arctan2(rel[:, 1], rel[:, 0])
        ang = np.mod(ang, 2.0 * np.pi)
        part = np.floor(ang / (2.0 * np.pi) * n_parts).astype(int)
        part = np.clip(part, 0, n_parts - 1)
    else:
        if target.kind == "plane":
            spanned = [ax for ax in range(grid.dim) if ax != target.axis]
        else:
            extents = tp.max(axis=0) - tp.min(axis=0)
            spanned = [int(np.argmax(extents))]
        ax = spanned[0]
        lo, hi = grid.lo[ax], grid.hi[ax]
        part = np.floor((tp[:, ax] - lo) / (hi - lo) * n_parts).astype(int)
        part = np.clip(part, 0, n_parts - 1)

    parts = [serials[part == j] for j in range(n_parts)]
    for j, p in enumerate(parts):
        if p.size == 0:
            raise ConfigurationError(
                f"target part {j} is empty ({n_parts} parts requested)"
            )
    return parts


# -- obstacles -------------------------------------------------------------


@dataclass(frozen=True)
class ObstacleSet:
    """Union of simple shapes; ``contains`` is vectorized over points."""

    circles: tuple = ()     # ((center, radius), ...)
    boxes: tuple = ()       # ((lo, hi), ...)

    def contains(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(points)
        inside = np.zeros(pts.shape[0], dtype=bool)
        for center, radius in self.circles:
            c = np.asarray(center, dtype=float)
            inside |= np.linalg.norm(pts[:, : c.size] - c, axis=1) <= radius
        for lo, hi in self.boxes:
            lo = np.asarray(lo, dtype=float)
            hi = np.asarray(hi, dtype=float)
            box = np.ones(pts.shape[0], dtype=bool)
            for ax in range(lo.size):
                box &= (pts[:, ax] >= lo[ax]) & (pts[:, ax] <= hi[ax])
            inside |= box
        return inside


# -- problem spec ----------------------------------------------------------


@dataclass
class ProblemSpec:
    """A minimum-time (or running-cost) problem instance."""

    name: str
    dim: int
    box_lo: tuple
    box_hi: tuple
    dynamics: Callable[[np.ndarray, np.ndarray], np.ndarray]
    control_set: ControlSet
    target: TargetSpec
    obstacles: Optional[ObstacleSet] = None
    #: running cost l(x, a) evaluated at the departure node; None = 1 (time)
    running_cost: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    exact_solution: Optional[Callable[[np.ndarray], np.ndarray]] = None
    default_nodes: int = 101

    def make_grid(self, nodes_per_axis: int, ghost_width: int = 1) -> Grid:
        return Grid(self.box_lo, self.box_hi, (nodes_per_axis,) * self.dim,
                    ghost_width=ghost_width)


def _eikonal_dynamics(X, a):
    X = np.atleast_2d(X)
    return np.tile(np.asarray(a, dtype=float), (X.shape[0], 1))


def _fan_dynamics(X, a):
    X = np.atleast_2d(X)
    speed = np.abs(X.sum(axis=1) + 0.1)
    return speed[:, None] * np.asarray(a, dtype=float)[None, :]


def _zermelo_dynamics(X, a):
    X = np.atleast_2d(X)
    drift = np.zeros(2)
    drift[0] = 2.0
    return np.tile(2.1 * np.asarray(a, dtype=float) + drift, (X.shape[0], 1))


def _double_integrator(X, a):
    X = np.atleast_2d(X)
    out = np.empty_like(X)
    out[:, 0] = X[:, 1]
    out[:, 1] = float(np.asarray(a).ravel()[0])
    return out


def _brockett_dynamics(X, a):
    X = np.atleast_2d(X)
    a = np.asarray(a, dtype=float).ravel()
    out = np.empty((X.shape[0], 3))
    out[:, 0] = a[0]
    out[:, 1] = a[1]
    out[:, 2] = X[:, 0] * a[1] - X[:, 1] * a[0]
    return out


def _lqr_cost(X, a):
    X = np.atleast_2d(X)
    aa = float(np.asarray(a).ravel()[0])
    return 0.5 * (X[:, 0] ** 2 + X[:, 1] ** 2) + 0.5 * aa * aa


def _lqr_exact(X):
    X = np.atleast_2d(X)
    r3 = np.sqrt(3.0)
    return 0.5 * (r3 * X[:, 0] ** 2 + 2.0 * X[:, 0] * X[:, 1] + r3 * X[:, 1] ** 2)


def _norm_dist_exact(radius):
    def exact(X):
        X = np.atleast_2d(X)
        return np.maximum(np.linalg.norm(X, axis=1) - radius, 0.0)
    return exact


PRESET_NAMES = (
    "eikonal2d", "fan2d", "zermelo2d", "lqr2d", "lunar2d",
    "eikonal2d-obstacles", "eikonal3d", "fan3d", "brockett3d",
)


def preset(name: str, controls: int | None = None) -> ProblemSpec:
    """Build a named preset problem.

    ``controls`` overrides the control-set size: number of circle directions
    in 2D, geodesic vertex count (12/42/162/642) for sphere sets, sample
    count on ``[-3, 3]`` for lqr2d.  Presets with a fixed lattice/explicit
    control set ignore it.
    """
    if name == "eikonal2d" or name == "eikonal2d-obstacles":
        cs = discretize_circle(controls or 32)
        obstacles = None
        if name == "eikonal2d-obstacles":
            # placed clear of the target ball so target/obstacle stay disjoint
            obstacles = ObstacleSet(
                circles=(((-0.7, 0.7), 0.3),),
                boxes=(((0.7, -0.6), (1.5, -0.2)),),
            )
        return ProblemSpec(
            name=name, dim=2, box_lo=(-2.0, -2.0), box_hi=(2.0, 2.0),
            dynamics=_eikonal_dynamics, control_set=cs,
            target=TargetSpec.ball((0.0, 0.0), 0.5), obstacles=obstacles,
            exact_solution=None if obstacles else _norm_dist_exact(0.5),
        )
    if name == "fan2d":
        return ProblemSpec(
            name=name, dim=2, box_lo=(-2.0, -2.0), box_hi=(2.0, 2.0),
            dynamics=_fan_dynamics, control_set=discretize_circle(controls or 32),
            target=TargetSpec.plane(axis=0, offset=0.0),
        )
    if name == "zermelo2d":
        return ProblemSpec(
            name=name, dim=2, box_lo=(-2.0, -2.0), box_hi=(2.0, 2.0),
            dynamics=_zermelo_dynamics, control_set=discretize_circle(controls or 32),
            target=TargetSpec.ball((0.0, 0.0), 0.5),
        )
    if name == "lqr2d":
        n = controls or 101
        cs = ControlSet(np.linspace(-3.0, 3.0, n)[:, None], BOX_LATTICE)
        return ProblemSpec(
            name=name, dim=2, box_lo=(-1.0, -1.0), box_hi=(1.0, 1.0),
            dynamics=_double_integrator, control_set=cs,
            target=TargetSpec.ball((0.0, 0.0), 0.05),
            running_cost=_lqr_cost, exact_solution=_lqr_exact,
        )
    if name == "lunar2d":
        cs = ControlSet(np.array([[-1.0], [1.0]]), EXPLICIT)
        return ProblemSpec(
            name=name, dim=2, box_lo=(-2.0, -2.0), box_hi=(2.0, 2.0),
            dynamics=_double_integrator, control_set=cs,
            target=TargetSpec.ball((0.0, 0.0), 0.25),
        )
    if name == "eikonal3d" or name == "fan3d":
        level = {12: 0, 42: 1, 162: 2, 642: 3}.get(controls or 162)
        if level is None:
            raise ConfigurationError(
                f"3D control count must be one of {sorted(GEODESIC_COUNTS.values())}"
            )
        cs = discretize_sphere_geodesic(level)
        if name == "eikonal3d":
            return ProblemSpec(
                name=name, dim=3, box_lo=(-2.0,) * 3, box_hi=(2.0,) * 3,
                dynamics=_eikonal_dynamics, control_set=cs,
                target=TargetSpec.ball((0.0,) * 3, 0.5),
                exact_solution=_norm_dist_exact(0.5),
            )
        return ProblemSpec(
            name=name, dim=3, box_lo=(-2.0,) * 3, box_hi=(2.0,) * 3,
            dynamics=_fan_dynamics, control_set=cs,
            target=TargetSpec.plane(axis=0, offset=0.0),
        )
    if name == "brockett3d":
        cs = lattice_controls((-5.0, 0.0, 5.0), 2)
        return ProblemSpec(
            name=name, dim=3, box_lo=(-2.0,) * 3, box_hi=(2.0,) * 3,
            dynamics=_brockett_dynamics, control_set=cs,
            target=TargetSpec.ball((0.0,) * 3, 0.25),
        )
    raise ConfigurationError(f"unknown problem preset {name!r}")
