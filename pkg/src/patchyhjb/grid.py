"""Structured grids, node fields and multilinear interpolation.

A :class:`Grid` is a uniform node lattice on a box ``[lo, hi]`` with one or
more ghost layers outside the box.  Fields (:class:`NodeField`) store one
value per node, ghost nodes included; unreachable/unknown states are encoded
by a large finite sentinel value rather than ``inf`` so that compiled kernels
can stay branch-light.
"""

from __future__ import annotations

import numpy as np

#: Finite stand-in for +infinity in value fields.
SENTINEL = 1.0e9

#: Local cell coordinates closer than this to 0 or 1 are snapped exactly.
#: Keeps feet that land on nodes/faces (up to fp dust) on them, which makes
#: interpolation reproduce node values exactly and keeps zero-weight corners
#: out of the sentinel saturation test.
SNAP_TOL = 1.0e-12

_BOUNDS_TOL = 1.0e-9


class OutOfDomainError(ValueError):
    """Raised when a point lies outside the ghost-extended grid box."""


class ConfigurationError(ValueError):
    """Raised for invalid problem/solver configuration requests."""


class Grid:
    """Uniform node grid on a box, with ghost layers.

    Parameters
    ----------
    lo, hi : sequence of float
        Box corners, ``lo < hi`` componentwise.
    nodes_per_axis : sequence of int
        Interior node count per axis (>= 2); spacing is
        ``(hi - lo) / (nodes - 1)`` so nodes include both box faces.
    ghost_width : int
        Ghost node layers added on each side (>= 1).
    """

    def __init__(self, lo, hi, nodes_per_axis, ghost_width: int = 1):
        self.lo = np.atleast_1d(np.asarray(lo, dtype=float))
        self.hi = np.atleast_1d(np.asarray(hi, dtype=float))
        self.shape = tuple(int(m) for m in np.atleast_1d(nodes_per_axis))
        self.ghost_width = int(ghost_width)
        self.dim = len(self.shape)
        if self.dim not in (2, 3):
            raise ConfigurationError(f"grid dimension must be 2 or 3, got {self.dim}")
        if self.lo.shape != (self.dim,) or self.hi.shape != (self.dim,):
            raise ConfigurationError("lo/hi length must match nodes_per_axis")
        if np.any(self.hi <= self.lo):
            raise ConfigurationError("need lo < hi on every axis")
        if any(m < 2 for m in self.shape):
            raise ConfigurationError("need at least 2 nodes per axis")
        if self.ghost_width < 1:
            raise ConfigurationError("ghost_width must be >= 1")

        self.spacing = (self.hi - self.lo) / (np.array(self.shape) - 1)
        #: step length used by the |h f| = k rule
        self.k_step = float(self.spacing.min())
        g = self.ghost_width
        self.ext_shape = tuple(m + 2 * g for m in self.shape)
        self.ext_lo = self.lo - g * self.spacing
        #: C-order strides of the extended node array, in nodes
        self.strides = np.array(
            [int(np.prod(self.ext_shape[ax + 1:])) for ax in range(self.dim)],
            dtype=np.int64,
        )
        self.n_interior = int(np.prod(self.shape))
        self.n_ext = int(np.prod(self.ext_shape))
        #: flat extended-array offsets of the 2^d corners of a cell
        self.corner_offsets = np.zeros(2 ** self.dim, dtype=np.int64)
        for c in range(2 ** self.dim):
            off = 0
            for ax in range(self.dim):
                if (c >> ax) & 1:
                    off += self.strides[ax]
            self.corner_offsets[c] = off

    # -- coordinates -------------------------------------------------------

    def axis_nodes(self, ax: int) -> np.ndarray:
        """Interior node coordinates along one axis (lo + i*k exactly)."""
        return self.lo[ax] + np.arange(self.shape[ax]) * self.spacing[ax]

    def interior_points(self) -> np.ndarray:
        """All interior node coordinates, shape ``(n_interior, dim)``, C-order."""
        axes = [self.axis_nodes(ax) for ax in range(self.dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def interior_flat(self) -> np.ndarray:
        """Flat extended-array index of each interior node (C-order serials)."""
        g = self.ghost_width
        idx = np.indices(self.shape).reshape(self.dim, -1)
        flat = np.zeros(self.n_interior, dtype=np.int64)
        for ax in range(self.dim):
            flat += (idx[ax] + g) * self.strides[ax]
        return flat

    def interior_view(self, ext_values: np.ndarray) -> np.ndarray:
        """View of the interior block of an extended-shape array."""
        g = self.ghost_width
        sl = tuple(slice(g, g + m) for m in self.shape)
        return ext_values[sl]

    def serial_to_index(self, serial: int) -> tuple:
        """Interior node multi-index for a C-order serial."""
        return tuple(int(i) for i in np.unravel_index(serial, self.shape))

    def index_to_serial(self, index) -> int:
        return int(np.ravel_multi_index(tuple(index), self.shape))

    # -- cell location -----------------------------------------------------

    def locate_many(self, points: np.ndarray):
        """Vectorized cell location in the ghost-extended box.

        Parameters
        ----------
        points : ndarray, shape (n, dim)

        Returns
        -------
        cell : int64 ndarray, shape (n, dim)
            Cell index in extended-node coordinates (0 = lowest ghost cell).
        local : float ndarray, shape (n, dim)
            Local coordinates in [0, 1], snapped at faces.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        t = (pts - self.ext_lo) / self.spacing
        nmax = np.array(self.ext_shape) - 1
        if np.any(t < -_BOUNDS_TOL) or np.any(t > nmax + _BOUNDS_TOL):
            bad = np.where((t < -_BOUNDS_TOL) | (t > nmax + _BOUNDS_TOL))[0][0]
            raise OutOfDomainError(
                f"point {pts[bad]} outside ghost-extended box "
                f"[{self.ext_lo}, {self.ext_lo + nmax * self.spacing}]"
            )
        cell = np.floor(t).astype(np.int64)
        # points on the outermost ghost face clip to the last cell (local 1)
        np.clip(cell, 0, nmax - 1, out=cell)
        local = t - cell
        local[local < SNAP_TOL] = 0.0
        local[local > 1.0 - SNAP_TOL] = 1.0
        return cell, local

    def cell_flat_base(self, cell: np.ndarray) -> np.ndarray:
        """Flat extended-array index of a cell's lower corner node."""
        return (cell * self.strides).sum(axis=-1)


def locate_cell(grid: Grid, point):
    """Locate the cell containing ``point``.

    Returns ``(cell, local)`` with ``cell`` an interior-relative index tuple
    (cell ``(0, ...)`` has the box corner ``lo`` as lower corner; ghost cells
    get negative indices) and ``local`` in ``[0, 1]^dim``.  A point on a
    shared cell face becomes the lower corner (local 0) of the higher cell,
    so faces resolve deterministically; only the outermost ghost face closes
    with local 1.  Raises :class:`OutOfDomainError` outside the ghost box.
    """
    cell, local = grid.locate_many(np.asarray(point, dtype=float)[None, :])
    return tuple(int(c) - grid.ghost_width for c in cell[0]), local[0]


class NodeField:
    """Values on every node of a grid (ghost nodes included).

    ``values`` has shape ``grid.ext_shape``; ghost nodes hold ``sentinel``
    unless explicitly set.  Use :meth:`interior` for the interior block.
    """

    def __init__(self, grid: Grid, values: np.ndarray | None = None,
                 sentinel: float = SENTINEL):
        self.grid = grid
        self.sentinel = float(sentinel)
        if values is None:
            values = np.full(grid.ext_shape, self.sentinel)
        else:
            values = np.asarray(values, dtype=float)
            if values.shape != grid.ext_shape:
                raise ConfigurationError(
                    f"values shape {values.shape} != extended grid {grid.ext_shape}"
                )
        self.values = values

    @classmethod
    def full(cls, grid: Grid, value: float, sentinel: float = SENTINEL) -> "NodeField":
        f = cls(grid, sentinel=sentinel)
        f.interior[...] = value
        return f

    @classmethod
    def from_function(cls, grid: Grid, fn, sentinel: float = SENTINEL) -> "NodeField":
        """Sample ``fn(points) -> values`` at interior nodes; ghosts stay sentinel."""
        f = cls(grid, sentinel=sentinel)
        f.interior[...] = np.asarray(fn(grid.interior_points())).reshape(grid.shape)
        return f

    @property
    def interior(self) -> np.ndarray:
        return self.grid.interior_view(self.values)

    @property
    def flat(self) -> np.ndarray:
        """Flat C-order view of the extended values array."""
        return self.values.reshape(-1)

    def copy(self) -> "NodeField":
        return NodeField(self.grid, self.values.copy(), self.sentinel)

    def reachable_mask(self) -> np.ndarray:
        """Interior mask of nodes holding a meaningful (non-sentinel) value."""
        return self.interior < 0.5 * self.sentinel

    def interpolate(self, point) -> float:
        return float(interpolate_many(self, np.asarray(point, dtype=float)[None, :])[0])


def interpolation_weights(local: np.ndarray) -> np.ndarray:
    """Multilinear corner weights for local coords, corners in bit order.

    Corner ``c`` has bit ``ax`` set when it sits at the upper face of axis
    ``ax``; with snapped locals, off-face corners get exactly zero weight.
    """
    local = np.atleast_2d(local)
    n, d = local.shape
    w = np.ones((n, 2 ** d))
    for c in range(2 ** d):
        for ax in range(d):
            w[:, c] *= local[:, ax] if (c >> ax) & 1 else 1.0 - local[:, ax]
    return w


def interpolate_many(field: NodeField, points: np.ndarray,
                     saturate: bool = True) -> np.ndarray:
    """Multilinear interpolation of ``field`` at ``points``.

    The result is a convex combination of the containing cell's corner
    values.  If any corner with nonzero weight is >= sentinel/2 the result
    saturates to the sentinel (``saturate=False`` disables this, e.g. for
    color fields that never hold sentinels).
    """
    grid = field.grid
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    cell, local = grid.locate_many(pts)
    base = grid.cell_flat_base(cell)
    corners = field.flat[base[:, None] + grid.corner_offsets[None, :]]
    w = interpolation_weights(local)
    out = (w * corners).sum(axis=1)
    if saturate:
        bad = ((w > 0.0) & (corners >= 0.5 * field.sentinel)).any(axis=1)
        out[bad] = field.sentinel
    return out


def interpolate(field: NodeField, point) -> float:
    """Scalar convenience wrapper around :func:`interpolate_many`."""
    return field.interpolate(point)
