"""Scalar fields on uniform grids.

Covers signed-distance initialisation, zero-set extraction, flood-fill
components with inradius witnesses, and the mollify-threshold-extract
approximation of a set of finite perimeter by smooth sets.

Conventions: values live on nodes, ``extents`` counts cells per axis (so
there are ``extents + 1`` nodes), and the inside of a shape is where the
field is positive.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage, signal

from .mesh import SurfaceMesh

__all__ = [
    "Grid",
    "GridField",
    "VoxelSet",
    "ComponentSet",
    "signed_distance_init",
    "extract_interface",
    "flood_components",
    "mollify_indicator",
    "perimeter",
    "voxelize",
    "write_grid",
    "read_grid",
]

ISO_EPS = 1e-9


@dataclass(frozen=True)
class Grid:
    """Uniform axis-aligned node lattice."""

    origin: tuple
    spacing: float
    extents: tuple

    def __post_init__(self):
        object.__setattr__(self, "origin", tuple(float(o) for o in self.origin))
        object.__setattr__(self, "extents", tuple(int(e) for e in self.extents))
        if not self.spacing > 0:
            raise ValueError("grid.spacing must be positive")
        if len(self.origin) != len(self.extents) or len(self.extents) not in (2, 3):
            raise ValueError("grid must be two- or three-dimensional")
        if min(self.extents) < 4:
            raise ValueError("grid.extents must be at least 4 cells per axis")

    @classmethod
    def centered(cls, dim: int, half_width: float, spacing: float) -> "Grid":
        """Grid symmetric about the origin with a node at 0."""
        m = int(np.ceil(half_width / spacing - 1e-9))
        return cls((-m * spacing,) * dim, spacing, (2 * m,) * dim)

    @property
    def dim(self) -> int:
        return len(self.extents)

    @property
    def shape(self) -> tuple:
        return tuple(e + 1 for e in self.extents)

    @property
    def upper(self) -> np.ndarray:
        return np.asarray(self.origin) + self.spacing * np.asarray(self.extents)

    @property
    def diameter(self) -> float:
        return float(self.spacing * np.linalg.norm(self.extents))

    def axes(self):
        return [o + self.spacing * np.arange(n) for o, n in zip(self.origin, self.shape)]

    def points(self) -> np.ndarray:
        """All node coordinates, row-major, shape ``(N, dim)``."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def to_dict(self) -> dict:
        return {"dim": self.dim, "origin": list(self.origin), "spacing": self.spacing,
                "extents": list(self.extents)}


@dataclass(frozen=True, eq=False)
class GridField:
    """Scalar values on the nodes of a :class:`Grid`."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise ValueError(f"values shape {v.shape} does not match grid nodes {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        object.__setattr__(self, "values", v)

    @property
    def dim(self) -> int:
        return self.grid.dim

    @property
    def spacing(self) -> float:
        return self.grid.spacing

    def translated_by_cells(self, shift) -> "GridField":
        """Same values on a grid whose origin moved by ``shift`` whole cells."""
        g = self.grid
        origin = tuple(o + s * g.spacing for o, s in zip(g.origin, shift))
        return GridField(Grid(origin, g.spacing, g.extents), self.values)


@dataclass(frozen=True, eq=False)
class VoxelSet:
    """Indicator of a set, one byte per node of ``grid``."""

    grid: Grid
    indicator: np.ndarray

    def __post_init__(self):
        ind = np.asarray(self.indicator)
        if ind.shape != self.grid.shape:
            raise ValueError("indicator shape does not match grid nodes")
        if not np.all((ind == 0) | (ind == 1)):
            raise ValueError("indicator must be 0/1")
        object.__setattr__(self, "indicator", ind.astype(np.uint8))

    def support_margin(self) -> int:
        """Cells between the support and the nearest grid face (large if empty)."""
        idx = np.nonzero(self.indicator)
        if len(idx[0]) == 0:
            return 10 ** 9
        return int(min(min(i.min(), n - 1 - i.max()) for i, n in zip(idx, self.indicator.shape)))


@dataclass(frozen=True, eq=False)
class ComponentSet:
    """Connected components of ``{u != 0}`` inside a query ball.

    ``labels`` is zero outside the ball and on nodes with ``u == 0``;
    component ``k`` (1-based) has sign ``signs[k-1]`` and inradius
    ``inradius[k-1]`` with a deepest node at ``deepest[k-1]``.
    """

    labels: np.ndarray
    offset: tuple
    count: int
    signs: np.ndarray
    inradius: np.ndarray
    deepest: np.ndarray


def voxelize(shape, grid: Grid) -> VoxelSet:
    """Indicator of ``{sdf > 0}`` sampled at the nodes."""
    return VoxelSet(grid, (shape.sdf(grid.points()) > 0).reshape(grid.shape).astype(np.uint8))


def signed_distance_init(shape, grid: Grid) -> GridField:
    """Signed distance to ``shape``, positive inside.

    Values are clamped to ``+-C`` with ``C`` ten times the grid diameter.
    Bounded directions of the shape must stay two cells inside the grid.
    """
    lo, hi = (np.asarray(b, dtype=float) for b in shape.bounds(grid.dim))
    g_lo = np.asarray(grid.origin) + 2 * grid.spacing
    g_hi = grid.upper - 2 * grid.spacing
    fin_lo, fin_hi = np.isfinite(lo), np.isfinite(hi)
    if np.any(lo[fin_lo] < g_lo[fin_lo] - 1e-12) or np.any(hi[fin_hi] > g_hi[fin_hi] + 1e-12):
        need_lo = np.where(fin_lo, lo - 2 * grid.spacing, grid.origin)
        need_hi = np.where(fin_hi, hi + 2 * grid.spacing, grid.upper)
        raise ValueError(
            f"shape does not fit the grid with a 2-cell margin: needs extent "
            f"{need_lo.round(6).tolist()} .. {need_hi.round(6).tolist()}, grid covers "
            f"{list(grid.origin)} .. {grid.upper.round(6).tolist()}"
        )
    C = 10.0 * grid.diameter
    u = np.clip(shape.sdf(grid.points()), -C, C)
    return GridField(grid, u.reshape(grid.shape))


def _regularize_iso(values, iso, spacing):
    return np.where(values == iso, iso + ISO_EPS * spacing, values)


def _weld(verts, faces, tol):
    """Merge vertices closer than ``tol`` and drop the triangles that collapse."""
    key = np.round(verts / tol).astype(np.int64)
    _, first, inv = np.unique(key, axis=0, return_index=True, return_inverse=True)
    inv = inv.ravel()
    faces = inv[faces]
    ok = (faces[:, 0] != faces[:, 1]) & (faces[:, 1] != faces[:, 2]) & (faces[:, 2] != faces[:, 0])
    return verts[first], faces[ok]


def extract_interface(field: GridField, iso: float = 0.0) -> SurfaceMesh:
    """Level set ``{u = iso}`` as an oriented polyline or triangle mesh.

    Marching squares/cubes with linear interpolation; outward normals point
    toward decreasing ``u``.  Components touching the grid boundary come
    back open.  A field with no crossing gives an empty mesh.
    """
    from skimage import measure

    g = field.grid
    u = _regularize_iso(field.values, iso, g.spacing)
    if u.min() > iso or u.max() < iso:
        return SurfaceMesh.empty(g.dim)
    origin = np.asarray(g.origin)
    if g.dim == 3:
        verts, faces, _, _ = measure.marching_cubes(u, iso, spacing=(g.spacing,) * 3)
        faces = faces[:, [0, 2, 1]]  # skimage winds toward increasing values
        verts, faces = _weld(verts, faces, 1e-6 * g.spacing)
        mesh = SurfaceMesh(verts + origin, faces)
        closed = mesh.boundary_vertices().size == 0
        return SurfaceMesh(mesh.vertices, mesh.elements, closed)

    contours = measure.find_contours(u, iso, positive_orientation="high")
    verts, elems, off, closed = [], [], 0, True
    for c in contours:
        is_loop = len(c) > 2 and np.allclose(c[0], c[-1])
        if is_loop:
            c = c[:-1]
        m = len(c)
        if m < 2:
            continue
        idx = np.arange(m) + off
        if is_loop:
            seg = np.column_stack([idx, np.roll(idx, -1)])
        else:
            seg = np.column_stack([idx[:-1], idx[1:]])
            closed = False
        verts.append(c * g.spacing + origin)
        elems.append(seg)
        off += m
    if not verts:
        return SurfaceMesh.empty(2)
    return SurfaceMesh(np.vstack(verts), np.vstack(elems), closed)


def _ball_window(grid: Grid, center, R):
    """Index window enclosing the ball plus one node, or None if it leaves the grid."""
    c = (np.asarray(center, dtype=float) - np.asarray(grid.origin)) / grid.spacing
    r = R / grid.spacing
    lo = np.floor(c - r).astype(int) - 1
    hi = np.ceil(c + r).astype(int) + 1
    if np.any(lo < 0) or np.any(hi > np.asarray(grid.extents)):
        return None
    return lo, hi


def flood_components(field: GridField, center, R: float) -> ComponentSet:
    """Label the components of ``B_R(center) minus {u = 0}``.

    Positive and negative nodes are flooded separately with face adjacency,
    so opposite-sign neighbours are never joined.  The inradius of a
    component is the largest distance from one of its nodes to the zero set
    or the sphere ``dB_R``, from an exact Euclidean distance transform,
    less half a cell for the sub-node position of the crossing.
    """
    g = field.grid
    win = _ball_window(g, center, R)
    if win is None:
        raise ValueError("query ball leaves the grid")
    lo, hi = win
    sl = tuple(slice(a, b + 1) for a, b in zip(lo, hi))
    u = _regularize_iso(field.values[sl], 0.0, g.spacing)
    axes = [g.origin[k] + g.spacing * np.arange(lo[k], hi[k] + 1) for k in range(g.dim)]
    mesh = np.meshgrid(*axes, indexing="ij")
    r2 = sum((m - c) ** 2 for m, c in zip(mesh, center))
    ball = r2 < R * R

    labels = np.zeros(u.shape, dtype=np.int32)
    signs, inr, deep = [], [], []
    count = 0
    for sgn in (1, -1):
        mask = ball & (sgn * u > 0)
        lab, k = ndimage.label(mask)
        if k == 0:
            continue
        dist = ndimage.distance_transform_edt(mask) * g.spacing - 0.5 * g.spacing
        idx = np.arange(1, k + 1)
        best = ndimage.maximum(dist, lab, idx)
        pos = ndimage.maximum_position(dist, lab, idx)
        labels[mask] = lab[mask] + count
        count += k
        signs.extend([sgn] * k)
        inr.extend(np.atleast_1d(best).tolist())
        deep.extend([np.array([a[j] for j in range(g.dim)]) * g.spacing
                     + np.asarray(g.origin) + lo * g.spacing for a in pos])
    return ComponentSet(labels, tuple(int(x) for x in lo), count, np.array(signs, dtype=int),
                        np.array(inr, dtype=float), np.array(deep).reshape(count, g.dim))


def _bump_kernel(eps: float, h: float, dim: int) -> np.ndarray:
    m = int(np.floor(eps / h))
    ax = np.arange(-m, m + 1) * h
    mesh = np.meshgrid(*([ax] * dim), indexing="ij")
    s = sum(x * x for x in mesh) / (eps * eps)
    k = np.where(s < 1.0, (1.0 - s) ** 4, 0.0)
    return k / k.sum()


def mollify_indicator(voxels: VoxelSet, eps: float) -> GridField:
    """Convolve the indicator with a normalised ``(1 - |x/eps|^2)^4`` bump.

    Returns ``f_eps - 1/2`` so that the zero set approximates the boundary.
    """
    h = voxels.grid.spacing
    if eps < 2 * h * (1 - 1e-12):
        raise ValueError(f"eps={eps} is under-resolved: need eps >= 2h = {2 * h}")
    kernel = _bump_kernel(eps, h, voxels.grid.dim)
    reach = kernel.shape[0] // 2
    if voxels.support_margin() < reach:
        raise ValueError(f"set support must stay {reach} cells from the grid boundary for eps={eps}")
    ind = voxels.indicator.astype(float)
    if not ind.any():
        return GridField(voxels.grid, np.full(ind.shape, -0.5))
    f = signal.fftconvolve(ind, kernel, mode="same")
    f = np.clip(f, 0.0, 1.0)
    return GridField(voxels.grid, f - 0.5)


def perimeter(voxels: VoxelSet, eps: float) -> float:
    """Area of the ``1/2`` level set of the mollified indicator."""
    mesh = extract_interface(mollify_indicator(voxels, eps), 0.0)
    return 0.0 if mesh.is_empty else mesh.area()


# ---------------------------------------------------------------------------
# binary dumps


def write_grid(obj, path) -> None:
    """Raw little-endian values (``f8`` fields, ``u1`` voxel sets) plus a JSON sidecar."""
    path = Path(path)
    if isinstance(obj, VoxelSet):
        data = obj.indicator.astype("<u1")
        meta = dict(obj.grid.to_dict(), dtype="uint8")
    else:
        data = obj.values.astype("<f8")
        meta = dict(obj.grid.to_dict(), dtype="float64")
    path.write_bytes(np.ascontiguousarray(data).tobytes(order="C"))
    path.with_suffix(path.suffix + ".json").write_text(json.dumps(meta, indent=2))


def read_grid(path):
    path = Path(path)
    meta = json.loads(path.with_suffix(path.suffix + ".json").read_text())
    grid = Grid(meta["origin"], meta["spacing"], meta["extents"])
    if meta.get("dtype", "float64") == "uint8":
        data = np.frombuffer(path.read_bytes(), dtype="<u1").reshape(grid.shape)
        return VoxelSet(grid, data.copy())
    data = np.frombuffer(path.read_bytes(), dtype="<f8").reshape(grid.shape)
    return GridField(grid, data.copy())
