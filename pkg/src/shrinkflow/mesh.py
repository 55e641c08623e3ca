"""Discrete hypersurfaces: polylines in the plane and triangle meshes in space.

A :class:`SurfaceMesh` carries the unit-multiplicity area measure of the
hypersurface it samples.  Elements are oriented so that the right-hand
normal points outward: for a segment ``(a, b)`` the outward normal is the
tangent ``b - a`` rotated clockwise, for a triangle ``(a, b, c)`` it is
``(b - a) x (c - a)``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import sparse

__all__ = [
    "SurfaceMesh",
    "CurvatureData",
    "rescale_measure",
    "curvature",
    "circle",
    "ellipse",
    "icosphere",
    "ellipsoid",
    "torus",
    "tube",
    "plane_patch",
    "disk",
    "superquadric",
    "read_obj",
    "write_obj",
    "read_polyline_csv",
    "write_polyline_csv",
    "point_to_mesh_distance",
]


class MeshError(ValueError):
    """Raised when a mesh cannot support the requested operation."""


@dataclass(frozen=True, eq=False)
class SurfaceMesh:
    """Polyline (``dim == 2``) or triangle mesh (``dim == 3``).

    Parameters
    ----------
    vertices : (N, dim) float array
    elements : (M, dim) int array
        Segments for ``dim == 2``, triangles for ``dim == 3``.
    closed : bool
        False for meshes with boundary (truncated cylinders, patches).
    """

    vertices: np.ndarray
    elements: np.ndarray
    closed: bool = True
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        v = np.ascontiguousarray(self.vertices, dtype=float)
        e = np.ascontiguousarray(self.elements, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] not in (2, 3):
            raise MeshError("vertices must be an (N, 2) or (N, 3) array")
        if e.size == 0:
            e = e.reshape(0, v.shape[1])
        if e.ndim != 2 or e.shape[1] != v.shape[1]:
            raise MeshError(f"elements must have {v.shape[1]} vertex indices each")
        if e.size and (e.min() < 0 or e.max() >= len(v)):
            raise MeshError("element references a vertex that does not exist")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "elements", e)

    @property
    def dim(self) -> int:
        """Ambient dimension n + 1."""
        return self.vertices.shape[1]

    @property
    def n(self) -> int:
        """Intrinsic dimension of the hypersurface."""
        return self.dim - 1

    @property
    def is_empty(self) -> bool:
        return len(self.elements) == 0

    @classmethod
    def empty(cls, dim: int) -> "SurfaceMesh":
        return cls(np.zeros((0, dim)), np.zeros((0, dim), dtype=np.int64))

    def element_vectors(self):
        """Edge vectors spanning each element."""
        v, e = self.vertices, self.elements
        if self.dim == 2:
            return v[e[:, 1]] - v[e[:, 0]]
        return np.cross(v[e[:, 1]] - v[e[:, 0]], v[e[:, 2]] - v[e[:, 0]])

    def element_measures(self) -> np.ndarray:
        """Length of each segment or area of each triangle."""
        w = np.linalg.norm(self.element_vectors(), axis=1)
        return w if self.dim == 2 else 0.5 * w

    def element_normals(self) -> np.ndarray:
        """Outward unit normal of each element."""
        w = self.element_vectors()
        if self.dim == 2:
            w = np.column_stack([w[:, 1], -w[:, 0]])
        return w / np.linalg.norm(w, axis=1)[:, None]

    def element_centroids(self) -> np.ndarray:
        return self.vertices[self.elements].mean(axis=1)

    def element_diameters(self) -> np.ndarray:
        p = self.vertices[self.elements]
        if self.dim == 2:
            return np.linalg.norm(p[:, 1] - p[:, 0], axis=1)
        d01 = np.linalg.norm(p[:, 1] - p[:, 0], axis=1)
        d12 = np.linalg.norm(p[:, 2] - p[:, 1], axis=1)
        d20 = np.linalg.norm(p[:, 0] - p[:, 2], axis=1)
        return np.maximum(np.maximum(d01, d12), d20)

    def area(self) -> float:
        """Total n-dimensional measure."""
        return float(np.sum(self.element_measures()))

    def centroid(self) -> np.ndarray:
        """Measure-weighted centroid of the elements."""
        w = self.element_measures()
        if w.sum() == 0:
            return self.vertices.mean(axis=0)
        return (self.element_centroids() * w[:, None]).sum(axis=0) / w.sum()

    def bbox(self):
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def bbox_diameter(self) -> float:
        lo, hi = self.bbox()
        return float(np.linalg.norm(hi - lo))

    def enclosed_volume(self) -> float:
        """Signed volume (area for polylines) enclosed by a closed mesh."""
        p = self.vertices[self.elements]
        if self.dim == 2:
            return 0.5 * float(np.sum(p[:, 0, 0] * p[:, 1, 1] - p[:, 1, 0] * p[:, 0, 1]))
        return float(np.sum(np.einsum("ij,ij->i", p[:, 0], np.cross(p[:, 1], p[:, 2])))) / 6.0

    def flipped(self) -> "SurfaceMesh":
        """Same measure with the opposite orientation."""
        e = self.elements[:, ::-1] if self.dim == 2 else self.elements[:, [0, 2, 1]]
        return SurfaceMesh(self.vertices, e, self.closed)

    def with_vertices(self, vertices) -> "SurfaceMesh":
        return SurfaceMesh(vertices, self.elements, self.closed)

    def boundary_vertices(self) -> np.ndarray:
        """Indices of vertices on the mesh boundary (empty when closed)."""
        e = self.elements
        if self.dim == 2:
            counts = np.bincount(e.ravel(), minlength=len(self.vertices))
            return np.flatnonzero(counts == 1)
        edges = np.sort(np.concatenate([e[:, [0, 1]], e[:, [1, 2]], e[:, [2, 0]]]), axis=1)
        uniq, counts = np.unique(edges, axis=0, return_counts=True)
        return np.unique(uniq[counts == 1])

    def validate(self, require_closed: bool = False) -> None:
        """Check manifoldness and non-degeneracy; raise :class:`MeshError`."""
        if self.is_empty:
            raise MeshError("mesh is empty")
        scale = self.bbox_diameter() ** self.n
        w = self.element_measures()
        bad = np.flatnonzero(w <= 1e-12 * scale)
        if bad.size:
            raise MeshError(f"degenerate element {int(bad[0])} (measure {w[bad[0]]:.3e})")
        e = self.elements
        if self.dim == 2:
            counts = np.bincount(e.ravel(), minlength=len(self.vertices))
            used = counts > 0
            nonmanifold = np.any(counts[used] > 2)
            has_boundary = np.any(counts[used] == 1)
        else:
            edges = np.sort(np.concatenate([e[:, [0, 1]], e[:, [1, 2]], e[:, [2, 0]]]), axis=1)
            _, counts = np.unique(edges, axis=0, return_counts=True)
            nonmanifold = np.any(counts > 2)
            has_boundary = np.any(counts == 1)
        if nonmanifold:
            raise MeshError("mesh is not manifold")
        if has_boundary and self.closed:
            raise MeshError("mesh is flagged closed but has boundary")
        if require_closed and (has_boundary or not self.closed):
            raise MeshError("operation requires a closed mesh")


@dataclass(frozen=True, eq=False)
class CurvatureData:
    """Per-vertex mean curvature vector, outward unit normal and dual area.

    ``H_vector`` is the Laplace-Beltrami of the position, so it points
    inward on convex shapes; ``H`` is the scalar ``-H_vector . normal``
    (``n / r`` on a round sphere).  Rows for boundary vertices of open
    meshes are NaN.
    """

    H_vector: np.ndarray
    normals: np.ndarray
    dual_area: np.ndarray

    @property
    def H(self) -> np.ndarray:
        return -np.einsum("ij,ij->i", self.H_vector, self.normals)


def rescale_measure(mesh: SurfaceMesh, y, rho: float) -> SurfaceMesh:
    """Push the mesh forward by ``x -> rho * (x - y)``.

    The area measure of the result is ``rho**n`` times the original one.
    """
    if not rho > 0:
        raise ValueError("rho must be positive")
    y = np.asarray(y, dtype=float)
    return SurfaceMesh(rho * (mesh.vertices - y), mesh.elements, mesh.closed)


def _polyline_neighbours(mesh: SurfaceMesh):
    nv = len(mesh.vertices)
    prev = np.full(nv, -1, dtype=np.int64)
    nxt = np.full(nv, -1, dtype=np.int64)
    a, b = mesh.elements[:, 0], mesh.elements[:, 1]
    nxt[a] = b
    prev[b] = a
    return prev, nxt


def _curvature_polyline(mesh: SurfaceMesh, allow_open: bool) -> CurvatureData:
    v = mesh.vertices
    prev, nxt = _polyline_neighbours(mesh)
    interior = (prev >= 0) & (nxt >= 0)
    if not allow_open and not np.all(interior):
        raise MeshError("open polyline: curvature needs a closed mesh")
    idx = np.flatnonzero(interior)
    e_in = v[idx] - v[prev[idx]]
    e_out = v[nxt[idx]] - v[idx]
    l_in = np.linalg.norm(e_in, axis=1)
    l_out = np.linalg.norm(e_out, axis=1)
    t_in = e_in / l_in[:, None]
    t_out = e_out / l_out[:, None]
    dual = 0.5 * (l_in + l_out)
    # turning-angle curvature: exact 1/r on regular inscribed polygons
    hv = (t_out - t_in) / dual[:, None]
    tang = t_in + t_out
    nrm = np.column_stack([tang[:, 1], -tang[:, 0]])
    nrm /= np.linalg.norm(nrm, axis=1)[:, None]

    nv = len(v)
    H_vector = np.full((nv, 2), np.nan)
    normals = np.full((nv, 2), np.nan)
    dual_area = np.full(nv, np.nan)
    H_vector[idx], normals[idx], dual_area[idx] = hv, nrm, dual
    return CurvatureData(H_vector, normals, dual_area)


def _cotangent_laplacian(v, f):
    """Cotangent stiffness matrix and mixed (Voronoi-safe) dual areas."""
    nv = len(v)
    p0, p1, p2 = v[f[:, 0]], v[f[:, 1]], v[f[:, 2]]
    # edge opposite to corner k
    e0, e1, e2 = p2 - p1, p0 - p2, p1 - p0
    cr = np.cross(e1, e2)
    dbl = np.linalg.norm(cr, axis=1)
    area = 0.5 * dbl

    def cot(a, b):
        return -np.einsum("ij,ij->i", a, b) / dbl

    cot0, cot1, cot2 = cot(e1, e2), cot(e2, e0), cot(e0, e1)
    ii = np.concatenate([f[:, 1], f[:, 2], f[:, 0]])
    jj = np.concatenate([f[:, 2], f[:, 0], f[:, 1]])
    ww = 0.5 * np.concatenate([cot0, cot1, cot2])
    W = sparse.coo_matrix((np.concatenate([ww, ww]), (np.concatenate([ii, jj]), np.concatenate([jj, ii]))),
                          shape=(nv, nv)).tocsr()
    L = W - sparse.diags(np.asarray(W.sum(axis=1)).ravel())

    # Meyer et al. mixed areas
    l0, l1, l2 = (np.einsum("ij,ij->i", e, e) for e in (e0, e1, e2))
    vor0 = (l1 * cot1 + l2 * cot2) / 8.0
    vor1 = (l2 * cot2 + l0 * cot0) / 8.0
    vor2 = (l0 * cot0 + l1 * cot1) / 8.0
    obtuse = np.column_stack([cot0 < 0, cot1 < 0, cot2 < 0])
    any_obtuse = obtuse.any(axis=1)
    a_mixed = np.column_stack([vor0, vor1, vor2])
    for k in range(3):
        a_mixed[any_obtuse, k] = np.where(obtuse[any_obtuse, k], area[any_obtuse] / 2.0,
                                          area[any_obtuse] / 4.0)
    dual = np.bincount(f.ravel(), weights=a_mixed.ravel(), minlength=nv)
    return L, dual, cr


def _curvature_triangles(mesh: SurfaceMesh, allow_open: bool) -> CurvatureData:
    v, f = mesh.vertices, mesh.elements
    boundary = mesh.boundary_vertices()
    if boundary.size and not allow_open:
        raise MeshError("open mesh: curvature needs a closed mesh")
    L, dual, cr = _cotangent_laplacian(v, f)
    with np.errstate(divide="ignore", invalid="ignore"):
        H_vector = (L @ v) / dual[:, None]
    # area-weighted vertex normals
    nrm = np.zeros_like(v)
    for k in range(3):
        np.add.at(nrm, f[:, k], cr)
    nrm /= np.linalg.norm(nrm, axis=1)[:, None]
    if boundary.size:
        H_vector[boundary] = np.nan
        nrm[boundary] = np.nan
        dual = dual.copy()
        dual[boundary] = np.nan
    return CurvatureData(H_vector, nrm, dual)


def curvature(mesh: SurfaceMesh, allow_open: bool = False) -> CurvatureData:
    """Discrete mean curvature vector at every vertex.

    Triangle meshes use the cotangent Laplace-Beltrami of the position with
    mixed dual areas; polylines use the turning-angle formula.  With
    ``allow_open`` the boundary vertices of an open mesh get NaN rows
    instead of raising.
    """
    mesh.validate(require_closed=False)
    if mesh.closed is False and not allow_open:
        raise MeshError("open mesh: curvature needs a closed mesh")
    if mesh.dim == 2:
        return _curvature_polyline(mesh, allow_open)
    return _curvature_triangles(mesh, allow_open)


# ---------------------------------------------------------------------------
# generators


def circle(radius: float = 1.0, n_vertices: int = 256, center=(0.0, 0.0)) -> SurfaceMesh:
    """Regular counter-clockwise polygon inscribed in a circle."""
    th = 2 * np.pi * np.arange(n_vertices) / n_vertices
    v = np.column_stack([np.cos(th), np.sin(th)]) * radius + np.asarray(center, dtype=float)
    idx = np.arange(n_vertices)
    return SurfaceMesh(v, np.column_stack([idx, np.roll(idx, -1)]))


def ellipse(a: float, b: float, n_vertices: int = 512, center=(0.0, 0.0)) -> SurfaceMesh:
    th = 2 * np.pi * np.arange(n_vertices) / n_vertices
    v = np.column_stack([a * np.cos(th), b * np.sin(th)]) + np.asarray(center, dtype=float)
    idx = np.arange(n_vertices)
    return SurfaceMesh(v, np.column_stack([idx, np.roll(idx, -1)]))


def _icosahedron():
    t = (1 + 5 ** 0.5) / 2
    v = np.array([[-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
                  [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
                  [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1]], dtype=float)
    f = np.array([[0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
                  [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
                  [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
                  [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1]])
    return v / np.linalg.norm(v, axis=1)[:, None], f


def _subdivide(v, f):
    """Split every triangle into four through its edge midpoints."""
    nv = len(v)
    edges = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
    key = np.sort(edges, axis=1)
    uniq, inv = np.unique(key, axis=0, return_inverse=True)
    inv = inv.ravel()
    mids = 0.5 * (v[uniq[:, 0]] + v[uniq[:, 1]])
    m = nv + inv.reshape(3, -1).T  # midpoint of (0,1), (1,2), (2,0)
    a, b, c = f[:, 0], f[:, 1], f[:, 2]
    m01, m12, m20 = m[:, 0], m[:, 1], m[:, 2]
    nf = np.concatenate([np.column_stack([a, m01, m20]), np.column_stack([b, m12, m01]),
                         np.column_stack([c, m20, m12]), np.column_stack([m01, m12, m20])])
    return np.vstack([v, mids]), nf


def icosphere(radius: float = 1.0, level: int = 3, center=(0.0, 0.0, 0.0)) -> SurfaceMesh:
    """Recursively subdivided icosahedron projected to a sphere.

    Level ``k`` has ``10 * 4**k + 2`` vertices.
    """
    v, f = _icosahedron()
    for _ in range(level):
        v, f = _subdivide(v, f)
        v /= np.linalg.norm(v, axis=1)[:, None]
    return SurfaceMesh(v * radius + np.asarray(center, dtype=float), f)


def ellipsoid(semi_axes=(2.0, 1.0, 1.0), level: int = 4, center=(0.0, 0.0, 0.0)) -> SurfaceMesh:
    s = icosphere(1.0, level)
    return SurfaceMesh(s.vertices * np.asarray(semi_axes, dtype=float) + np.asarray(center, dtype=float),
                       s.elements)


def superquadric(exponent: float = 8.0, half_size: float = 1.0, level: int = 4) -> SurfaceMesh:
    """Rounded cube ``|x|^p + |y|^p + |z|^p = a^p`` by radial projection of an icosphere."""
    s = icosphere(1.0, level)
    d = s.vertices
    r = np.sum(np.abs(d) ** exponent, axis=1) ** (-1.0 / exponent)
    return SurfaceMesh(d * (half_size * r)[:, None], s.elements)


def _grid_triangles(nu, nv, wrap_u):
    """Triangulate an (nu x nv) structured vertex array, u optionally periodic."""
    iu = np.arange(nu if wrap_u else nu - 1)
    jv = np.arange(nv - 1)
    I, J = np.meshgrid(iu, jv, indexing="ij")
    I, J = I.ravel(), J.ravel()
    I1 = (I + 1) % nu
    a, b = I * nv + J, I1 * nv + J
    c, d = I1 * nv + J + 1, I * nv + J + 1
    return np.concatenate([np.column_stack([a, b, c]), np.column_stack([a, c, d])])


def torus(major: float = 2.0, minor: float = 0.5, n_major: int = 128, n_minor: int = 48,
          center=(0.0, 0.0, 0.0)) -> SurfaceMesh:
    """Torus of revolution about the x3 axis."""
    u = 2 * np.pi * np.arange(n_major) / n_major
    w = 2 * np.pi * np.arange(n_minor) / n_minor
    U, W = np.meshgrid(u, w, indexing="ij")
    rr = major + minor * np.cos(W)
    v = np.column_stack([(rr * np.cos(U)).ravel(), (rr * np.sin(U)).ravel(), (minor * np.sin(W)).ravel()])
    # periodic in both directions
    I, J = np.meshgrid(np.arange(n_major), np.arange(n_minor), indexing="ij")
    I, J = I.ravel(), J.ravel()
    I1, J1 = (I + 1) % n_major, (J + 1) % n_minor
    a, b, c, d = I * n_minor + J, I1 * n_minor + J, I1 * n_minor + J1, I * n_minor + J1
    f = np.concatenate([np.column_stack([a, b, c]), np.column_stack([a, c, d])])
    return SurfaceMesh(v + np.asarray(center, dtype=float), f)


def tube(radius: float = 2 ** 0.5, half_length: float = 8.0, n_around: int = 96,
         n_along: int | None = None) -> SurfaceMesh:
    """Open circular cylinder around the x1 axis, ``|x1| <= half_length``."""
    if n_along is None:
        spacing = 2 * np.pi * radius / n_around
        n_along = int(round(2 * half_length / spacing)) + 1
    th = 2 * np.pi * np.arange(n_around) / n_around
    z = np.linspace(-half_length, half_length, n_along)
    TH, Z = np.meshgrid(th, z, indexing="ij")
    v = np.column_stack([Z.ravel(), (radius * np.cos(TH)).ravel(), (radius * np.sin(TH)).ravel()])
    f = _grid_triangles(n_around, n_along, wrap_u=True)
    m = SurfaceMesh(v, f, closed=False)
    # orient outward
    if np.mean(np.einsum("ij,ij->i", m.element_normals(), m.element_centroids() * [0, 1, 1])) < 0:
        m = m.flipped()
    return m


def plane_patch(half_size: float = 8.0, n: int = 161) -> SurfaceMesh:
    """Flat square ``[-L, L]^2`` in the x3 = 0 plane, normal +x3."""
    s = np.linspace(-half_size, half_size, n)
    X, Y = np.meshgrid(s, s, indexing="ij")
    v = np.column_stack([X.ravel(), Y.ravel(), np.zeros(X.size)])
    return SurfaceMesh(v, _grid_triangles(n, n, wrap_u=False), closed=False)


def disk(radius: float = 20.0, inner_spacing: float = 0.05, growth: float = 1.03) -> SurfaceMesh:
    """Flat disk in the x3 = 0 plane with rings that coarsen away from the origin."""
    radii = [0.0]
    step = inner_spacing
    while radii[-1] < radius:
        radii.append(min(radius, radii[-1] + step))
        if radii[-1] > 4.0:
            step *= growth
    n_ring = max(12, int(np.ceil(2 * np.pi * 4.0 / inner_spacing)))
    th = 2 * np.pi * np.arange(n_ring) / n_ring
    R, T = np.meshgrid(np.asarray(radii[1:]), th, indexing="ij")
    v = np.vstack([[0.0, 0.0, 0.0], np.column_stack([(R * np.cos(T)).ravel(), (R * np.sin(T)).ravel(),
                                                      np.zeros(R.size)])])
    k = np.arange(n_ring)
    fan = np.column_stack([np.zeros(n_ring, dtype=np.int64), 1 + k, 1 + (k + 1) % n_ring])
    I, J = np.meshgrid(np.arange(len(radii) - 2), np.arange(n_ring), indexing="ij")
    I, J = I.ravel(), J.ravel()
    J1 = (J + 1) % n_ring
    a, b = 1 + I * n_ring + J, 1 + (I + 1) * n_ring + J
    c, d = 1 + (I + 1) * n_ring + J1, 1 + I * n_ring + J1
    body = np.concatenate([np.column_stack([a, b, c]), np.column_stack([a, c, d])])
    m = SurfaceMesh(v, np.vstack([fan, body]), closed=False)
    if m.element_normals()[:, 2].mean() < 0:
        m = m.flipped()
    return m


# ---------------------------------------------------------------------------
# distances


def _point_segment_distance(p, a, b):
    ab = b - a
    t = np.einsum("ij,ij->i", p - a, ab) / np.maximum(np.einsum("ij,ij->i", ab, ab), 1e-300)
    t = np.clip(t, 0.0, 1.0)
    return np.linalg.norm(p - (a + t[:, None] * ab), axis=1)


def _point_triangle_distance(p, a, b, c):
    """Vectorised exact point-triangle distance (Ericson's region tests)."""
    ab, ac, ap = b - a, c - a, p - a
    d1 = np.einsum("ij,ij->i", ab, ap)
    d2 = np.einsum("ij,ij->i", ac, ap)
    bp = p - b
    d3 = np.einsum("ij,ij->i", ab, bp)
    d4 = np.einsum("ij,ij->i", ac, bp)
    cp = p - c
    d5 = np.einsum("ij,ij->i", ab, cp)
    d6 = np.einsum("ij,ij->i", ac, cp)
    va = d3 * d6 - d5 * d4
    vb = d5 * d2 - d1 * d6
    vc = d1 * d4 - d3 * d2
    denom = va + vb + vc
    with np.errstate(divide="ignore", invalid="ignore"):
        v = vb / denom
        w = vc / denom
    q = a + v[:, None] * ab + w[:, None] * ac
    inside = (va >= 0) & (vb >= 0) & (vc >= 0) & (denom > 0)
    dist = np.where(inside, np.linalg.norm(p - q, axis=1), np.inf)
    for s, t in ((a, b), (b, c), (c, a)):
        dist = np.minimum(dist, _point_segment_distance(p, s, t))
    return dist


def point_to_mesh_distance(points, mesh: SurfaceMesh, k: int = 8) -> np.ndarray:
    """Distance from each point to the nearest element of ``mesh``.

    Candidates are the ``k`` elements with nearest centroids; exact
    point-element distances are taken over those.
    """
    from scipy.spatial import cKDTree

    points = np.asarray(points, dtype=float)
    cen = mesh.element_centroids()
    k = min(k, len(cen))
    tree = cKDTree(cen)
    _, cand = tree.query(points, k=k)
    cand = cand.reshape(len(points), k)
    best = np.full(len(points), np.inf)
    e, v = mesh.elements, mesh.vertices
    for j in range(k):
        el = e[cand[:, j]]
        if mesh.dim == 2:
            d = _point_segment_distance(points, v[el[:, 0]], v[el[:, 1]])
        else:
            d = _point_triangle_distance(points, v[el[:, 0]], v[el[:, 1]], v[el[:, 2]])
        best = np.minimum(best, d)
    return best


# ---------------------------------------------------------------------------
# file formats


def write_obj(mesh: SurfaceMesh, path) -> None:
    """Triangle mesh as Wavefront OBJ (1-based faces)."""
    if mesh.dim != 3:
        raise MeshError("OBJ export is for triangle meshes; use write_polyline_csv")
    with open(path, "w") as fh:
        for p in mesh.vertices:
            fh.write("v %.17g %.17g %.17g\n" % tuple(p))
        for t in mesh.elements + 1:
            fh.write(f"f {t[0]} {t[1]} {t[2]}\n")


def read_obj(path, closed: bool | None = None) -> SurfaceMesh:
    verts, faces = [], []
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "v":
                verts.append([float(x) for x in parts[1:4]])
            elif parts[0] == "f":
                idx = [int(p.split("/")[0]) for p in parts[1:]]
                for j in range(1, len(idx) - 1):  # fan-triangulate polygons
                    faces.append([idx[0] - 1, idx[j] - 1, idx[j + 1] - 1])
    mesh = SurfaceMesh(np.array(verts, dtype=float).reshape(-1, 3), np.array(faces, dtype=np.int64))
    if closed is None:
        closed = mesh.boundary_vertices().size == 0
    return SurfaceMesh(mesh.vertices, mesh.elements, closed)


def write_polyline_csv(mesh: SurfaceMesh, path) -> None:
    """Ordered vertex coordinates, one closed loop per block; blank line between loops."""
    if mesh.dim != 2:
        raise MeshError("CSV polylines are planar")
    loops = polyline_loops(mesh)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y"])
        for k, loop in enumerate(loops):
            if k:
                w.writerow([])
            for i in loop:
                w.writerow(["%.17g" % mesh.vertices[i, 0], "%.17g" % mesh.vertices[i, 1]])


def read_polyline_csv(path) -> SurfaceMesh:
    loops, cur = [], []
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        for row in r:
            if not row:
                if cur:
                    loops.append(cur)
                cur = []
                continue
            if row[0] == "x":
                continue
            cur.append([float(row[0]), float(row[1])])
    if cur:
        loops.append(cur)
    verts, elems, off = [], [], 0
    for loop in loops:
        m = len(loop)
        idx = np.arange(m) + off
        verts.extend(loop)
        elems.append(np.column_stack([idx, np.roll(idx, -1)]))
        off += m
    if not verts:
        return SurfaceMesh.empty(2)
    return SurfaceMesh(np.array(verts), np.vstack(elems))


def polyline_loops(mesh: SurfaceMesh) -> list:
    """Vertex index sequences of the closed loops of a polyline mesh."""
    prev, nxt = _polyline_neighbours(mesh)
    seen = np.zeros(len(mesh.vertices), dtype=bool)
    loops = []
    for start in mesh.elements[:, 0]:
        if seen[start]:
            continue
        loop, i = [], start
        while i >= 0 and not seen[i]:
            seen[i] = True
            loop.append(int(i))
            i = nxt[i]
        loops.append(loop)
    return loops


def save_mesh(mesh: SurfaceMesh, path) -> None:
    path = Path(path)
    if mesh.dim == 3:
        write_obj(mesh, path)
    else:
        write_polyline_csv(mesh, path)


def load_mesh(path) -> SurfaceMesh:
    path = Path(path)
    if path.suffix.lower() == ".obj":
        return read_obj(path)
    return read_polyline_csv(path)
