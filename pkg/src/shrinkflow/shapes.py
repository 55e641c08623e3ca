"""Analytic shapes with exact signed distance, positive inside.

Every shape exposes ``sdf(points)`` for an ``(N, d)`` point array and
``bounds(d)`` returning axis-aligned ``(lo, hi)`` with ``inf`` entries along
unbounded directions.  The same classes work in the plane and in space.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["Sphere", "Ellipsoid", "Cylinder", "Torus", "Box", "HalfSpace", "Union",
           "Difference", "shape_from_dict"]


def _vec(x, d):
    a = np.asarray(x, dtype=float)
    if a.ndim == 0:
        return np.full(d, float(a))
    return a


@dataclass(frozen=True)
class Sphere:
    radius: float
    center: tuple = (0.0, 0.0, 0.0)

    def sdf(self, p):
        c = _vec(self.center, p.shape[1])[: p.shape[1]]
        return self.radius - np.linalg.norm(p - c, axis=1)

    def bounds(self, d):
        c = _vec(self.center, d)[:d]
        return c - self.radius, c + self.radius


@dataclass(frozen=True)
class Ellipsoid:
    semi_axes: tuple
    center: tuple = (0.0, 0.0, 0.0)

    def sdf(self, p):
        d = p.shape[1]
        e = np.asarray(self.semi_axes, dtype=float)[:d]
        c = _vec(self.center, d)[:d]
        q = np.abs(p - c)
        inside = np.sum((q / e) ** 2, axis=1) < 1.0
        return np.where(inside, 1.0, -1.0) * _ellipsoid_distance(q, e)

    def bounds(self, d):
        e = np.asarray(self.semi_axes, dtype=float)[:d]
        c = _vec(self.center, d)[:d]
        return c - e, c + e


def _ellipsoid_distance(q, e, iters: int = 80):
    """Unsigned distance from points ``q >= 0`` to the ellipsoid with semi-axes ``e``.

    The closest point is ``e_i^2 q_i / (t + e_i^2)`` where ``t`` is the root of
    ``sum (e_i q_i / (t + e_i^2))^2 = 1`` on ``(-min e^2, inf)``, found by bisection.
    """
    e2 = e ** 2
    emin2 = e2.min()
    is_min = np.isclose(e2, emin2, rtol=1e-14, atol=0.0)

    def g(t):
        return np.sum((e * q / (t[:, None] + e2)) ** 2, axis=1) - 1.0

    lo = np.full(len(q), -emin2 * (1.0 - 1e-14))
    hi = np.linalg.norm(q, axis=1) * e.max() + 1e-300
    degenerate = g(lo) <= 0.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        pos = g(mid) > 0.0
        lo = np.where(pos, mid, lo)
        hi = np.where(pos, hi, mid)
    t = 0.5 * (lo + hi)
    closest = e2 * q / (t[:, None] + e2)
    dist = np.linalg.norm(closest - q, axis=1)
    if np.any(degenerate):
        # point lies in the plane through the shortest axes, deep inside
        qd = q[degenerate]
        with np.errstate(divide="ignore", invalid="ignore"):
            cl = np.where(is_min, 0.0, e2 * qd / (e2 - emin2 + is_min))
        rest = np.clip(1.0 - np.sum(np.where(is_min, 0.0, (cl / e) ** 2), axis=1), 0.0, None)
        off = np.sqrt(emin2 * rest)
        dist[degenerate] = np.sqrt(np.sum(np.where(is_min, 0.0, (cl - qd) ** 2), axis=1) + off ** 2)
    return dist


@dataclass(frozen=True)
class Cylinder:
    """Infinite round cylinder (a slab in the plane) around a line."""

    radius: float
    axis: tuple = (1.0, 0.0, 0.0)
    point: tuple = (0.0, 0.0, 0.0)

    def sdf(self, p):
        d = p.shape[1]
        a = np.asarray(self.axis, dtype=float)[:d]
        a = a / np.linalg.norm(a)
        x = p - _vec(self.point, d)[:d]
        radial = x - np.outer(x @ a, a)
        return self.radius - np.linalg.norm(radial, axis=1)

    def bounds(self, d):
        a = np.asarray(self.axis, dtype=float)[:d]
        a = a / np.linalg.norm(a)
        c = _vec(self.point, d)[:d]
        ext = np.where(np.isclose(a, 0.0), self.radius, np.inf)
        return c - ext, c + ext


@dataclass(frozen=True)
class Torus:
    """Torus of revolution about the x3 axis."""

    major: float
    minor: float
    center: tuple = (0.0, 0.0, 0.0)

    def sdf(self, p):
        if p.shape[1] != 3:
            raise ValueError("torus is a three-dimensional shape")
        x = p - np.asarray(self.center, dtype=float)
        q = np.hypot(x[:, 0], x[:, 1]) - self.major
        return self.minor - np.hypot(q, x[:, 2])

    def bounds(self, d):
        c = np.asarray(self.center, dtype=float)
        r = self.major + self.minor
        ext = np.array([r, r, self.minor])
        return c - ext, c + ext


@dataclass(frozen=True)
class Box:
    half_sizes: tuple
    center: tuple = (0.0, 0.0, 0.0)

    def sdf(self, p):
        d = p.shape[1]
        b = _vec(self.half_sizes, d)[:d]
        q = np.abs(p - _vec(self.center, d)[:d]) - b
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=1)
        inside = np.minimum(q.max(axis=1), 0.0)
        return -(outside + inside)

    def bounds(self, d):
        b = _vec(self.half_sizes, d)[:d]
        c = _vec(self.center, d)[:d]
        return c - b, c + b


@dataclass(frozen=True)
class HalfSpace:
    """Region ``{x . normal < offset}``."""

    normal: tuple = (1.0, 0.0, 0.0)
    offset: float = 0.0

    def sdf(self, p):
        nrm = np.asarray(self.normal, dtype=float)[: p.shape[1]]
        nrm = nrm / np.linalg.norm(nrm)
        return self.offset - p @ nrm

    def bounds(self, d):
        return np.full(d, -np.inf), np.full(d, np.inf)


@dataclass(frozen=True)
class Union:
    parts: tuple

    def sdf(self, p):
        return np.max([s.sdf(p) for s in self.parts], axis=0)

    def bounds(self, d):
        lo = np.min([s.bounds(d)[0] for s in self.parts], axis=0)
        hi = np.max([s.bounds(d)[1] for s in self.parts], axis=0)
        return lo, hi


@dataclass(frozen=True)
class Difference:
    """``base`` minus ``cut``."""

    base: object
    cut: object

    def sdf(self, p):
        return np.minimum(self.base.sdf(p), -self.cut.sdf(p))

    def bounds(self, d):
        return self.base.bounds(d)


_KINDS = {
    "sphere": lambda d: Sphere(d["radius"], tuple(d.get("center", (0.0, 0.0, 0.0)))),
    "ellipsoid": lambda d: Ellipsoid(tuple(d["semi_axes"]), tuple(d.get("center", (0.0, 0.0, 0.0)))),
    "cylinder": lambda d: Cylinder(d["radius"], tuple(d.get("axis", (1.0, 0.0, 0.0))),
                                   tuple(d.get("point", (0.0, 0.0, 0.0)))),
    "torus": lambda d: Torus(d["major"], d["minor"], tuple(d.get("center", (0.0, 0.0, 0.0)))),
    "box": lambda d: Box(tuple(np.atleast_1d(d["half_sizes"])), tuple(d.get("center", (0.0, 0.0, 0.0)))),
    "halfspace": lambda d: HalfSpace(tuple(d.get("normal", (1.0, 0.0, 0.0))), d.get("offset", 0.0)),
    "union": lambda d: Union(tuple(shape_from_dict(s) for s in d["parts"])),
    "difference": lambda d: Difference(shape_from_dict(d["base"]), shape_from_dict(d["cut"])),
}


def shape_from_dict(spec: dict):
    """Build a shape from a JSON-style description ``{"kind": ..., ...}``."""
    try:
        return _KINDS[spec["kind"]](spec)
    except KeyError as exc:
        raise ValueError(f"bad shape description {spec!r}: missing {exc}") from None
