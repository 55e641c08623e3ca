"""Lagrangian mean curvature flow, shrinker flows and parabolic rescaling.

A :class:`FlowTrace` is a time-indexed list of meshes.  Lagrangian traces
share connectivity, so slices between stored times are interpolated
vertexwise; traces extracted from level-set runs are looked up by nearest
stored time; analytic traces carry an exact ``generator``.
"""

from __future__ import annotations

import itertools
import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np

from . import _kernels
from .mesh import (MeshError, SurfaceMesh, load_mesh, point_to_mesh_distance,
                   rescale_measure, save_mesh)

__all__ = [
    "FlowTrace",
    "MeshFlowParams",
    "evolve_mesh",
    "associated_shrinker_flow",
    "parabolic_rescale",
    "self_similarity_defect",
    "self_similarity_pairs",
    "save_trace",
    "load_trace",
]

log = logging.getLogger(__name__)

SOURCES = ("lagrangian", "levelset", "analytic")


@dataclass
class FlowTrace:
    """Time-indexed meshes ``(t_i, M_i)`` with strictly increasing times.

    Parameters
    ----------
    times, meshes : sequences of equal length
    source : {"lagrangian", "levelset", "analytic"}
    metadata : dict
    generator : callable, optional
        Exact slice ``t -> mesh`` (used by analytic and rescaled traces).
    """

    times: list
    meshes: list
    source: str = "analytic"
    metadata: dict = field(default_factory=dict)
    generator: Callable | None = field(default=None, repr=False)

    def __post_init__(self):
        self.times = [float(t) for t in self.times]
        if len(self.times) != len(self.meshes):
            raise ValueError("times and meshes differ in length")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ValueError("trace times must be strictly increasing")
        if self.source not in SOURCES:
            raise ValueError(f"unknown trace source {self.source!r}")
        if self.source == "lagrangian" and self.meshes:
            e0 = self.meshes[0].elements
            if any(m.elements is not e0 and not np.array_equal(m.elements, e0) for m in self.meshes):
                raise ValueError("lagrangian trace meshes must share connectivity")

    def __len__(self):
        return len(self.times)

    @property
    def dim(self) -> int:
        return self.meshes[0].dim

    def slice(self, t: float, tol: float = 1e-9) -> SurfaceMesh:
        """Mesh at time ``t``.

        Exact when a generator is attached, linearly interpolated between
        stored vertices for Lagrangian traces, nearest stored slice otherwise.
        """
        if self.generator is not None:
            return self.generator(t)
        times = np.asarray(self.times)
        span = max(times[-1] - times[0], 1.0)
        if t < times[0] - tol * span or t > times[-1] + tol * span:
            raise ValueError(f"time {t} outside the trace range [{times[0]}, {times[-1]}]")
        if self.source == "lagrangian":
            j = int(np.searchsorted(times, t))
            if j == 0:
                return self.meshes[0]
            if j >= len(times):
                return self.meshes[-1]
            a, b = times[j - 1], times[j]
            w = (t - a) / (b - a)
            v = (1.0 - w) * self.meshes[j - 1].vertices + w * self.meshes[j].vertices
            return self.meshes[j].with_vertices(v)
        return self.meshes[int(np.argmin(np.abs(times - t)))]

    @classmethod
    def from_levelset(cls, trace, keep_empty: bool = False) -> "FlowTrace":
        """Extract the zero set of every snapshot of a level-set run."""
        from .fields import extract_interface
        times, meshes = [], []
        for t, f in zip(trace.times, trace.fields):
            m = extract_interface(f, 0.0)
            if m.is_empty and not keep_empty:
                continue
            times.append(t)
            meshes.append(m)
        meta = {"h": trace.grid.spacing, "dt": trace.dt, "extinction_time": trace.extinction_time}
        if trace.extinction_point is not None:
            meta["extinction_point"] = [float(x) for x in trace.extinction_point]
        return cls(times, meshes, "levelset", meta)


# ---------------------------------------------------------------------------
# Lagrangian flow


@dataclass(frozen=True)
class MeshFlowParams:
    """Explicit Lagrangian stepping.

    The step actually taken is ``min(dt, cfl * (shortest edge)^2)`` so the
    scheme stays stable as the mesh shrinks.
    """

    dt: float = 1e-3
    t_max: float = 1.0
    snap_dt: float | None = None
    cfl: float = 0.25
    min_size_ratio: float = 1e-3
    max_aspect: float = 20.0


def _edge_lengths(mesh: SurfaceMesh) -> np.ndarray:
    p = mesh.vertices[mesh.elements]
    if mesh.dim == 2:
        return np.linalg.norm(p[:, 1] - p[:, 0], axis=1)
    return np.linalg.norm(p - np.roll(p, -1, axis=1), axis=2)


def _aspect(mesh: SurfaceMesh) -> float:
    """Largest triangle aspect ratio (longest edge * perimeter / (4 sqrt 3 area)), 1 when equilateral."""
    e = _edge_lengths(mesh)
    area = mesh.element_measures()
    return float(np.max(e.max(axis=1) * e.sum(axis=1) / (4.0 * math.sqrt(3.0) * area)))


def evolve_mesh(mesh0: SurfaceMesh, params: MeshFlowParams | None = None, **overrides) -> FlowTrace:
    """Move vertices by the mean curvature vector, ``x <- x + dt H``.

    No remeshing: the run halts (normally) when the shortest edge drops
    below ``min_size_ratio`` times its initial value or the element quality
    degrades (triangle aspect ratio, or adjacent segment length ratio, above
    ``max_aspect``).  The halt reason is stored in ``metadata``.
    """
    params = replace(params or MeshFlowParams(), **overrides)
    mesh0.validate(require_closed=True)
    if params.dt <= 0 or params.t_max <= 0:
        raise ValueError("dt and t_max must be positive")
    snap_dt = params.snap_dt or params.t_max / 50.0
    l0 = float(_edge_lengths(mesh0).min())
    min_len = params.min_size_ratio * l0
    times, meshes = [0.0], [mesh0]
    t, steps, reason = 0.0, 0, "t_max"
    v = mesh0.vertices.copy()
    if mesh0.dim == 2:
        from .mesh import _polyline_neighbours
        prev, nxt = _polyline_neighbours(mesh0)
        run = lambda t, target: _kernels.polyline_flow(v, prev, nxt, t, target, params.dt, params.cfl,
                                                       min_len, params.max_aspect)
    else:
        faces = np.ascontiguousarray(mesh0.elements, dtype=np.int64)
        run = lambda t, target: _kernels.triangle_flow(v, faces, t, target, params.dt, params.cfl,
                                                       min_len, params.max_aspect)
    while t < params.t_max * (1 - 1e-14):
        target = min(params.t_max, t + snap_dt)
        t, k, status = run(t, target)
        steps += k
        if status == 3:
            raise FloatingPointError(f"non-finite vertex positions after {steps} steps")
        if t > times[-1]:
            times.append(t)
            meshes.append(mesh0.with_vertices(v.copy()))
        if status:
            reason = "min_size" if status == 1 else "quality"
            break
    meta = {"halt_reason": reason, "steps": steps, "dt": params.dt, "cfl": params.cfl,
            "t_end": t}
    log.debug("lagrangian flow: %d steps, halted by %s at t=%.6g", steps, reason, t)
    return FlowTrace(times, meshes, "lagrangian", meta)


# ---------------------------------------------------------------------------
# self-similar flows and rescaling


def associated_shrinker_flow(mesh: SurfaceMesh, times) -> FlowTrace:
    """The flow ``t -> sqrt(-t) M`` of a shrinker ``M``; empty for ``t >= 0``."""
    times = [float(t) for t in times]

    def gen(t):
        if t >= 0:
            return SurfaceMesh.empty(mesh.dim)
        return rescale_measure(mesh, np.zeros(mesh.dim), math.sqrt(-t))

    return FlowTrace(times, [gen(t) for t in times], "analytic", {"shrinker": True}, gen)


def parabolic_rescale(trace: FlowTrace, y, s: float, rho: float, times=None) -> FlowTrace:
    """Rescaled flow whose slice at ``t`` is ``rho (M_{s + t/rho^2} - y)``.

    By default the new trace is sampled at the images ``rho^2 (t_i - s)`` of
    the stored times; ``times`` requests other sample times (each must map
    into the stored range).
    """
    if not rho > 0:
        raise ValueError("rho must be positive")
    y = np.asarray(y, dtype=float)
    if times is None:
        times = [rho * rho * (t - s) for t in trace.times]
    times = [float(t) for t in times]

    def gen(t):
        return rescale_measure(trace.slice(s + t / (rho * rho)), y, rho)

    meta = dict(trace.metadata, rescaled={"y": y.tolist(), "s": s, "rho": rho})
    source = "lagrangian" if trace.source == "lagrangian" else "analytic"
    return FlowTrace(times, [gen(t) for t in times], source, meta, gen)


def _symmetric_distance(a: SurfaceMesh, b: SurfaceMesh) -> float:
    return 0.5 * (float(point_to_mesh_distance(a.vertices, b).mean())
                  + float(point_to_mesh_distance(b.vertices, a).mean()))


def self_similarity_pairs(trace: FlowTrace, y, s: float, max_slices: int = 8, min_lag: float = 0.0):
    """Per-pair defects ``[(t_i, t_j, rho_i, rho_j, d_ij)]`` behind :func:`self_similarity_defect`."""
    y = np.asarray(y, dtype=float)
    ts = [t for t in trace.times if t < s - min_lag]
    if len(ts) < 3:
        raise ValueError(f"need at least 3 slices before s={s} (have {len(ts)})")
    if len(ts) > max_slices:
        pick = np.unique(np.round(np.linspace(0, len(ts) - 1, max_slices)).astype(int))
        ts = [ts[i] for i in pick]
    rescaled = []
    for t in ts:
        m = trace.slice(t)
        if m.is_empty:
            raise MeshError(f"empty slice at t={t}")
        rho = 1.0 / math.sqrt(s - t)
        rescaled.append((t, rho, rescale_measure(m, y, rho)))
    out = []
    for (ti, ri, mi), (tj, rj, mj) in itertools.combinations(rescaled, 2):
        out.append((ti, tj, ri, rj, _symmetric_distance(mi, mj)))
    return out


def self_similarity_defect(trace: FlowTrace, y, s: float, max_slices: int = 8,
                           min_lag: float = 0.0) -> float:
    """How far a flow is from shrinking self-similarly about ``(y, s)``.

    Slices before ``s`` are rescaled by ``1/sqrt(s - t)`` about ``y``; the
    result is the mean, over all pairs of (at most ``max_slices``) slices,
    of the symmetric mean vertex-to-surface distance.  Zero for a shrinker
    flow centred at ``(y, s)``.
    """
    pairs = self_similarity_pairs(trace, y, s, max_slices, min_lag)
    return float(np.mean([p[-1] for p in pairs]))


# ---------------------------------------------------------------------------
# storage


def save_trace(trace: FlowTrace, directory) -> Path:
    """Write slices (OBJ in space, CSV in the plane) and ``manifest.json``."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    ext = ".obj" if trace.dim == 3 else ".csv"
    files = []
    for i, m in enumerate(trace.meshes):
        name = f"slice_{i:04d}{ext}"
        save_mesh(m, d / name)
        files.append(name)
    manifest = {"times": trace.times, "source": trace.source, "files": files,
                "closed": [bool(m.closed) for m in trace.meshes],
                "metadata": _jsonable(trace.metadata)}
    (d / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return d


def load_trace(directory) -> FlowTrace:
    d = Path(directory)
    manifest = json.loads((d / "manifest.json").read_text())
    meshes = []
    for name, closed in zip(manifest["files"], manifest.get("closed", [])):
        m = load_mesh(d / name)
        meshes.append(SurfaceMesh(m.vertices, m.elements, closed))
    return FlowTrace(manifest["times"], meshes, manifest["source"], manifest.get("metadata", {}))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj
