"""Gaussian weight, the F-functional, entropy and Gaussian density.

Conventions: ``n`` is the dimension of the hypersurface, points live in
``R^{n+1}``.  The Gaussian weight is

    Phi(x) = (4 pi)^{-n/2} exp(-|x|^2 / 4)

and ``F[M] = int_M Phi``.  The entropy is the supremum of ``F`` over all
rescalings ``rho (M - y)``; :func:`entropy` searches ``(y, log rho)``.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import optimize, special

from .mesh import MeshError, SurfaceMesh, rescale_measure

__all__ = [
    "gaussian_weight",
    "backward_kernel",
    "f_functional",
    "EntropyOptions",
    "EntropyReport",
    "entropy",
    "sphere_area_constant",
    "lambda_round",
    "DensityReport",
    "gaussian_density",
    "monotonicity_check",
]

log = logging.getLogger(__name__)

REFINE_DIAMETER = 0.05


def gaussian_weight(x, n: int):
    """``(4 pi)^{-n/2} exp(-|x|^2/4)`` for a point or an ``(N, d)`` array."""
    x = np.asarray(x, dtype=float)
    r2 = np.sum(x * x, axis=-1)
    return (4.0 * np.pi) ** (-0.5 * n) * np.exp(-0.25 * r2)


def backward_kernel(x, t: float, y, s: float, n: int):
    """Backward heat kernel ``(s-t)^{-n/2} Phi((x-y)/sqrt(s-t))`` centred at ``(y, s)``."""
    if not t < s:
        raise ValueError(f"backward kernel needs t < s (got t={t}, s={s})")
    tau = s - t
    x = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    return tau ** (-0.5 * n) * gaussian_weight(x / math.sqrt(tau), n)


def _subdivide(points: np.ndarray, dim: int):
    """Midpoint subdivision of element corner arrays ``(M, dim, dim)``.

    Returns sub-element centroids ``(M, k, dim)``; each sub-element carries
    ``1/k`` of the parent measure (k = 2 segments or 4 triangles).
    """
    if dim == 2:
        a, b = points[:, 0], points[:, 1]
        m = 0.5 * (a + b)
        return np.stack([0.5 * (a + m), 0.5 * (m + b)], axis=1)
    a, b, c = points[:, 0], points[:, 1], points[:, 2]
    ab, bc, ca = 0.5 * (a + b), 0.5 * (b + c), 0.5 * (c + a)
    return np.stack([(a + ab + ca) / 3.0, (ab + b + bc) / 3.0, (ca + bc + c) / 3.0,
                     (ab + bc + ca) / 3.0], axis=1)


class _Quadrature:
    """Precomputed centroid rule for ``F[rho (M - y)]`` at arbitrary ``(y, rho)``."""

    def __init__(self, mesh: SurfaceMesh):
        self.n = mesh.n
        self.centroids = mesh.element_centroids()
        self.measures = mesh.element_measures()
        self.diameters = mesh.element_diameters()
        self.sub = _subdivide(mesh.vertices[mesh.elements], mesh.dim)
        self.norm = (4.0 * np.pi) ** (-0.5 * self.n)

    def __call__(self, y, rho: float) -> float:
        if len(self.measures) == 0:
            return 0.0
        y = np.asarray(y, dtype=float)
        fine = rho * self.diameters > REFINE_DIAMETER
        coarse = ~fine
        d = rho * (self.centroids[coarse] - y)
        total = np.sum(self.measures[coarse] * np.exp(-0.25 * np.einsum("ij,ij->i", d, d)))
        if np.any(fine):
            d = rho * (self.sub[fine] - y)
            w = np.exp(-0.25 * np.einsum("ijk,ijk->ij", d, d)).mean(axis=1)
            total += np.sum(self.measures[fine] * w)
        return float(self.norm * rho ** self.n * total)


def f_functional(mesh: SurfaceMesh) -> float:
    """Gaussian-weighted area ``F[M]`` by the centroid rule.

    Elements with diameter above 0.05 are split once at their edge midpoints.
    """
    return _Quadrature(mesh)(np.zeros(mesh.dim), 1.0)


def sphere_area_constant(n: int) -> float:
    """Area ``omega_n`` of the unit n-sphere in ``R^{n+1}``."""
    return 2.0 * math.pi ** ((n + 1) / 2.0) / math.gamma((n + 1) / 2.0)


def lambda_round(n: int, k: int = 0) -> float:
    """Entropy of the generalized cylinder ``S^{n-k} x R^k``.

    ``omega_m (m / (2 pi e))^{m/2}`` with ``m = n - k``; 1 for the plane.
    """
    if not (0 <= k <= n):
        raise ValueError(f"need 0 <= k <= n (got n={n}, k={k})")
    m = n - k
    if m == 0:
        return 1.0
    return sphere_area_constant(m) * (m / (2.0 * math.pi * math.e)) ** (0.5 * m)


# ---------------------------------------------------------------------------
# entropy


@dataclass(frozen=True)
class EntropyOptions:
    """Settings for the multistart search.

    ``refine_top`` starts (by value) are refined by coordinate golden-section
    sweeps and a Nelder-Mead polish.  ``allow_open`` admits meshes with
    boundary; the report then carries a tail bound for the missing part.
    """

    max_iters: int = 400
    refine_top: int = 4
    sweeps: int = 6
    xtol: float = 1e-7
    allow_open: bool = False
    log_rho_offsets: tuple = (-2.0, -1.0, 0.0, 1.0, 2.0)


@dataclass
class EntropyReport:
    lam: float
    best_center: np.ndarray
    best_scale: float
    f_at_optimum: float
    starts: int
    converged: bool
    history: list = field(default_factory=list)
    truncation_bound: float = 0.0
    evaluations: int = 0

    @property
    def best_log_scale(self) -> float:
        return math.log(self.best_scale)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        d["best_center"] = [float(v) for v in self.best_center]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _start_points(mesh: SurfaceMesh, opts: EntropyOptions):
    n = mesh.n
    lo, hi = mesh.bbox()
    area = mesh.area()
    r_eff = (area / sphere_area_constant(n)) ** (1.0 / n)
    log_rho0 = math.log(math.sqrt(2.0 * n) / r_eff)
    centers = [mesh.centroid()]
    axes = [np.linspace(lo[a], hi[a], 3) for a in range(mesh.dim)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, mesh.dim)
    centers.extend(grid)
    starts = [np.concatenate([c, [log_rho0 + off]]) for c in centers for off in opts.log_rho_offsets]
    starts.append(np.zeros(mesh.dim + 1))
    return np.asarray(starts)


def _tie_key(z):
    return (float(np.linalg.norm(z[:-1])), abs(float(z[-1])))


def _pick_best(points, values, rtol=1e-12):
    """Largest value; near-ties resolved by smallest |y| then smallest |log rho|."""
    values = np.asarray(values)
    best = values.max()
    cand = np.flatnonzero(values >= best - rtol * max(1.0, abs(best)))
    k = min(cand, key=lambda i: _tie_key(points[i]))
    return int(k)


def _ascend(fun, z0, opts: EntropyOptions):
    """Coordinate golden-section sweeps followed by a Nelder-Mead polish (maximizes)."""
    z = np.array(z0, dtype=float)
    fz = fun(z)
    step = np.full(len(z), 0.5)
    for _ in range(opts.sweeps):
        before = fz
        for a in range(len(z)):
            def line(t, a=a):
                w = z.copy()
                w[a] = t
                return -fun(w)
            res = optimize.minimize_scalar(line, bracket=(z[a] - step[a], z[a]), method="golden",
                                           options={"xtol": 1e-4, "maxiter": 60})
            if -res.fun > fz:
                z[a], fz = res.x, -res.fun
        step *= 0.5
        if fz - before < 1e-10:
            break
    res = optimize.minimize(lambda w: -fun(w), z, method="Nelder-Mead",
                            options={"xatol": opts.xtol, "fatol": 1e-13, "maxiter": opts.max_iters,
                                     "initial_simplex": z + np.vstack([np.zeros(len(z)),
                                                                       0.05 * np.eye(len(z))])})
    if -res.fun > fz:
        z, fz = res.x, -res.fun
    return z, fz, bool(res.success)


def _tail_bound(mesh: SurfaceMesh, y, rho: float) -> float:
    """Gaussian mass an n-plane puts outside the ball that excludes the mesh boundary.

    Twice the plane tail ``Q(n/2, R^2/4)`` with ``R`` the rescaled distance
    from ``y`` to the nearest boundary vertex.
    """
    b = mesh.boundary_vertices()
    if b.size == 0:
        return 0.0
    R = rho * float(np.min(np.linalg.norm(mesh.vertices[b] - y, axis=1)))
    return float(2.0 * special.gammaincc(0.5 * mesh.n, 0.25 * R * R))


def entropy(mesh: SurfaceMesh, opts: EntropyOptions | None = None) -> EntropyReport:
    """Entropy ``sup_{y, rho} F[rho (M - y)]`` by multistart local ascent.

    Every start is evaluated; the best ``opts.refine_top`` are refined.  The
    returned value is the largest F found, so it is a lower bound for the
    true supremum and never below ``F[M]`` (the identity is a start).

    Parameters
    ----------
    mesh : SurfaceMesh
        Closed mesh, or open with ``opts.allow_open``.
    opts : EntropyOptions, optional

    Returns
    -------
    EntropyReport
    """
    opts = opts or EntropyOptions()
    if mesh.is_empty:
        raise MeshError("entropy of an empty mesh")
    if not mesh.closed and not opts.allow_open:
        raise MeshError("open mesh: pass allow_open=True to accept a truncation bound")
    quad = _Quadrature(mesh)
    calls = [0]

    def fun(z):
        calls[0] += 1
        return quad(z[:-1], math.exp(z[-1]))

    starts = _start_points(mesh, opts)
    vals = np.array([fun(z) for z in starts])
    order = sorted(range(len(starts)), key=lambda i: (-vals[i],) + _tie_key(starts[i]))
    points, values, history = list(starts), list(vals), []
    converged = True
    for i in order[: opts.refine_top]:
        z, fz, ok = _ascend(fun, starts[i], opts)
        points.append(z)
        values.append(fz)
        history.append(float(fz))
        converged &= ok
    k = _pick_best(points, values)
    z = points[k]
    y, rho = z[:-1], math.exp(z[-1])
    f_opt = f_functional(rescale_measure(mesh, y, rho))
    return EntropyReport(lam=f_opt, best_center=np.asarray(y), best_scale=rho, f_at_optimum=f_opt,
                         starts=len(starts), converged=converged, history=history,
                         truncation_bound=_tail_bound(mesh, y, rho), evaluations=calls[0])


# ---------------------------------------------------------------------------
# Gaussian density along a flow


@dataclass
class DensityReport:
    y: np.ndarray
    s: float
    times: np.ndarray
    values: np.ndarray
    theta: float
    max_violation: float
    tol: float | None = None

    @property
    def passed(self) -> bool | None:
        return None if self.tol is None else bool(self.max_violation <= self.tol)

    def to_dict(self) -> dict:
        return {"y": [float(v) for v in self.y], "s": self.s, "times": self.times.tolist(),
                "values": self.values.tolist(), "theta": self.theta,
                "max_violation": self.max_violation, "tol": self.tol, "passed": self.passed}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "value"])
        for t, v in zip(self.times, self.values):
            w.writerow([repr(float(t)), repr(float(v))])
        return buf.getvalue()


def _trace_slices(trace):
    """``(times, meshes)`` from a FlowTrace (``meshes``) or a level-set trace (``fields``)."""
    if hasattr(trace, "meshes"):
        return list(trace.times), list(trace.meshes)
    if hasattr(trace, "fields"):
        from .fields import extract_interface
        return list(trace.times), [extract_interface(f, 0.0) for f in trace.fields]
    raise TypeError("trace must provide meshes or level-set fields")


def _weighted_area(mesh: SurfaceMesh, y, s: float, t: float) -> float:
    if mesh.is_empty:
        return 0.0
    tau = s - t
    return _Quadrature(mesh)(y, 1.0 / math.sqrt(tau))


def _samples(trace, y, s, m, min_lag):
    y = np.asarray(y, dtype=float)
    times = np.asarray(trace.times, dtype=float)
    keep = np.flatnonzero(times < s - min_lag)
    if m is not None:
        keep = keep[-m:]
    if len(keep) < 4:
        raise ValueError(f"need at least 4 trace states before s={s} (have {len(keep)})")
    if hasattr(trace, "meshes"):
        meshes = [trace.meshes[i] for i in keep]
    else:
        _, all_meshes = _trace_slices(_Subset(trace, keep))
        meshes = all_meshes
    ts = times[keep]
    vals = np.array([_weighted_area(M, y, s, t) for M, t in zip(meshes, ts)])
    return y, ts, vals


class _Subset:
    def __init__(self, trace, keep):
        self.times = [trace.times[i] for i in keep]
        self.fields = [trace.fields[i] for i in keep]


def _extrapolate(ts, vals, s):
    x = np.sqrt(s - ts)
    A = np.column_stack([np.ones_like(x), x])
    coef, *_ = np.linalg.lstsq(A, vals, rcond=None)
    return float(coef[0])


def gaussian_density(trace, y, s: float, m: int = 6, min_lag: float = 0.0) -> DensityReport:
    """Gaussian density ``Theta_{(y,s)}`` of a flow.

    Samples ``int Phi_{(y,s)}(., t) dmu_t`` at the last ``m`` stored times
    before ``s - min_lag`` and extrapolates to ``t -> s`` with a fit affine
    in ``sqrt(s - t)``.
    """
    y, ts, vals = _samples(trace, y, s, m, min_lag)
    inc = np.diff(vals)
    viol = float(max(0.0, inc.max())) if len(inc) else 0.0
    return DensityReport(y, float(s), ts, vals, _extrapolate(ts, vals, s), viol)


def monotonicity_check(trace, y, s: float, tol: float = 1e-3, m: int | None = None,
                       min_lag: float = 0.0) -> DensityReport:
    """Huisken monotonicity: ``t -> int Phi_{(y,s)} dmu_t`` should not increase.

    Uses every stored time before ``s - min_lag`` (or the last ``m``);
    ``passed`` holds when the largest consecutive increase is at most ``tol``.
    """
    rep = gaussian_density(trace, y, s, m=m, min_lag=min_lag)
    rep.tol = tol
    return rep
