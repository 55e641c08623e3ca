"""Weak mean curvature flow by the level-set method.

The level-set function ``u`` (positive inside) is evolved by

    u_t = (delta_ij - u_i u_j / (|Du|^2 + delta_reg^2)) u_ij

with explicit Euler steps and central differences on a narrow band around
the zero set.  The band is periodically redistanced so ``u`` stays close to
a signed distance; away from the band the field is clamped to a constant of
the right sign, which leaves the zero set untouched.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .fields import Grid, GridField, extract_interface
from .mesh import point_to_mesh_distance

__all__ = [
    "LevelSetParams",
    "LevelSetTrace",
    "AvoidanceReport",
    "evolve",
    "extinction_time",
    "reinitialize",
    "fattening_metric",
    "fattening_ratio",
    "avoidance_check",
]

log = logging.getLogger(__name__)
# velocity is tapered to zero between this fraction of the band and its edge
_TAPER_START = 0.5


@dataclass(frozen=True)
class LevelSetParams:
    """Stepper settings.

    ``dt`` defaults to ``h**2 / (4 (n + 1))``; ``band`` is the half-width of
    the updated tube in cells.  ``snap_every=None`` stores about 32
    snapshots over ``[0, t_max]`` (full 3D fields are large).
    """

    t_max: float = 1.0
    dt: float | None = None
    reinit_every: int = 20
    reinit_iters: int = 10
    snap_every: int | None = None
    delta_reg: float = 1e-6
    band: float = 6.0

    def time_step(self, h: float, dim: int) -> float:
        dt = h * h / (4.0 * dim) if self.dt is None else float(self.dt)
        limit = h * h / (2.0 * dim)
        if dt > limit * (1 + 1e-12):
            raise ValueError(f"dt={dt} violates the explicit stability limit h^2/(2(n+1)) = {limit}")
        if dt <= 0:
            raise ValueError("dt must be positive")
        return dt


@dataclass
class LevelSetTrace:
    """Snapshots ``(t, u(., t))`` of one level-set run."""

    grid: Grid
    params: LevelSetParams
    dt: float
    times: list = field(default_factory=list)
    fields: list = field(default_factory=list)
    extinct: bool = False
    extinction_time: float | None = None
    extinction_point: np.ndarray | None = None
    steps: int = 0
    _resume: dict | None = field(default=None, repr=False)

    def snapshot(self, t: float, tol: float | None = None) -> GridField:
        """Stored field nearest to ``t``; raises if none lies within ``tol`` (default dt/2)."""
        tol = 0.5 * self.dt if tol is None else tol
        times = np.asarray(self.times)
        k = int(np.argmin(np.abs(times - t)))
        if abs(times[k] - t) > tol:
            raise ValueError(f"no snapshot near t={t} (closest {times[k]})")
        return self.fields[k]

    @property
    def last_time(self) -> float:
        return self.times[-1]


class _Stepper:
    """Mutable narrow-band state; the public API only hands out copies."""

    def __init__(self, values: np.ndarray, grid: Grid, params: LevelSetParams, dt: float):
        self.grid = grid
        self.params = params
        self.h = grid.spacing
        self.dim = grid.dim
        self.dt = dt
        self.shape = np.asarray(grid.shape, dtype=np.int64)
        self.strides = np.array([int(np.prod(grid.shape[a + 1:])) for a in range(self.dim)],
                                dtype=np.int64)
        self.width = params.band * self.h
        self.clamp = self.width + 2.0 * self.h
        self.beta = _TAPER_START * self.width
        self.cfl = 0.45 if self.dim == 2 else 0.3
        self.mark = np.zeros(int(np.prod(grid.shape)), dtype=np.uint8)
        self.u = values

    @classmethod
    def start(cls, field0: GridField, params: LevelSetParams, dt: float) -> "_Stepper":
        self = cls(np.array(field0.values, dtype=float).ravel(), field0.grid, params, dt)
        self.u = np.clip(self.u, -self.clamp, self.clamp)
        self.rebuild()
        reach = int(np.ceil(params.band)) + 2
        idx = _kernels.dilate_indices(self.band, self.shape, self.strides, reach, self.mark)
        iters = int(np.ceil(self.clamp / (self.cfl * self.h))) + 10
        self._redistance(idx, iters)
        self.rebuild()
        return self

    def copy(self) -> "_Stepper":
        other = _Stepper(self.u.copy(), self.grid, self.params, self.dt)
        other.band, other.pos_out, other.rein = self.band, self.pos_out, self.rein
        other.out = np.empty_like(self.out)
        return other

    def probe(self, dt: float) -> bool:
        """Whether one step of size ``dt`` leaves a non-empty zero set; state is restored."""
        saved = self.u[self.band]
        alive = self.step(dt)
        self.u[self.band] = saved
        return alive

    def rebuild(self):
        self.band, self.pos_out = _kernels.band_indices(self.u, self.shape, self.width)
        self.rein = _kernels.dilate_indices(self.band, self.shape, self.strides, 2, self.mark)
        self.out = np.empty(max(len(self.rein), len(self.band), 1))

    def _redistance(self, idx, iters):
        _kernels.reinit(self.u, self.u.copy(), idx, self.shape, self.strides, self.h, self.cfl,
                        iters, self.clamp)

    def redistance(self):
        self._redistance(self.rein, self.params.reinit_iters)
        self.rebuild()

    def step(self, dt: float) -> bool:
        """Advance by ``dt``; returns True while the zero set is non-empty."""
        if len(self.band) == 0:
            return self.pos_out and bool(np.any(self.u < 0))
        d2 = self.params.delta_reg ** 2
        if self.dim == 3:
            vmax = _kernels.mcf_step_3d(self.u, self.band, self.out, self.strides[0], self.strides[1],
                                        self.h, dt, d2, self.beta, self.width)
        else:
            vmax = _kernels.mcf_step_2d(self.u, self.band, self.out, self.strides[0], self.h, dt, d2,
                                        self.beta, self.width)
        return bool(self.pos_out or vmax > 0.0)

    def field(self) -> GridField:
        return GridField(self.grid, self.u.reshape(self.grid.shape).copy())

    def argmax_point(self) -> np.ndarray:
        """Location of the largest value, refined by a 3-point parabola per axis."""
        p = int(np.argmax(self.u))
        ijk = np.array(np.unravel_index(p, self.grid.shape))
        pos = ijk.astype(float)
        for a in range(self.dim):
            if 0 < ijk[a] < self.shape[a] - 1:
                c = self.u[p]
                m = self.u[p - self.strides[a]]
                q = self.u[p + self.strides[a]]
                den = m - 2 * c + q
                if den < 0:
                    pos[a] += float(np.clip(0.5 * (m - q) / den, -0.5, 0.5))
        return np.asarray(self.grid.origin) + self.h * pos


def evolve(field0: GridField, params: LevelSetParams | None = None, **overrides) -> LevelSetTrace:
    """Run the level-set flow from ``field0`` until the zero set vanishes or ``t_max``.

    Snapshots are stored at ``t = 0``, every ``snap_every`` steps, at the
    last step with a non-empty zero set and at termination.  On extinction
    the time is refined by bisection (see :func:`extinction_time`).

    Parameters
    ----------
    field0 : GridField
        Initial level-set function, positive inside.
    params : LevelSetParams, optional
        Keyword ``overrides`` replace individual fields.
    """
    params = replace(params or LevelSetParams(), **overrides)
    g = field0.grid
    dt = params.time_step(g.spacing, g.dim)
    n_steps = int(np.ceil(params.t_max / dt - 1e-9))
    snap_every = params.snap_every or max(1, int(np.ceil(n_steps / 32)))
    st = _Stepper.start(field0, params, dt)
    trace = LevelSetTrace(g, params, dt)
    trace.times.append(0.0)
    trace.fields.append(st.field())

    t = 0.0
    for k in range(1, n_steps + 1):
        step = min(dt, params.t_max - t)
        saved = st.u[st.band]
        alive = st.step(step)
        t_new = k * dt if k < n_steps else params.t_max
        if not alive:
            before = st.copy()
            before.u[st.band] = saved
            trace.extinct = True
            trace.extinction_point = before.argmax_point()
            if trace.times[-1] < t - 1e-15:
                trace.times.append(t)
                trace.fields.append(before.field())
            trace._resume = {"stepper": before, "t": t, "dt": step}
            trace.times.append(t_new)
            trace.fields.append(st.field())
            trace.steps = k
            break
        t = t_new
        if k % params.reinit_every == 0:
            st.redistance()
            if not np.all(np.isfinite(st.u[st.band])):
                raise FloatingPointError(f"non-finite level-set values at step {k}")
        if k % snap_every == 0 or k == n_steps:
            trace.times.append(t)
            trace.fields.append(st.field())
    else:
        trace.steps = n_steps
    if trace.extinct:
        trace.extinction_time = extinction_time(trace)
    log.debug("level-set run: %d steps, extinct=%s", trace.steps, trace.extinct)
    return trace


def extinction_time(trace: LevelSetTrace, iters: int = 48) -> float:
    """Time at which the zero set vanishes, to a fraction of one step.

    Bisects the length of a single partial step taken from the stored last
    non-empty state; emptiness means no node carries a positive value.
    """
    if not trace.extinct or trace._resume is None:
        raise ValueError("no extinction observed (trace reached t_max with a non-empty zero set)")
    if trace.extinction_time is not None:
        return trace.extinction_time
    st = trace._resume["stepper"]
    lo, hi = 0.0, trace._resume["dt"]
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if st.probe(mid):
            lo = mid
        else:
            hi = mid
    return trace._resume["t"] + 0.5 * (lo + hi)


def reinitialize(field0: GridField, band: float = 6.0, iters: int | None = None) -> GridField:
    """Redistance ``field0`` near its zero set; far values are clamped to ``+-(band + 2) h``."""
    params = LevelSetParams(band=band)
    st = _Stepper(np.array(field0.values, dtype=float).ravel(), field0.grid, params, 0.0)
    st.u = np.clip(st.u, -st.clamp, st.clamp)
    st.rebuild()
    reach = int(np.ceil(band)) + 2
    idx = _kernels.dilate_indices(st.band, st.shape, st.strides, reach, st.mark)
    st._redistance(idx, iters if iters is not None else int(np.ceil(st.clamp / (st.cfl * st.h))) + 10)
    return st.field()


def fattening_metric(trace: LevelSetTrace, t: float, delta: float) -> float:
    """Volume of ``{|u(., t)| < delta}`` divided by ``2 delta``.

    For a thin interface this approximates its area (coarea formula); a
    fattened zero set makes it blow up as ``delta`` shrinks.
    """
    h = trace.grid.spacing
    if delta < 2 * h * (1 - 1e-12):
        raise ValueError(f"delta={delta} is below 2h={2 * h}")
    if delta > trace.params.band * h:
        raise ValueError(f"delta={delta} exceeds the redistanced band {trace.params.band * h}")
    u = trace.snapshot(t).values
    count = int(np.count_nonzero(np.abs(u) < delta))
    return count * h ** trace.grid.dim / (2.0 * delta)


def fattening_ratio(trace: LevelSetTrace, t: float, delta: float, threshold: float = 1.5):
    """``(ratio, flagged)`` with ratio = metric(delta/2) / metric(delta).

    Returns ratio 1 for an empty zero set.  Flagged when the ratio exceeds
    ``threshold``.
    """
    a = fattening_metric(trace, t, delta)
    b = fattening_metric(trace, t, 0.5 * delta)
    ratio = 1.0 if a == 0.0 else b / a
    return ratio, ratio > threshold


@dataclass
class AvoidanceReport:
    times: np.ndarray
    gaps: np.ndarray
    tol: float
    passed: bool
    worst_drop: float

    def to_dict(self) -> dict:
        return {"times": self.times.tolist(), "gaps": self.gaps.tolist(), "tol": self.tol,
                "passed": self.passed, "worst_drop": self.worst_drop}


def _interface_gap(fa: GridField, fb: GridField) -> float:
    ma, mb = extract_interface(fa, 0.0), extract_interface(fb, 0.0)
    if ma.is_empty or mb.is_empty:
        return np.nan
    return float(min(point_to_mesh_distance(ma.vertices, mb).min(),
                     point_to_mesh_distance(mb.vertices, ma).min()))


def avoidance_check(trace_a: LevelSetTrace, trace_b: LevelSetTrace,
                    tol: float | None = None) -> AvoidanceReport:
    """Distance between the two zero sets at every common snapshot time.

    Passes when no gap falls more than ``tol`` (default ``2h``) below the
    largest earlier gap.  Times where either interface has vanished are
    dropped.
    """
    ga, gb = trace_a.grid, trace_b.grid
    if ga.to_dict() != gb.to_dict():
        raise ValueError("avoidance_check needs both traces on the same grid")
    tol = 2.0 * ga.spacing if tol is None else tol
    eps = 0.25 * min(trace_a.dt, trace_b.dt)
    times, gaps = [], []
    tb = np.asarray(trace_b.times)
    for ta, fa in zip(trace_a.times, trace_a.fields):
        j = int(np.argmin(np.abs(tb - ta)))
        if abs(tb[j] - ta) > eps:
            continue
        gap = _interface_gap(fa, trace_b.fields[j])
        if np.isnan(gap):
            continue
        times.append(ta)
        gaps.append(gap)
    gaps = np.asarray(gaps)
    drop = float(np.max(np.maximum.accumulate(gaps) - gaps)) if len(gaps) else 0.0
    return AvoidanceReport(np.asarray(times), gaps, tol, drop <= tol, drop)
