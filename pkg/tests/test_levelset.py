import math

import numpy as np
import pytest

from shrinkflow.fields import Grid, GridField, extract_interface, signed_distance_init
from shrinkflow.levelset import (LevelSetParams, avoidance_check, evolve, extinction_time, fattening_metric,
                                 fattening_ratio, reinitialize)
from shrinkflow.mesh import point_to_mesh_distance
from shrinkflow.shapes import Box, Sphere

import oracles


def _mean_radius(field, center=None):
    m = extract_interface(field)
    c = np.zeros(m.dim) if center is None else np.asarray(center)
    return float(np.linalg.norm(m.vertices - c, axis=1).mean())


def _disk(r, h, half, center=(0.0, 0.0)):
    return signed_distance_init(Sphere(r, center), Grid.centered(2, half, h))


@pytest.fixture(scope="module")
def circle_run():
    return evolve(_disk(math.sqrt(2), 0.02, 1.7), t_max=1.2)


@pytest.fixture(scope="module")
def sphere_run():
    return evolve(signed_distance_init(Sphere(1.0), Grid.centered(3, 1.4, 0.1)), t_max=0.6)


def test_circle_radius_law_fine():
    tr = evolve(_disk(1.0, 0.01, 1.2), t_max=0.45)
    for t, f in zip(tr.times, tr.fields):
        exact = oracles.shrinking_radius(1.0, t, 1)
        assert abs(_mean_radius(f) - exact) <= 0.01 * exact, t


def test_circle_extinction(circle_run):
    assert circle_run.extinct
    assert circle_run.extinction_time == pytest.approx(1.0, abs=0.02)
    assert circle_run.times[0] == 0.0
    assert all(b > a for a, b in zip(circle_run.times, circle_run.times[1:]))
    assert np.allclose(circle_run.extinction_point, 0.0, atol=0.02)


def test_sphere_extinction_scaling(sphere_run):
    t1 = sphere_run.extinction_time
    assert t1 == pytest.approx(oracles.extinction_time(1.0, 2), rel=0.02)
    big = evolve(signed_distance_init(Sphere(2.0), Grid.centered(3, 2.4, 0.1)), t_max=1.2)
    assert big.extinction_time / t1 == pytest.approx(4.0, rel=0.05)


def test_sphere_radius_law(sphere_run):
    for t, f in zip(sphere_run.times, sphere_run.fields):
        if t > 0.9 * 0.25:
            break
        exact = oracles.shrinking_radius(1.0, t, 2)
        assert abs(_mean_radius(f) - exact) <= 0.02 * exact, t


def test_translation_equivariance():
    g = Grid.centered(2, 2.0, 0.05)
    k = (7, -4)
    f0 = signed_distance_init(Sphere(0.8, (-0.3, 0.2)), g)
    # u0(x - v) for v = k h: shift the node values (the wrapped rim lies beyond the clamp)
    f1 = GridField(g, np.roll(f0.values, k, axis=(0, 1)))
    a = evolve(f0, t_max=0.1)
    b = evolve(f1, t_max=0.1)
    assert a.times == b.times
    for fa, fb in zip(a.fields, b.fields):
        assert np.max(np.abs(np.roll(fa.values, k, axis=(0, 1)) - fb.values)) <= 1e-10


def test_grid_translation_is_exact():
    f = _disk(0.8, 0.05, 1.2)
    a = evolve(f, t_max=0.05)
    b = evolve(f.translated_by_cells((3, -5)), t_max=0.05)
    assert np.max(np.abs(a.fields[-1].values - b.fields[-1].values)) <= 1e-10


def test_parabolic_scale_law():
    rho = 2.0
    a = evolve(_disk(0.7, 0.02, 1.0), t_max=0.2)
    b = evolve(_disk(0.7 * rho, 0.02 * rho, 1.0 * rho), t_max=0.2 * rho ** 2)
    for t, f in zip(a.times, a.fields):
        fb = b.snapshot(t * rho ** 2, tol=1e-9)
        ra, rb = _mean_radius(f), _mean_radius(fb)
        assert abs(rb - rho * ra) <= 0.02 * rho * ra


def test_stays_inside_enclosing_sphere_flow():
    g = Grid.centered(2, 1.5, 0.03)
    f = signed_distance_init(Box((1.0, 0.4), (0.1, 0.0)), g)
    R = float(np.linalg.norm(extract_interface(f).vertices, axis=1).max())
    tr = evolve(f, t_max=0.3)
    for t, u in zip(tr.times, tr.fields):
        m = extract_interface(u)
        if m.is_empty:
            continue
        bound = oracles.shrinking_radius(R, t, 1)
        assert np.linalg.norm(m.vertices, axis=1).max() <= bound + g.spacing, t


def test_cfl_violation_rejected():
    f = _disk(0.5, 0.05, 1.0)
    with pytest.raises(ValueError, match="stability"):
        evolve(f, dt=0.05 ** 2 / 3.0)
    assert LevelSetParams().time_step(0.05, 2) == pytest.approx(0.05 ** 2 / 8)
    assert LevelSetParams().time_step(0.1, 3) == pytest.approx(0.01 / 12)


def test_no_extinction_observed():
    tr = evolve(_disk(0.8, 0.05, 1.2), t_max=0.05)
    assert not tr.extinct and tr.extinction_time is None
    with pytest.raises(ValueError, match="no extinction observed"):
        extinction_time(tr)


def test_snapshot_lookup(circle_run):
    assert circle_run.snapshot(0.0) is circle_run.fields[0]
    with pytest.raises(ValueError, match="no snapshot"):
        circle_run.snapshot(0.5 * (circle_run.times[1] + circle_run.times[2]))


def test_reinit_anchors_interface():
    g = Grid.centered(2, 1.5, 0.03)
    sd = signed_distance_init(Sphere(1.0, (0.1, -0.05)), g)
    x = g.points()[:, 0].reshape(g.shape)
    distorted = GridField(g, sd.values * (1.5 + 0.8 * x))
    re = reinitialize(distorted)
    m0, m1 = extract_interface(distorted), extract_interface(re)
    assert point_to_mesh_distance(m1.vertices, m0).max() <= 0.5 * g.spacing
    # gradient restored to unit length near the interface
    near = np.abs(sd.values) < 3 * g.spacing
    assert np.max(np.abs(re.values - sd.values)[near]) < 0.5 * g.spacing


def test_fattening_circle(circle_run):
    h = circle_run.grid.spacing
    for t in circle_run.times[:-3]:
        metric = fattening_metric(circle_run, t, 4 * h)
        length = extract_interface(circle_run.snapshot(t)).area()
        assert metric == pytest.approx(length, rel=0.1)
        ratio, flagged = fattening_ratio(circle_run, t, 4 * h)
        assert abs(ratio - 1.0) <= 0.2 and not flagged


def test_fattening_sphere_never_flagged(sphere_run):
    h = sphere_run.grid.spacing
    for t in sphere_run.times:
        assert not fattening_ratio(sphere_run, t, 4 * h)[1]


def test_fattening_empty_and_bad_delta(circle_run):
    from shrinkflow.levelset import LevelSetTrace
    g = circle_run.grid
    empty = LevelSetTrace(g, LevelSetParams(), circle_run.dt, [0.0], [GridField(g, -np.ones(g.shape))])
    assert fattening_metric(empty, 0.0, 4 * g.spacing) == 0.0
    assert fattening_ratio(empty, 0.0, 4 * g.spacing) == (1.0, False)
    with pytest.raises(ValueError, match="2h"):
        fattening_metric(circle_run, 0.0, g.spacing)
    with pytest.raises(ValueError, match="no snapshot"):
        fattening_metric(circle_run, 0.5 * (circle_run.times[1] + circle_run.times[2]), 4 * g.spacing)


def test_avoidance_concentric_circles():
    g = Grid.centered(2, 3.3, 0.04)
    a = evolve(signed_distance_init(Sphere(1.0, (0.0, 0.0)), g), t_max=0.45, snap_every=100)
    b = evolve(signed_distance_init(Sphere(3.0, (0.0, 0.0)), g), t_max=0.45, snap_every=100)
    rep = avoidance_check(a, b)
    assert rep.passed, rep.worst_drop
    assert rep.gaps[0] == pytest.approx(2.0, abs=0.02)
    k = int(np.argmin(np.abs(rep.times - 0.4)))
    assert rep.gaps[k] == pytest.approx(oracles.circle_gap(rep.times[k]), abs=0.05)


def test_avoidance_two_spheres():
    g = Grid.centered(3, 3.4, 0.1)
    a = evolve(signed_distance_init(Sphere(1.0, (-2.0, 0.0, 0.0)), g), t_max=0.2)
    b = evolve(signed_distance_init(Sphere(1.0, (2.0, 0.0, 0.0)), g), t_max=0.2)
    rep = avoidance_check(a, b)
    assert rep.gaps[0] == pytest.approx(2.0, abs=0.05)
    assert rep.passed


def test_avoidance_identical_and_mismatch(circle_run):
    rep = avoidance_check(circle_run, circle_run)
    assert np.all(rep.gaps == 0.0) and rep.passed
    other = evolve(_disk(0.5, 0.05, 1.0), t_max=0.01)
    with pytest.raises(ValueError, match="same grid"):
        avoidance_check(circle_run, other)
