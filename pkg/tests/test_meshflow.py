import math

import numpy as np
import pytest

from shrinkflow import mesh as M
from shrinkflow.entropy import monotonicity_check
from shrinkflow.mesh import MeshError
from shrinkflow.meshflow import (FlowTrace, MeshFlowParams, associated_shrinker_flow, evolve_mesh, load_trace,
                                 parabolic_rescale, save_trace, self_similarity_defect)

import oracles


@pytest.fixture(scope="module")
def sphere_flow():
    return evolve_mesh(M.icosphere(2.0, 5), dt=1e-3, t_max=0.95, snap_dt=0.05)


def _radius(m, c=None):
    c = np.zeros(m.dim) if c is None else c
    return float(np.linalg.norm(m.vertices - c, axis=1).mean())


def test_circle_law():
    tr = evolve_mesh(M.circle(1.0, 2000), dt=1e-5, t_max=0.45, snap_dt=0.05)
    assert tr.metadata["halt_reason"] == "t_max"
    assert tr.times[-1] == pytest.approx(0.45)
    for t, m in zip(tr.times, tr.meshes):
        exact = oracles.shrinking_radius(1.0, t, 1)
        assert abs(_radius(m) - exact) <= 0.005 * exact


def test_sphere_law(sphere_flow):
    assert sphere_flow.source == "lagrangian"
    for t, m in zip(sphere_flow.times, sphere_flow.meshes):
        if t > 0.9 + 1e-9:
            break
        exact = oracles.shrinking_radius(2.0, t, 2)
        assert abs(_radius(m) - exact) <= 0.01 * exact, t


def test_shrinker_circle_is_self_similar():
    m0 = M.circle(math.sqrt(2), 1000)
    tr = evolve_mesh(m0, dt=1e-4, t_max=0.8, snap_dt=0.1)
    for t, m in zip(tr.times, tr.meshes):
        ref = math.sqrt(1 - t) * m0.vertices
        err = np.linalg.norm(m.vertices - ref, axis=1).max()
        assert err <= 0.005 * math.sqrt(1 - t) * math.sqrt(2)


def test_halts_on_size():
    tr = evolve_mesh(M.circle(1.0, 200), dt=1e-4, t_max=1.0)
    assert tr.metadata["halt_reason"] in ("min_size", "quality")
    assert tr.times[-1] <= 0.5 + 1e-3


def test_rejects_open_mesh():
    with pytest.raises(MeshError):
        evolve_mesh(M.tube(1.0, 1.0, 16))


def test_lagrangian_monotonicity(sphere_flow):
    rep = monotonicity_check(sphere_flow, np.zeros(3), 1.0, tol=1e-3)
    assert rep.passed, rep.max_violation


def test_associated_flow_examples():
    s = M.icosphere(2.0, 3)
    tr = associated_shrinker_flow(s, [-4.0, -1.0, -0.25])
    assert np.allclose(np.linalg.norm(tr.meshes[0].vertices, axis=1), 4.0)
    assert np.array_equal(tr.meshes[1].vertices, s.vertices)
    assert np.allclose(np.linalg.norm(tr.meshes[2].vertices, axis=1), 1.0)
    assert tr.slice(0.0).is_empty and tr.slice(0.5).is_empty


def test_associated_flow_area_law():
    s = M.ellipsoid((2.0, 1.0, 1.0), 3)
    tr = associated_shrinker_flow(s, [-3.0, -1.0, -0.5, -0.01])
    a1 = s.area()
    for t, m in zip(tr.times, tr.meshes):
        assert m.area() == pytest.approx(-t * a1, rel=1e-12)
    c = associated_shrinker_flow(M.circle(math.sqrt(2), 64), [-2.0, -0.5])
    assert c.meshes[0].area() == pytest.approx(math.sqrt(2) * M.circle(math.sqrt(2), 64).area(), rel=1e-12)


def test_rescale_of_shrinker_flow_is_identity():
    tr = associated_shrinker_flow(M.icosphere(2.0, 3), np.linspace(-2.0, -0.1, 6))
    for rho in (0.5, 1.7, 3.0):
        r = parabolic_rescale(tr, np.zeros(3), 0.0, rho, times=tr.times)
        for a, b in zip(tr.meshes, r.meshes):
            assert np.max(np.abs(a.vertices - b.vertices)) <= 1e-10


def test_rescale_lagrangian_sphere(sphere_flow):
    T = 1.0
    r = parabolic_rescale(sphere_flow, np.zeros(3), T, 2.0, times=[-2.0, -1.0, -0.5])
    for t, m in zip(r.times, r.meshes):
        exact = 2.0 * oracles.shrinking_radius(2.0, T + t / 4.0, 2)
        assert abs(_radius(m) - exact) <= 1e-3 * exact + 2 * 0.01 * exact


def test_rescale_interpolates_exactly_between_slices(sphere_flow):
    # slices at T + t/4 equal the linear vertex interpolation scaled by rho
    T = 1.0
    r = parabolic_rescale(sphere_flow, np.zeros(3), T, 2.0, times=[-2.9])
    t_src = T - 2.9 / 4.0
    j = int(np.searchsorted(sphere_flow.times, t_src))
    a, b = sphere_flow.times[j - 1], sphere_flow.times[j]
    w = (t_src - a) / (b - a)
    v = (1 - w) * sphere_flow.meshes[j - 1].vertices + w * sphere_flow.meshes[j].vertices
    assert np.max(np.abs(r.meshes[0].vertices - 2.0 * v)) <= 1e-12


def test_rescale_group_law(sphere_flow):
    y = np.array([0.1, 0.0, -0.2])
    s = 1.0
    once = parabolic_rescale(sphere_flow, y, s, 1.5 * 2.0, times=[-2.0, -1.0])
    inner = parabolic_rescale(sphere_flow, y, s, 1.5)
    twice = parabolic_rescale(inner, np.zeros(3), 0.0, 2.0, times=[-2.0, -1.0])
    for a, b in zip(once.meshes, twice.meshes):
        assert np.max(np.abs(a.vertices - b.vertices)) <= 1e-8


def test_rescale_out_of_range(sphere_flow):
    with pytest.raises(ValueError, match="outside"):
        parabolic_rescale(sphere_flow, np.zeros(3), 1.0, 2.0, times=[-10.0])
    with pytest.raises(ValueError):
        parabolic_rescale(sphere_flow, np.zeros(3), 1.0, -1.0)


def test_defect_shrinking_sphere():
    tr = associated_shrinker_flow(M.icosphere(2.0, 4), np.linspace(-1.0, -0.1, 8))
    assert self_similarity_defect(tr, np.zeros(3), 0.0) < 1e-8
    assert self_similarity_defect(tr, np.array([0.5, 0.0, 0.0]), 0.0) > 0.1


def test_defect_lagrangian_sphere(sphere_flow):
    d = self_similarity_defect(sphere_flow, np.zeros(3), 1.0)
    assert d < 1e-2 * 2.0
    assert self_similarity_defect(sphere_flow, np.array([0.5, 0.0, 0.0]), 1.0) > 0.1


def test_defect_needs_slices():
    tr = associated_shrinker_flow(M.circle(math.sqrt(2), 64), [-1.0, -0.5, 0.5])
    with pytest.raises(ValueError, match="at least 3"):
        self_similarity_defect(tr, np.zeros(2), 0.0)
    empty = FlowTrace([-1.0, -0.5, -0.2], [M.circle(1.0, 32), M.SurfaceMesh.empty(2), M.circle(1.0, 32)])
    with pytest.raises(MeshError, match="empty"):
        self_similarity_defect(empty, np.zeros(2), 0.0)


def test_trace_validation():
    c = M.circle(1.0, 32)
    with pytest.raises(ValueError, match="increasing"):
        FlowTrace([0.0, 0.0], [c, c])
    with pytest.raises(ValueError, match="connectivity"):
        FlowTrace([0.0, 1.0], [c, M.circle(1.0, 33)], "lagrangian")


@pytest.mark.parametrize("dim", [2, 3])
def test_save_load_trace(tmp_path, dim):
    m0 = M.circle(1.0, 128) if dim == 2 else M.icosphere(1.0, 2)
    tr = evolve_mesh(m0, MeshFlowParams(dt=1e-4, t_max=0.05, snap_dt=0.01))
    save_trace(tr, tmp_path / "tr")
    back = load_trace(tmp_path / "tr")
    assert back.times == tr.times and back.source == "lagrangian"
    assert back.metadata["halt_reason"] == tr.metadata["halt_reason"]
    for a, b in zip(tr.meshes, back.meshes):
        assert np.array_equal(a.vertices, b.vertices)
