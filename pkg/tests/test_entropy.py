import math

import numpy as np
import pytest

from shrinkflow import mesh as M
from shrinkflow.entropy import (EntropyOptions, backward_kernel, entropy, f_functional, gaussian_density,
                                gaussian_weight, lambda_round, monotonicity_check)
from shrinkflow.mesh import MeshError, rescale_measure
from shrinkflow.meshflow import FlowTrace, associated_shrinker_flow

import oracles

L1 = math.sqrt(2 * math.pi / math.e)
L2 = 4 / math.e


def test_gaussian_weight_examples():
    assert gaussian_weight(np.zeros(3), 2) == pytest.approx(1 / (4 * math.pi), rel=1e-14)
    # exp(-1)/(4 pi) = 0.02927492
    assert gaussian_weight([2.0, 0.0, 0.0], 2) == pytest.approx(math.exp(-1) / (4 * math.pi), rel=1e-14)
    assert gaussian_weight([2.0, 0.0, 0.0], 2) == pytest.approx(0.0292746, abs=5e-7)
    assert gaussian_weight(np.zeros(2), 1) == pytest.approx(0.2820948, abs=1e-7)
    pts = np.array([[0.0, 0.0, 0.0], [0.0, 2.0, 0.0]])
    assert np.allclose(gaussian_weight(pts, 2), [1 / (4 * math.pi), math.exp(-1) / (4 * math.pi)])


def test_backward_kernel_examples():
    y = np.array([0.5, -1.0, 2.0])
    assert backward_kernel(y, 0.0, y, 1.0, 2) == pytest.approx(1 / (4 * math.pi))
    assert backward_kernel(y, -3.0, y, 1.0, 2) == pytest.approx(0.25 / (4 * math.pi))
    x = y + np.array([0.0, 2.0, 0.0])
    assert backward_kernel(x, 1.0, y, 2.0, 2) == pytest.approx(math.exp(-1) / (4 * math.pi))
    with pytest.raises(ValueError):
        backward_kernel(y, 1.0, y, 1.0, 2)


@pytest.mark.parametrize("t", [-5.0, 0.0, 0.9])
def test_backward_kernel_plane_normalization(t):
    assert oracles.kernel_plane_integral(t, 1.0, None) == pytest.approx(1.0, abs=1e-4)
    # the library kernel agrees with the oracle integrand pointwise
    r = 0.7
    tau = 1.0 - t
    ref = (4 * math.pi * tau) ** -1 * math.exp(-r * r / (4 * tau))
    assert backward_kernel([r, 0.0, 0.0], t, np.zeros(3), 1.0, 2) == pytest.approx(ref, rel=1e-12)


def test_f_disk_is_one():
    assert f_functional(M.disk(20.0)) == pytest.approx(1.0, abs=1e-4)


def test_f_round_shrinkers():
    assert f_functional(M.circle(math.sqrt(2), 512)) == pytest.approx(L1, abs=1e-3)
    assert f_functional(M.icosphere(2.0, 5)) == pytest.approx(L2, abs=1e-3)


@pytest.mark.parametrize("r,d", [(1.0, 0.0), (3.0, 1.5), (0.5, 2.0)])
def test_f_matches_closed_forms(r, d):
    m = M.icosphere(r, 5, (0.0, 0.0, d))
    assert f_functional(m) == pytest.approx(oracles.F_sphere(r, d), abs=1e-3)
    c = M.circle(r, 1024, (d, 0.0))
    assert f_functional(c) == pytest.approx(oracles.F_circle(r, d), abs=1e-4)


def test_f_ellipsoid_and_torus():
    e = M.ellipsoid((2.0, 1.0, 1.0), 5)
    assert f_functional(e) == pytest.approx(oracles.F_ellipsoid((2.0, 1.0, 1.0)), abs=2e-3)
    t = M.torus(2.0, 0.5, 256, 96)
    assert f_functional(t) == pytest.approx(oracles.F_torus(2.0, 0.5), abs=1e-3)


def test_lambda_round_values():
    assert lambda_round(2, 0) == pytest.approx(1.4715178, abs=1e-7)
    assert lambda_round(2, 1) == pytest.approx(1.5203469, abs=1e-7)
    assert lambda_round(2, 2) == 1.0
    for n in range(1, 8):
        assert lambda_round(n) == pytest.approx(oracles.lambda_closed(n), rel=1e-12)
    with pytest.raises(ValueError):
        lambda_round(2, 3)


def test_stone_chain():
    lam = [lambda_round(n) for n in range(1, 8)]
    assert 2 > lam[0] > 1.5 > lam[1]
    assert all(a > b for a, b in zip(lam, lam[1:]))
    assert lam[-1] > 1
    # cylinders share the entropy of their spherical factor
    assert lambda_round(5, 3) == lambda_round(2)


def test_entropy_translated_scaled_sphere():
    rep = entropy(M.icosphere(5.0, 4, (3.0, -1.0, 2.0)))
    assert rep.lam == pytest.approx(L2, abs=2e-3)
    assert np.allclose(rep.best_center, [3.0, -1.0, 2.0], atol=1e-3)
    # best rescaling maps the sphere to radius 2
    assert 5.0 * rep.best_scale == pytest.approx(2.0, abs=5e-3)


def test_entropy_circle():
    rep = entropy(M.circle(math.sqrt(2), 512))
    assert rep.lam == pytest.approx(L1, abs=2e-3)
    assert np.allclose(rep.best_center, 0.0, atol=1e-3)
    assert rep.best_scale == pytest.approx(1.0, abs=1e-3)
    assert rep.converged


def test_entropy_ellipse_dense_oracle():
    lam = entropy(M.ellipse(2.0, 1.0, 1024)).lam
    dense = oracles.dense_ellipse_entropy(2.0, 1.0)
    assert lam > L1
    assert lam >= dense - 2e-4
    assert lam == pytest.approx(dense, abs=2e-3)


def test_entropy_at_least_f():
    for m in (M.ellipsoid((2.0, 1.0, 0.5), 3), M.torus(2.0, 0.5, 64, 24), M.ellipse(1.0, 3.0, 256)):
        rep = entropy(m)
        assert rep.lam >= f_functional(m) - 1e-10
        assert rep.lam > 1 - 1e-3


def test_entropy_rejects_open_without_flag():
    tube = M.tube(math.sqrt(2), 8.0, 64, 64)
    with pytest.raises(MeshError, match="open"):
        entropy(tube)
    rep = entropy(tube, EntropyOptions(allow_open=True))
    assert rep.lam == pytest.approx(L1, abs=5e-3)
    assert 0 <= rep.truncation_bound < 1e-4


def test_entropy_report_json():
    import json
    rep = entropy(M.circle(1.0, 128))
    d = json.loads(rep.to_json())
    assert d["lambda"] == rep.lam and len(d["best_center"]) == 2


def test_entropy_deterministic():
    m = M.ellipsoid((1.5, 1.0, 1.0), 3)
    a, b = entropy(m), entropy(m)
    assert a.lam == b.lam and np.array_equal(a.best_center, b.best_center)


# ---------------------------------------------------------------------------
# density and monotonicity


@pytest.fixture(scope="module")
def sphere_trace():
    # shrinking sphere of radius 2 sqrt(-t), extinct at t = 0
    times = np.linspace(-1.0, -0.05, 20)
    return associated_shrinker_flow(M.icosphere(2.0, 4), times)


@pytest.fixture(scope="module")
def plane_trace():
    d = M.plane_patch(20.0, 401)
    return FlowTrace([0.0, 0.25, 0.5, 0.75, 1.0], [d] * 5, "analytic")


def test_density_shrinking_sphere(sphere_trace):
    rep = gaussian_density(sphere_trace, np.zeros(3), 0.0)
    assert len(rep.values) == 6
    assert rep.theta == pytest.approx(L2, abs=1e-2)
    # self-similar: the samples are constant
    assert np.ptp(rep.values) < 1e-10


def test_density_off_track(sphere_trace):
    rep = gaussian_density(sphere_trace, np.array([25.0, 0.0, 0.0]), 0.0)
    assert rep.theta < 1e-6


def test_density_static_plane(plane_trace):
    rep = gaussian_density(plane_trace, np.zeros(3), 2.0)
    assert np.all(np.abs(rep.values - 1.0) < 1e-4)
    assert rep.theta == pytest.approx(1.0, abs=1e-4)
    mono = monotonicity_check(plane_trace, np.zeros(3), 2.0, tol=1e-6)
    assert np.all(np.abs(np.diff(mono.values)) < 1e-6)
    assert mono.passed


def test_density_needs_four_states(plane_trace):
    with pytest.raises(ValueError, match="at least 4"):
        gaussian_density(plane_trace, np.zeros(3), 0.6)


@pytest.mark.parametrize("y,s", [((0.0, 0.0, 0.0), 0.0), ((0.5, 0.2, 0.0), 0.0),
                                 ((1.0, 0.0, 0.0), -0.3), ((0.0, 0.0, 3.0), 0.0)])
def test_monotonicity_shrinking_sphere(sphere_trace, y, s):
    rep = monotonicity_check(sphere_trace, np.array(y), s, tol=1e-3)
    assert rep.passed, rep.max_violation


def test_density_report_serialization(sphere_trace):
    rep = monotonicity_check(sphere_trace, np.zeros(3), 0.0)
    lines = rep.to_csv().strip().splitlines()
    assert lines[0] == "t,value" and len(lines) == len(rep.times) + 1
    assert '"passed": true' in rep.to_json()


def test_rescale_invariance_of_entropy_examples():
    m = M.ellipse(2.0, 1.0, 512)
    base = entropy(m).lam
    for y, rho in [((1.0, -2.0), 0.4), ((-3.0, 3.0), 2.5)]:
        assert entropy(rescale_measure(m, np.array(y), rho)).lam == pytest.approx(base, abs=3e-3)
