"""Acceptance criteria AC1-AC11, one PASS/FAIL line each (see the summary section)."""

import math
import time

import numpy as np
import pytest

from shrinkflow import cli
from shrinkflow import mesh as M
from shrinkflow.entropy import entropy, f_functional, lambda_round, monotonicity_check
from shrinkflow.fields import Grid, extract_interface, perimeter, signed_distance_init, voxelize
from shrinkflow.levelset import avoidance_check, evolve
from shrinkflow.meshflow import FlowTrace, associated_shrinker_flow, evolve_mesh, self_similarity_defect
from shrinkflow.shapes import Cylinder, Ellipsoid, HalfSpace, Sphere
from shrinkflow.shrinker import collapsed_test, entropy_bound_experiment, shrinker_residual

import oracles

pytestmark = pytest.mark.acceptance


def _sphere_run(h, n_cells):
    g = Grid((-0.5 * n_cells * h,) * 3, h, (n_cells,) * 3)
    t0 = time.perf_counter()
    tr = evolve(signed_distance_init(Sphere(2.0), g), t_max=1.2)
    return tr, time.perf_counter() - t0


@pytest.fixture(scope="session")
def sphere_runs():
    # same physical box [-3.2, 3.2]^3 at two resolutions
    return {0.1: _sphere_run(0.1, 64), 0.05: _sphere_run(0.05, 128)}


@pytest.fixture(scope="session")
def ellipsoid_run():
    h = 0.04
    m, k = int(np.ceil(2.6 / h)), int(np.ceil(1.6 / h))
    g = Grid((-m * h, -k * h, -k * h), h, (2 * m, 2 * k, 2 * k))
    return evolve(signed_distance_init(Ellipsoid((2.0, 1.0, 1.0)), g), t_max=0.5)


def _radius_errors(trace, t_stop):
    errs = []
    for t, f in zip(trace.times, trace.fields):
        if t > t_stop:
            break
        r = float(np.linalg.norm(extract_interface(f).vertices, axis=1).mean())
        errs.append(abs(r - oracles.shrinking_radius(2.0, t, 2)))
    return np.array(errs)


def test_ac1_stone_chain(ac_report):
    t0 = time.perf_counter()
    res, _ = cli.cmd_stone({}, None)
    dt = time.perf_counter() - t0
    lam = res["lambda"]
    closed = abs(lam["1"] - 1.5203469) <= 1e-6 and abs(lam["2"] - 1.4715178) <= 1e-6
    quad = [abs(f_functional(M.circle(math.sqrt(2), 2048)) - lambda_round(1)),
            abs(f_functional(M.icosphere(2.0, 5)) - lambda_round(2)),
            abs(f_functional(M.icosphere(2.0, 5, (0.5, 0.0, 0.0))) - oracles.F_sphere(2.0, 0.5))]
    ok = closed and res["chain_holds"] and max(quad) <= 1e-3 and dt < 10
    ac_report("AC1", ok, f"lambda_1={lam['1']:.7f} lambda_2={lam['2']:.7f} chain={res['chain_holds']} "
                         f"max quadrature err={max(quad):.1e} runtime={dt:.1f}s")
    assert ok


def test_ac2_sphere_extinction(ac_report, sphere_runs):
    (coarse, _), (fine, wall) = sphere_runs[0.1], sphere_runs[0.05]
    e_coarse, e_fine = abs(coarse.extinction_time - 1.0), abs(fine.extinction_time - 1.0)
    ratio = e_fine / e_coarse
    # supporting evidence: radius-trajectory error over [0, 0.9]
    r_ratio = _radius_errors(fine, 0.9).max() / _radius_errors(coarse, 0.9).max()
    within = e_fine <= 0.02
    halves = ratio <= 0.6
    ok = within and halves and wall < 300
    ac_report("AC2", ok, f"T0(h=0.05)={fine.extinction_time:.5f} (err {e_fine:.1e}), "
                         f"T0(h=0.1)={coarse.extinction_time:.5f} (err {e_coarse:.1e}), "
                         f"error ratio on halving h={ratio:.2f} (need <=0.6), "
                         f"radius-error ratio={r_ratio:.2f}, runtime={wall:.0f}s")
    assert within, "T0 outside 1 +- 0.02"
    assert halves, f"T0 error ratio {ratio:.2f} on halving h (errors are ~1e-4, see decisions ledger)"


def test_ac3_monotonicity(ac_report, ellipsoid_run):
    T0, y = ellipsoid_run.extinction_time, ellipsoid_run.extinction_point
    rep = monotonicity_check(ellipsoid_run, y, T0, tol=5e-3)
    sphere = associated_shrinker_flow(M.icosphere(2.0, 5), np.linspace(-1.0, -0.02, 25))
    srep = monotonicity_check(sphere, np.zeros(3), 0.0, tol=1e-3)
    ok = bool(rep.passed and srep.passed)
    ac_report("AC3", ok, f"ellipsoid T0={T0:.4f} max increment={rep.max_violation:.1e} (tol 5e-3); "
                         f"analytic sphere max increment={srep.max_violation:.1e} (tol 1e-3)")
    assert ok


def test_ac4_entropy_along_flow(ac_report, ellipsoid_run):
    T0 = ellipsoid_run.extinction_time
    keep = [(t, f) for t, f in zip(ellipsoid_run.times, ellipsoid_run.fields) if t <= 0.95 * T0]
    keep = keep[::2]
    lams = [entropy(extract_interface(f)).lam for _, f in keep]
    inc = float(np.max(np.diff(lams)))
    ok = inc <= 5e-3
    ac_report("AC4", ok, f"{len(lams)} snapshots, lambda {lams[0]:.4f} -> {lams[-1]:.4f}, "
                         f"largest increase={inc:.1e} (tol 5e-3)")
    assert ok


def test_ac5_shrinker_residual(ac_report):
    r5 = shrinker_residual(M.icosphere(2.0, 5)).max_norm
    r4 = shrinker_residual(M.icosphere(2.0, 4)).max_norm
    unit = shrinker_residual(M.icosphere(1.0, 5)).pointwise
    ok = r5 < 0.03 and abs(r5 / r4 - 0.25) <= 0.05 and np.all(np.abs(unit - 1.5) <= 0.03)
    ac_report("AC5", ok, f"max residual level 5={r5:.2e}, level4->5 ratio={r5 / r4:.3f}, "
                         f"radius-1 residual in [{unit.min():.4f}, {unit.max():.4f}]")
    assert ok


def test_ac6_theorem_spot_check(ac_report):
    suite = [{"name": "sphere", "kind": "sphere", "radius": 1.0},
             {"name": "ellipsoid(2,1,1)", "kind": "ellipsoid", "semi_axes": [2, 1, 1]},
             {"name": "ellipsoid(3,1,1)", "kind": "ellipsoid", "semi_axes": [3, 1, 1]},
             {"name": "torus(2,0.5)", "kind": "torus", "major": 2.0, "minor": 0.5},
             {"name": "smoothed cube", "kind": "smoothed_cube"}]
    rows = entropy_bound_experiment(suite, 2)
    all_pass = all(r["verdict"] == "PASS" for r in rows)
    equality = [r["shape"] for r in rows if r["equality"]]
    ok = all_pass and equality == ["sphere"]
    ac_report("AC6", ok, "; ".join(f"{r['shape']} {r['excess']:+.4f}" for r in rows)
              + f" | equality cases: {equality}")
    assert ok


def test_ac7_avoidance(ac_report):
    g = Grid.centered(2, 3.3, 0.02)
    a = evolve(signed_distance_init(Sphere(1.0, (0.0, 0.0)), g), t_max=0.4)
    b = evolve(signed_distance_init(Sphere(3.0, (0.0, 0.0)), g), t_max=0.4)
    rep = avoidance_check(a, b)
    gap = rep.gaps[-1]
    ok = rep.times[-1] == pytest.approx(0.4) and abs(gap - 2.416) <= 0.05 and rep.passed
    ac_report("AC7", ok, f"gap(0)={rep.gaps[0]:.4f}, gap(0.4)={gap:.4f} (exact {oracles.circle_gap(0.4):.4f}), "
                         f"largest drop={rep.worst_drop:.1e} (tol 2h={rep.tol:g})")
    assert ok


def test_ac8_collapse(ac_report):
    g = Grid((-16.0,) * 3, 0.25, (128,) * 3)
    cases = [("plane", HalfSpace((-1.0, 0.0, 0.0)), "non-collapsed"),
             ("sphere", Sphere(2.0), "collapsed"),
             ("tube", Cylinder(math.sqrt(2)), "collapsed")]
    parts, ok = [], True
    for name, shape, expected in cases:
        f = signed_distance_init(shape, g)
        t0 = time.perf_counter()
        rep = collapsed_test(f, -1.0, 0.0)
        dt = time.perf_counter() - t0
        ok &= rep.verdict == expected and dt < 30
        extra = f" R={rep.witness['R']:.2f}" if rep.witness else ""
        parts.append(f"{name}: {rep.verdict}{extra} ({dt:.1f}s)")
    ac_report("AC8", ok, "; ".join(parts))
    assert ok


def test_ac9_self_similarity(ac_report, sphere_runs):
    tr, _ = sphere_runs[0.05]
    flow = FlowTrace.from_levelset(tr)
    h = tr.grid.spacing
    lag = (4 * h) ** 2 / 4.0
    y, s = tr.extinction_point, tr.extinction_time
    d0 = self_similarity_defect(flow, y, s, min_lag=lag)
    d1 = self_similarity_defect(flow, y + np.array([0.5, 0.0, 0.0]), s, min_lag=lag)
    ok = d0 < 1e-2 * 2.0 and d1 > 0.1
    ac_report("AC9", ok, f"level-set sphere defect about extinction point={d0:.2e} (<2e-2), "
                         f"about 0.5-offset centre={d1:.3f} (>0.1)")
    assert ok


def test_ac10_approximation(ac_report):
    h = 0.02
    vox = voxelize(Sphere(1.0), Grid.centered(3, 1.3, h))
    ladder = [12, 8, 6, 4]
    per = [perimeter(vox, k * h) for k in ladder]
    errs = [abs(p - 4 * math.pi) for p in per]
    rel = errs[-1] / (4 * math.pi)
    monotone = all(b < a for a, b in zip(errs, errs[1:]))
    ok = rel <= 0.03 and monotone
    ac_report("AC10", ok, f"perimeter(eps=4h)={per[-1]:.4f} (rel err {rel:.1e}); "
                          f"ladder {ladder}h errors {[round(e, 4) for e in errs]} monotone={monotone}")
    assert ok


def test_ac11_cross_validation(ac_report, sphere_runs):
    tr, _ = sphere_runs[0.05]
    T0 = tr.extinction_time
    lag = evolve_mesh(M.icosphere(2.0, 5), dt=1e-3, t_max=0.9 * T0, snap_dt=0.05)
    worst = 0.0
    for t, f in zip(tr.times, tr.fields):
        if t > 0.9 * T0:
            break
        r_e = float(np.linalg.norm(extract_interface(f).vertices, axis=1).mean())
        r_l = float(np.linalg.norm(lag.slice(t).vertices, axis=1).mean())
        worst = max(worst, abs(r_e - r_l) / r_l)
    ok = worst <= 0.02 and lag.metadata["halt_reason"] == "t_max"
    ac_report("AC11", ok, f"max relative radius difference over [0, 0.9 T0]={worst:.2e} (tol 2e-2)")
    assert ok
