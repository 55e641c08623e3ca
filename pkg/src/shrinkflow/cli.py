"""Command-line entry point: ``shrinkflow <command> [--config cfg.json] [--out dir]``.

Every command validates its JSON configuration first (exit 2 with the
offending field path), runs, and writes a deterministic ``report.json``
(which embeds the config hash) plus ``manifest.json`` (inputs, versions,
wall time).  Runtime failures exit 1 with the module's message verbatim.
``SHRINKFLOW_THREADS`` caps the worker threads of numba / BLAS.
"""

from __future__ import annotations

import argparse
import copy
import hashlib
import json
import math
import os
import platform
import sys
import time
from pathlib import Path

import jsonschema

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2

DATA_DIR = Path(__file__).resolve().parent / "data"


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


# ---------------------------------------------------------------------------
# schemas

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_point = {"type": "array", "items": _num, "minItems": 2, "maxItems": 3}

_GRID = {
    "type": "object",
    "required": ["spacing"],
    "properties": {
        "spacing": _pos,
        "extents": {"type": "array", "items": {"type": "integer", "minimum": 4}, "minItems": 2, "maxItems": 3},
        "origin": _point,
        "half_width": _pos,
        "dim": {"enum": [2, 3]},
    },
    "additionalProperties": False,
}
_SHAPE = {"type": "object", "required": ["kind"], "properties": {"kind": {"type": "string"}}}
_MESH = {
    "oneOf": [
        {"type": "string"},
        {"type": "object", "required": ["kind"], "properties": {"kind": {"type": "string"}}},
    ]
}
_ENTROPY_OPTS = {
    "type": "object",
    "properties": {
        "max_iters": {"type": "integer", "minimum": 1},
        "refine_top": {"type": "integer", "minimum": 1},
        "sweeps": {"type": "integer", "minimum": 0},
        "xtol": _pos,
        "allow_open": {"type": "boolean"},
        "log_rho_offsets": {"type": "array", "items": _num, "minItems": 1},
    },
    "additionalProperties": False,
}
_LS_PARAMS = {
    "type": "object",
    "properties": {
        "t_max": _pos, "dt": _pos, "reinit_every": {"type": "integer", "minimum": 1},
        "reinit_iters": {"type": "integer", "minimum": 1}, "snap_every": {"type": "integer", "minimum": 1},
        "delta_reg": {"type": "number", "minimum": 0}, "band": {"type": "number", "minimum": 3},
    },
    "additionalProperties": False,
}
_MF_PARAMS = {
    "type": "object",
    "properties": {
        "dt": _pos, "t_max": _pos, "snap_dt": _pos, "cfl": {"type": "number", "exclusiveMinimum": 0, "maximum": 0.5},
        "min_size_ratio": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "max_aspect": {"type": "number", "exclusiveMinimum": 1},
    },
    "additionalProperties": False,
}
_SEED = {"type": "integer", "minimum": 0}
_WHEN = {"oneOf": [_num, {"const": "extinction"}]}
_CENTER = {"oneOf": [_point, {"const": "extinction"}]}

SCHEMAS = {
    "stone": {"type": "object", "properties": {"max_n": {"type": "integer", "minimum": 1, "maximum": 50},
                                               "seed": _SEED}},
    "entropy": {"type": "object", "required": ["mesh"],
                "properties": {"mesh": _MESH, "options": _ENTROPY_OPTS, "seed": _SEED}},
    "evolve": {"type": "object", "required": ["shape", "grid"],
               "properties": {"shape": _SHAPE, "grid": _GRID, "params": _LS_PARAMS, "seed": _SEED}},
    "evolve-mesh": {"type": "object", "required": ["mesh"],
                    "properties": {"mesh": _MESH, "params": _MF_PARAMS, "seed": _SEED}},
    "density": {"type": "object", "required": ["trace"],
                "properties": {"trace": {"type": "string"}, "y": _CENTER, "s": _WHEN,
                               "m": {"type": "integer", "minimum": 4}, "min_lag": {"type": "number", "minimum": 0},
                               "seed": _SEED}},
    "monotonicity": {"type": "object", "required": ["trace"],
                     "properties": {"trace": {"type": "string"}, "y": _CENTER, "s": _WHEN, "tol": _pos,
                                    "min_lag": {"type": "number", "minimum": 0}, "seed": _SEED}},
    "shrinker-check": {"type": "object", "required": ["mesh"],
                       "properties": {"mesh": _MESH, "allow_open": {"type": "boolean"}, "seed": _SEED}},
    "collapse": {"type": "object", "required": ["field", "s", "tau"],
                 "properties": {"field": {"type": "string"}, "s": _num, "tau": _num,
                                "search": {"type": "object", "properties": {
                                    "stride": {"type": "integer", "minimum": 1},
                                    "ladder": {"type": "number", "exclusiveMinimum": 1},
                                    "refine": {"type": "integer", "minimum": 0},
                                    "max_candidates": {"type": "integer", "minimum": 1}},
                                    "additionalProperties": False},
                                "seed": _SEED}},
    "approx": {"type": "object", "required": ["shape", "grid"],
               "properties": {"shape": _SHAPE, "grid": _GRID,
                              "eps_cells": {"type": "array", "items": {"type": "number", "minimum": 2}, "minItems": 1},
                              "analytic_area": _pos, "seed": _SEED}},
    "thm1": {"type": "object", "required": ["suite"],
             "properties": {"suite": {"oneOf": [{"type": "string"},
                                                {"type": "array", "items": _MESH, "minItems": 1}]},
                            "n": {"enum": [1, 2]}, "tol": _pos, "options": _ENTROPY_OPTS, "seed": _SEED}},
}
ARTIFACT_COMMANDS = set(SCHEMAS) - {"stone"}


def _path_of(err: jsonschema.ValidationError) -> str:
    parts = [str(p) for p in err.absolute_path]
    if err.validator == "required":
        missing = err.message.split("'")[1]
        parts.append(missing)
    elif err.validator == "additionalProperties":
        extra = err.message.split("'")[1] if "'" in err.message else "?"
        parts.append(extra)
    return ".".join(parts) or "<root>"


def validate(command: str, cfg: dict) -> dict:
    """Check ``cfg`` against the command's schema and semantic ranges."""
    if command not in SCHEMAS:
        raise ConfigError(f"command: unknown command {command!r}")
    validator = jsonschema.Draft202012Validator(SCHEMAS[command])
    errors = sorted(validator.iter_errors(cfg), key=lambda e: (len(list(e.absolute_path)), e.message))
    if errors:
        e = errors[0]
        raise ConfigError(f"{_path_of(e)}: {e.message}")
    for key in ("mesh", "trace", "field"):
        ref = cfg.get(key)
        if isinstance(ref, str) and not _resolve_path(ref).exists():
            raise ConfigError(f"{key}: file not found: {ref}")
    if command == "thm1" and isinstance(cfg["suite"], str) and not Path(cfg["suite"]).exists():
        raise ConfigError(f"suite: file not found: {cfg['suite']}")
    grid = cfg.get("grid")
    if grid is not None and "extents" not in grid and "half_width" not in grid:
        raise ConfigError("grid.extents: either extents or half_width is required")
    if grid is not None and "half_width" in grid and "extents" not in grid and "dim" not in grid:
        raise ConfigError("grid.dim: required together with half_width")
    if command == "collapse" and not cfg["tau"] > cfg["s"]:
        raise ConfigError("tau: must exceed s")
    return cfg


def _resolve_path(ref: str) -> Path:
    if ref.startswith("bundled:"):
        return DATA_DIR / ref.split(":", 1)[1]
    return Path(ref)


def config_hash(command: str, cfg: dict) -> str:
    blob = json.dumps({"command": command, "config": cfg}, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


# ---------------------------------------------------------------------------
# helpers


def _grid(spec: dict):
    from .fields import Grid
    h = float(spec["spacing"])
    if "extents" in spec:
        ext = spec["extents"]
        origin = spec.get("origin", [-0.5 * h * e for e in ext])
        if len(origin) != len(ext):
            raise ConfigError("grid.origin: length must match grid.extents")
        return Grid(tuple(origin), h, tuple(ext))
    return Grid.centered(spec["dim"], spec["half_width"], h)


def _mesh(ref):
    from .mesh import load_mesh
    from .shrinker import build_mesh
    if isinstance(ref, str):
        return load_mesh(_resolve_path(ref))
    return build_mesh(ref)


def _jsonable(obj):
    import numpy as np
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return _jsonable(obj.item())
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def _versions() -> dict:
    import numba
    import numpy
    import scipy
    import skimage
    from . import __version__
    return {"shrinkflow": __version__, "python": platform.python_version(), "numpy": numpy.__version__,
            "scipy": scipy.__version__, "scikit-image": skimage.__version__, "numba": numba.__version__}


def _load_trace(path: str):
    from .meshflow import load_trace
    return load_trace(_resolve_path(path))


def _spacetime_point(cfg: dict, trace):
    y, s = cfg.get("y", "extinction"), cfg.get("s", "extinction")
    meta = trace.metadata
    if y == "extinction":
        if meta.get("extinction_point") is None:
            raise ValueError("y='extinction' but the trace records no extinction point")
        y = meta["extinction_point"]
    if s == "extinction":
        if meta.get("extinction_time") is None:
            raise ValueError("s='extinction' but the trace records no extinction time")
        s = meta["extinction_time"]
    return y, float(s)


# ---------------------------------------------------------------------------
# commands; each returns (result dict, {artifact name: writer(path)})


def cmd_stone(cfg, out):
    from .entropy import f_functional, lambda_round
    from .mesh import circle, icosphere
    max_n = cfg.get("max_n", 7)
    lam = [2.0] + [lambda_round(n) for n in range(1, max_n + 1)]
    chain = all(a > b for a, b in zip(lam, lam[1:])) and lam[-1] > 1.0 and lam[1] > 1.5 > lam[2]
    quad = {"S1": f_functional(circle(math.sqrt(2.0), 2048)), "S2": f_functional(icosphere(2.0, 5))}
    lines = ["n   lambda_n", "0   2 (two points)"] + [f"{n:<3d} {lam[n]:.7f}" for n in range(1, max_n + 1)]
    lines.append("chain: 2 > lambda_1 > 3/2 > lambda_2 > ... > lambda_%d > 1 : %s" % (max_n, "holds" if chain else "BROKEN"))
    lines.append(f"quadrature: F[S^1] = {quad['S1']:.7f}, F[S^2] = {quad['S2']:.7f}")
    print("\n".join(lines))
    result = {"lambda": {str(n): lam[n] for n in range(0, max_n + 1)}, "chain_holds": chain,
              "quadrature_F": quad}
    return result, {}


def cmd_entropy(cfg, out):
    from .entropy import EntropyOptions, entropy
    opts = cfg.get("options", {})
    if "log_rho_offsets" in opts:
        opts = dict(opts, log_rho_offsets=tuple(opts["log_rho_offsets"]))
    rep = entropy(_mesh(cfg["mesh"]), EntropyOptions(**opts))
    print(f"lambda = {rep.lam:.7f}")
    hist = rep.history
    return rep.to_dict(), {"history.csv": lambda p: p.write_text(
        "evaluation,value\n" + "".join(f"{i},{v!r}\n" for i, v in enumerate(hist)))}


def cmd_evolve(cfg, out):
    from .fields import signed_distance_init, write_grid
    from .levelset import LevelSetParams, evolve
    from .meshflow import FlowTrace, save_trace
    from .shapes import shape_from_dict
    g = _grid(cfg["grid"])
    field0 = signed_distance_init(shape_from_dict(cfg["shape"]), g)
    trace = evolve(field0, LevelSetParams(**cfg.get("params", {})))
    files = [f"snapshots/snap_{i:04d}.bin" for i in range(len(trace.times))]
    result = {"times": trace.times, "extinct": trace.extinct, "extinction_time": trace.extinction_time,
              "extinction_point": trace.extinction_point, "steps": trace.steps, "dt": trace.dt,
              "grid": g.to_dict(), "snapshots": files}
    print(f"steps = {trace.steps}, extinction_time = {trace.extinction_time}")

    def snaps(p):
        p.mkdir(exist_ok=True)
        for name, f in zip(files, trace.fields):
            write_grid(f, out / name)

    return result, {"snapshots": snaps,
                    "interfaces": lambda p: save_trace(FlowTrace.from_levelset(trace), p)}


def cmd_evolve_mesh(cfg, out):
    from .meshflow import MeshFlowParams, evolve_mesh, save_trace
    trace = evolve_mesh(_mesh(cfg["mesh"]), MeshFlowParams(**cfg.get("params", {})))
    print(f"halted: {trace.metadata['halt_reason']} at t = {trace.metadata['t_end']:.6g}")
    return {"times": trace.times, "metadata": trace.metadata}, {"trace": lambda p: save_trace(trace, p)}


def _min_lag(cfg, trace, n):
    """Explicit ``min_lag``, else (for grid-extracted traces) the time the
    limiting sphere needs to shrink from radius 4h to a point."""
    if "min_lag" in cfg:
        return cfg["min_lag"]
    h = trace.metadata.get("h")
    return 0.0 if h is None else (4.0 * h) ** 2 / (2.0 * n)


def cmd_density(cfg, out):
    from .entropy import gaussian_density
    trace = _load_trace(cfg["trace"])
    y, s = _spacetime_point(cfg, trace)
    rep = gaussian_density(trace, y, s, m=cfg.get("m", 6), min_lag=_min_lag(cfg, trace, trace.dim - 1))
    print(f"Theta = {rep.theta:.7f}")
    return rep.to_dict(), {"samples.csv": lambda p: p.write_text(rep.to_csv())}


def cmd_monotonicity(cfg, out):
    from .entropy import monotonicity_check
    trace = _load_trace(cfg["trace"])
    y, s = _spacetime_point(cfg, trace)
    rep = monotonicity_check(trace, y, s, tol=cfg.get("tol", 1e-3), min_lag=_min_lag(cfg, trace, trace.dim - 1))
    print(f"max increase = {rep.max_violation:.3e} (tol {rep.tol:g}): {'PASS' if rep.passed else 'FAIL'}")
    return rep.to_dict(), {"samples.csv": lambda p: p.write_text(rep.to_csv())}


def cmd_shrinker_check(cfg, out):
    from .shrinker import shrinker_residual
    res = shrinker_residual(_mesh(cfg["mesh"]), allow_open=cfg.get("allow_open", False))
    print(f"residual max = {res.max_norm:.4e}, l2 = {res.l2_norm:.4e}")
    pw = res.pointwise
    return res.to_dict(), {"residual.csv": lambda p: p.write_text(
        "vertex,residual\n" + "".join(f"{i},{v!r}\n" for i, v in enumerate(pw.tolist())))}


def cmd_collapse(cfg, out):
    from .fields import GridField, read_grid
    from .shrinker import CollapseSearch, collapsed_test
    field = read_grid(_resolve_path(cfg["field"]))
    if not isinstance(field, GridField):
        raise ValueError("collapse needs a float64 level-set field, not a voxel set")
    rep = collapsed_test(field, cfg["s"], cfg["tau"], CollapseSearch(**cfg.get("search", {})))
    print(rep.verdict)
    return rep.to_dict(), {}


def cmd_approx(cfg, out):
    from .fields import perimeter, voxelize
    from .shapes import shape_from_dict
    g = _grid(cfg["grid"])
    vox = voxelize(shape_from_dict(cfg["shape"]), g)
    ladder = sorted(cfg.get("eps_cells", [12, 8, 6, 4]), reverse=True)
    rows = [{"eps": k * g.spacing, "eps_cells": k, "perimeter": perimeter(vox, k * g.spacing)} for k in ladder]
    result = {"rows": rows}
    area = cfg.get("analytic_area")
    if area is not None:
        errs = [abs(r["perimeter"] - area) for r in rows]
        for r, e in zip(rows, errs):
            r["relative_error"] = e / area
        result["monotone_converging"] = all(b <= a for a, b in zip(errs, errs[1:]))
    for r in rows:
        print(f"eps = {r['eps_cells']:g}h  perimeter = {r['perimeter']:.6f}")
    keys = list(rows[0])
    return result, {"ladder.csv": lambda p: p.write_text(
        ",".join(keys) + "\n" + "".join(",".join(repr(r[k]) for k in keys) + "\n" for r in rows))}


def cmd_thm1(cfg, out):
    from .entropy import EntropyOptions
    from .shrinker import entropy_bound_experiment, rows_to_csv
    suite = cfg["suite"]
    if isinstance(suite, str):
        suite = json.loads(Path(suite).read_text())
        if isinstance(suite, dict):
            suite = suite.get("shapes", [])
    shapes = []
    for i, item in enumerate(suite):
        name = item if isinstance(item, str) else item.get("name", item.get("kind"))
        shapes.append((name, _mesh(item)))
    opts = cfg.get("options", {})
    if "log_rho_offsets" in opts:
        opts = dict(opts, log_rho_offsets=tuple(opts["log_rho_offsets"]))
    rows = entropy_bound_experiment(shapes, cfg.get("n", 2), tol=cfg.get("tol", 3e-3),
                                    opts=EntropyOptions(**opts))
    table = rows_to_csv(rows)
    print(table, end="")
    return {"rows": rows}, {"table.csv": lambda p: p.write_text(table)}


COMMANDS = {
    "stone": cmd_stone, "entropy": cmd_entropy, "evolve": cmd_evolve, "evolve-mesh": cmd_evolve_mesh,
    "density": cmd_density, "monotonicity": cmd_monotonicity, "shrinker-check": cmd_shrinker_check,
    "collapse": cmd_collapse, "approx": cmd_approx, "thm1": cmd_thm1,
}


# ---------------------------------------------------------------------------
# driver


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="shrinkflow", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="JSON config (or a manifest.json from an earlier run)")
    p.add_argument("--out", help="output directory (required for artifact-producing commands)")
    p.add_argument("--seed", type=int, help="recorded in the report; no command draws random numbers")
    p.add_argument("--mesh", help="mesh file (.obj / .csv); 'bundled:sphere.obj' for the shipped sphere")
    p.add_argument("--field", help="grid field dump (.bin with .json sidecar)")
    p.add_argument("--trace", help="trace directory with manifest.json")
    p.add_argument("--suite", help="JSON list of mesh descriptions")
    p.add_argument("--s", type=float, dest="s")
    p.add_argument("--tau", type=float)
    p.add_argument("--allow-open", action="store_true", default=None)
    return p


def _limit_threads():
    raw = os.environ.get("SHRINKFLOW_THREADS")
    if raw is None:
        return
    try:
        n = int(raw)
        if n < 1:
            raise ValueError
    except ValueError:
        raise ConfigError(f"SHRINKFLOW_THREADS: expected a positive integer, got {raw!r}") from None
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[var] = str(n)
    import numba
    numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))


def build_config(args) -> dict:
    cfg = {}
    if args.config:
        try:
            cfg = json.loads(Path(args.config).read_text())
        except FileNotFoundError:
            raise ConfigError(f"config: file not found: {args.config}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config: not valid JSON ({exc})") from None
        if not isinstance(cfg, dict):
            raise ConfigError("config: top level must be an object")
        if "config" in cfg and "command" in cfg:  # re-run from a manifest
            if cfg["command"] != args.command:
                raise ConfigError(f"command: manifest is for {cfg['command']!r}, not {args.command!r}")
            cfg = cfg["config"]
    cfg = copy.deepcopy(cfg)
    for key in ("mesh", "field", "trace", "suite", "s", "tau", "seed", "allow_open"):
        val = getattr(args, key)
        if val is not None:
            cfg[key] = val
    return cfg


def run(command: str, cfg: dict, out: str | None) -> int:
    """Validate, execute and write artifacts; returns the exit status."""
    try:
        validate(command, cfg)
        if command in ARTIFACT_COMMANDS and not out:
            raise ConfigError("out: --out directory is required for this command")
        _limit_threads()
    except ConfigError as exc:
        print(f"config invalid: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    chash = config_hash(command, cfg)
    outdir = Path(out) if out else None
    t0 = time.perf_counter()
    started = time.strftime("%Y-%m-%dT%H:%M:%S%z")
    try:
        if outdir is not None:
            outdir.mkdir(parents=True, exist_ok=True)
        result, artifacts = COMMANDS[command](cfg, outdir)
        report = {"command": command, "config_hash": chash, "config": cfg, "result": _jsonable(result)}
        written = []
        if outdir is not None:
            (outdir / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
            written.append("report.json")
            for name, writer in artifacts.items():
                writer(outdir / name)
                written.append(name)
            manifest = {"command": command, "config": cfg, "config_hash": chash, "versions": _versions(),
                        "started": started, "wall_time_s": time.perf_counter() - t0, "artifacts": written}
            (outdir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    except ConfigError as exc:
        print(f"config invalid: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # module errors are reported verbatim
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = build_config(args)
    except ConfigError as exc:
        print(f"config invalid: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run(args.command, cfg, args.out)


if __name__ == "__main__":
    sys.exit(main())
