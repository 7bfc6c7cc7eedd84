"""Command-line runner: ``inls <subcommand> --config <path> [--section.key=value ...]``.

Outputs go to a timestamped directory under $INLS_OUTPUT_ROOT (default
./runs) unless run.output_dir is set.  Exit codes: 0 ok, 1 run failure,
2 configuration error; errors are printed as JSON on stdout.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import platform
import sys
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone

import numpy as np

from . import __version__, kernels
from .config import ConfigError, ExperimentConfig
from .diagnostics import (classify_threshold, coercivity_check, far_translation_experiment,
                          loglog_slope, make_virial_weight, scattering_diagnostic,
                          virial_contradiction_monitor, virial_monitors)
from .evolution import EvolutionConfig, evolve, save_trajectory
from .groundstate import GroundStateError, solve_ground_state
from .params import (ParameterError, build_exponent_family, fmt, theta_window,
                     validate_params)
from .spectral import (BUMP_PROFILE, Grid, SpectralField, make_weight, random_smooth_field,
                       write_profile_csv, write_snapshot)

SUBCOMMANDS = ("certify", "groundstate", "evolve", "classify", "virial", "scatter-test",
               "far-translate", "sweep")
OUTPUT_ENV = "INLS_OUTPUT_ROOT"


class RunError(RuntimeError):
    pass


# ---------------------------------------------------------------- building blocks

def load_params(cfg: ExperimentConfig):
    v = validate_params(cfg.get_int("params", "N"), cfg.get_fraction("params", "b"),
                        cfg.get_fraction("params", "alpha"))
    if not v.ok:
        raise ConfigError(f"invalid parameters: {v.constraint} ({v.regime})")
    return v.params


def load_grid(cfg: ExperimentConfig, params):
    mode = cfg.raw("grid", "mode").strip()
    try:
        return Grid.make(mode, params.N, cfg.get_float("grid", "extent"),
                         cfg.get_int("grid", "points"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def ground_state(cfg, params, grid):
    return solve_ground_state(params, grid, tol=cfg.get_float("groundstate", "tol"),
                              max_iter=cfg.get_int("groundstate", "max_iter"),
                              reg_radius=cfg.optional_float("grid", "reg_radius"))


def initial_data(cfg, grid, gs=None):
    kind = cfg.raw("initial", "kind").strip()
    amp = cfg.get_float("initial", "amplitude")
    if kind == "ground_state":
        if gs is None:
            raise RunError("ground_state initial data needs a ground state")
        return SpectralField(grid, amp * gs.Q.values)
    if kind == "gaussian":
        width = cfg.get_float("initial", "width")
        off = cfg.get_float("initial", "offset")
        if grid.mode == "radial":
            d2 = grid.r ** 2
        else:
            x, y = grid.coords
            d2 = (x - off) ** 2 + y ** 2
        return SpectralField(grid, amp * np.exp(-d2 / width ** 2))
    if kind == "random":
        rng = np.random.default_rng(cfg.seed)
        return SpectralField(grid, amp * random_smooth_field(grid, rng))
    raise ConfigError(f"unknown initial.kind {kind!r}")


def evolution_config(cfg, params, grid):
    weight = make_weight(grid, params.b, cfg.optional_float("grid", "reg_radius"))
    return EvolutionConfig(
        weight, float(params.alpha),
        dt=cfg.get_float("evolution", "dt"),
        t_final=cfg.get_float("evolution", "t_final"),
        snapshot_stride=cfg.get_int("evolution", "snapshot_stride"),
        monitor_stride=cfg.get_int("evolution", "monitor_stride"),
        wraparound_guard=cfg.get_bool("evolution", "guard"),
        guard_tol=cfg.get_float("evolution", "guard_tol"),
        growth_factor=cfg.get_float("evolution", "growth_factor"),
    )


def run_evolution(cfg, params, grid, u0):
    ecfg = evolution_config(cfg, params, grid)
    vw = make_virial_weight(grid, "localized", cfg.get_float("diagnostics", "virial_R"))
    traj = evolve(u0, ecfg, virial_monitors(vw, ecfg.weight, params))
    return traj, ecfg


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    return x


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)


def write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(header)
        for row in rows:
            wr.writerow([repr(v) if isinstance(v, float) else v for v in row])


# ---------------------------------------------------------------- pipelines

def do_certify(cfg, out):
    v = validate_params(cfg.get_int("params", "N"), cfg.get_fraction("params", "b"),
                        cfg.get_fraction("params", "alpha"))
    if not v.ok:
        report = {"valid": False, "constraint": v.constraint, "regime": v.regime,
                  "s_c": None if v.s_c is None else str(v.s_c)}
        write_json(os.path.join(out, "certify.json"), report)
        return report, 1
    theta = cfg.get_fraction("certify", "theta")
    eps = cfg.get_fraction("certify", "epsilon")
    try:
        fam = build_exponent_family(v.params, theta, eps)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    win = theta_window(v.params, eps)
    report = {"valid": True, "family": fam.to_json(),
              "theta_window": {"lower": str(win.lower), "upper": fmt(win.upper),
                               "probes": win.probes, "empty": win.empty}}
    write_json(os.path.join(out, "certify.json"), report)
    return report, 0 if report["family"]["all_pass"] else 1


def do_groundstate(cfg, out):
    params = load_params(cfg)
    grid = load_grid(cfg, params)
    gs = ground_state(cfg, params, grid)
    write_snapshot(os.path.join(out, "Q.bin"), gs.Q, b=float(params.b))
    write_profile_csv(os.path.join(out, "Q.csv"), gs.Q)
    summary = gs.summary()
    write_json(os.path.join(out, "groundstate.json"), summary)
    return summary, 0


def _classify(cfg, params, grid, gs, u0):
    rep = classify_threshold(u0, gs, params, band=cfg.get_float("diagnostics", "threshold_band"))
    co = coercivity_check(u0, gs, params)
    return {"threshold": rep.as_dict(), "coercivity": dict(co.__dict__)}


def do_classify(cfg, out):
    params = load_params(cfg)
    grid = load_grid(cfg, params)
    gs = ground_state(cfg, params, grid)
    res = _classify(cfg, params, grid, gs, initial_data(cfg, grid, gs))
    write_json(os.path.join(out, "classify.json"), res)
    return res, 0


def _needs_gs(cfg):
    return cfg.raw("initial", "kind").strip() == "ground_state"


def do_evolve(cfg, out):
    params = load_params(cfg)
    grid = load_grid(cfg, params)
    gs = ground_state(cfg, params, grid) if _needs_gs(cfg) else None
    traj, ecfg = run_evolution(cfg, params, grid, initial_data(cfg, grid, gs))
    save_trajectory(traj, out, b=float(params.b))
    return traj.summary(), 0


def do_virial(cfg, out):
    params = load_params(cfg)
    grid = load_grid(cfg, params)
    gs = ground_state(cfg, params, grid) if _needs_gs(cfg) else None
    traj, _ = run_evolution(cfg, params, grid, initial_data(cfg, grid, gs))
    save_trajectory(traj, out, b=float(params.b))
    rep = virial_contradiction_monitor(traj, cfg.get_float("diagnostics", "virial_R"),
                                       cfg.get_float("diagnostics", "delta_probe"))
    res = {"trajectory": traj.summary(), "virial": dict(rep.__dict__)}
    write_json(os.path.join(out, "virial.json"), res)
    return res, 0


def _scatter(cfg, params, grid, out=None):
    gs = ground_state(cfg, params, grid) if _needs_gs(cfg) else None
    u0 = initial_data(cfg, grid, gs)
    cls = _classify(cfg, params, grid, gs, u0) if gs is not None else None
    traj, _ = run_evolution(cfg, params, grid, u0)
    rep = scattering_diagnostic(traj, settle_tol=cfg.get_float("diagnostics", "settle_tol"),
                                decay_factor=cfg.get_float("diagnostics", "decay_factor"))
    res = {"trajectory": traj.summary(), "verdict": rep.verdict, "reason": rep.reason,
           "potential_decay": rep.decay, "settle": rep.settle, "classification": cls}
    if out is not None:
        save_trajectory(traj, out, b=float(params.b))
        write_rows(os.path.join(out, "scattering.csv"), ["t", "h1_distance"], rep.rows())
        write_json(os.path.join(out, "scatter.json"), res)
    return res


def do_scatter(cfg, out):
    params = load_params(cfg)
    grid = load_grid(cfg, params)
    res = _scatter(cfg, params, grid, out)
    return res, 0


def _far(cfg, params, offsets):
    grid = load_grid(cfg, params)
    if grid.mode != "cartesian2d":
        raise ConfigError("far-translate needs grid.mode = cartesian2d")
    gs = ground_state(cfg, params, grid) if _needs_gs(cfg) else None
    psi = initial_data(cfg, grid, gs)
    weight = make_weight(grid, params.b, cfg.optional_float("grid", "reg_radius"))
    return far_translation_experiment(
        psi, offsets, cfg.get_float("far_translation", "theta"),
        cfg.get_float("far_translation", "t_final"), weight, float(params.alpha),
        dt=cfg.get_float("evolution", "dt"), samples=cfg.get_int("far_translation", "samples"))


FAR_HEADER = ["offset", "status", "deviation", "relative", "chi_grad_sup", "chi_grad_constant"]


def _far_row(r):
    return [r.offset, r.status, r.deviation, r.relative, r.chi_grad_sup, r.chi_grad_constant]


def do_far(cfg, out):
    params = load_params(cfg)
    rows = _far(cfg, params, cfg.get_list("far_translation", "offsets"))
    write_rows(os.path.join(out, "far_translation.csv"), FAR_HEADER, [_far_row(r) for r in rows])
    res = {"rows": [dict(zip(FAR_HEADER, _far_row(r))) for r in rows],
           "loglog_slope": loglog_slope(rows)}
    write_json(os.path.join(out, "far_translation.json"), res)
    return res, 0


SWEEP_HEADER = ["axis", "value", "status", "classification", "grad_ratio", "ME_ratio",
                "verdict", "potential_decay", "deviation", "error"]


def _sweep_row(text, axis, value):
    """One sweep point; never raises (failures become an error column)."""
    cfg = ExperimentConfig.from_text(text)
    row = dict.fromkeys(SWEEP_HEADER, "")
    row.update(axis=axis, value=value)
    try:
        if axis == "offset":
            params = load_params(cfg)
            (r,) = _far(cfg, params, [value])
            row.update(status=r.status, deviation=r.deviation)
            return row
        key = {"amplitude": "initial.amplitude", "b": "params.b", "alpha": "params.alpha"}[axis]
        cfg.set(key, value)
        params = load_params(cfg)
        grid = load_grid(cfg, params)
        if cfg.get_bool("sweep", "evolve"):
            res = _scatter(cfg, params, grid)
            cls = res["classification"] or {}
            row.update(status=res["trajectory"]["status"], verdict=res["verdict"],
                       potential_decay=res["potential_decay"])
        else:
            gs = ground_state(cfg, params, grid) if _needs_gs(cfg) else None
            cls = _classify(cfg, params, grid, gs, initial_data(cfg, grid, gs)) if gs else {}
            row.update(status="classified")
        th = cls.get("threshold", {})
        row.update(classification=th.get("classification", ""),
                   grad_ratio=th.get("grad_ratio", ""), ME_ratio=th.get("ME_ratio", ""))
    except Exception as exc:  # noqa: BLE001 - isolation is the point
        row.update(status="failed", error=f"{type(exc).__name__}: {exc}")
    return row


def do_sweep(cfg, out):
    axis = cfg.raw("sweep", "axis").strip()
    if axis not in ("amplitude", "b", "alpha", "offset"):
        raise ConfigError(f"sweep.axis must be amplitude, b, alpha or offset; got {axis!r}")
    conv = float if axis in ("amplitude", "offset") else (lambda f: f)
    raw = [v.strip() for v in cfg.raw("sweep", "values").split(",") if v.strip()]
    try:
        values = [str(v) if axis in ("b", "alpha") else conv(float(__import__("fractions").Fraction(v)))
                  for v in raw]
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"sweep.values: {exc}") from exc
    workers = cfg.get_int("sweep", "workers") or (os.cpu_count() or 1)
    text = cfg.to_text()
    if workers > 1 and len(values) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(values))) as ex:
            rows = list(ex.map(_sweep_row, [text] * len(values), [axis] * len(values), values))
    else:
        rows = [_sweep_row(text, axis, v) for v in values]
    write_rows(os.path.join(out, "sweep.csv"), SWEEP_HEADER,
               [[r[k] for k in SWEEP_HEADER] for r in rows])
    failed = sum(r["status"] == "failed" for r in rows)
    return {"rows": len(rows), "failed": failed}, 0


PIPELINES = {
    "certify": do_certify, "groundstate": do_groundstate, "evolve": do_evolve,
    "classify": do_classify, "virial": do_virial, "scatter-test": do_scatter,
    "far-translate": do_far, "sweep": do_sweep,
}


# ---------------------------------------------------------------- driver

def run_directory(cfg: ExperimentConfig, sub: str) -> str:
    base = cfg.raw("run", "output_dir").strip()
    if base:
        os.makedirs(base, exist_ok=True)
        return base
    root = os.environ.get(OUTPUT_ENV, "runs")
    stamp = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%S%fZ")
    path = os.path.join(root, f"{sub}-{stamp}")
    os.makedirs(path, exist_ok=True)
    return path


def run(cfg: ExperimentConfig, sub: str) -> int:
    """Execute one pipeline and write its manifest; returns the exit status."""
    if sub not in PIPELINES:
        raise ConfigError(f"unknown subcommand {sub!r}")
    out = run_directory(cfg, sub)
    with open(os.path.join(out, "config.ini"), "w") as fh:
        fh.write(cfg.to_text())
    t0 = time.time()
    status, result, error = 0, None, None
    try:
        result, status = PIPELINES[sub](cfg, out)
    except ConfigError:
        raise
    except (GroundStateError, RunError, RuntimeError, ValueError, FloatingPointError) as exc:
        status, error = 1, {"type": type(exc).__name__, "message": str(exc),
                            "traceback": traceback.format_exc()}
    manifest = {
        "subcommand": sub, "status": status, "elapsed_s": time.time() - t0,
        "version": __version__, "python": platform.python_version(),
        "numpy": np.__version__, "kernel_backend": kernels.BACKEND,
        "bump_profile": BUMP_PROFILE, "seed": cfg.seed,
        "artifacts": sorted(os.listdir(out)), "result": result, "error": error,
    }
    write_json(os.path.join(out, "manifest.json"), manifest)
    print(json.dumps(_jsonable({"status": status, "output": out,
                                "error": error and error["message"]})))
    return status


def build_parser():
    ap = argparse.ArgumentParser(prog="inls", description=__doc__.splitlines()[0])
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--config", help="INI file; defaults apply when omitted")
    for name in ("N", "b", "alpha", "theta", "epsilon", "grid-points", "extent", "tol"):
        ap.add_argument(f"--{name}")
    return ap


SHORTCUTS = {"N": "params.N", "b": "params.b", "alpha": "params.alpha",
             "theta": "certify.theta", "epsilon": "certify.epsilon",
             "grid_points": "grid.points", "extent": "grid.extent", "tol": "groundstate.tol"}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args, extra = build_parser().parse_known_args(argv)
        cfg = ExperimentConfig.from_file(args.config) if args.config else ExperimentConfig.default()
        for attr, key in SHORTCUTS.items():
            val = getattr(args, attr)
            if val is not None:
                cfg.set(key, val)
        for item in extra:
            if not item.startswith("--") or "=" not in item:
                raise ConfigError(f"override must look like --section.key=value: {item!r}")
            k, v = item[2:].split("=", 1)
            cfg.set(k, v)
        for section, key in (("params", "b"), ("params", "alpha"), ("certify", "theta"),
                             ("certify", "epsilon")):
            cfg.get_fraction(section, key)
        return run(cfg, args.subcommand)
    except (ConfigError, ParameterError) as exc:
        print(json.dumps({"status": 2, "error": "config", "message": str(exc)}))
        return 2
    except SystemExit as exc:  # argparse
        return 2 if exc.code else 0


if __name__ == "__main__":
    sys.exit(main())
