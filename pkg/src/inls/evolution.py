"""Strang split-step integration of i u_t + Lap u + w |u|^alpha u = 0."""
from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import kernels
from .spectral import Grid, SingularWeight, SpectralField, write_snapshot

DEFAULT_DT = 1e-3
DEFAULT_SNAPSHOT_STRIDE = 100
GUARD_TOL = 1e-6
GROWTH_FACTOR = 100.0


class EvolutionError(RuntimeError):
    def __init__(self, message, time):
        super().__init__(f"{message} at t={time:.6g}")
        self.time = time


@dataclass
class EvolutionConfig:
    weight: SingularWeight
    alpha: float
    dt: float = DEFAULT_DT
    t_final: float = 1.0
    snapshot_stride: int = DEFAULT_SNAPSHOT_STRIDE
    monitor_stride: int = 10
    wraparound_guard: bool = True
    guard_tol: float = GUARD_TOL
    growth_factor: float = GROWTH_FACTOR

    def __post_init__(self):
        if self.dt == 0:
            raise ValueError("dt must be nonzero")
        if self.snapshot_stride < 1 or self.monitor_stride < 1:
            raise ValueError("strides must be >= 1")
        self.alpha = float(self.alpha)

    @property
    def steps(self) -> int:
        return int(round(abs(self.t_final / self.dt)))

    def describe(self):
        return {"dt": self.dt, "t_final": self.t_final, "snapshot_stride": self.snapshot_stride,
                "monitor_stride": self.monitor_stride, "wraparound_guard": self.wraparound_guard,
                "guard_tol": self.guard_tol, "growth_factor": self.growth_factor,
                "alpha": self.alpha, "b": self.weight.b, "reg_radius": self.weight.reg_radius}


@dataclass
class Trajectory:
    grid: Grid
    config: EvolutionConfig
    times: list = field(default_factory=list)
    monitors: dict = field(default_factory=dict)
    snapshot_times: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    status: str = "running"
    guard_violated: bool = False
    guard_time: float | None = None
    final: SpectralField | None = None

    def channel(self, name):
        return np.asarray(self.monitors[name])

    def summary(self):
        return {"status": self.status, "guard_violated": self.guard_violated,
                "guard_time": self.guard_time, "samples": len(self.times),
                "snapshots": len(self.snapshots),
                "t_end": self.times[-1] if self.times else None}


# ---------------------------------------------------------------- functionals

def mass(f: SpectralField) -> float:
    return f.mass()


def energy(f: SpectralField, weight: SingularWeight, alpha) -> float:
    alpha = float(alpha)
    return 0.5 * f.kinetic() - weight.potential(f.values, alpha) / (alpha + 2)


def shell_fraction(grid: Grid, u) -> float:
    """||u||_{L2(outer shell)} / ||u||_{L2}."""
    mask = grid.shell_mask()
    tot = grid.norm2(u)
    if tot == 0:
        return 0.0
    return math.sqrt(float(np.sum((grid.weights * (u.real ** 2 + u.imag ** 2))[mask])) / tot)


def default_monitors(grid: Grid, weight: SingularWeight, alpha) -> dict:
    alpha = float(alpha)

    def _mass(u):
        return grid.norm2(u)

    def _potential(u):
        return weight.potential(u, alpha)

    def _kinetic(u):
        return grid.kinetic(u)

    return {
        "mass": _mass,
        "kinetic": _kinetic,
        "potential": _potential,
        "shell_mass": lambda u: shell_fraction(grid, u),
    }


# ---------------------------------------------------------------- stepping

class _Propagator:
    def __init__(self, grid: Grid, dt: float):
        self.grid = grid
        xi2 = grid.xi2
        self.half = np.exp(-0.5j * dt * xi2)
        self.full = self.half * self.half

    def __call__(self, u, phase):
        return self.grid.propagate(u, phase)


def step(u: SpectralField, dt, cfg: EvolutionConfig) -> SpectralField:
    """One Strang step: half linear, exact nonlinear phase, half linear."""
    prop = _Propagator(u.grid, dt)
    v = prop(u.values, prop.half)
    v = np.ascontiguousarray(v, dtype=complex)
    kernels.nonlinear_phase(v, cfg.weight.density, cfg.alpha, dt)
    return u.with_values(prop(v, prop.half))


def evolve(u0: SpectralField, cfg: EvolutionConfig,
           monitors: dict[str, Callable] | None = None, keep_snapshots=True) -> Trajectory:
    """Repeated Strang steps with monitor sampling every `monitor_stride` steps.

    Consecutive linear half steps are fused.  The run stops early with status
    'gradient-growth' once ||grad u|| exceeds `growth_factor` times its initial
    value; a guard violation is recorded but does not stop the run.
    """
    grid = u0.grid
    mons = default_monitors(grid, cfg.weight, cfg.alpha)
    if monitors:
        mons.update(monitors)
    traj = Trajectory(grid, cfg, monitors={name: [] for name in list(mons) + ["energy", "grad_norm"]})
    dt, n = cfg.dt, cfg.steps
    w, al = cfg.weight.density, cfg.alpha
    prop = _Propagator(grid, dt)

    def sample(k, u):
        t = k * dt
        vals = {name: float(fn(u)) for name, fn in mons.items()}
        vals["energy"] = 0.5 * vals["kinetic"] - vals["potential"] / (al + 2)
        vals["grad_norm"] = math.sqrt(max(vals["kinetic"], 0.0))
        if not all(math.isfinite(v) for v in vals.values()):
            raise EvolutionError("non-finite monitor value", t)
        traj.times.append(t)
        for name, v in vals.items():
            traj.monitors[name].append(v)
        if k % cfg.snapshot_stride == 0 and keep_snapshots:
            traj.snapshot_times.append(t)
            traj.snapshots.append(SpectralField(grid, u))
        if cfg.wraparound_guard and not traj.guard_violated and vals["shell_mass"] > cfg.guard_tol:
            traj.guard_violated = True
            traj.guard_time = t
        return vals

    u = np.array(u0.values, dtype=complex)
    g0 = sample(0, u)["grad_norm"]
    if n == 0:
        traj.status = "completed"
        traj.final = SpectralField(grid, u)
        return traj

    boundary = math.gcd(cfg.monitor_stride, cfg.snapshot_stride) if keep_snapshots else cfg.monitor_stride
    u = prop(u, prop.half)
    for k in range(1, n + 1):
        kernels.nonlinear_phase(u, w, al, dt)
        if k == n or k % boundary == 0:
            u = prop(u, prop.half)
            if k == n or k % cfg.monitor_stride == 0 or (keep_snapshots and k % cfg.snapshot_stride == 0):
                vals = sample(k, u)
                if g0 > 0 and vals["grad_norm"] > cfg.growth_factor * g0:
                    traj.status = "gradient-growth"
                    traj.final = SpectralField(grid, u)
                    return traj
            if k < n:
                u = prop(u, prop.half)
        else:
            u = prop(u, prop.full)
    if not np.all(np.isfinite(u)):
        raise EvolutionError("non-finite field", n * dt)
    traj.status = "completed"
    traj.final = SpectralField(grid, u)
    return traj


# ---------------------------------------------------------------- persistence

def save_trajectory(traj: Trajectory, directory, b=0.0, extra=None):
    """Manifest JSON, monitor CSV and strided binary snapshots."""
    os.makedirs(directory, exist_ok=True)
    names = list(traj.monitors)
    with open(os.path.join(directory, "monitors.csv"), "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["t"] + names)
        for i, t in enumerate(traj.times):
            wr.writerow([repr(float(t))] + [repr(traj.monitors[k][i]) for k in names])
    snapdir = os.path.join(directory, "snapshots")
    os.makedirs(snapdir, exist_ok=True)
    files = []
    for i, (t, f) in enumerate(zip(traj.snapshot_times, traj.snapshots)):
        name = f"snap_{i:05d}.bin"
        write_snapshot(os.path.join(snapdir, name), f, b=b, timestamp=t)
        files.append(name)
    manifest = {"grid": traj.grid.describe(), "evolution": traj.config.describe(),
                "summary": traj.summary(), "snapshots": files, "channels": names}
    if extra:
        manifest.update(extra)
    with open(os.path.join(directory, "trajectory.json"), "w") as fh:
        json.dump(manifest, fh, indent=2)
    return directory
