"""Threshold classification, coercivity, virial monitors and scattering tests."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid

from .evolution import EvolutionConfig, Trajectory, evolve
from .groundstate import GroundState
from .params import ProblemParams
from .spectral import (Grid, SingularWeight, SpectralField, bump, free_propagate, h1_norm,
                       littlewood_paley, make_weight)

THRESHOLD_BAND = 1e-6
SETTLE_TOL = 1e-3
DECAY_FACTOR = 100.0


# ---------------------------------------------------------------- thresholds

@dataclass
class ThresholdReport:
    ME_ratio: float | None
    grad_ratio: float
    classification: str
    mass: float
    kinetic: float
    energy: float
    final_state_ratio: float
    final_state_subthreshold: bool

    def as_dict(self):
        return dict(self.__dict__)


def _state(u, gs: GroundState):
    g, al = gs.grid, float(gs.params.alpha)
    vals = u.values if isinstance(u, SpectralField) else u
    M, K = g.norm2(vals), g.kinetic(vals)
    P = gs.weight.potential(vals, al)
    return M, K, P, 0.5 * K - P / (al + 2)


def classify_threshold(u0, gs: GroundState, params: ProblemParams,
                       band=THRESHOLD_BAND) -> ThresholdReport:
    sc = float(params.s_c)
    M, K, P, E = _state(u0, gs)
    grad = (K ** (sc / 2) * M ** ((1 - sc) / 2)) / gs.threshold_grad
    me = None if E < 0 else (E ** sc * M ** (1 - sc)) / gs.threshold_ME
    if E < 0:
        cls = "negative-energy"
    else:
        hi = max(me, grad)
        if hi > 1 + band:
            cls = "above-threshold"
        elif hi < 1 - band:
            cls = "sub-threshold"
        else:
            cls = "at-threshold"
    # hypothesis for final states: M^(1-sc) K^sc < 2^sc M[Q]^(1-sc) E[Q]^sc
    fs = M ** (1 - sc) * K ** sc / (2 ** sc * gs.mass ** (1 - sc) * gs.energy ** sc)
    return ThresholdReport(me, grad, cls, M, K, E, fs, fs < 1)


@dataclass
class CoercivityReport:
    applicable: bool
    reason: str
    energy_ratio: float           # E / ||grad v||^2
    gap: float                    # 1 - grad_ratio
    virial_quantity: float        # 8K - 4(N alpha + 2b)/(alpha+2) P
    virial_ratio: float           # virial_quantity / K


def coercivity_check(u, gs: GroundState, params: ProblemParams) -> CoercivityReport:
    sc = float(params.s_c)
    N, b, al = params.N, float(params.b), float(params.alpha)
    M, K, P, E = _state(u, gs)
    V = 8 * K - 4 * (N * al + 2 * b) / (al + 2) * P
    me = E ** sc * M ** (1 - sc) if E >= 0 else -math.inf
    grad = K ** (sc / 2) * M ** ((1 - sc) / 2)
    ok_me = me < gs.threshold_ME * (1 - THRESHOLD_BAND)
    ok_grad = grad <= gs.threshold_grad * (1 + THRESHOLD_BAND)
    if not ok_me:
        reason = "mass-energy product not strictly below that of Q"
    elif not ok_grad:
        reason = "mass-gradient product above that of Q"
    else:
        reason = "hypotheses hold"
    return CoercivityReport(ok_me and ok_grad, reason,
                            E / K if K else math.nan, 1 - grad / gs.threshold_grad,
                            V, V / K if K else math.nan)


# ---------------------------------------------------------------- virial

@dataclass(eq=False)
class VirialWeight:
    """Radial virial weight phi sampled at rho = |x|/R.

    Stores phi and the radial quantities the identities need:
    phi', phi'', phi'/rho, Lap phi and Lap^2 phi (all in the scaled variable).
    """
    kind: str
    R: float
    grid: Grid
    phi: np.ndarray
    dphi: np.ndarray
    d2phi: np.ndarray
    dphi_over_rho: np.ndarray
    laplacian_phi: np.ndarray
    bilaplacian_phi: np.ndarray

    @property
    def grad_phi(self):
        return self.dphi

    @property
    def hess_phi(self):
        return self.d2phi, self.dphi_over_rho


def _localized_profile(rho, N):
    """phi = rho^2 bump(rho) and its radial derivatives up to order four."""
    b0, b1, b2, b3, b4 = (bump(rho, k) for k in range(5))
    p = rho
    phi = p * p * b0
    d1 = 2 * p * b0 + p * p * b1
    d2 = 2 * b0 + 4 * p * b1 + p * p * b2
    d3 = 6 * b1 + 6 * p * b2 + p * p * b3
    d4 = 12 * b2 + 8 * p * b3 + p * p * b4
    inner = rho <= 1
    safe = np.where(inner, 1.0, rho)
    d1r = np.where(inner, 2.0, d1 / safe)
    lap = np.where(inner, 2.0 * N, d2 + (N - 1) * d1 / safe)
    # Lap^2 of a radial function from derivatives of phi
    g1 = d3 + (N - 1) * (d2 / safe - d1 / safe ** 2)
    g2 = d4 + (N - 1) * (d3 / safe - 2 * d2 / safe ** 2 + 2 * d1 / safe ** 3)
    bilap = np.where(inner, 0.0, g2 + (N - 1) * g1 / safe)
    d2 = np.where(inner, 2.0, d2)
    return phi, d1, d2, d1r, lap, bilap


def make_virial_weight(grid: Grid, kind="localized", R=1.0) -> VirialWeight:
    N = grid.dimension
    if kind == "quadratic":
        R = 1.0
        rho = grid.r
        one = np.ones_like(rho)
        return VirialWeight(kind, R, grid, rho ** 2, 2 * rho, 2 * one, 2 * one,
                            2 * N * one, 0 * one)
    if kind != "localized":
        raise ValueError("kind must be 'quadratic' or 'localized'")
    rho = grid.r / R
    return VirialWeight(kind, float(R), grid, *_localized_profile(rho, N))


def virial_z(u, vw: VirialWeight) -> float:
    vals = u.values if isinstance(u, SpectralField) else u
    return vw.R ** 2 * vw.grid.integrate(vw.phi * np.abs(vals) ** 2)


def virial_zprime(u, vw: VirialWeight) -> float:
    """2R Im int phi'(|x|/R) d_r u conj(u)."""
    vals = u.values if isinstance(u, SpectralField) else u
    ur = vw.grid.radial_derivative(vals)
    return 2 * vw.R * vw.grid.integrate((vw.dphi * ur * np.conj(vals)).imag)


def virial_zsecond(u, vw: VirialWeight, weight: SingularWeight, params: ProblemParams) -> float:
    """Second derivative of z_R along the flow.

    The Hessian term is split as 8 ||grad u||^2 plus terms that vanish for
    the quadratic weight; the weight-gradient term uses x . grad|x|^-b =
    -b |x|^-b, so with phi = |x|^2 the result is exactly
    8K - 4(N alpha + 2b)/(alpha+2) P for the same quadrature of K and P.
    """
    g = vw.grid
    vals = u.values if isinstance(u, SpectralField) else u
    al, b = float(params.alpha), float(params.b)
    K = g.kinetic(vals)
    amp2 = np.abs(vals) ** 2
    F = weight.density * amp2 ** ((al + 2) / 2)
    hess = 8 * K
    if vw.kind != "quadratic":
        grads = g.gradient(vals)
        grad2 = sum(np.abs(d) ** 2 for d in grads)
        ur2 = np.abs(g.radial_derivative(vals)) ** 2
        hess += 4 * g.integrate((vw.dphi_over_rho - 2) * grad2)
        hess += 4 * g.integrate((vw.d2phi - vw.dphi_over_rho) * ur2)
    bil = g.integrate(vw.bilaplacian_phi * amp2) / vw.R ** 2
    lap = g.integrate(vw.laplacian_phi * F)
    wgrad = -b * g.integrate(vw.dphi_over_rho * F)
    return hess - bil - 2 * al / (al + 2) * lap + 4 / (al + 2) * wgrad


def lemma_quantity(u, weight: SingularWeight, params: ProblemParams) -> float:
    g = weight.grid
    vals = u.values if isinstance(u, SpectralField) else u
    N, b, al = params.N, float(params.b), float(params.alpha)
    return 8 * g.kinetic(vals) - 4 * (N * al + 2 * b) / (al + 2) * weight.potential(vals, al)


def virial_error_bound(u, R, weight: SingularWeight, params: ProblemParams) -> float:
    """int_{|x|>R} |grad u|^2 + R^-2 |u|^2 + R^-b |u|^(alpha+2)."""
    g = weight.grid
    vals = u.values if isinstance(u, SpectralField) else u
    al, b = float(params.alpha), float(params.b)
    out = g.r > R
    grad2 = sum(np.abs(d) ** 2 for d in g.gradient(vals))
    a2 = np.abs(vals) ** 2
    dens = grad2 + a2 / R ** 2 + R ** (-b) * a2 ** ((al + 2) / 2)
    return g.integrate(np.where(out, dens, 0.0))


def virial_monitors(vw: VirialWeight, weight: SingularWeight, params: ProblemParams,
                    with_error=True):
    mons = {
        "virial_z": lambda u: virial_z(u, vw),
        "virial_zp": lambda u: virial_zprime(u, vw),
        "virial_zpp": lambda u: virial_zsecond(u, vw, weight, params),
    }
    if with_error:
        mons["virial_error"] = lambda u: virial_error_bound(u, vw.R, weight, params)
    return mons


@dataclass
class ContradictionReport:
    ftc_integral: float
    ftc_difference: float
    ftc_defect: float
    ftc_bound: float
    ratio: float
    coercive: bool
    zpp_mean: float
    zprime_constant: float


def virial_contradiction_monitor(traj: Trajectory, R, delta_probe) -> ContradictionReport:
    """FTC check on the virial channels and the ratio of the lower-bound chain.

    ratio = delta int ||grad u||^2 / (R sup ||u||_H1^2 + int error);
    `coercive` records whether z'' >= delta ||grad u||^2 at every sample.
    """
    t = np.asarray(traj.times)
    zpp = traj.channel("virial_zpp")
    zp = traj.channel("virial_zp")
    K = traj.channel("kinetic")
    M = traj.channel("mass")
    err = traj.channel("virial_error") if "virial_error" in traj.monitors else np.zeros_like(t)
    integral = float(trapezoid(zpp, t))
    diff = float(zp[-1] - zp[0])
    # trapezoid error estimate from the second differences of z''
    if len(t) > 2:
        h = np.diff(t)
        d2 = np.abs(np.diff(zpp, 2)) / np.maximum(h[1:] * h[:-1], 1e-300)
        bound = float(np.max(d2) * (t[-1] - t[0]) * np.max(h) ** 2 / 12) + 1e-12 * max(1.0, abs(diff))
    else:
        bound = math.inf
    lower = delta_probe * float(trapezoid(K, t))
    upper = R * float(np.max(M + K)) + float(trapezoid(err, t))
    C = float(np.max(np.abs(zp) / (R * (M + K))))
    return ContradictionReport(integral, diff, abs(integral - diff), bound,
                               lower / upper if upper > 0 else math.inf,
                               bool(np.all(zpp >= delta_probe * K)), float(np.mean(zpp)), C)


# ---------------------------------------------------------------- scattering

@dataclass
class ScatteringReport:
    u_plus_estimate: SpectralField | None
    times: list
    h1_distance_series: list
    potential_times: list
    potential_series: list
    verdict: str
    reason: str
    decay: float
    settle: float

    def rows(self):
        return list(zip(self.times, self.h1_distance_series))


def scattering_diagnostic(traj: Trajectory, settle_tol=SETTLE_TOL,
                          decay_factor=DECAY_FACTOR) -> ScatteringReport:
    g = traj.grid
    pot = traj.channel("potential")
    pt = list(traj.times)
    peak = float(np.max(pot)) if len(pot) else 0.0
    decay = peak / float(pot[-1]) if len(pot) and pot[-1] > 0 else math.inf
    if traj.status == "gradient-growth":
        return ScatteringReport(None, [], [], pt, list(pot), "growth",
                                "gradient norm exceeded the growth factor", decay, math.nan)
    T = traj.times[-1]
    up = free_propagate(traj.final, -T)
    times, dist = [], []
    for t, f in zip(traj.snapshot_times, traj.snapshots):
        diff = f.values - free_propagate(up, t).values
        times.append(t)
        dist.append(h1_norm(g, diff))
    if not times or times[-1] != T:
        times.append(T)
        dist.append(h1_norm(g, traj.final.values - free_propagate(up, T).values))
    scale = h1_norm(g, up.values)
    rel = np.asarray(dist) / scale if scale > 0 else np.asarray(dist)
    tail = rel[np.asarray(times) >= 0.75 * T]
    settle = float(np.max(tail)) if len(tail) else math.nan
    monotone = bool(np.all(np.diff(tail) <= 1e-12)) if len(tail) > 1 else True
    if traj.guard_violated:
        verdict, reason = "inconclusive", f"wrap-around guard violated at t={traj.guard_time}"
    elif decay >= decay_factor and monotone and settle < settle_tol:
        verdict, reason = "scattering-consistent", "potential decayed and distance settled"
    elif decay < decay_factor:
        verdict, reason = "inconclusive", f"potential decayed only by {decay:.3g}"
    else:
        verdict, reason = "inconclusive", f"distance not settled (max {settle:.3g} on last quarter)"
    return ScatteringReport(up, times, dist, pt, list(pot), verdict, reason, decay, settle)


# ---------------------------------------------------------------- far translation

def far_cutoff(grid: Grid, xn):
    """chi_n(x): 0 on |x + x_n| < |x_n|/4, 1 on |x + x_n| > |x_n|/2."""
    x, y = grid.coords
    d = np.hypot(x + xn, y)
    return 1.0 - bump(d / (abs(xn) / 4))


def translate(grid: Grid, u, shift):
    """u(x - shift e_1) by a Fourier phase (exact for band-limited data)."""
    kx, _ = grid.freqs
    return grid.inverse(np.exp(-1j * kx * shift) * grid.forward(u))


def far_translated_data(psi: SpectralField, xn, theta):
    if xn == 0:
        return psi
    g = psi.grid
    proj = littlewood_paley(psi, abs(xn) ** theta) if abs(xn) ** theta < g.nyquist else psi
    shaped = far_cutoff(g, xn) * proj.values
    return SpectralField(g, translate(g, shaped, xn))


@dataclass
class FarTranslationRow:
    offset: float
    status: str
    deviation: float
    relative: float
    chi_grad_sup: float
    chi_grad_constant: float


def far_translation_experiment(psi: SpectralField, offsets, theta, T, weight: SingularWeight,
                               alpha, dt=1e-3, samples=20, margin=None):
    g = psi.grid
    if g.mode != "cartesian2d":
        raise ValueError("far translation needs a cartesian grid")
    margin = 0.25 * g.extent if margin is None else margin
    nsteps = int(round(T / dt))
    stride = max(1, nsteps // samples)
    rows = []
    for xn in offsets:
        u0 = far_translated_data(psi, xn, theta)
        cgs, cc = math.nan, math.nan
        if xn:
            chi = far_cutoff(g, xn)
            cg = np.sqrt(sum(np.abs(d) ** 2 for d in g.gradient(chi.astype(complex))))
            cgs = float(cg.max())
            cc = cgs * abs(xn)
        shell = g.shell_mask()
        if abs(xn) + margin > g.extent or np.sqrt(g.norm2(np.where(shell, u0.values, 0))) > 1e-6 * u0.l2():
            rows.append(FarTranslationRow(xn, "skipped", math.nan, math.nan, cgs, cc))
            continue
        cfg = EvolutionConfig(weight, alpha, dt=dt, t_final=T, snapshot_stride=stride,
                              monitor_stride=stride, wraparound_guard=False)
        tr = evolve(u0, cfg)
        dev = 0.0
        for t, f in zip(tr.snapshot_times, tr.snapshots):
            dev = max(dev, h1_norm(g, f.values - free_propagate(u0, t).values))
        dev = max(dev, h1_norm(g, tr.final.values - free_propagate(u0, tr.times[-1]).values))
        rows.append(FarTranslationRow(xn, tr.status, dev, dev / h1_norm(g, u0.values), cgs, cc))
    return rows


def loglog_slope(rows):
    pts = [(r.offset, r.deviation) for r in rows if r.offset > 0 and r.status == "completed"
           and r.deviation > 0]
    if len(pts) < 2:
        return math.nan
    x, y = np.log([p[0] for p in pts]), np.log([p[1] for p in pts])
    return float(np.polyfit(x, y, 1)[0])


__all__ = [
    "ThresholdReport", "classify_threshold", "CoercivityReport", "coercivity_check",
    "VirialWeight", "make_virial_weight", "virial_z", "virial_zprime", "virial_zsecond",
    "lemma_quantity", "virial_error_bound", "virial_monitors", "virial_contradiction_monitor",
    "ScatteringReport", "scattering_diagnostic", "far_translation_experiment",
    "far_translated_data", "far_cutoff", "loglog_slope", "make_weight",
]
