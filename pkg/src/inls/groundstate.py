"""Ground state of -Lap Q + Q = |x|^-b Q^(alpha+1) by Petviashvili iteration."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .params import ProblemParams
from .spectral import Grid, SingularWeight, SpectralField, make_weight

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 5000


class GroundStateError(RuntimeError):
    def __init__(self, message, iterations, residual):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


@dataclass(eq=False)
class GroundState:
    Q: SpectralField
    params: ProblemParams
    weight: SingularWeight
    mass: float
    kinetic: float
    potential: float
    energy: float
    residual: float
    residual_abs: float
    gn_constant: float
    threshold_ME: float
    threshold_grad: float
    iterations: int
    m_history: list = field(default_factory=list, repr=False)

    @property
    def grid(self) -> Grid:
        return self.Q.grid

    def pohozaev(self):
        """Relative defects of K + M = P, the dilation identity and K/M."""
        N, b, al = self.params.N, float(self.params.b), float(self.params.alpha)
        K, M, P = self.kinetic, self.mass, self.potential
        pairing = abs(K + M - P) / P
        dilation = abs((N - 2) / 2 * K + N / 2 * M - (N - b) / (al + 2) * P) / P
        target = (N * al + 2 * b) / (4 - 2 * b - (N - 2) * al)
        ratio = abs(K / M / target - 1)
        return {"pairing": pairing, "dilation": dilation, "ratio": ratio,
                "ratio_value": K / M, "ratio_target": target}

    def profile_checks(self):
        """Positivity near the origin and radial monotonicity of Q."""
        g = self.grid
        r = g.r.ravel()
        q = self.Q.values.real.ravel()
        order = np.argsort(r, kind="stable")
        rs, qs = r[order], q[order]
        first = qs[0] if rs[0] > 0 else qs[1]
        # cartesian grids list several nodes per radius; compare distinct radii
        keep = np.concatenate([[True], np.diff(rs) > 1e-12])
        qm = np.maximum.reduceat(qs, np.flatnonzero(keep))
        slack = 1e-12 * qs.max()
        return {"positive_at_origin": bool(first > 0),
                "monotone": bool(np.all(np.diff(qm) <= slack))}

    def summary(self):
        d = {k: getattr(self, k) for k in (
            "mass", "kinetic", "potential", "energy", "residual", "residual_abs",
            "gn_constant", "threshold_ME", "threshold_grad", "iterations")}
        d["params"] = self.params.as_dict()
        d["grid"] = self.grid.describe()
        d["reg_radius"] = self.weight.reg_radius
        d["pohozaev"] = self.pohozaev()
        d["profile"] = self.profile_checks()
        return d


def functionals(grid: Grid, weight: SingularWeight, alpha, u):
    """(mass, kinetic, potential) of a field given as an array."""
    return grid.norm2(u), grid.kinetic(u), weight.potential(u, alpha)


def equation_residual(grid, w, alpha, Q):
    """Absolute and relative sup-norm residual of -Lap Q + Q - w Q^(alpha+1)."""
    nl = w * np.abs(Q) ** alpha * Q
    res = -grid.laplacian(Q) + Q - nl
    a = float(np.max(np.abs(res)))
    return a, a / float(np.max(np.abs(nl)))


def solve_ground_state(params: ProblemParams, grid: Grid, tol=DEFAULT_TOL,
                       max_iter=DEFAULT_MAX_ITER, reg_radius=None) -> GroundState:
    """Petviashvili iteration from the Gaussian exp(-|x|^2).

    Stops once |m - 1| < tol and the relative residual (sup of the
    equation defect over sup of w Q^(alpha+1)) < tol.
    """
    al = float(params.alpha)
    gamma = (al + 1) / al
    weight = make_weight(grid, params.b, reg_radius)
    w = weight.density
    Q = np.exp(-grid.r ** 2)
    history = []
    res_abs = res_rel = math.inf
    for it in range(1, max_iter + 1):
        nl = w * np.abs(Q) ** al * Q
        M, K = grid.norm2(Q), grid.kinetic(Q)
        P = grid.integrate(nl * Q)
        if not math.isfinite(P) or P <= 0:
            raise GroundStateError("nonlinear pairing vanished", it, res_rel)
        m = (M + K) / P
        history.append(m)
        if abs(m - 1) < tol:
            res_abs, res_rel = equation_residual(grid, w, al, Q)
            if res_rel < tol:
                break
        Q = m ** gamma * grid.resolvent(nl).real
        if math.sqrt(grid.norm2(Q)) < 1e-10:
            raise GroundStateError("iteration collapsed to zero", it, res_rel)
    else:
        raise GroundStateError(f"no convergence after {max_iter} iterations", max_iter, res_rel)

    # fix the scale so that m = 1 exactly: lambda^alpha = (M + K) / P
    M, K, P = functionals(grid, weight, al, Q)
    Q = Q * ((M + K) / P) ** (1 / al)
    res_abs, res_rel = equation_residual(grid, w, al, Q)
    return _record(params, SpectralField(grid, Q), weight, res_rel, res_abs, it, history)


def _record(params, Qf, weight, res_rel, res_abs, iterations, history):
    al = float(params.alpha)
    M, K, P = functionals(Qf.grid, weight, al, Qf.values)
    E = 0.5 * K - P / (al + 2)
    gs = GroundState(Qf, params, weight, M, K, P, E, res_rel, res_abs,
                     0.0, 0.0, 0.0, iterations, history)
    gs.gn_constant = gn_constant(gs, params)
    t = threshold_quantities(gs, params)
    gs.threshold_ME, gs.threshold_grad = t["threshold_ME"], t["threshold_grad"]
    return gs


def gn_exponents(params: ProblemParams):
    N, b, al = params.N, float(params.b), float(params.alpha)
    return (N * al + 2 * b) / 4, (4 - 2 * b - al * (N - 2)) / 4


def gn_constant(gs: GroundState, params: ProblemParams) -> float:
    ek, em = gn_exponents(params)
    return gs.potential / (gs.kinetic ** ek * gs.mass ** em)


def gn_ratio(u, gs: GroundState) -> float:
    """P[u] / (C_GN K^.. M^..); at most 1 up to discretization error."""
    M, K, P = functionals(gs.grid, gs.weight, float(gs.params.alpha), u)
    ek, em = gn_exponents(gs.params)
    return P / (gs.gn_constant * K ** ek * M ** em)


def threshold_quantities(gs: GroundState, params: ProblemParams):
    sc = float(params.s_c)
    return {"threshold_ME": gs.energy ** sc * gs.mass ** (1 - sc),
            "threshold_grad": gs.kinetic ** (sc / 2) * gs.mass ** ((1 - sc) / 2)}


def scaled_energy(c, gs: GroundState) -> float:
    """E[cQ] = c^2 K / 2 - c^(alpha+2) P / (alpha+2)."""
    al = float(gs.params.alpha)
    return c * c / 2 * gs.kinetic - c ** (al + 2) / (al + 2) * gs.potential
