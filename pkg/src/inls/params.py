"""Exact-rational parameter validation and Strichartz exponent bookkeeping.

Nothing in this module touches floating point.  Exponents are `Fraction`
instances or the sentinel `INF`; `recip` and `dual` give total arithmetic
on that extended set.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Union


class _Infinity:
    """Point at infinity for Lebesgue exponents (1/INF == 0)."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "INF"

    def __str__(self):
        return "inf"

    def __reduce__(self):
        return (_Infinity, ())


INF = _Infinity()
Exponent = Union[Fraction, _Infinity]

_ZERO = Fraction(0)
_ONE = Fraction(1)


def recip(p: Exponent) -> Exponent:
    if p is INF:
        return _ZERO
    p = Fraction(p)
    if p == 0:
        return INF
    return 1 / p


def dual(p: Exponent) -> Exponent:
    """Hölder conjugate: 1/p + 1/p' = 1."""
    return recip(_ONE - recip(p))


def as_fraction(x) -> Fraction:
    """Parse an int, Fraction or a string like '1/2' or '0.25' exactly."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        raise TypeError("floats are not accepted; pass a string or Fraction")
    return Fraction(x)


def fmt(p: Exponent) -> str:
    return "inf" if p is INF else str(p)


class ParameterError(ValueError):
    """Raised for parameters outside the intercritical region."""

    def __init__(self, constraint: str, regime: str, s_c: Fraction | None = None):
        super().__init__(f"{constraint} ({regime})")
        self.constraint = constraint
        self.regime = regime
        self.s_c = s_c


@dataclass(frozen=True)
class ProblemParams:
    N: int
    b: Fraction
    alpha: Fraction
    s_c: Fraction

    @property
    def alpha_lower(self) -> Fraction:
        return (4 - 2 * self.b) / self.N

    @property
    def alpha_upper(self) -> Exponent:
        return INF if self.N == 2 else (4 - 2 * self.b) / (self.N - 2)

    def as_dict(self):
        return {"N": self.N, "b": str(self.b), "alpha": str(self.alpha), "s_c": str(self.s_c)}


def critical_index(N: int, b, alpha) -> Fraction:
    return Fraction(N, 2) - (2 - as_fraction(b)) / as_fraction(alpha)


@dataclass(frozen=True)
class Validation:
    ok: bool
    params: ProblemParams | None
    constraint: str | None = None
    regime: str | None = None
    s_c: Fraction | None = None

    def unwrap(self) -> ProblemParams:
        if not self.ok:
            raise ParameterError(self.constraint, self.regime, self.s_c)
        return self.params


def validate_params(N, b, alpha) -> Validation:
    """Check (N, b, alpha) against the intercritical hypotheses.

    Never raises on bad values; the returned record names the first
    violated constraint and the regime the triple falls into.
    """
    try:
        N = int(N)
        b = as_fraction(b)
        alpha = as_fraction(alpha)
    except (TypeError, ValueError, ZeroDivisionError) as exc:
        return Validation(False, None, f"unparseable input: {exc}", "invalid")

    if N < 2:
        return Validation(False, None, "N >= 2", "dimension out of range")
    if alpha <= 0:
        return Validation(False, None, "alpha > 0", "alpha out of range")
    s_c = critical_index(N, b, alpha)
    bmax = min(Fraction(N, 2), Fraction(2))
    if not 0 < b < bmax:
        return Validation(False, None, f"0 < b < {bmax}", "b out of range", s_c)
    lower = (4 - 2 * b) / N
    if alpha < lower:
        return Validation(False, None, f"alpha > {lower}", "mass-subcritical", s_c)
    if alpha == lower:
        return Validation(False, None, f"alpha > {lower}", "mass-critical", s_c)
    if N > 2:
        upper = (4 - 2 * b) / (N - 2)
        if alpha == upper:
            return Validation(False, None, f"alpha < {upper}", "energy-critical", s_c)
        if alpha > upper:
            return Validation(False, None, f"alpha < {upper}", "energy-supercritical", s_c)
    return Validation(True, ProblemParams(N, b, alpha, s_c), regime="intercritical", s_c=s_c)


def make_params(N, b, alpha) -> ProblemParams:
    return validate_params(N, b, alpha).unwrap()


# ---------------------------------------------------------------- admissibility

@dataclass(frozen=True)
class Verdict:
    ok: bool
    failed: str | None = None

    def __bool__(self):
        return self.ok


def kind_of(s: Fraction) -> str:
    if s > 0:
        return "H^s-admissible"
    if s < 0:
        return "H^-s-admissible"
    return "L2-admissible"


def is_admissible(q: Exponent, r: Exponent, s, N: int) -> Verdict:
    """Scaling relation 2/q + N/r = N/2 - s plus the range of r.

    Negative `s` selects the dual kind; the range constraint uses |s|.
    """
    s = as_fraction(s)
    if r is INF:
        return Verdict(False, "r < inf")
    if q is not INF and Fraction(q) <= 0:
        return Verdict(False, "q > 0")
    if Fraction(r) <= 0:
        return Verdict(False, "r > 0")
    lhs = 2 * recip(q) + N * recip(r)
    if lhs != Fraction(N, 2) - s:
        return Verdict(False, f"2/q + N/r = N/2 - s (got {lhs} vs {Fraction(N, 2) - s})")
    a = abs(s)
    if N == 2:
        if a >= 1:
            return Verdict(False, "|s| < 1")
        lo = 2 / (1 - a)
        if r < lo:
            return Verdict(False, f"r >= {lo}")
    else:
        if 2 * a >= N:
            return Verdict(False, "|s| < N/2")
        lo = Fraction(2 * N) / (N - 2 * a)
        hi = Fraction(2 * N, N - 2)
        if r < lo:
            return Verdict(False, f"r >= {lo}")
        if r >= hi:
            return Verdict(False, f"r < {hi}")
    return Verdict(True)


# ---------------------------------------------------------------- families

@dataclass(frozen=True)
class PairCheck:
    name: str
    q: Exponent
    r: Exponent
    s: Fraction
    verdict: Verdict
    claimed: bool

    @property
    def kind(self):
        return kind_of(self.s)


@dataclass(frozen=True)
class Relation:
    name: str
    lhs: Exponent
    rhs: Exponent

    @property
    def holds(self) -> bool:
        return self.lhs == self.rhs


@dataclass(frozen=True)
class Inequality:
    name: str
    verdict: Verdict
    claimed: bool = True


@dataclass
class ExponentFamily:
    params: ProblemParams
    theta: Fraction
    epsilon: Fraction | None
    pairs: dict = field(default_factory=dict)
    relations: list = field(default_factory=list)
    admissibility_verdicts: list = field(default_factory=list)
    inequalities: list = field(default_factory=list)

    @property
    def relations_hold(self) -> bool:
        return all(rel.holds for rel in self.relations)

    def claimed_checks(self):
        yield from (p for p in self.admissibility_verdicts if p.claimed)
        yield from (c for c in self.inequalities if c.claimed)

    @property
    def claims_hold(self) -> bool:
        return all(c.verdict.ok for c in self.claimed_checks())

    def first_failure(self) -> str | None:
        for rel in self.relations:
            if not rel.holds:
                return f"relation {rel.name}"
        for c in self.claimed_checks():
            if not c.verdict.ok:
                return f"{c.name}: {c.verdict.failed}"
        return None

    def to_json(self):
        return {
            "params": self.params.as_dict(),
            "theta": str(self.theta),
            "epsilon": None if self.epsilon is None else str(self.epsilon),
            "pairs": {k: fmt(v) for k, v in self.pairs.items()},
            "relations": [
                {"name": r.name, "lhs": fmt(r.lhs), "rhs": fmt(r.rhs), "holds": r.holds}
                for r in self.relations
            ],
            "admissibility": [
                {
                    "name": p.name, "q": fmt(p.q), "r": fmt(p.r), "s": str(p.s),
                    "kind": p.kind, "claimed": p.claimed, "ok": p.verdict.ok,
                    "failed": p.verdict.failed,
                }
                for p in self.admissibility_verdicts
            ],
            "inequalities": [
                {"name": c.name, "claimed": c.claimed, "ok": c.verdict.ok, "failed": c.verdict.failed}
                for c in self.inequalities
            ],
            "all_pass": self.relations_hold and self.claims_hold,
        }


def _gt(name, x: Exponent, y: Exponent) -> Inequality:
    ok = x is INF and y is not INF or (x is not INF and y is not INF and x > y)
    return Inequality(name, Verdict(ok, None if ok else f"{fmt(x)} > {fmt(y)}"))


def _lt(name, x: Exponent, y: Exponent) -> Inequality:
    return _gt(name, y, x)


def _frac_or_inf(num: Fraction, den: Fraction) -> Exponent:
    return INF if den == 0 else num / den


def build_exponent_family(params: ProblemParams, theta, epsilon=None) -> ExponentFamily:
    """All closed-form exponents at (theta, epsilon), relations and verdicts.

    Raises ValueError when theta or epsilon make an exponent degenerate
    (a vanishing denominator) or lie outside their ranges.
    """
    try:
        return _build(params, theta, epsilon)
    except ZeroDivisionError as exc:
        raise ValueError(f"degenerate exponent at theta={theta}, epsilon={epsilon}") from exc


def _build(params: ProblemParams, theta, epsilon) -> ExponentFamily:
    theta = as_fraction(theta)
    if not 0 < theta < params.alpha:
        raise ValueError(f"theta must lie in (0, alpha); got {theta}")
    if epsilon is not None:
        epsilon = as_fraction(epsilon)
        if epsilon <= 0:
            raise ValueError(f"epsilon must be positive; got {epsilon}")

    N, b, al, sc = params.N, params.b, params.alpha, params.s_c
    th = theta
    fam = ExponentFamily(params, theta, epsilon)
    P = fam.pairs

    # energy-space family
    P["hat_q"] = 4 * al * (al + 2 - th) / (al * (N * al + 2 * b) - th * (N * al - 4 + 2 * b))
    P["hat_r"] = N * al * (al + 2 - th) / (al * (N - b) - th * (2 - b))
    P["tilde_a"] = 2 * al * (al + 2 - th) / (
        al * (N * (al + 1 - th) - 2 + 2 * b) - (4 - 2 * b) * (1 - th))
    P["hat_a"] = _frac_or_inf(2 * al * (al + 2 - th), 4 - 2 * b - (N - 2) * al)
    if N >= 3:
        P["hat_p"] = 2 * N * (al + 2 - th) / (N * (al + 2 - th) - 4 * (1 - sc))

    # two-dimensional family; the algebra is dimension-free
    P["bar_a"] = 2 * (al + 1 - th) / (1 - sc + th)
    P["bar_r"] = 2 * al * (al + 1 - th) / (al * (1 - b + sc) + 2 - b - th * (2 - b + al))
    P["bar_q"] = 2 * (al + 1 - th) / (1 + al * sc + th * (1 - sc))
    P["a_star"] = 2 * (al - th) / (1 + th)
    P["r_star"] = _frac_or_inf(2 * al * (al - th), al * (1 - b) - th * (2 - b + al))
    P["q"] = 2 / (1 - th)
    P["r"] = 2 / th

    rel = fam.relations.append
    hq, hr, ta, ha = P["hat_q"], P["hat_r"], P["tilde_a"], P["hat_a"]
    rel(Relation("dual tilde_a", recip(dual(ta)), (al - th) * recip(ha) + recip(ha)))
    rel(Relation("dual hat_q", recip(dual(hq)), (al - th) * recip(ha) + recip(hq)))
    q2, ba, bq = P["q"], P["bar_a"], P["bar_q"]
    rel(Relation("dual q", recip(dual(q2)), (al - th) * recip(ba) + recip(bq)))
    rel(Relation("(alpha-theta) q' = a_star", (al - th) * dual(q2), P["a_star"]))
    if "hat_p" in P:
        rel(Relation("s_c = N/hat_p - N/hat_r", sc, N * recip(P["hat_p"]) - N * recip(hr)))

    # weight-exponent relations at the radii used for the ball/exterior split
    for r1name, r1 in _weight_radii(params, th):
        gam = recip(_ONE - recip(hr) - recip(r1) - (al + 1 - th) * recip(hr))
        rel(Relation(f"weight exponent (hat, {r1name})",
                     N * recip(gam) - b, th * (2 - b) / al - N * recip(r1)))
    if N == 2:
        for r1name, r1 in _weight_radii(params, th):
            gam = recip(recip(dual(P["r"])) - recip(r1) - (al + 1 - th) * recip(P["bar_r"]))
            rel(Relation(f"weight exponent (bar, {r1name})",
                         2 * recip(gam) - b, th * (2 - b) / al - 2 * recip(r1)))
            gt = recip(recip(dual(P["r"])) - recip(r1) - (al - th) * recip(P["r_star"]))
            rel(Relation(f"weight exponent (star, {r1name})",
                         2 * recip(gt) - b - 1, th * (2 - b) / al - 2 * recip(r1)))

    adm = fam.admissibility_verdicts.append

    def pair(name, q, r, s, claimed):
        adm(PairCheck(name, q, r, s, is_admissible(q, r, s, N), claimed))

    pair("(hat_q, hat_r)", hq, hr, _ZERO, True)
    pair("(hat_a, hat_r)", ha, hr, sc, True)
    pair("(tilde_a, hat_r)", ta, hr, -sc, True)
    two = N == 2
    pair("(bar_q, bar_r)", bq, P["bar_r"], _ZERO, two)
    pair("(bar_a, bar_r)", ba, P["bar_r"], sc, two)
    pair("(a_star, r_star)", P["a_star"], P["r_star"], sc, two)
    pair("(q, r)", q2, P["r"], _ZERO, False)
    if "hat_p" in P:
        hp = P["hat_p"]
        pair("(hat_a, hat_p)", ha, hp, _ZERO, True)
        fam.inequalities.append(_lt("hat_p < N/s_c", hp, Fraction(N) / sc))
        fam.inequalities.append(_gt("hat_p > 2", hp, Fraction(2)))
        fam.inequalities.append(_lt("hat_p < 2N/(N-2)", hp, Fraction(2 * N, N - 2)))

    if two and epsilon is not None:
        ep = epsilon
        a = 2 * al * (al + 1 - th) / (2 - b + ep)
        r = _frac_or_inf(2 * al * (al + 1 - th), (2 - b) * (al - th) - ep)
        ba2 = _frac_or_inf(2 * al, 2 * al - (2 - b) - ep)
        br2 = 2 * al / ep
        p = _frac_or_inf(2 * al * (al + 1 - th) - 4 * (2 - b + ep), (2 - b) * (al - 1 - th) - 2 * ep)
        P.update({"a": a, "r_embed": r, "bar_a2": ba2, "bar_r2": br2, "p": p})
        rel(Relation("(alpha+1-theta) bar_a2' = a", (al + 1 - th) * dual(ba2), a))
        for r1name, r1 in _weight_radii(params, th):
            gam = recip(recip(dual(br2)) - recip(r1) - (al + 1 - th) * recip(r))
            rel(Relation(f"weight exponent (embed, {r1name})",
                         2 * recip(gam) - b, th * (2 - b) / al - 2 * recip(r1)))
        pair("(a, r)", a, r, sc, True)
        pair("(bar_a2, bar_r2)", ba2, br2, -sc, True)
        fam.inequalities.append(_gt("a > 4", a, Fraction(4)))
        fam.inequalities.append(_gt("p > 2", p, Fraction(2)))
        fam.inequalities.append(_gt("bar_a2 > 0", ba2, _ZERO))
    return fam


def _weight_radii(params: ProblemParams, theta: Fraction):
    """Radii r1 used on the ball and the exterior (theta * r1 fixed)."""
    N = params.N
    inner = Fraction(2 * N, N - 2) if N >= 3 else Fraction(N) * params.alpha / (2 - params.b)
    return [("ball", inner / theta), ("exterior", 2 / theta)]


# ---------------------------------------------------------------- theta window

@dataclass(frozen=True)
class ThetaWindow:
    lower: Fraction          # largest probe that passed
    upper: Exponent          # smallest probe that failed (INF if none up to alpha)
    probes: int

    @property
    def empty(self) -> bool:
        return self.lower == 0

    @property
    def sup(self) -> Exponent:
        return self.upper


def theta_window(params: ProblemParams, epsilon=Fraction(1, 1000),
                 resolution: int = 1024) -> ThetaWindow:
    """Conservative window (0, theta*) of exponent choices passing every claim.

    Probes theta = k/resolution for k = 1, 2, ... and stops at the first
    failure, so every probe below the returned upper end passed.  When the
    first probe already fails, dyadic refinement below 1/resolution is tried.
    """
    eps = None if epsilon is None else as_fraction(epsilon)

    def passes(th: Fraction) -> bool:
        try:
            fam = build_exponent_family(params, th, eps)
        except ValueError:
            return False
        return fam.relations_hold and fam.claims_hold

    step = Fraction(1, resolution)
    probes = 0
    k = 1
    last_ok = _ZERO
    while k * step < params.alpha:
        probes += 1
        if not passes(k * step):
            break
        last_ok = k * step
        k += 1
    else:
        return ThetaWindow(last_ok, params.alpha, probes)
    if last_ok:
        return ThetaWindow(last_ok, k * step, probes)
    th = step
    for _ in range(40):
        th /= 2
        probes += 1
        if passes(th):
            return ThetaWindow(th, 2 * th, probes)
    return ThetaWindow(_ZERO, step, probes)


# ---------------------------------------------------------------- weight in L^gamma

@dataclass(frozen=True)
class WeightCheck:
    gamma: Exponent
    rhs: Fraction
    region: str
    integrable: bool
    reason: str


def weight_exponent_check(params: ProblemParams, theta, r1, region: str) -> WeightCheck:
    """Solve N/gamma - b = theta(2-b)/alpha - N/r1 and test |x|^-b in L^gamma."""
    theta, r1 = as_fraction(theta), as_fraction(r1)
    if region not in ("ball", "exterior"):
        raise ValueError("region must be 'ball' or 'exterior'")
    if not r1 > 1 / theta:
        return WeightCheck(INF, _ZERO, region, False, "precondition r1 > 1/theta fails")
    N, b, al = params.N, params.b, params.alpha
    rhs = theta * (2 - b) / al - Fraction(N) / r1
    inv_gamma = (rhs + b) / N
    gamma = recip(inv_gamma)
    if inv_gamma <= 0:
        return WeightCheck(gamma, rhs, region, False, "gamma not a positive exponent")
    if region == "ball":
        ok = rhs > 0
        why = "N/gamma - b > 0" if ok else "N/gamma - b <= 0 on the ball"
    else:
        ok = rhs < 0
        why = "N/gamma - b < 0" if ok else "N/gamma - b >= 0 on the exterior"
    return WeightCheck(gamma, rhs, region, ok, why)


