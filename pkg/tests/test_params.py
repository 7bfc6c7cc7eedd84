from fractions import Fraction as F

import pytest
from hypothesis import given, strategies as st

from inls.params import (INF, ParameterError, as_fraction, build_exponent_family,
                         critical_index, dual, is_admissible, make_params, recip,
                         theta_window, validate_params, weight_exponent_check)


def test_critical_index_value():
    v = validate_params(3, F(1, 2), 2)
    assert v.ok and v.s_c == F(3, 4)


@pytest.mark.parametrize("N,b,alpha,regime", [
    (3, "1/2", "1/2", "mass-subcritical"),
    (3, "1/2", "1", "mass-critical"),
    (3, "1/2", "3", "energy-critical"),
    (3, "1/2", "4", "energy-supercritical"),
    (2, "1/2", "3/2", "mass-critical"),
    (3, "2", "1", "b out of range"),
    (1, "1/2", "1", "dimension out of range"),
])
def test_invalid_regimes(N, b, alpha, regime):
    v = validate_params(N, b, alpha)
    assert not v.ok and v.regime == regime
    with pytest.raises(ParameterError):
        v.unwrap()


def test_two_dimensions_have_no_upper_bound():
    assert validate_params(2, "1/2", "1000").ok


def test_validate_never_raises_on_garbage():
    assert not validate_params(3, "1/0", 2).ok
    assert not validate_params("x", "1/2", 2).ok


def test_floats_are_rejected():
    with pytest.raises(TypeError):
        as_fraction(0.5)


def test_recip_and_dual():
    assert recip(INF) == 0 and recip(F(0)) is INF
    assert dual(F(2)) == 2 and dual(INF) == 1 and dual(F(1)) is INF


def test_hat_pair_is_hs_admissible_for_small_theta():
    fam = build_exponent_family(make_params(3, "1/2", "2"), F(1, 100))
    checks = {p.name: p for p in fam.admissibility_verdicts}
    assert checks["(hat_a, hat_r)"].verdict.ok
    assert checks["(hat_a, hat_r)"].s == F(3, 4)


def test_duality_relation_exact_for_reference_case():
    fam = build_exponent_family(make_params(3, "1/2", "2"), F(1, 100))
    rel = {r.name: r for r in fam.relations}
    assert rel["dual tilde_a"].holds
    assert rel["s_c = N/hat_p - N/hat_r"].holds


def test_planar_family_a_exceeds_four():
    fam = build_exponent_family(make_params(2, "1/2", "3"), F(1, 100), F(1, 100))
    assert fam.pairs["a"] > 4
    assert fam.relations_hold and fam.claims_hold


def test_degenerate_theta_is_a_value_error():
    p = make_params(3, "1/2", "2")
    with pytest.raises(ValueError):
        build_exponent_family(p, 1)
    with pytest.raises(ValueError):
        build_exponent_family(p, 0)


def test_json_is_string_exact():
    js = build_exponent_family(make_params(3, "1/2", "2"), F(1, 10)).to_json()
    assert js["all_pass"] is True
    assert all(isinstance(v, str) for v in js["pairs"].values())


def test_window_reference_case():
    w = theta_window(make_params(3, "1/2", "2"))
    assert not w.empty
    assert w.upper - w.lower <= F(1, 1024)
    # every probe below the upper end passed, so interior points certify
    fam = build_exponent_family(make_params(3, "1/2", "2"), w.lower / 2, F(1, 1000))
    assert fam.relations_hold and fam.claims_hold


def test_weight_check_ball_and_exterior_radii():
    p = make_params(3, "1/2", "2")
    th = F(1, 2)
    assert weight_exponent_check(p, th, F(6) / th, "ball").integrable
    assert weight_exponent_check(p, th, F(2) / th, "exterior").integrable


def test_weight_check_planar_ball_fails_at_limit():
    p = make_params(2, "1/2", "3")
    th = F(1, 2)
    r1 = F(2) * p.alpha / (2 - p.b) / th
    assert not weight_exponent_check(p, th, r1, "ball").integrable


# ---------------------------------------------------------------- properties

valid_triples = st.one_of(
    st.tuples(st.just(3), st.fractions(F(1, 20), F(29, 20), max_denominator=20),
              st.fractions(F(1, 50), F(49, 50), max_denominator=50)),
    st.tuples(st.just(2), st.fractions(F(1, 20), F(19, 20), max_denominator=20),
              st.fractions(F(1, 50), F(5), max_denominator=50)),
)


def _params(t):
    N, b, u = t
    lo = (4 - 2 * b) / N
    alpha = lo + u * ((4 - 2 * b) / (N - 2) - lo) if N > 2 else lo + u
    return make_params(N, b, alpha)


@given(valid_triples)
def test_critical_index_is_intercritical(t):
    p = _params(t)
    assert 0 < p.s_c < 1
    assert p.s_c == critical_index(p.N, p.b, p.alpha)


@given(valid_triples, st.fractions(F(1, 1000), F(1, 2), max_denominator=1000))
def test_relations_hold_exactly(t, theta):
    p = _params(t)
    if theta >= p.alpha:
        return
    try:
        fam = build_exponent_family(p, theta, F(1, 1000))
    except ValueError:
        return
    assert fam.relations_hold, fam.first_failure()


@given(st.integers(2, 5), st.fractions(F(-9, 10), F(9, 10), max_denominator=30),
       st.fractions(F(1, 10), F(10), max_denominator=30))
def test_admissibility_scaling_is_necessary(N, s, q):
    # r solved from the scaling relation; perturbing it must break admissibility
    inv_r = (F(N, 2) - s - 2 / q) / N
    if inv_r <= 0:
        return
    r = 1 / inv_r
    assert not is_admissible(q, r * F(11, 10), s, N).ok
