import math

import numpy as np
import pytest

from inls.diagnostics import (FarTranslationRow, classify_threshold, coercivity_check,
                              far_cutoff, far_translated_data, far_translation_experiment,
                              lemma_quantity, loglog_slope, make_virial_weight,
                              scattering_diagnostic, translate, virial_contradiction_monitor,
                              virial_error_bound, virial_monitors, virial_z, virial_zprime,
                              virial_zsecond)
from inls.evolution import EvolutionConfig, evolve
from inls.groundstate import scaled_energy
from inls.params import make_params
from inls.spectral import Grid, SpectralField, h1_norm, make_weight, random_smooth_field

P3 = make_params(3, "1/2", "2")


@pytest.fixture(params=["gs_radial3", "gs_cart"])
def gs(request):
    return request.getfixturevalue(request.param)


def test_half_ground_state_is_subthreshold(gs):
    c = 0.5
    rep = classify_threshold(SpectralField(gs.grid, c * gs.Q.values), gs, gs.params)
    sc = float(gs.params.s_c)
    assert rep.grad_ratio == pytest.approx(c, rel=1e-12)
    me = scaled_energy(c, gs) ** sc * (c * c * gs.mass) ** (1 - sc) / gs.threshold_ME
    assert rep.ME_ratio == pytest.approx(me, rel=1e-10)
    assert rep.classification == "sub-threshold"


def test_ground_state_is_at_threshold(gs):
    assert classify_threshold(gs.Q, gs, gs.params).classification == "at-threshold"


def test_amplitude_search_finds_negative_energy(gs):
    g = gs.grid
    shape = np.exp(-g.r ** 2)
    amp = 0.5
    while classify_threshold(SpectralField(g, amp * shape), gs, gs.params).energy >= 0:
        amp *= 1.5
        assert amp < 1e3
    rep = classify_threshold(SpectralField(g, amp * shape), gs, gs.params)
    assert rep.classification == "negative-energy" and rep.ME_ratio is None


def test_above_threshold(gs):
    rep = classify_threshold(SpectralField(gs.grid, 1.01 * gs.Q.values), gs, gs.params)
    assert rep.classification in ("above-threshold", "negative-energy")


def test_coercivity_half_ground_state(gs):
    rep = coercivity_check(SpectralField(gs.grid, 0.5 * gs.Q.values), gs, gs.params)
    assert rep.applicable
    assert rep.energy_ratio > 0 and rep.gap > 0 and rep.virial_quantity > 0


def test_coercivity_rejects_ground_state(gs):
    assert not coercivity_check(gs.Q, gs, gs.params).applicable


def test_quadratic_virial_matches_lemma_quantity(gs):
    vw = make_virial_weight(gs.grid, "quadratic")
    zpp = virial_zsecond(gs.Q, vw, gs.weight, gs.params)
    lq = lemma_quantity(gs.Q, gs.weight, gs.params)
    scale = 8 * gs.kinetic
    assert abs(zpp - lq) <= 1e-8 * scale


def test_lemma_quantity_vanishes_at_ground_state(gs_radial3):
    gs = gs_radial3
    assert abs(lemma_quantity(gs.Q, gs.weight, gs.params)) < 1e-3 * gs.kinetic


def test_localized_weight_is_quadratic_inside():
    g = Grid.radial(3, 32, 512)
    vw = make_virial_weight(g, "localized", 4.0)
    inner = g.r <= 4.0
    assert np.allclose(vw.phi[inner] * 16, g.r[inner] ** 2)
    assert np.all(vw.laplacian_phi[inner] == 6.0)
    assert np.all(vw.phi[g.r >= 8.0] == 0)


def test_localized_virial_agrees_with_quadratic_for_compact_data():
    g = Grid.radial(3, 32, 512)
    w = make_weight(g, 0.5)
    u = np.exp(-2 * g.r ** 2 + 0.4j * g.r ** 2)
    loc, quad_ = make_virial_weight(g, "localized", 6.0), make_virial_weight(g, "quadratic")
    for fn in (virial_z, virial_zprime):
        assert fn(u, loc) == pytest.approx(fn(u, quad_), rel=1e-9)
    assert virial_zsecond(u, loc, w, P3) == pytest.approx(virial_zsecond(u, quad_, w, P3), rel=1e-8)


def test_virial_derivatives_along_flow():
    g = Grid.radial(3, 32, 512)
    w = make_weight(g, 0.5)
    vw = make_virial_weight(g, "localized", 4.0)
    u0 = SpectralField(g, np.exp(-g.r ** 2 + 0.3j * g.r ** 2))
    errs = []
    for dt in (4e-3, 2e-3):
        cfg = EvolutionConfig(w, 2.0, dt=dt, t_final=0.4, monitor_stride=1, snapshot_stride=10 ** 9)
        tr = evolve(u0, cfg, virial_monitors(vw, w, P3, with_error=False), keep_snapshots=False)
        z, zp, zpp = (tr.channel(k) for k in ("virial_z", "virial_zp", "virial_zpp"))
        e1 = np.max(np.abs((z[2:] - z[:-2]) / (2 * dt) - zp[1:-1])) / np.max(np.abs(zp))
        e2 = np.max(np.abs((zp[2:] - zp[:-2]) / (2 * dt) - zpp[1:-1])) / np.max(np.abs(zpp))
        errs.append((e1, e2))
    assert errs[1][0] < 1e-4 and errs[1][1] < 1e-3
    assert errs[0][0] / errs[1][0] > 3 and errs[0][1] / errs[1][1] > 3


def test_error_bound_decays_with_radius(gs_radial3):
    gs = gs_radial3
    vals = [virial_error_bound(gs.Q, R, gs.weight, gs.params) for R in (1, 2, 4, 8, 16)]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def _virial_run(amp, R=4.0, T=0.4):
    g = Grid.radial(3, 32, 512)
    w = make_weight(g, 0.5)
    vw = make_virial_weight(g, "localized", R)
    cfg = EvolutionConfig(w, 2.0, dt=2e-3, t_final=T, monitor_stride=2, snapshot_stride=50)
    return evolve(SpectralField(g, amp * np.exp(-g.r ** 2)), cfg, virial_monitors(vw, w, P3))


def test_contradiction_monitor_ftc_and_bound():
    rep = virial_contradiction_monitor(_virial_run(0.5), 4.0, 0.1)
    assert rep.ftc_defect <= rep.ftc_bound
    assert rep.coercive
    assert math.isfinite(rep.zprime_constant) and rep.zprime_constant > 0
    assert math.isfinite(rep.ratio)


def test_soliton_virial_is_not_coercive(gs_radial3):
    gs = gs_radial3
    g = gs.grid
    vw = make_virial_weight(g, "localized", 8.0)
    cfg = EvolutionConfig(gs.weight, 2.0, dt=1e-4, t_final=0.02, monitor_stride=20,
                          snapshot_stride=10 ** 9)
    tr = evolve(gs.Q, cfg, virial_monitors(vw, gs.weight, gs.params), keep_snapshots=False)
    rep = virial_contradiction_monitor(tr, 8.0, 0.1)
    assert abs(rep.zpp_mean) < 1e-2 * 8 * gs.kinetic
    assert not rep.coercive


def test_small_data_scattering_consistent():
    g = Grid.cartesian(32, 256)
    w = make_weight(g, 0.5)
    # width grows like sqrt(1 + 16 t^2); potential ~ width^-3.5 drops x100 by t ~ 0.9
    cfg = EvolutionConfig(w, 3.0, dt=2e-3, t_final=1.2, monitor_stride=25, snapshot_stride=25)
    tr = evolve(SpectralField(g, 0.01 * np.exp(-g.r ** 2)), cfg)
    rep = scattering_diagnostic(tr)
    assert not tr.guard_violated
    assert rep.verdict == "scattering-consistent", rep.reason
    assert rep.decay >= 100


def test_soliton_is_not_scattering(gs_radial3):
    gs = gs_radial3
    cfg = EvolutionConfig(gs.weight, 2.0, dt=1e-4, t_final=0.05, monitor_stride=50,
                          snapshot_stride=50, wraparound_guard=False)
    tr = evolve(gs.Q, cfg)
    rep = scattering_diagnostic(tr)
    assert rep.verdict in ("growth", "inconclusive")
    pot = tr.channel("potential")
    assert np.max(np.abs(pot / pot[0] - 1)) < 1e-3


def test_guard_violation_is_inconclusive():
    g = Grid.cartesian(8, 64)
    cfg = EvolutionConfig(make_weight(g, 0.5), 3.0, dt=1e-2, t_final=3, monitor_stride=10,
                          snapshot_stride=10)
    tr = evolve(SpectralField(g, 0.01 * np.exp(-g.r ** 2)), cfg)
    rep = scattering_diagnostic(tr)
    assert tr.guard_violated and rep.verdict == "inconclusive"


def test_far_cutoff_profile():
    g = Grid.cartesian(32, 256)
    chi = far_cutoff(g, 16.0)
    x, y = g.coords
    d = np.hypot(x + 16, y)
    assert np.all(chi[d < 4] == 0) and np.all(chi[d > 8] == 1)


def test_translate_is_exact_shift():
    g = Grid.cartesian(32, 256)
    x, y = g.coords
    u = np.exp(-(x ** 2 + y ** 2))
    shifted = translate(g, u, 8.0)
    assert np.max(np.abs(shifted - np.exp(-((x - 8) ** 2 + y ** 2)))) < 1e-12


def test_far_translated_data_norms():
    g = Grid.cartesian(32, 256)
    psi = SpectralField(g, np.exp(-g.r ** 2))
    assert far_translated_data(psi, 0, 0.5) is psi
    moved = far_translated_data(psi, 8.0, 1.0)
    assert moved.l2() <= psi.l2() * (1 + 1e-12)


def test_far_translation_deviation_decreases():
    g = Grid.cartesian(32, 128)
    psi = SpectralField(g, np.exp(-g.r ** 2))
    rows = far_translation_experiment(psi, [4, 8, 16], 1.0, 0.5, make_weight(g, 0.5), 3.0,
                                      dt=5e-3, samples=10)
    dev = [r.deviation for r in rows]
    assert all(r.status == "completed" for r in rows)
    assert dev[0] > dev[1] > dev[2] > 0
    assert loglog_slope(rows) < 0


def test_far_translation_skips_rows_outside_margin():
    g = Grid.cartesian(16, 64)
    psi = SpectralField(g, np.exp(-g.r ** 2))
    (row,) = far_translation_experiment(psi, [14], 1.0, 0.1, make_weight(g, 0.5), 3.0, dt=1e-2)
    assert row.status == "skipped" and math.isnan(row.deviation)


def test_loglog_slope_exact_power():
    rows = [FarTranslationRow(x, "completed", x ** -1.5, 0, 0, 0) for x in (4, 8, 16, 24)]
    assert loglog_slope(rows) == pytest.approx(-1.5)
