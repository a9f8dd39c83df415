import csv

import numpy as np
import pytest
from hypothesis import given, strategies as st

from viscophase.coeffs import CoefficientSet, ScalarFunction, compute_c4
from viscophase.dynamics import ModelParams
from viscophase.grid import Grid
from viscophase.relenergy import (RELENERGY_COLUMNS, SWEEP_COLUMNS, GronwallReport, RelEnergyReport,
                                  TwinTrajectory, coupling_bound, gronwall_components,
                                  mix_lower_bound, multi_twin_run, perturbation_sweep,
                                  relative_dissipation, relative_energy, twin_run,
                                  write_relenergy_csv, write_sweep_csv)
from viscophase.state import Perturbation, make_initial, perturb
from viscophase.timestep import SchemeConfig


def test_headers_are_exact():
    assert ",".join(RELENERGY_COLUMNS) == "t,e_mix_rel,e_bulk_rel,e_kin_rel,e_el_rel,e_rel_total,d_rel_total,g_raw,B"
    assert ",".join(SWEEP_COLUMNS) == "eps,E0,Esup,ratio,chat,slope"


def test_identical_states_have_zero_relative_energy(grid, model):
    s = make_initial(grid, "manufactured")
    e = relative_energy(s, s.copy(), 1.0, model.c0, model.potential)
    assert e.total == 0.0
    d = relative_dissipation(s, s.copy(), model)
    assert d.total == 0.0


def test_relative_energy_is_quadratic(grid, model):
    s = make_initial(grid, "taylor_green_mix", seed=2)
    e1 = relative_energy(perturb(s, Perturbation(1e-4)), s, 1.0, model.c0, model.potential).total
    e2 = relative_energy(perturb(s, Perturbation(2e-4)), s, 1.0, model.c0, model.potential).total
    assert e2 / e1 == pytest.approx(4.0, rel=1e-3)


def test_penalty_must_be_nonnegative(grid, model):
    s = make_initial(grid, "spinodal")
    with pytest.raises(ValueError):
        relative_energy(s, s, -1.0, model.c0, model.potential)
    with pytest.raises(ValueError):
        relative_energy(s, make_initial(Grid(16, 16), "spinodal"), 1.0, model.c0, model.potential)


@given(st.integers(0, 2**31), st.floats(0.01, 2.0))
def test_lower_bound_and_nonnegativity(seed, scale):
    g = Grid(16, 16)
    rng = np.random.default_rng(seed)
    c4 = compute_c4(ModelParams().potential)
    a = 0.5 * c4 + 0.5

    def random_state():
        s = make_initial(g, "spinodal", seed=int(rng.integers(1 << 30)), noise=scale)
        return s.with_fields(q=scale * g.random_field(rng), u=scale * g.curl_field(g.random_field(rng)),
                             c=s.c + scale * g.random_field(rng, leading=(3,)))

    z, zbar = random_state(), random_state()
    m = ModelParams()
    e = relative_energy(z, zbar, a, m.c0, m.potential)
    assert e.total >= -1e-12
    assert e.e_mix_rel >= mix_lower_bound(z, zbar, a, m.c0, c4) - 1e-12


def test_gronwall_components_at_uniform_rest(grid, model):
    s = make_initial(grid, "uniform_rest")
    rep = gronwall_components(s, s, model)
    comps = rep.components()
    assert comps["hinf_trc4"] == pytest.approx(8.0)
    assert comps["h4_4"] == pytest.approx(4.0)
    assert comps["trh4_sq"] == pytest.approx(4.0)
    assert comps["trsum_h4"] == pytest.approx(32.0)
    others = {k: v for k, v in comps.items() if k not in ("one", "hinf_trc4", "h4_4", "trh4_sq", "trsum_h4")}
    assert all(abs(v) < 1e-20 for v in others.values()), others
    assert rep.g_raw == pytest.approx(49.0)
    reduced = gronwall_components(s.without_tensor(), s.without_tensor(), model)
    assert reduced.g_raw == pytest.approx(1.0)


def test_coupling_bound_behaviour(grid):
    s = make_initial(grid, "manufactured")
    z = perturb(s, Perturbation(1e-3))
    lhs, rhs = coupling_bound(z, s, ModelParams())
    assert lhs == 0.0 and rhs > 0  # constant A
    m = ModelParams(CoefficientSet(A=ScalarFunction((1.0, 0.3))))
    lhs1, _ = coupling_bound(z, s, m)
    lhs2, _ = coupling_bound(perturb(s, Perturbation(2e-3)), s, m)
    assert lhs1 > 0 and lhs2 / lhs1 == pytest.approx(4.0, rel=1e-2)


def test_zero_perturbation_twin(small_grid, model):
    twin = twin_run(make_initial(small_grid, "spinodal"), Perturbation(0.0), model,
                    SchemeConfig(dt=1e-3, cadence=2), 0.01, monitor_coupling=True)
    assert np.all(twin.e_rel == 0.0)
    assert len(twin.coupling) == len(twin.times)
    assert np.all(np.isnan(twin.gronwall_check()))


def test_twin_records_and_csv(tmp_path, small_grid, model):
    twin = twin_run(make_initial(small_grid, "spinodal"), Perturbation(1e-3), model,
                    SchemeConfig(dt=1e-3, cadence=2), 0.01)
    assert twin.times[0] == 0.0 and twin.times[-1] == pytest.approx(0.01)
    B = twin.gronwall_check()
    assert B[0] == 0.0
    assert np.all(B <= 1e-12)  # growth never beats the unit-constant Gronwall bound here
    write_relenergy_csv(tmp_path / "r.csv", twin)
    rows = list(csv.reader((tmp_path / "r.csv").open()))
    assert rows[0] == RELENERGY_COLUMNS and len(rows) == len(twin.times) + 1


def test_multi_twin_matches_single_twins(small_grid, model):
    s = make_initial(small_grid, "taylor_green_mix")
    cfg = SchemeConfig(dt=1e-3, cadence=3)
    perts = [Perturbation(1e-2, 4), Perturbation(1e-3, 4)]
    many = multi_twin_run(s, perts, model, cfg, 0.01)
    for p, tw in zip(perts, many):
        one = twin_run(s, p, model, cfg, 0.01)
        np.testing.assert_array_equal(one.e_rel, tw.e_rel)


def test_fitted_constant_on_synthetic_series():
    t = np.linspace(0, 1, 6)
    tw = TwinTrajectory(times=list(t))
    tw.energy = [RelEnergyReport(ti, np.exp(0.3 * ti), 0, 0, 0, 1.0) for ti in t]
    tw.gronwall = [GronwallReport() for _ in t]  # g_raw = 1 so G(t) = t
    assert tw.fitted_constant() == pytest.approx(0.3)
    np.testing.assert_allclose(tw.gronwall_check(), -0.7 * t, atol=1e-14)


def test_sweep_argument_checks(small_grid, model):
    s = make_initial(small_grid, "spinodal")
    for amps in ([], [1e-3, 1e-2], [1e-2, 0.0]):
        with pytest.raises(ValueError):
            perturbation_sweep(s, amps, model, SchemeConfig(), 0.01)


def test_small_sweep(tmp_path, small_grid, model):
    s = make_initial(small_grid, "spinodal")
    cfg = SchemeConfig(dt=1e-3, cadence=2)
    rep = perturbation_sweep(s, [1e-2, 1e-3, 1e-4], model, cfg, 0.01)
    assert 1.9 <= rep.slope <= 2.1
    assert rep.passed
    assert rep.chat == rep.rows[-1].chat
    par = perturbation_sweep(s, [1e-2, 1e-3, 1e-4], model, cfg, 0.01, jobs=2)
    assert [r.E0 for r in par.rows] == [r.E0 for r in rep.rows]
    assert [r.Esup for r in par.rows] == [r.Esup for r in rep.rows]
    write_sweep_csv(tmp_path / "s.csv", rep)
    rows = list(csv.reader((tmp_path / "s.csv").open()))
    assert rows[0] == SWEEP_COLUMNS and len(rows) == 4
