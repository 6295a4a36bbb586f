"""Swing simulation, closed-form nadir, the inertia-response root, and
the big-M frequency rows."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from drfcuc.freq import (FrequencyError, FrequencySnapshot, build_frequency_block,
                         deadband_crossing_time, kappa_requirement,
                         nadir_closed_form, pfr_big_m, simulate_swing,
                         snapshot_from_schedule, solve_kappa, system_inertia)
from drfcuc.instance import FrequencyParams, instance_from_dict
from drfcuc.optmodel import Model
from tests.conftest import micro_doc


def params_with(dp=20.0, t_db=0.05, **over):
    base = dict(damping=0.01, f0=50.0, df_db=0.015, t_db=t_db,
                delivery_time=10.0, rocof_max=0.125, f_min=49.2,
                df_qss_max=0.2, dp_loss=(dp,))
    base.update(over)
    return FrequencyParams(**base)


def snapshot(r_total, h_total, load=400.0, dp=20.0):
    return FrequencySnapshot(hour=0, gen_status={}, vi_status={},
                             gen_pfr={"g": r_total}, wind_pfr={}, load=load,
                             contingency=dp, inertia=h_total, total_pfr=r_total)


# -- simulation -------------------------------------------------------------


def test_no_disturbance_flat_trajectory():
    traj = simulate_swing(snapshot(10.0, 50.0, dp=0.0), params_with(dp=0.0),
                          horizon=5.0)
    assert np.allclose(traj.deviation, 0.0)
    assert traj.rocof == 0.0 and traj.nadir == 0.0 and traj.qss == 0.0


def test_initial_slope_is_contingency_over_inertia():
    h = 60.0
    dp = 18.0
    traj = simulate_swing(snapshot(20.0, h, dp=dp), params_with(dp=dp),
                          horizon=2.0)
    assert traj.rocof == pytest.approx(dp / (2 * h), rel=1e-3)


def test_simulated_nadir_matches_closed_form_at_binding_point():
    load, dp = 400.0, 20.0
    params = params_with(dp=dp)
    kappa = solve_kappa(params, dp, load)
    r = 25.0
    h = kappa / r
    t_db = deadband_crossing_time(h, params, dp, load)
    p = params_with(dp=dp, t_db=t_db)
    traj = simulate_swing(snapshot(r, h, load, dp), p, horizon=60.0)
    assert traj.nadir == pytest.approx(p.df_max, abs=1e-3)
    assert traj.nadir == pytest.approx(nadir_closed_form(r, h, p, dp, load),
                                       abs=1e-6)


def test_qss_is_residual_over_damping():
    p = params_with()
    traj = simulate_swing(snapshot(12.0, 50.0), p, horizon=60.0)
    assert traj.qss == pytest.approx((20.0 - 12.0) / (0.01 * 400.0), abs=1e-9)


def test_simulation_guards():
    with pytest.raises(FrequencyError, match="inertia"):
        simulate_swing(snapshot(10.0, 0.0), params_with())
    with pytest.raises(FrequencyError, match="1 ms"):
        simulate_swing(snapshot(10.0, 50.0), params_with(), dt=0.01)


def test_trajectory_export(tmp_path):
    traj = simulate_swing(snapshot(20.0, 50.0), params_with(), horizon=1.0)
    csv_path = tmp_path / "traj.csv"
    traj.write_csv(csv_path)
    lines = csv_path.read_text().splitlines()
    assert lines[0] == "tau_s,delta_f_hz"
    assert len(lines) == len(traj.time) + 1
    traj.write_metrics(tmp_path / "metrics.json")
    assert (tmp_path / "metrics.json").exists()


# -- closed form and kappa --------------------------------------------------


def test_nadir_limit_at_dead_band():
    p = params_with()
    dprime = 0.01 * 400.0
    eps = 1e-9
    val = nadir_closed_form(20.0, 50.0, p, dprime * p.df_db + eps, 400.0)
    assert val == pytest.approx(p.df_db, abs=1e-6)


def test_nadir_decreases_with_inertia():
    p = params_with()
    lo = nadir_closed_form(20.0, 40.0, p, 20.0, 400.0)
    hi = nadir_closed_form(20.0, 80.0, p, 20.0, 400.0)
    assert hi < lo


def test_nadir_guards():
    p = params_with()
    with pytest.raises(FrequencyError):
        nadir_closed_form(0.0, 50.0, p, 20.0, 400.0)
    with pytest.raises(FrequencyError, match="dead band"):
        nadir_closed_form(20.0, 50.0, p, 0.001, 400.0)


def test_kappa_residual_below_tolerance():
    p = params_with()
    load, dp = 400.0, 20.0
    kappa = solve_kappa(p, dp, load)
    dprime = p.damping * load
    a = p.delivery_time * dprime * (dp - dprime * p.df_db)
    lhs = 2 * kappa / p.delivery_time * math.log(2 * kappa / (a + 2 * kappa))
    rhs = dprime ** 2 * (p.df_max - p.df_db) - dprime * (dp - dprime * p.df_db)
    assert abs(lhs - rhs) <= 1e-9 * max(1.0, abs(rhs))


def test_kappa_binds_nadir_exactly():
    p = params_with()
    kappa = solve_kappa(p, 20.0, 400.0)
    for r in (19.2, 30.0, 45.0):
        assert nadir_closed_form(r, kappa / r, p, 20.0, 400.0) == \
            pytest.approx(p.df_max, abs=1e-6)


def test_kappa_monotone_in_contingency():
    p = params_with()
    k1 = solve_kappa(p, 20.0, 400.0)
    k2 = solve_kappa(p, 22.0, 400.0)
    assert k2 > k1


def test_kappa_deterministic():
    p = params_with()
    vals = {solve_kappa(p, 20.0, 400.0) for _ in range(5)}
    assert len(vals) == 1


def test_kappa_requirement_degenerates_to_zero():
    p = params_with()
    # damping alone absorbs a small contingency: no requirement
    assert kappa_requirement(p, 0.001, 400.0) == 0.0
    with pytest.raises(FrequencyError):
        solve_kappa(p, 0.001, 400.0)


# -- frequency block --------------------------------------------------------


def _toy_instance():
    doc = micro_doc()
    return instance_from_dict(doc)


def _block_on_fresh_model(inst, kappa=500.0, hour=0):
    model = Model()
    x = {g.gid: model.add_binary(f"x[{g.gid}]") for g in inst.generators}
    y = {w.wid: model.add_binary(f"y[{w.wid}]") for w in inst.wind_farms}
    rg = {g.gid: model.add_var(f"rg[{g.gid}]", 0, g.reserve_max)
          for g in inst.generators}
    rw = {w.wid: model.add_var(f"rw[{w.wid}]", 0, w.reserve_max)
          for w in inst.wind_farms}
    block = build_frequency_block(model, inst, hour, x, y, rg, rw, kappa=kappa)
    return model, block, x, y, rg, rw


def test_block_row_count():
    inst = _toy_instance()
    n_before_rows = 0
    model, block, *_ = _block_on_fresh_model(inst)
    expected_big_m = (len(inst.generators) + len(inst.wind_farms)) * 4
    assert len(block.big_m_rows) == expected_big_m
    assert len(model.rows) - n_before_rows == expected_big_m + 3


def test_rocof_row_rhs_matches_textbook_case():
    # 805.2 MW loss at 0.5 Hz/s RoCoF limit needs 805.2 MW s/Hz of inertia
    doc = micro_doc(horizon=1)
    doc["frequency"]["rocof_max"] = 0.5
    doc["frequency"]["dP_loss"] = [805.2]
    doc["frequency"]["df_qss_max"] = 0.25
    # scale loads so the qss row stays meaningful
    inst = instance_from_dict(doc)
    model, block, *_ = _block_on_fresh_model(inst, kappa=0.0)
    assert block.rocof_row.rhs == pytest.approx(805.2 / (2 * 0.5) / 1.0 * 1.0)
    assert block.rocof_row.rhs == pytest.approx(805.2)


def test_zero_commitment_fails_rocof():
    inst = _toy_instance()
    model, block, x, y, rg, rw = _block_on_fresh_model(inst, kappa=0.0)
    values = np.zeros(model.num_vars)
    # all off: inertia row lhs = 0 < rhs
    assert block.rocof_row.violation(values) > 0


def test_kappa_missing_rejected():
    inst = _toy_instance()
    with pytest.raises(FrequencyError, match="kappa"):
        _block_on_fresh_model(inst, kappa=None)
    with pytest.raises(FrequencyError, match="big-M"):
        model = Model()
        x = {g.gid: model.add_binary("x" + g.gid) for g in inst.generators}
        y = {w.wid: model.add_binary("y" + w.wid) for w in inst.wind_farms}
        rg = {g.gid: model.add_var("rg" + g.gid) for g in inst.generators}
        rw = {w.wid: model.add_var("rw" + w.wid) for w in inst.wind_farms}
        build_frequency_block(model, inst, 0, x, y, rg, rw, kappa=1.0,
                              big_m=-1.0)


def _feasible_in_auxiliaries(inst, block, model, x, y, rg, rw,
                             statuses, pfr_values):
    """LP feasibility of the block's rows with binaries and PFR fixed."""
    n = model.num_vars
    lb = list(model.lb)
    ub = list(model.ub)
    for gid, var in x.items():
        lb[var.idx] = ub[var.idx] = statuses[gid]
    for wid, var in y.items():
        lb[var.idx] = ub[var.idx] = statuses[wid]
    for gid, var in rg.items():
        lb[var.idx] = ub[var.idx] = pfr_values[gid]
    for wid, var in rw.items():
        lb[var.idx] = ub[var.idx] = pfr_values[wid]
    a_ub, b_ub, a_eq, b_eq = [], [], [], []
    for row in model.rows:
        dense = np.zeros(n)
        for i, coef in row.coeffs.items():
            dense[i] = coef
        if row.sense == "<=":
            a_ub.append(dense)
            b_ub.append(row.rhs)
        elif row.sense == ">=":
            a_ub.append(-dense)
            b_ub.append(-row.rhs)
        else:
            a_eq.append(dense)
            b_eq.append(row.rhs)
    res = linprog(np.zeros(n), A_ub=np.array(a_ub) if a_ub else None,
                  b_ub=np.array(b_ub) if b_ub else None,
                  A_eq=np.array(a_eq) if a_eq else None,
                  b_eq=np.array(b_eq) if b_eq else None,
                  bounds=list(zip(lb, ub)), method="highs")
    return res.status == 0


def test_big_m_rows_exactly_linearize_the_bilinear_requirement():
    """Enumerate every binary assignment of a 2-generator, 1-farm case:
    the auxiliary rows are feasible exactly when R_t * H_t >= kappa."""
    inst = _toy_instance()
    kappa = 600.0
    f0 = inst.frequency.f0
    rng = np.random.default_rng(3)
    for bits in range(8):
        statuses = {"G1": (bits >> 0) & 1, "G2": (bits >> 1) & 1,
                    "W1": (bits >> 2) & 1}
        for _ in range(5):
            pfr = {"G1": rng.uniform(0, 30) * statuses["G1"],
                   "G2": rng.uniform(0, 25) * statuses["G2"],
                   "W1": rng.uniform(0, 15) * statuses["W1"]}
            model, block, x, y, rg, rw = _block_on_fresh_model(inst, kappa=kappa)
            # drop the RoCoF/QSS rows: this check isolates the nadir rows
            model.rows = [r for r in model.rows
                          if not (r.name.startswith("freq.rocof")
                                  or r.name.startswith("freq.qss"))]
            h_t = system_inertia(inst, statuses, statuses)
            r_t = sum(pfr.values())
            bilinear_holds = r_t * h_t >= kappa - 1e-9
            lp_feasible = _feasible_in_auxiliaries(
                inst, block, model, x, y, rg, rw, statuses, pfr)
            assert lp_feasible == bilinear_holds, (statuses, pfr, r_t * h_t)


def test_block_feasible_points_pass_simulation(micro):
    """Any commitment satisfying the emitted rows also passes the
    simulation-based limits (sufficiency of the linearized rows)."""
    inst = micro
    t = 0
    kappa = kappa_requirement(inst.frequency, inst.contingency(t),
                              inst.total_load(t))
    statuses = {"G1": 1, "G2": 1, "W1": 1}
    pfr = {"G1": 8.0, "G2": 6.0, "W1": 4.0}
    h_t = system_inertia(inst, statuses, statuses)
    r_t = sum(pfr.values())
    # the chosen point satisfies all three analytic requirements
    dp = inst.contingency(t)
    dprime = inst.frequency.damping * inst.total_load(t)
    assert h_t >= dp / (2 * inst.frequency.rocof_max)
    assert r_t * h_t >= kappa
    assert (dp - r_t) / dprime <= inst.frequency.df_qss_max
    snap = snapshot_from_schedule(inst, t, statuses, {"W1": 1},
                                  {k: pfr[k] for k in ("G1", "G2")},
                                  {"W1": pfr["W1"]})
    traj = simulate_swing(snap, inst.frequency, horizon=60.0)
    assert traj.rocof <= inst.frequency.rocof_max * (1 + 1e-3)
    assert traj.nadir <= inst.frequency.df_max + 1e-3
    assert traj.qss <= inst.frequency.df_qss_max + 1e-6


@settings(max_examples=20, deadline=None)
@given(st.floats(300.0, 500.0), st.floats(0.04, 0.06))
def test_kappa_consistency_property(load, frac):
    """For varied loads and contingency fractions the root always binds
    the closed form at the limit."""
    p = params_with(dp=frac * load)
    dp = frac * load
    kappa = solve_kappa(p, dp, load)
    assert kappa > 0
    assert nadir_closed_form(30.0, kappa / 30.0, p, dp, load) == \
        pytest.approx(p.df_max, abs=1e-6)
