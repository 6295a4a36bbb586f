"""EJVP scoring, frequency audit, gas audit, comparison table."""

import math

import numpy as np
import pytest

from drfcuc import drcc, evaluation
from drfcuc.evaluation import (EvalReport, EvaluationError, audit_frequency,
                               audit_gas_feasibility, compare_variants,
                               compute_ejvp, render_table, reports_to_json)
from drfcuc.instance import instance_from_dict
from drfcuc.optmodel import SolveOptions
from drfcuc.scheduler import ModelVariant, run_algorithm1
from tests.conftest import micro_doc


def _fake_solution(pw, rw, horizon):
    """Minimal stand-in with just the wind fields EJVP reads."""
    class Stub:
        wind_dispatch = {"W1": [pw] * horizon}
        pfr_wind = {"W1": [rw] * horizon}
    return Stub()


def _scn(values, provenance="out-of-sample"):
    return drcc.ScenarioSet(np.asarray(values, dtype=float), seed=0,
                            provenance=provenance)


def test_ejvp_zero_when_nothing_committed():
    sol = _fake_solution(0.0, 0.0, 2)
    scn = _scn(np.zeros((50, 1, 2)))
    assert compute_ejvp(sol, scn, ["W1"]) == 0.0


def test_ejvp_hundred_when_capacity_committed():
    sol = _fake_solution(50.0, 0.0, 2)
    scn = _scn(np.full((50, 1, 2), 49.0))
    assert compute_ejvp(sol, scn, ["W1"]) == 100.0


def test_ejvp_order_statistic_by_hand():
    # ten hand-listed samples; threshold between the lowest and the rest
    samples = np.array([5.0, 11, 12, 13, 14, 15, 16, 17, 18, 19]).reshape(10, 1, 1)
    sol = _fake_solution(10.0, 0.0, 1)
    assert compute_ejvp(sol, _scn(samples), ["W1"]) == pytest.approx(10.0)


def test_ejvp_refuses_in_sample_sets():
    sol = _fake_solution(0.0, 0.0, 1)
    with pytest.raises(EvaluationError, match="out-of-sample"):
        compute_ejvp(sol, _scn(np.zeros((5, 1, 1)), provenance="in-sample"),
                     ["W1"])


def test_ejvp_monotone_in_commitment():
    rng = np.random.default_rng(0)
    scn = _scn(rng.normal(20, 3, size=(2000, 1, 3)))
    lows = compute_ejvp(_fake_solution(15.0, 0.0, 3), scn, ["W1"])
    high = compute_ejvp(_fake_solution(17.0, 0.0, 3), scn, ["W1"])
    assert high >= lows


def test_ejvp_per_hour_mode():
    vals = np.ones((100, 1, 2)) * 20.0
    vals[:30, 0, 0] = 5.0            # 30% violations at hour 0 only
    sol = _fake_solution(10.0, 0.0, 2)
    horizon_wide = compute_ejvp(sol, _scn(vals), ["W1"], mode="horizon")
    per_hour = compute_ejvp(sol, _scn(vals), ["W1"], mode="per_hour")
    assert horizon_wide == pytest.approx(30.0)
    assert per_hour == pytest.approx(30.0)
    with pytest.raises(EvaluationError, match="mode"):
        compute_ejvp(sol, _scn(vals), ["W1"], mode="bogus")


def test_ejvp_paired_determinism(micro, solved):
    truth = drcc.ambiguity_from_instance(micro)
    out = drcc.generate_scenarios(truth.mean, truth.std, micro.capacities(),
                                  2000, seed=5, provenance="out-of-sample")
    sol = run_algorithm1(micro, ModelVariant("dr_m"),
                         options=SolveOptions(mip_gap=1e-4))
    a = compute_ejvp(sol, out, [w.wid for w in micro.wind_farms])
    b = compute_ejvp(sol, out, [w.wid for w in micro.wind_farms])
    assert a == b


# -- frequency audit -----------------------------------------------------------


def test_audit_passes_for_constrained_solution(micro):
    sol = run_algorithm1(micro, ModelVariant("dr_m"),
                         options=SolveOptions(mip_gap=1e-4))
    audits = audit_frequency(sol, micro)
    assert len(audits) == micro.horizon
    assert all(a.ok for a in audits)
    # hour metrics respect the configured limits with audit slack
    p = micro.frequency
    for a in audits:
        assert a.rocof <= p.rocof_max + 1e-3
        assert a.nadir <= p.df_max + 1e-3
        assert a.qss <= p.df_qss_max + 1e-6


def test_audit_zero_contingency_trivially_passes(micro):
    doc = micro_doc()
    doc["frequency"]["dP_loss"] = [0.0] * doc["horizon"]
    inst = instance_from_dict(doc)
    sol = run_algorithm1(inst, ModelVariant("dr_m"),
                         options=SolveOptions(mip_gap=1e-4))
    audits = audit_frequency(sol, inst)
    assert all(a.ok for a in audits)
    assert all(a.nadir == 0.0 for a in audits)


def test_audit_zero_inertia_catastrophic_fail(micro):
    sol = run_algorithm1(micro, ModelVariant("dr_m"),
                         options=SolveOptions(mip_gap=1e-4))
    # forge an all-off hour
    for g in sol.commit:
        sol.commit[g] = [0] + sol.commit[g][1:]
    for w in sol.vi_commit:
        sol.vi_commit[w] = [0] + sol.vi_commit[w][1:]
    audits = audit_frequency(sol, micro)
    assert not audits[0].ok
    assert math.isinf(audits[0].rocof)


def test_hourly_csv_export(tmp_path, micro):
    sol = run_algorithm1(micro, ModelVariant("dr_m"),
                         options=SolveOptions(mip_gap=1e-4))
    audits = audit_frequency(sol, micro)
    path = tmp_path / "audit.csv"
    evaluation.write_hourly_csv(audits, path)
    lines = path.read_text().splitlines()
    assert len(lines) == micro.horizon + 1


# -- gas audit ------------------------------------------------------------------


def test_feasible_schedule_audits_feasible(micro):
    sol = run_algorithm1(micro, ModelVariant("dr_m"),
                         options=SolveOptions(mip_gap=1e-4))
    verdict = audit_gas_feasibility(sol, micro)
    assert verdict.feasible
    assert verdict.total_slack <= verdict.threshold


def test_gfu_demand_above_source_capacity_is_infeasible(micro):
    doc = micro_doc()
    doc["gas_network"]["sources"][0]["flow_max"] = 360.0   # just the gas load
    inst = instance_from_dict(doc)
    sol = run_algorithm1(micro, ModelVariant("no_ngs"),
                         options=SolveOptions(mip_gap=1e-4))
    verdict = audit_gas_feasibility(sol, inst)
    assert verdict.status == "infeasible"
    assert verdict.total_slack > verdict.threshold
    assert verdict.slack_by_node      # at least one named node


def test_zero_gfu_draw_with_covered_loads_is_feasible(micro):
    sol = run_algorithm1(micro, ModelVariant("no_ngs"),
                         options=SolveOptions(mip_gap=1e-4))
    # zero out the GFU schedule: only the pipeline loads remain
    for g in micro.gfus():
        sol.dispatch[g.gid] = [0.0] * micro.horizon
        sol.pfr_gen[g.gid] = [0.0] * micro.horizon
    verdict = audit_gas_feasibility(sol, micro)
    assert verdict.feasible


# -- comparison -----------------------------------------------------------------


def test_compare_variants_table(micro, tmp_path):
    reports = compare_variants(
        micro, [ModelVariant("saa"), ModelVariant("dr_m")],
        sample_sizes=[10], out_sample_size=500, seed=3,
        options=SolveOptions(mip_gap=1e-3), audit_freq=False)
    assert len(reports) == 2
    assert all(not r.error for r in reports)
    saa, dr_m = reports
    assert saa.total_cost <= dr_m.total_cost + 1e-6
    table = render_table(reports)
    assert "variant" in table and "saa" in table and "dr_m" in table
    reports_to_json(reports, tmp_path / "cmp.json")
    assert (tmp_path / "cmp.json").exists()


def test_compare_records_failures_in_row(micro):
    reports = compare_variants(
        micro, [ModelVariant("dr_u", epsilon=0.3)],   # violates the 1/6 rule
        sample_sizes=[10], out_sample_size=100,
        options=SolveOptions(mip_gap=1e-3), audit_freq=False)
    assert len(reports) == 1
    assert reports[0].error
    assert "1/6" in reports[0].error
