"""Commitment core semantics, objective arithmetic, assembly structure,
and the sequential solve on a small case."""

import json
import math

import numpy as np
import pytest

from drfcuc import drcc
from drfcuc.instance import instance_from_dict
from drfcuc.optmodel import BINARY, SolveOptions, solve_misocp
from drfcuc.scheduler import (AssembledModel, InfeasibleModelError, ModelVariant,
                              SchedulerError, assemble, build_objective,
                              compute_kappas, load_solution, run_algorithm1)
from tests.conftest import micro_doc


def test_variant_validation():
    with pytest.raises(SchedulerError, match="unknown variant"):
        ModelVariant("nope")
    with pytest.raises(SchedulerError):
        ModelVariant("saa", sample_size=0)
    v = ModelVariant("dr_u")
    assert v.unimodal and not v.individual and v.uses_gas


def test_unimodal_epsilon_hypothesis_enforced(micro):
    with pytest.raises(SchedulerError, match="1/6"):
        assemble(micro, ModelVariant("dr_u", epsilon=0.2))
    with pytest.raises(SchedulerError, match="1/6"):
        assemble(micro, ModelVariant("dr_u_i", epsilon=0.3))


def test_min_up_window_semantics():
    """A start at hour 2 with a 3-hour minimum keeps the unit on through
    hour 4: forcing it off at hour 4 is infeasible."""
    doc = micro_doc(horizon=6)
    doc["generators"][0].update(min_up=3, min_down=1)
    # light the load so the other unit can carry hours with G1 forced off
    doc["power_network"]["loads"][0]["series"] = [85.0] * 6
    doc["frequency"]["dP_loss"] = [0.05 * 85.0] * 6
    inst = instance_from_dict(doc)
    variant = ModelVariant("no_ngs")
    for off_hour, feasible in ((4, False), (5, True)):
        assembled = assemble(inst, variant)
        uv = assembled.uc
        m = assembled.model
        # force: off at 0..1, start at hour 2, off again at off_hour
        for t in (0, 1):
            m.ub[uv.x["G1"][t].idx] = 0.0
        m.lb[uv.x["G1"][2].idx] = 1.0
        m.ub[uv.x["G1"][off_hour].idx] = 0.0
        res = solve_misocp(m, SolveOptions(mip_gap=0.0))
        assert res.ok == feasible, off_hour


def test_off_forces_zero_output_and_reserve(micro):
    assembled = assemble(micro, ModelVariant("no_ngs"))
    uv, m = assembled.uc, assembled.model
    m.ub[uv.x["G2"][0].idx] = 0.0       # G1 plus wind can carry hour 0
    res = solve_misocp(m, SolveOptions(mip_gap=0.0))
    assert res.ok
    assert res.value(uv.p["G2"][0]) == pytest.approx(0.0, abs=1e-9)
    assert res.value(uv.rg["G2"][0]) == pytest.approx(0.0, abs=1e-9)


def test_line_limit_makes_transfer_infeasible():
    """One 100 MW line cannot carry a 150 MW transfer."""
    doc = micro_doc(horizon=2)
    doc["power_network"]["lines"][0]["capacity"] = 100.0
    doc["power_network"]["loads"][0]["series"] = [150.0, 150.0]
    doc["wind_farms"] = []          # all power must cross the line
    doc["generators"][1].update(p_min=0.0, p_max=0.0, reserve_max=0.0,
                                gas_node=None, conversion=None,
                                kind="non_gfu")   # bus-2 unit cannot help
    doc["frequency"]["dP_loss"] = [1.0, 1.0]
    doc["frequency"]["rocof_max"] = 10.0
    inst = instance_from_dict(doc)
    with pytest.raises(InfeasibleModelError) as err:
        run_algorithm1(inst, ModelVariant("no_ngs"),
                       options=SolveOptions(mip_gap=0.0))
    assert "line limits" in str(err.value) or "line" in str(err.value.diagnostic)


def test_objective_single_startup_cost(micro):
    assembled = assemble(micro, ModelVariant("dr_m"))
    obj = build_objective(micro, assembled.uc)
    x = np.zeros(assembled.model.num_vars)
    assert obj.value(x) == pytest.approx(0.0)
    x[assembled.uc.zu["G1"][1].idx] = 1.0
    assert obj.value(x) == pytest.approx(micro.generators[0].cost_startup)


def test_objective_matches_term_by_term_recomputation(micro):
    assembled = assemble(micro, ModelVariant("no_ngs"))
    uv = assembled.uc
    rng = np.random.default_rng(4)
    x = np.zeros(assembled.model.num_vars)
    expected = 0.0
    for g in micro.generators:
        for t in range(micro.horizon):
            xv, zu, zd = rng.integers(0, 2, 3)
            p, r = rng.uniform(0, 50), rng.uniform(0, 10)
            x[uv.x[g.gid][t].idx] = xv
            x[uv.zu[g.gid][t].idx] = zu
            x[uv.zd[g.gid][t].idx] = zd
            x[uv.p[g.gid][t].idx] = p
            x[uv.rg[g.gid][t].idx] = r
            expected += (g.cost_startup * zu + g.cost_shutdown * zd
                         + g.cost_no_load * xv + g.cost_energy * p
                         + g.cost_pfr * r)
    for w in micro.wind_farms:
        for t in range(micro.horizon):
            yv = rng.integers(0, 2)
            rw = rng.uniform(0, 10)
            x[uv.y[w.wid][t].idx] = yv
            x[uv.rw[w.wid][t].idx] = rw
            expected += w.cost_vi * yv + w.cost_pfr * rw
    obj = build_objective(micro, uv)
    assert obj.value(x) == pytest.approx(expected, abs=1e-9)


# -- assembly structure -------------------------------------------------------


def test_dr_m_has_one_budget_row_per_hour(iegs5):
    assembled = assemble(iegs5, ModelVariant("dr_m"))
    budget = [r for r in assembled.model.rows if r.name.startswith("drcc.budget")]
    assert len(budget) == iegs5.horizon == 24


def test_no_ngs_variant_has_zero_gas_vars(iegs5):
    assembled = assemble(iegs5, ModelVariant("no_ngs"))
    assert assembled.gas is None
    assert not any(n.startswith("gas.") for n in assembled.model.var_names)
    assert not any(r.name.startswith("gas.") for r in assembled.model.rows)


def test_saa_scenario_binaries_per_hour(iegs5):
    assembled = assemble(iegs5, ModelVariant("saa", sample_size=20))
    z_names = [n for n, k in zip(assembled.model.var_names,
                                 assembled.model.var_kinds)
               if n.startswith("saa.z") and k == BINARY]
    assert len(z_names) == 20 * iegs5.horizon


def test_no_fc_swaps_frequency_rows_for_reserve(iegs5):
    assembled = assemble(iegs5, ModelVariant("no_fc"))
    assert not assembled.freq_blocks
    assert not any(r.name.startswith("freq.") for r in assembled.model.rows)
    reserve = [r for r in assembled.model.rows if r.name.startswith("uc.reserve")]
    assert len(reserve) == iegs5.horizon
    assert reserve[0].rhs == pytest.approx(iegs5.contingency(0))


def test_no_vi_pins_wind_commitment(iegs5):
    assembled = assemble(iegs5, ModelVariant("no_vi"))
    uv = assembled.uc
    for w in iegs5.wind_farms:
        for t in range(iegs5.horizon):
            assert assembled.model.ub[uv.y[w.wid][t].idx] == 0.0
            assert assembled.model.ub[uv.rw[w.wid][t].idx] == 0.0


def test_assembly_idempotent(iegs5):
    a = assemble(iegs5, ModelVariant("dr_m"))
    b = assemble(iegs5, ModelVariant("dr_m"))
    assert a.model.num_vars == b.model.num_vars
    assert len(a.model.rows) == len(b.model.rows)
    assert len(a.model.socs) == len(b.model.socs)

    def checksum(model):
        acc = 0.0
        for row in model.rows:
            acc += row.rhs + sum(i * c for i, c in row.coeffs.items())
        return acc

    assert checksum(a.model) == pytest.approx(checksum(b.model), rel=1e-15)


def test_kappas_cached_in_assembly(iegs5):
    kappas = compute_kappas(iegs5)
    assembled = assemble(iegs5, ModelVariant("dr_m"), kappas=kappas)
    assert assembled.kappas == kappas
    assert all(k > 0 for k in kappas)


# -- end-to-end on the micro case ----------------------------------------------


@pytest.fixture(scope="module")
def micro_solution(micro):
    return run_algorithm1(micro, ModelVariant("dr_m"),
                          options=SolveOptions(mip_gap=1e-4))


def test_micro_solves_and_converges(micro, micro_solution):
    sol = micro_solution
    assert sol.status == "converged"
    assert sol.max_violation <= 1e-6
    assert sol.objective > 0


def test_cost_breakdown_sums_to_total(micro_solution):
    b = micro_solution.cost_breakdown
    parts = sum(v for k, v in b.items() if k != "total")
    assert b["total"] == pytest.approx(parts, rel=1e-9)
    assert micro_solution.objective == pytest.approx(b["total"])


def test_solution_satisfies_rows_independently(micro, micro_solution):
    """Re-evaluate every row of a fresh assembly at the solution values."""
    sol = micro_solution
    assert sol.assembled is not None
    worst = sol.assembled.model.max_violation(sol.values)
    assert worst <= 1e-6


def test_commitment_logic_consistent(micro, micro_solution):
    sol = micro_solution
    for g in micro.generators:
        x0 = micro.status0(g.gid)
        for t in range(micro.horizon):
            prev = sol.commit[g.gid][t - 1] if t else x0
            assert (sol.startup[g.gid][t] - sol.shutdown[g.gid][t]
                    == sol.commit[g.gid][t] - prev)


def test_weymouth_restored_at_convergence(micro, micro_solution):
    sol = micro_solution
    p = micro.gas_network.pipelines[0]
    c_sq = p.weymouth ** 2
    for t in range(micro.horizon):
        pi_m = sol.gas_state["pressure"][p.from_node][t]
        pi_n = sol.gas_state["pressure"][p.to_node][t]
        f = sol.gas_state["flow"][p.pid][t]
        rel = abs(f ** 2 - c_sq * (pi_m ** 2 - pi_n ** 2)) / (c_sq * pi_m ** 2)
        assert rel <= 1e-3 + 1e-9


def test_solution_json_round_trip(tmp_path, micro_solution):
    path = tmp_path / "sol.json"
    micro_solution.save(path)
    back = load_solution(path)
    assert back.objective == pytest.approx(micro_solution.objective)
    assert back.commit == micro_solution.commit
    assert back.variant == micro_solution.variant
    # reproducibility: identical JSON bytes modulo wall-time fields
    doc1 = json.loads(path.read_text())
    doc1.pop("wall_time")
    doc2 = micro_solution.to_dict()
    doc2.pop("wall_time")
    assert json.loads(json.dumps(doc2, default=float)) == doc1


def test_repeat_solve_is_deterministic(micro, micro_solution):
    again = run_algorithm1(micro, ModelVariant("dr_m"),
                           options=SolveOptions(mip_gap=1e-4))
    assert again.objective == pytest.approx(micro_solution.objective, abs=1e-9)
    assert again.commit == micro_solution.commit
    assert again.iterations == micro_solution.iterations


def test_no_gas_variant_single_solve(micro):
    sol = run_algorithm1(micro, ModelVariant("no_ngs"),
                         options=SolveOptions(mip_gap=1e-4))
    assert sol.status == "converged"
    assert sol.iterations == 0
    assert sol.gas_state == {}
    assert sol.pccp == []
