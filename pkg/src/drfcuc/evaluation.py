"""Out-of-sample validation and audits.

Provides the empirical joint violation probability on a paired
out-of-sample scenario set, the simulation-based frequency audit of a
schedule, the gas-side feasibility audit of gas-blind schedules, and
the multi-variant comparison table.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import drcc, gasnet, scheduler
from .instance import IegsInstance
from .optmodel import Model, SolveOptions, lin_sum, solve_misocp
from .scheduler import ModelVariant, ScheduleSolution


class EvaluationError(ValueError):
    """Invalid evaluation inputs."""


# ---------------------------------------------------------------------------
# empirical joint violation probability
# ---------------------------------------------------------------------------


def compute_ejvp(solution: ScheduleSolution, out_samples: drcc.ScenarioSet,
                 farm_ids: list[str] | None = None,
                 mode: str = "horizon") -> float:
    """Percentage of out-of-sample scenarios violating any wind
    commitment.

    ``horizon`` counts a sample as violated when any (farm, hour) pair
    breaks P^W + R^W <= realized wind; ``per_hour`` returns the worst
    single-hour violation rate instead.
    """
    if out_samples.n_samples < 1:
        raise EvaluationError("empty out-of-sample set")
    if out_samples.provenance != "out-of-sample":
        raise EvaluationError("refusing to score on samples not tagged "
                              "out-of-sample (paired-testing discipline)")
    farm_ids = farm_ids or sorted(solution.wind_dispatch)
    committed = np.array([[pw + rw for pw, rw in
                           zip(solution.wind_dispatch[w], solution.pfr_wind[w])]
                          for w in farm_ids])
    if committed.shape != out_samples.values.shape[1:]:
        raise EvaluationError(
            f"scenario shape {out_samples.values.shape[1:]} does not match "
            f"schedule shape {committed.shape}")
    violated = out_samples.values < committed[None, :, :] - 1e-9
    if mode == "horizon":
        frac = float(np.mean(np.any(violated, axis=(1, 2))))
    elif mode == "per_hour":
        frac = float(np.max(np.mean(np.any(violated, axis=1), axis=0)))
    else:
        raise EvaluationError(f"unknown EJVP mode {mode!r}")
    return 100.0 * frac


# ---------------------------------------------------------------------------
# frequency audit
# ---------------------------------------------------------------------------


@dataclass
class HourlyFrequencyAudit:
    hour: int
    inertia: float
    total_pfr: float
    rocof: float
    nadir: float
    qss: float
    rocof_ok: bool
    nadir_ok: bool
    qss_ok: bool

    @property
    def ok(self) -> bool:
        return self.rocof_ok and self.nadir_ok and self.qss_ok


ROCOF_AUDIT_TOL = 1e-3       # Hz/s
NADIR_AUDIT_TOL = 1e-3       # Hz
QSS_AUDIT_TOL = 1e-6         # Hz


def audit_frequency(solution: ScheduleSolution, instance: IegsInstance,
                    dt: float = 1e-3, horizon: float = 40.0
                    ) -> list[HourlyFrequencyAudit]:
    """Re-simulate every hour's post-contingency response and check the
    three frequency limits.  A zero-inertia hour is reported as a
    catastrophic failure rather than an exception."""
    params = instance.frequency
    out = []
    for t in range(instance.horizon):
        snap = freq_snapshot(solution, instance, t)
        if snap.inertia <= 0.0:
            out.append(HourlyFrequencyAudit(
                hour=t, inertia=0.0, total_pfr=snap.total_pfr,
                rocof=math.inf, nadir=math.inf, qss=math.inf,
                rocof_ok=False, nadir_ok=False, qss_ok=False))
            continue
        traj = _simulate(snap, params, dt, horizon)
        out.append(HourlyFrequencyAudit(
            hour=t, inertia=snap.inertia, total_pfr=snap.total_pfr,
            rocof=traj.rocof, nadir=traj.nadir, qss=traj.qss,
            rocof_ok=traj.rocof <= params.rocof_max + ROCOF_AUDIT_TOL,
            nadir_ok=traj.nadir <= params.df_max + NADIR_AUDIT_TOL,
            qss_ok=traj.qss <= params.df_qss_max + QSS_AUDIT_TOL))
    return out


def freq_snapshot(solution: ScheduleSolution, instance: IegsInstance, hour: int):
    from .freq import snapshot_from_schedule

    return snapshot_from_schedule(
        instance, hour,
        gen_status={g: solution.commit[g][hour] for g in solution.commit},
        vi_status={w: solution.vi_commit[w][hour] for w in solution.vi_commit},
        gen_pfr={g: solution.pfr_gen[g][hour] for g in solution.pfr_gen},
        wind_pfr={w: solution.pfr_wind[w][hour] for w in solution.pfr_wind})


def _simulate(snap, params, dt, horizon):
    from .freq import simulate_swing

    return simulate_swing(snap, params, dt=dt, horizon=horizon)


# ---------------------------------------------------------------------------
# gas feasibility audit
# ---------------------------------------------------------------------------


@dataclass
class GasAuditVerdict:
    status: str                    # feasible | infeasible | undetermined
    total_slack: float
    slack_by_node: dict[str, float]
    threshold: float
    iterations: int
    trace: list[dict] = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return self.status == "feasible"


def audit_gas_feasibility(solution: ScheduleSolution, instance: IegsInstance,
                          params: gasnet.PccpParams | None = None,
                          options: SolveOptions | None = None) -> GasAuditVerdict:
    """Check whether the schedule's GFU consumption is deliverable.

    GFU gas draws are fixed at phi * (P + R^G) from the solution, the
    gas-only problem gets elastic slacks on every nodal balance, and the
    total slack is minimized through the sequential Weymouth loop.  A
    positive slack floor already in the relaxed problem is a certificate
    of infeasibility (the relaxation only enlarges the feasible set).
    """
    params = params or gasnet.PccpParams()
    options = options or SolveOptions(mip_gap=0.0)
    gn = instance.gas_network
    total_demand = sum(sum(ld.series) for ld in gn.loads)
    for g in instance.gfus():
        fixed = [g.conversion * (solution.dispatch[g.gid][t]
                                 + solution.pfr_gen[g.gid][t])
                 for t in range(instance.horizon)]
        total_demand += sum(fixed)
    threshold = 1e-6 * max(total_demand, 1.0)

    def build(points=None, penalty=0.0):
        model = Model("gas-audit")
        gv = gasnet.allocate_gas_vars(model, instance, elastic_balance=True)
        for g in instance.gfus():
            for t in range(instance.horizon):
                v = g.conversion * (solution.dispatch[g.gid][t]
                                    + solution.pfr_gen[g.gid][t])
                var = gv.gfu_gas[g.gid][t]
                model.lb[var.idx] = v
                model.ub[var.idx] = v
        for t in range(instance.horizon):
            gasnet.build_gas_block(model, instance, gv, t, gfu_power=None)
            for p in gn.pipelines:
                gasnet.build_weymouth_soc(model, gv, p, t)
        gasnet.build_terminal_linepack(model, instance, gv)
        slack_terms = [s.expr() for pair in gv.balance_slack.values()
                       for st in pair for s in st]
        obj = lin_sum(slack_terms)
        taylor_slacks = {}
        if points is not None:
            for p in gn.pipelines:
                for t in range(instance.horizon):
                    s = model.add_var(f"gas.tslack[{p.pid},{t}]", 0.0, math.inf)
                    taylor_slacks[(p.pid, t)] = s
                    gasnet.build_weymouth_concave_linearized(
                        model, gv, p, t, points[(p.pid, t)], s)
                    obj = obj + penalty * s
        model.minimize(obj)
        return model, gv, taylor_slacks

    def slack_values(model, gv, values):
        by_node = {}
        for nid, pairs in gv.balance_slack.items():
            tot = sum(float(values[pos.idx]) + float(values[neg.idx])
                      for pos, neg in pairs)
            if tot > 1e-9:
                by_node[nid] = tot
        return by_node

    model, gv, _ = build()
    res = solve_misocp(model, options)
    if not res.ok:
        return GasAuditVerdict("undetermined", math.nan, {}, threshold, 0,
                               [{"error": res.message}])
    by_node = slack_values(model, gv, res.values)
    total = sum(by_node.values())
    if total > threshold:
        # relaxation already requires slack: certified infeasible
        return GasAuditVerdict("infeasible", total, by_node, threshold, 0,
                               [{"iteration": 0, "slack_total": total,
                                 "gap": gasnet.measure_relaxation_gap(
                                     res.values, gv, instance)}])

    state = gasnet.initial_pccp_state(res.values, gv, instance, params,
                                      objective=total)
    while not state.converged(params) and not state.exhausted(params):
        penalty = gasnet.next_penalty(state, params)
        model, gv, tslacks = build(points=state.points, penalty=penalty)
        res = solve_misocp(model, options)
        if not res.ok:
            return GasAuditVerdict("undetermined", math.nan, {}, threshold,
                                   state.iteration, list(state.history))
        by_node = slack_values(model, gv, res.values)
        total = sum(by_node.values())
        state = gasnet.pccp_step(state, res.values, gv, instance, params,
                                 objective=total, slack_total=total)
    if not state.converged(params):
        return GasAuditVerdict("undetermined", total, by_node, threshold,
                               state.iteration, list(state.history))
    status = "feasible" if total <= threshold else "infeasible"
    return GasAuditVerdict(status, total, by_node, threshold,
                           state.iteration, list(state.history))


# ---------------------------------------------------------------------------
# variant comparison
# ---------------------------------------------------------------------------


@dataclass
class EvalReport:
    variant: str
    sample_size: int
    total_cost: float
    cost_breakdown: dict[str, float]
    ejvp: float
    worst_rocof: float
    worst_nadir: float
    frequency_pass: bool
    iterations: int
    wall_time: float
    error: str = ""

    def row(self) -> list[str]:
        if self.error:
            return [self.variant, str(self.sample_size), "-", "-", "-", "-",
                    self.error]
        return [self.variant, str(self.sample_size), f"{self.total_cost:.1f}",
                f"{self.ejvp:.2f}", f"{self.iterations}",
                f"{self.wall_time:.1f}",
                "pass" if self.frequency_pass else "FAIL"]


REPORT_HEADER = ["variant", "N", "total_cost", "ejvp_pct", "iters",
                 "time_s", "freq_audit"]


def compare_variants(instance: IegsInstance, variants: list[ModelVariant],
                     sample_sizes: list[int] | None = None,
                     out_sample_size: int = 10_000, seed: int = 7,
                     pccp: gasnet.PccpParams | None = None,
                     options: SolveOptions | None = None,
                     use_estimated_moments: bool = True,
                     audit_freq: bool = True,
                     verbose: bool = False) -> list[EvalReport]:
    """Run each variant (optionally over a grid of moment/scenario sample
    sizes), score all of them on one shared out-of-sample set, and report.

    The in-sample pool and the out-of-sample set come from one seeded
    draw split in two, so comparisons are paired.
    """
    sample_sizes = sample_sizes or [20]
    truth = drcc.ambiguity_from_instance(instance)
    pool = drcc.generate_scenarios(
        truth.mean, truth.std, instance.capacities(),
        max(max(sample_sizes), 2) + out_sample_size, seed=seed)
    in_pool, out_set = drcc.split_scenarios(pool, max(max(sample_sizes), 2))

    reports = []
    for variant in variants:
        for n in sample_sizes:
            label = f"{variant.kind}(N={n})"
            t0 = time.perf_counter()
            try:
                scen = None
                amb = None
                if variant.kind == "saa":
                    scen = drcc.ScenarioSet(in_pool.values[:n], seed, "in-sample")
                elif use_estimated_moments:
                    amb = drcc.estimate_moments(
                        in_pool, max(n, 2), epsilon=(variant.epsilon
                                                     or truth.epsilon),
                        unimodal=variant.unimodal)
                sol = scheduler.run_algorithm1(
                    instance, variant, params=pccp, options=options,
                    ambiguity=amb, scenarios=scen)
                ejvp = compute_ejvp(sol, out_set,
                                    [w.wid for w in instance.wind_farms])
                if audit_freq:
                    audits = audit_frequency(sol, instance)
                    worst_rocof = max(a.rocof for a in audits)
                    worst_nadir = max(a.nadir for a in audits)
                    freq_ok = all(a.ok for a in audits)
                else:
                    worst_rocof = worst_nadir = math.nan
                    freq_ok = True
                reports.append(EvalReport(
                    variant=variant.kind, sample_size=n,
                    total_cost=sol.objective,
                    cost_breakdown=dict(sol.cost_breakdown), ejvp=ejvp,
                    worst_rocof=worst_rocof, worst_nadir=worst_nadir,
                    frequency_pass=freq_ok, iterations=sol.iterations,
                    wall_time=time.perf_counter() - t0))
                if verbose:
                    print(f"[compare] {label}: cost={sol.objective:.1f} "
                          f"ejvp={ejvp:.2f}%")
            except Exception as exc:   # record the failure, keep the table
                reports.append(EvalReport(
                    variant=variant.kind, sample_size=n, total_cost=math.nan,
                    cost_breakdown={}, ejvp=math.nan, worst_rocof=math.nan,
                    worst_nadir=math.nan, frequency_pass=False, iterations=0,
                    wall_time=time.perf_counter() - t0, error=str(exc)))
                if verbose:
                    print(f"[compare] {label}: FAILED ({exc})")
    return reports


def render_table(reports: list[EvalReport]) -> str:
    rows = [REPORT_HEADER] + [r.row() for r in reports]
    widths = [max(len(row[i]) for row in rows if i < len(row))
              for i in range(len(REPORT_HEADER))]
    lines = []
    for row in rows:
        lines.append("  ".join(str(c).rjust(w) for c, w in zip(row, widths)))
    return "\n".join(lines)


def reports_to_json(reports: list[EvalReport], path) -> None:
    with open(path, "w") as fh:
        json.dump([r.__dict__ for r in reports], fh, indent=1)
        fh.write("\n")


def write_hourly_csv(audits: list[HourlyFrequencyAudit], path) -> None:
    import csv as _csv

    with open(path, "w", newline="") as fh:
        writer = _csv.writer(fh)
        writer.writerow(["hour", "inertia_mws_per_hz", "total_pfr_mw",
                         "rocof_hz_per_s", "nadir_hz", "qss_hz", "ok"])
        for a in audits:
            writer.writerow([a.hour, f"{a.inertia:.6f}", f"{a.total_pfr:.6f}",
                             f"{a.rocof:.6f}", f"{a.nadir:.6f}",
                             f"{a.qss:.6f}", int(a.ok)])
