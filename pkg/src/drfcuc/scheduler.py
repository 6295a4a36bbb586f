"""Assembly of the full scheduling problem and the sequential solve.

``assemble`` wires the unit-commitment core, the frequency rows, the
gas network (cone half of Weymouth only, or additionally the penalized
tangent rows when a linearization point is supplied), and the
uncertainty block selected by the model variant.  ``run_algorithm1``
drives the penalty convex-concave loop: solve the relaxed problem,
measure the maximum Weymouth relaxation gap, and re-solve with tangent
rows and a growing slack penalty until the gap closes.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import drcc, freq, gasnet
from .instance import IegsInstance
from .optmodel import (INFEASIBLE, LinExpr, Model, SolveOptions, SolveResult,
                       lin_sum, solve_misocp)

VARIANT_KINDS = ("saa", "dr_m", "dr_u", "dr_m_i", "dr_u_i",
                 "no_fc", "no_ngs", "no_vi")


class SchedulerError(ValueError):
    """Variant/instance mismatch or assembly failure."""


class InfeasibleModelError(RuntimeError):
    """The relaxed problem is infeasible; carries a subsystem hint."""

    def __init__(self, message: str, diagnostic: dict | None = None):
        super().__init__(message)
        self.diagnostic = diagnostic or {}


@dataclass(frozen=True)
class ModelVariant:
    """Which scheduling model to build.

    kind:
      saa     scenario-counting joint chance constraint
      dr_m    DR joint chance constraint, moment ambiguity set
      dr_u    DR joint chance constraint, moment + unimodality
      dr_m_i  DR individual chance constraints, moment set
      dr_u_i  DR individual chance constraints, moment + unimodality
      no_fc   dr_m without frequency rows, capacity reserve instead
      no_ngs  dr_m without any gas-side rows
      no_vi   dr_m with virtual inertia provision forced off
    """

    kind: str = "dr_m"
    epsilon: float | None = None        # joint budget override
    eps_individual: float | None = None  # per-constraint budget for *_i kinds
    sample_size: int = 20               # SAA scenario count
    scenario_seed: int = 2021

    def __post_init__(self):
        if self.kind not in VARIANT_KINDS:
            raise SchedulerError(f"unknown variant kind {self.kind!r}; "
                                 f"choose from {VARIANT_KINDS}")
        if self.sample_size < 1:
            raise SchedulerError("SAA sample size must be at least 1")

    @property
    def uses_gas(self) -> bool:
        return self.kind != "no_ngs"

    @property
    def uses_frequency(self) -> bool:
        return self.kind != "no_fc"

    @property
    def unimodal(self) -> bool:
        return self.kind in ("dr_u", "dr_u_i")

    @property
    def individual(self) -> bool:
        return self.kind in ("dr_m_i", "dr_u_i")


# ---------------------------------------------------------------------------
# variables
# ---------------------------------------------------------------------------


@dataclass
class UcVars:
    x: dict[str, list]
    zu: dict[str, list]
    zd: dict[str, list]
    p: dict[str, list]
    rg: dict[str, list]
    y: dict[str, list]
    pw: dict[str, list]
    rw: dict[str, list]


def allocate_uc_vars(model: Model, instance: IegsInstance,
                     no_vi: bool = False) -> UcVars:
    T = instance.horizon
    uv = UcVars(x={}, zu={}, zd={}, p={}, rg={}, y={}, pw={}, rw={})
    for g in instance.generators:
        uv.x[g.gid] = [model.add_binary(f"uc.x[{g.gid},{t}]") for t in range(T)]
        uv.zu[g.gid] = [model.add_binary(f"uc.zu[{g.gid},{t}]") for t in range(T)]
        uv.zd[g.gid] = [model.add_binary(f"uc.zd[{g.gid},{t}]") for t in range(T)]
        uv.p[g.gid] = [model.add_var(f"uc.P[{g.gid},{t}]", 0.0, g.p_max)
                       for t in range(T)]
        uv.rg[g.gid] = [model.add_var(f"uc.Rg[{g.gid},{t}]", 0.0, g.reserve_max)
                        for t in range(T)]
    for w in instance.wind_farms:
        y_ub = 0.0 if no_vi else 1.0
        rw_ub = 0.0 if no_vi else w.reserve_max
        uv.y[w.wid] = [model.add_var(f"uc.y[{w.wid},{t}]", 0.0, y_ub, "binary")
                       for t in range(T)]
        uv.pw[w.wid] = [model.add_var(f"uc.Pw[{w.wid},{t}]", 0.0, w.capacity)
                        for t in range(T)]
        uv.rw[w.wid] = [model.add_var(f"uc.Rw[{w.wid},{t}]", 0.0, rw_ub)
                        for t in range(T)]
    return uv


# ---------------------------------------------------------------------------
# constraint families
# ---------------------------------------------------------------------------


def build_ucuc_core(model: Model, instance: IegsInstance, uv: UcVars) -> list:
    """Commitment logic, min up/down windows, output and PFR limits,
    ramping on P + R, wind VI-reserve link, line limits, power balance."""
    from .instance import resolve_shift_factors

    T = instance.horizon
    rows = []
    for g in instance.generators:
        x, zu, zd = uv.x[g.gid], uv.zu[g.gid], uv.zd[g.gid]
        p, rg = uv.p[g.gid], uv.rg[g.gid]
        x0 = instance.status0(g.gid)
        p0 = instance.output0(g) + instance.pfr0(g.gid)
        for t in range(T):
            prev_x = x[t - 1].expr() if t > 0 else LinExpr(const=float(x0))
            rows.append(model.add_eq(zu[t] - zd[t], x[t] - prev_x,
                                     name=f"uc.logic[{g.gid},{t}]"))
            window = range(max(0, t - g.min_up + 1), t + 1)
            rows.append(model.add_le(lin_sum(zu[k] for k in window), x[t],
                                     name=f"uc.min_up[{g.gid},{t}]"))
            window = range(max(0, t - g.min_down + 1), t + 1)
            rows.append(model.add_le(lin_sum(zd[k] for k in window),
                                     1 - x[t].expr(), name=f"uc.min_down[{g.gid},{t}]"))
            rows.append(model.add_ge(p[t], g.p_min * x[t],
                                     name=f"uc.p_lo[{g.gid},{t}]"))
            rows.append(model.add_le(p[t] + rg[t], g.p_max * x[t],
                                     name=f"uc.p_hi[{g.gid},{t}]"))
            rows.append(model.add_le(rg[t], g.reserve_max * x[t],
                                     name=f"uc.r_cap[{g.gid},{t}]"))
            prev_pr = (p[t - 1] + rg[t - 1]) if t > 0 else LinExpr(const=p0)
            delta = p[t] + rg[t] - prev_pr
            rows.append(model.add_le(delta, g.ramp_up, name=f"uc.ramp_up[{g.gid},{t}]"))
            rows.append(model.add_ge(delta, -g.ramp_down,
                                     name=f"uc.ramp_dn[{g.gid},{t}]"))
    for w in instance.wind_farms:
        for t in range(T):
            rows.append(model.add_le(uv.rw[w.wid][t],
                                     w.reserve_max * uv.y[w.wid][t],
                                     name=f"uc.rw_cap[{w.wid},{t}]"))

    psi = resolve_shift_factors(instance.power_network)
    pn = instance.power_network
    for li, line in enumerate(pn.lines):
        for t in range(T):
            flow = LinExpr()
            for g in instance.generators:
                flow._iadd(psi[li, pn.bus_index(g.bus)] * uv.p[g.gid][t], 1.0)
            for w in instance.wind_farms:
                flow._iadd(psi[li, pn.bus_index(w.bus)] * uv.pw[w.wid][t], 1.0)
            for ld in pn.loads:
                flow._iadd(-psi[li, pn.bus_index(ld.bus)] * ld.series[t], 1.0)
            rows.append(model.add_le(flow, line.capacity,
                                     name=f"uc.line_hi[{line.lid},{t}]"))
            rows.append(model.add_ge(flow, -line.capacity,
                                     name=f"uc.line_lo[{line.lid},{t}]"))

    for t in range(T):
        total = lin_sum([uv.p[g.gid][t] for g in instance.generators]
                        + [uv.pw[w.wid][t] for w in instance.wind_farms])
        rows.append(model.add_eq(total, instance.total_load(t),
                                 name=f"uc.balance[{t}]"))
    return rows


def build_capacity_reserve(model: Model, instance: IegsInstance, uv: UcVars) -> list:
    """Reserve floor used when frequency rows are dropped: total PFR must
    cover the contingency."""
    rows = []
    for t in range(instance.horizon):
        total = lin_sum([uv.rg[g.gid][t] for g in instance.generators]
                        + [uv.rw[w.wid][t] for w in instance.wind_farms])
        rows.append(model.add_ge(total, instance.contingency(t),
                                 name=f"uc.reserve[{t}]"))
    return rows


def build_objective(instance: IegsInstance, uv: UcVars) -> LinExpr:
    """Operating cost: start-up, shut-down, no-load, energy and PFR costs
    of thermal units plus VI-commitment and PFR costs of wind farms."""
    obj = LinExpr()
    for g in instance.generators:
        for t in range(instance.horizon):
            obj._iadd(g.cost_startup * uv.zu[g.gid][t], 1.0)
            obj._iadd(g.cost_shutdown * uv.zd[g.gid][t], 1.0)
            obj._iadd(g.cost_no_load * uv.x[g.gid][t], 1.0)
            obj._iadd(g.cost_energy * uv.p[g.gid][t], 1.0)
            obj._iadd(g.cost_pfr * uv.rg[g.gid][t], 1.0)
    for w in instance.wind_farms:
        for t in range(instance.horizon):
            obj._iadd(w.cost_vi * uv.y[w.wid][t], 1.0)
            obj._iadd(w.cost_pfr * uv.rw[w.wid][t], 1.0)
    return obj


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------


@dataclass
class AssembledModel:
    model: Model
    uc: UcVars
    gas: gasnet.GasVars | None
    kappas: list[float]
    drcc_blocks: list
    freq_blocks: list
    slack_vars: dict[tuple[str, int], object]
    base_objective: LinExpr


def compute_kappas(instance: IegsInstance) -> list[float]:
    return [freq.kappa_requirement(instance.frequency, instance.contingency(t),
                                   instance.total_load(t))
            for t in range(instance.horizon)]


def default_pressure_penalty(instance: IegsInstance) -> float:
    """Initial-point tightening weight: an order below the cheapest
    marginal energy cost so it never distorts dispatch."""
    return 0.1 * min(g.cost_energy for g in instance.generators)


def assemble(instance: IegsInstance, variant: ModelVariant,
             ambiguity: drcc.AmbiguitySpec | None = None,
             scenarios: drcc.ScenarioSet | None = None,
             kappas: list[float] | None = None,
             pccp_points: dict | None = None,
             pccp_penalty: float = 0.0,
             pressure_penalty: float | None = None) -> AssembledModel:
    """Build the variant's full model.

    Without ``pccp_points`` this is the relaxed problem (cone half of
    Weymouth only) whose objective carries the pressure-difference
    tightening penalty; with points it is the penalized tangent problem
    whose objective carries ``pccp_penalty`` times the slack total.
    """
    T = instance.horizon
    farm_ids = [w.wid for w in instance.wind_farms]
    epsilon = variant.epsilon
    if variant.unimodal:
        spec_eps = epsilon if epsilon is not None else instance.uncertainty.epsilon
        if spec_eps > drcc.UNIMODAL_EPS_MAX + 1e-12:
            raise SchedulerError(
                f"variant {variant.kind} needs epsilon <= 1/6 "
                f"(the unimodal reformulation hypothesis); got {spec_eps}")
    if ambiguity is None:
        ambiguity = drcc.ambiguity_from_instance(
            instance, epsilon=epsilon, unimodal=variant.unimodal)
    elif epsilon is not None and ambiguity.epsilon != epsilon:
        ambiguity = ambiguity.with_epsilon(epsilon, unimodal=variant.unimodal)
    if variant.kind == "saa" and scenarios is None:
        truth = drcc.ambiguity_from_instance(instance)
        scenarios = drcc.generate_scenarios(
            truth.mean, truth.std, instance.capacities(),
            variant.sample_size, seed=variant.scenario_seed)

    model = Model(f"{instance.name}:{variant.kind}")
    uv = allocate_uc_vars(model, instance, no_vi=(variant.kind == "no_vi"))
    build_ucuc_core(model, instance, uv)

    kappas = compute_kappas(instance) if kappas is None else kappas
    freq_blocks = []
    if variant.uses_frequency:
        big_m = freq.pfr_big_m(instance)
        for t in range(T):
            freq_blocks.append(freq.build_frequency_block(
                model, instance, t,
                {g: uv.x[g][t] for g in uv.x}, {w: uv.y[w][t] for w in uv.y},
                {g: uv.rg[g][t] for g in uv.rg}, {w: uv.rw[w][t] for w in uv.rw},
                kappa=kappas[t], big_m=big_m))
    else:
        build_capacity_reserve(model, instance, uv)

    drcc_blocks = []
    eps_ind = variant.eps_individual
    if eps_ind is None:
        eps_ind = ambiguity.epsilon
    for t in range(T):
        if variant.kind == "saa":
            drcc_blocks.append(drcc.build_saa_block(
                model, scenarios, farm_ids, {w: uv.pw[w][t] for w in uv.pw},
                {w: uv.rw[w][t] for w in uv.rw}, ambiguity.epsilon, t,
                instance.capacities()))
        elif variant.individual:
            drcc_blocks.append(drcc.build_individual_drcc(
                model, ambiguity, farm_ids, {w: uv.pw[w][t] for w in uv.pw},
                {w: uv.rw[w][t] for w in uv.rw}, t, eps_ind,
                unimodal=variant.unimodal))
        elif variant.unimodal:
            drcc_blocks.append(drcc.build_theorem2_soc(
                model, ambiguity, farm_ids, {w: uv.pw[w][t] for w in uv.pw},
                {w: uv.rw[w][t] for w in uv.rw}, t))
        else:
            drcc_blocks.append(drcc.build_theorem1_soc(
                model, ambiguity, farm_ids, {w: uv.pw[w][t] for w in uv.pw},
                {w: uv.rw[w][t] for w in uv.rw}, t))

    gv = None
    slack_vars: dict[tuple[str, int], object] = {}
    objective = build_objective(instance, uv)
    if variant.uses_gas:
        gv = gasnet.allocate_gas_vars(model, instance)
        for t in range(T):
            gfu_power = {g.gid: uv.p[g.gid][t] + uv.rg[g.gid][t]
                         for g in instance.gfus()}
            gasnet.build_gas_block(model, instance, gv, t, gfu_power)
            for p in instance.gas_network.pipelines:
                gasnet.build_weymouth_soc(model, gv, p, t)
        gasnet.build_terminal_linepack(model, instance, gv)
        if pccp_points is None:
            weight = (default_pressure_penalty(instance)
                      if pressure_penalty is None else pressure_penalty)
            for p in instance.gas_network.pipelines:
                for t in range(T):
                    objective._iadd(weight * (gv.pressure[p.from_node][t]
                                              - gv.pressure[p.to_node][t]), 1.0)
        else:
            for p in instance.gas_network.pipelines:
                for t in range(T):
                    s = model.add_var(f"gas.slack[{p.pid},{t}]", 0.0, math.inf)
                    slack_vars[(p.pid, t)] = s
                    gasnet.build_weymouth_concave_linearized(
                        model, gv, p, t, pccp_points[(p.pid, t)], s)
                    objective._iadd(pccp_penalty * s, 1.0)

    model.minimize(objective)
    return AssembledModel(model=model, uc=uv, gas=gv, kappas=kappas,
                          drcc_blocks=drcc_blocks, freq_blocks=freq_blocks,
                          slack_vars=slack_vars,
                          base_objective=build_objective(instance, uv))


# ---------------------------------------------------------------------------
# solution container
# ---------------------------------------------------------------------------


@dataclass
class ScheduleSolution:
    variant: str
    status: str                  # converged | gap_limit | relaxed
    objective: float             # operating cost, recomputed from values
    cost_breakdown: dict[str, float]
    commit: dict[str, list[int]]
    startup: dict[str, list[int]]
    shutdown: dict[str, list[int]]
    vi_commit: dict[str, list[int]]
    dispatch: dict[str, list[float]]
    pfr_gen: dict[str, list[float]]
    wind_dispatch: dict[str, list[float]]
    pfr_wind: dict[str, list[float]]
    gas_state: dict
    drcc_eps: dict[str, list[float]]
    kappas: list[float]
    pccp: list[dict]
    iterations: int
    solver: dict
    max_violation: float
    wall_time: float
    assembled: AssembledModel | None = field(default=None, repr=False, compare=False)
    values: np.ndarray | None = field(default=None, repr=False, compare=False)

    def total_pfr(self, t: int) -> float:
        return (sum(v[t] for v in self.pfr_gen.values())
                + sum(v[t] for v in self.pfr_wind.values()))

    def to_dict(self) -> dict:
        out = {k: v for k, v in self.__dict__.items()
               if k not in ("assembled", "values")}
        return out

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1, default=float)
            fh.write("\n")


def load_solution(path) -> ScheduleSolution:
    with open(path) as fh:
        doc = json.load(fh)
    return ScheduleSolution(assembled=None, values=None, **doc)


_BINARY_TOL = 1e-6


def _round_binary(val: float, name: str) -> int:
    if abs(val - round(val)) > _BINARY_TOL:
        raise SchedulerError(f"binary {name} not integral: {val}")
    return int(round(val))


def extract_solution(instance: IegsInstance, variant: ModelVariant,
                     assembled: AssembledModel, values: np.ndarray,
                     state: gasnet.PccpState | None, status: str,
                     solver_stats: dict, wall_time: float) -> ScheduleSolution:
    uv = assembled.uc
    T = instance.horizon

    def grid(vars_by_id, rounder=None):
        out = {}
        for key, cols in vars_by_id.items():
            vals = [float(values[v.idx]) for v in cols]
            out[key] = ([rounder(v, f"{key}") for v in vals] if rounder else vals)
        return out

    commit = grid(uv.x, _round_binary)
    startup = grid(uv.zu, _round_binary)
    shutdown = grid(uv.zd, _round_binary)
    vi_commit = grid(uv.y, _round_binary)
    dispatch = grid(uv.p)
    pfr_gen = grid(uv.rg)
    wind_dispatch = grid(uv.pw)
    pfr_wind = grid(uv.rw)

    # commitment logic re-verified after rounding
    for g in instance.generators:
        x0 = instance.status0(g.gid)
        for t in range(T):
            prev = commit[g.gid][t - 1] if t > 0 else x0
            if startup[g.gid][t] - shutdown[g.gid][t] != commit[g.gid][t] - prev:
                raise SchedulerError(
                    f"rounded commitment logic violated for {g.gid} hour {t}")

    breakdown = {"startup": 0.0, "shutdown": 0.0, "no_load": 0.0,
                 "generation": 0.0, "pfr_gen": 0.0, "vi": 0.0, "pfr_wind": 0.0}
    for g in instance.generators:
        breakdown["startup"] += g.cost_startup * sum(startup[g.gid])
        breakdown["shutdown"] += g.cost_shutdown * sum(shutdown[g.gid])
        breakdown["no_load"] += g.cost_no_load * sum(commit[g.gid])
        breakdown["generation"] += g.cost_energy * sum(dispatch[g.gid])
        breakdown["pfr_gen"] += g.cost_pfr * sum(pfr_gen[g.gid])
    for w in instance.wind_farms:
        breakdown["vi"] += w.cost_vi * sum(vi_commit[w.wid])
        breakdown["pfr_wind"] += w.cost_pfr * sum(pfr_wind[w.wid])
    breakdown["total"] = sum(v for k, v in breakdown.items() if k != "total")

    gas_state: dict = {}
    if assembled.gas is not None:
        gv = assembled.gas
        gas_state = {
            "pressure": grid(gv.pressure),
            "flow": grid(gv.flow),
            "flow_in": grid(gv.flow_in),
            "flow_out": grid(gv.flow_out),
            "linepack": grid(gv.linepack),
            "comp_flow": grid(gv.comp_flow),
            "comp_cons": grid(gv.comp_cons),
            "source": grid(gv.source),
            "gfu_gas": grid(gv.gfu_gas),
        }

    drcc_eps: dict[str, list[float]] = {}
    for block in assembled.drcc_blocks:
        if isinstance(block, drcc.DrccBlock):
            for wid, var in block.eps_vars.items():
                drcc_eps.setdefault(wid, []).append(float(values[var.idx]))

    max_violation = assembled.model.max_violation(values)
    return ScheduleSolution(
        variant=variant.kind, status=status,
        objective=breakdown["total"], cost_breakdown=breakdown,
        commit=commit, startup=startup, shutdown=shutdown, vi_commit=vi_commit,
        dispatch=dispatch, pfr_gen=pfr_gen,
        wind_dispatch=wind_dispatch, pfr_wind=pfr_wind,
        gas_state=gas_state, drcc_eps=drcc_eps,
        kappas=list(assembled.kappas),
        pccp=[dict(rec) for rec in (state.history if state else ())],
        iterations=(state.iteration if state else 0),
        solver=solver_stats, max_violation=max_violation,
        wall_time=wall_time,
        assembled=assembled, values=values)


# ---------------------------------------------------------------------------
# Algorithm: relaxed solve + penalty convex-concave loop
# ---------------------------------------------------------------------------


def _diagnose_infeasible(instance: IegsInstance, variant: ModelVariant,
                         ambiguity, scenarios,
                         options: SolveOptions) -> dict:
    """Re-solve with elastic slacks on gas balances and line limits to
    name the binding subsystem."""
    assembled = assemble(instance, variant, ambiguity=ambiguity,
                         scenarios=scenarios)
    model = assembled.model
    slacks = []
    for row in list(model.rows):
        if row.name.startswith("gas.balance") or row.name.startswith("uc.line"):
            s = model.add_var(f"elastic[{row.name}]", 0.0, math.inf)
            sign = 1.0 if row.sense in (">=", "==") else -1.0
            row.coeffs[s.idx] = sign
            slacks.append((row.name, s))
            if row.sense == "==":
                s2 = model.add_var(f"elastic2[{row.name}]", 0.0, math.inf)
                row.coeffs[s2.idx] = -1.0
                slacks.append((row.name, s2))
    model.minimize(lin_sum(s.expr() for _, s in slacks))
    res = solve_misocp(model, options)
    if not res.ok:
        return {"hint": "infeasible even with elastic gas balance and line "
                        "limits; the commitment/frequency core cannot be met"}
    hot = {}
    for name, s in slacks:
        v = res.value(s)
        if v > 1e-6:
            hot[name] = hot.get(name, 0.0) + v
    family = ("gas balance" if any(k.startswith("gas") for k in hot)
              else "line limits" if hot else "unknown")
    return {"hint": f"binding subsystem: {family}", "elastic_slacks": hot}


def run_algorithm1(instance: IegsInstance, variant: ModelVariant,
                   params: gasnet.PccpParams | None = None,
                   options: SolveOptions | None = None,
                   ambiguity: drcc.AmbiguitySpec | None = None,
                   scenarios: drcc.ScenarioSet | None = None,
                   verbose: bool = False) -> ScheduleSolution:
    """Full sequential solve; returns the converged schedule.

    Raises InfeasibleModelError when the relaxed problem is infeasible.
    When the gap tolerance cannot be met within the iteration cap the
    best iterate is returned with status ``gap_limit``.
    """
    t0 = time.perf_counter()
    params = params or gasnet.PccpParams()
    options = options or SolveOptions()
    kappas = compute_kappas(instance)

    if variant.kind == "saa" and scenarios is None:
        truth = drcc.ambiguity_from_instance(instance)
        scenarios = drcc.generate_scenarios(
            truth.mean, truth.std, instance.capacities(),
            variant.sample_size, seed=variant.scenario_seed)

    cut_pool: dict[str, list] = {}
    assembled = assemble(instance, variant, ambiguity=ambiguity,
                         scenarios=scenarios, kappas=kappas)
    res = solve_misocp(assembled.model, options, cut_pool=cut_pool)
    stats = {"solves": 1, "cuts": res.cut_count, "mip_gap": res.mip_gap,
             "backend_status": res.status}
    if res.status == INFEASIBLE or res.values is None:
        diag = _diagnose_infeasible(instance, variant, ambiguity, scenarios,
                                    options)
        raise InfeasibleModelError(
            f"relaxed problem infeasible for variant {variant.kind}: "
            f"{diag.get('hint', '')}", diag)

    if assembled.gas is None or not instance.gas_network.pipelines:
        sol = extract_solution(instance, variant, assembled, res.values,
                               None, "converged", stats,
                               time.perf_counter() - t0)
        return sol

    state = gasnet.initial_pccp_state(res.values, assembled.gas, instance,
                                      params, objective=res.objective)
    best = (assembled, res.values, state)
    if verbose:
        print(f"[pccp] r=0 gap={state.gap:.5f}")

    while not state.converged(params) and not state.exhausted(params):
        penalty = gasnet.next_penalty(state, params)
        assembled = assemble(instance, variant, ambiguity=ambiguity,
                             scenarios=scenarios, kappas=kappas,
                             pccp_points=state.points, pccp_penalty=penalty)
        res = solve_misocp(assembled.model, options, cut_pool=cut_pool)
        stats["solves"] += 1
        stats["cuts"] += res.cut_count
        if res.status == INFEASIBLE or res.values is None:
            raise InfeasibleModelError(
                f"penalized tangent problem infeasible at iteration "
                f"{state.iteration + 1} (variant {variant.kind})")
        slack_total = float(sum(res.values[s.idx]
                                for s in assembled.slack_vars.values()))
        obj_true = assembled.base_objective.value(res.values)
        state = gasnet.pccp_step(state, res.values, assembled.gas, instance,
                                 params, objective=obj_true,
                                 slack_total=slack_total)
        best = (assembled, res.values, state)
        if verbose:
            print(f"[pccp] r={state.iteration} gap={state.gap:.5f} "
                  f"penalty={state.penalty:g} slack={slack_total:.4g}")

    assembled, values, state = best
    status = "converged" if state.converged(params) else "gap_limit"
    return extract_solution(instance, variant, assembled, values, state,
                            status, stats, time.perf_counter() - t0)
