"""Natural gas network constraints and the penalty convex-concave
machinery for the Weymouth equation.

The Weymouth relation F^2 = C^2 (pi_m^2 - pi_n^2) splits into a second-
order cone half ||(F/C, pi_n)|| <= pi_m kept in every solve, and a
concave half pi_m^2 <= F^2/C^2 + pi_n^2 that is linearized around the
previous iterate with a penalized nonnegative slack.  Nodal balances
are written on the pipeline end flows (in-flow leaves the sending node,
out-flow arrives at the receiving node) so that gas mass is conserved
while linepack shifts between hours.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .instance import IegsInstance, Pipeline
from .optmodel import LinExpr, Model, SocRow, Var, lin_sum


class GasModelError(ValueError):
    """Inconsistent gas-side model inputs."""


# ---------------------------------------------------------------------------
# variables
# ---------------------------------------------------------------------------


@dataclass
class GasVars:
    """Handles for all gas-side variables, indexed [element id][hour]."""

    pressure: dict[str, list[Var]]
    flow: dict[str, list[Var]]          # average pipeline flow
    flow_in: dict[str, list[Var]]
    flow_out: dict[str, list[Var]]
    linepack: dict[str, list[Var]]
    comp_flow: dict[str, list[Var]]
    comp_cons: dict[str, list[Var]]
    source: dict[str, list[Var]]
    gfu_gas: dict[str, list[Var]]
    balance_slack: dict[str, list[tuple[Var, Var]]] = field(default_factory=dict)


def allocate_gas_vars(model: Model, instance: IegsInstance,
                      elastic_balance: bool = False) -> GasVars:
    """Declare pressures, flows, linepack, compressor, source and GFU
    consumption variables with their physical bounds."""
    gn = instance.gas_network
    T = instance.horizon
    big_flow = (sum(s.flow_max for s in gn.sources)
                + sum(p.linepack * max(n.pressure_max for n in gn.nodes)
                      for p in gn.pipelines) + 1.0)

    def per_hour(maker):
        return [maker(t) for t in range(T)]

    gv = GasVars(
        pressure={n.nid: per_hour(lambda t, n=n: model.add_var(
            f"gas.pi[{n.nid},{t}]", n.pressure_min, n.pressure_max))
            for n in gn.nodes},
        flow={p.pid: per_hour(lambda t, p=p: model.add_var(
            f"gas.F[{p.pid},{t}]", 0.0, big_flow)) for p in gn.pipelines},
        flow_in={p.pid: per_hour(lambda t, p=p: model.add_var(
            f"gas.Fin[{p.pid},{t}]", 0.0, big_flow)) for p in gn.pipelines},
        flow_out={p.pid: per_hour(lambda t, p=p: model.add_var(
            f"gas.Fout[{p.pid},{t}]", 0.0, big_flow)) for p in gn.pipelines},
        linepack={p.pid: per_hour(lambda t, p=p: model.add_var(
            f"gas.LP[{p.pid},{t}]", 0.0, math.inf)) for p in gn.pipelines},
        comp_flow={c.cid: per_hour(lambda t, c=c: model.add_var(
            f"gas.Fc[{c.cid},{t}]", 0.0, c.flow_max)) for c in gn.compressors},
        comp_cons={c.cid: per_hour(lambda t, c=c: model.add_var(
            f"gas.tau[{c.cid},{t}]", 0.0, c.flow_max)) for c in gn.compressors},
        source={s.sid: per_hour(lambda t, s=s: model.add_var(
            f"gas.Fs[{s.sid},{t}]", s.flow_min, s.flow_max)) for s in gn.sources},
        gfu_gas={g.gid: per_hour(lambda t, g=g: model.add_var(
            f"gas.Fg[{g.gid},{t}]", 0.0, g.conversion * (g.p_max + g.reserve_max)))
            for g in instance.gfus()},
    )
    if elastic_balance:
        gv.balance_slack = {
            n.nid: per_hour(lambda t, n=n: (
                model.add_var(f"gas.slack_pos[{n.nid},{t}]", 0.0, math.inf),
                model.add_var(f"gas.slack_neg[{n.nid},{t}]", 0.0, math.inf)))
            for n in gn.nodes}
    return gv


# ---------------------------------------------------------------------------
# linear gas block
# ---------------------------------------------------------------------------


@dataclass
class GasBlock:
    hour: int
    balance_rows: dict[str, object]
    rows: list


def build_gas_block(model: Model, instance: IegsInstance, gv: GasVars, hour: int,
                    gfu_power: dict[str, LinExpr] | None = None) -> GasBlock:
    """Emit the hour's nodal balances, average-flow and linepack rows,
    compressor rows, and (when power handles are given) GFU coupling
    F^G = phi * (P + R^G).  Pressure, source and compressor throughput
    limits live on the variable bounds."""
    gn = instance.gas_network
    t = instance.check_hour(hour)
    rows = []

    inflow: dict[str, list] = {n.nid: [] for n in gn.nodes}
    outflow: dict[str, list] = {n.nid: [] for n in gn.nodes}

    for p in gn.pipelines:
        f_avg, f_in, f_out = gv.flow[p.pid][t], gv.flow_in[p.pid][t], gv.flow_out[p.pid][t]
        rows.append(model.add_eq(2.0 * f_avg, f_in + f_out,
                                 name=f"gas.avg[{p.pid},{t}]"))
        lp = gv.linepack[p.pid][t]
        pi_m = gv.pressure[p.from_node][t]
        pi_n = gv.pressure[p.to_node][t]
        rows.append(model.add_eq(lp, (p.linepack / 2.0) * (pi_m + pi_n),
                                 name=f"gas.lp_def[{p.pid},{t}]"))
        prev = gv.linepack[p.pid][t - 1].expr() if t > 0 else LinExpr(const=p.linepack_init)
        rows.append(model.add_eq(f_in - f_out, lp - prev,
                                 name=f"gas.lp_dyn[{p.pid},{t}]"))
        outflow[p.from_node].append(f_in)
        inflow[p.to_node].append(f_out)

    for c in gn.compressors:
        fc, tau = gv.comp_flow[c.cid][t], gv.comp_cons[c.cid][t]
        rows.append(model.add_eq(tau, c.consumption_fraction * fc,
                                 name=f"gas.comp_cons[{c.cid},{t}]"))
        pi_in = gv.pressure[c.inlet][t]
        pi_out = gv.pressure[c.outlet][t]
        rows.append(model.add_ge(pi_out - c.ratio_min * pi_in, 0.0,
                                 name=f"gas.ratio_lo[{c.cid},{t}]"))
        rows.append(model.add_le(pi_out - c.ratio_max * pi_in, 0.0,
                                 name=f"gas.ratio_hi[{c.cid},{t}]"))
        outflow[c.inlet].append(fc)
        outflow[c.inlet].append(tau)
        inflow[c.outlet].append(fc)

    if gfu_power is not None:
        for g in instance.gfus():
            if g.gid not in gfu_power:
                raise GasModelError(f"missing power handle for GFU {g.gid}")
            rows.append(model.add_eq(gv.gfu_gas[g.gid][t],
                                     g.conversion * gfu_power[g.gid],
                                     name=f"gas.couple[{g.gid},{t}]"))

    balance_rows = {}
    for n in gn.nodes:
        expr = LinExpr()
        for s in gn.sources:
            if s.node == n.nid:
                expr._iadd(gv.source[s.sid][t], 1.0)
        for g in instance.gfus():
            if g.gas_node == n.nid:
                expr._iadd(gv.gfu_gas[g.gid][t], -1.0)
        demand = sum(ld.series[t] for ld in gn.loads if ld.node == n.nid)
        expr._iadd(-demand, 1.0)
        for v in inflow[n.nid]:
            expr._iadd(v, 1.0)
        for v in outflow[n.nid]:
            expr._iadd(v, -1.0)
        if gv.balance_slack:
            pos, neg = gv.balance_slack[n.nid][t]
            expr._iadd(pos, 1.0)
            expr._iadd(neg, -1.0)
        balance_rows[n.nid] = model.add_linear(expr, "==", 0.0,
                                               name=f"gas.balance[{n.nid},{t}]")
    return GasBlock(hour=t, balance_rows=balance_rows, rows=rows)


def build_terminal_linepack(model: Model, instance: IegsInstance,
                            gv: GasVars) -> object:
    """Final-period total linepack must be restored to its initial total."""
    gn = instance.gas_network
    T = instance.horizon
    total = lin_sum(gv.linepack[p.pid][T - 1] for p in gn.pipelines)
    initial = sum(p.linepack_init for p in gn.pipelines)
    return model.add_linear(total, ">=", initial, name="gas.terminal_lp")


# ---------------------------------------------------------------------------
# Weymouth: cone half and linearized concave half
# ---------------------------------------------------------------------------


def build_weymouth_soc(model: Model, gv: GasVars, pipeline: Pipeline,
                       hour: int) -> SocRow:
    """||(F/C, pi_n)|| <= pi_m; the relaxed half kept in every solve."""
    f = gv.flow[pipeline.pid][hour]
    pi_m = gv.pressure[pipeline.from_node][hour]
    pi_n = gv.pressure[pipeline.to_node][hour]
    return model.add_soc([(1.0 / pipeline.weymouth) * f, pi_n.expr()], pi_m,
                         name=f"gas.weymouth[{pipeline.pid},{hour}]")


def build_weymouth_concave_linearized(model: Model, gv: GasVars,
                                      pipeline: Pipeline, hour: int,
                                      point: tuple[float, float],
                                      slack: Var) -> SocRow:
    """Tangent-plane relaxation of pi_m^2 <= F^2/C^2 + pi_n^2 around
    (F^r, pi_n^r), with a nonnegative slack.

    The convex right side is replaced by its first-order expansion q and
    the quadratic left side is encoded as the epigraph cone
    ||(pi_m, (1-q)/2)|| <= (1+q)/2, keeping the row second-order conic.
    """
    f_r, pi_n_r = point
    if not (math.isfinite(f_r) and math.isfinite(pi_n_r)):
        raise GasModelError(f"non-finite linearization point for {pipeline.pid}")
    c_sq = pipeline.weymouth ** 2
    f = gv.flow[pipeline.pid][hour]
    pi_m = gv.pressure[pipeline.from_node][hour]
    pi_n = gv.pressure[pipeline.to_node][hour]
    q = ((2.0 * f_r / c_sq) * f - f_r ** 2 / c_sq
         + 2.0 * pi_n_r * pi_n - pi_n_r ** 2 + slack.expr())
    return model.add_soc([pi_m.expr(), 0.5 * (1.0 - q)], 0.5 * (1.0 + q),
                         name=f"gas.taylor[{pipeline.pid},{hour}]")


def weymouth_residuals(values: np.ndarray, gv: GasVars,
                       instance: IegsInstance) -> np.ndarray:
    """Relative Weymouth defect (pi_m^2 - pi_n^2 - F^2/C^2) / pi_m^2 for
    every pipeline-hour."""
    gn = instance.gas_network
    T = instance.horizon
    out = np.zeros((len(gn.pipelines), T))
    for i, p in enumerate(gn.pipelines):
        for t in range(T):
            pi_m = values[gv.pressure[p.from_node][t].idx]
            pi_n = values[gv.pressure[p.to_node][t].idx]
            f = values[gv.flow[p.pid][t].idx]
            if pi_m == 0.0:
                raise GasModelError(f"zero sending pressure on {p.pid} hour {t}")
            out[i, t] = (pi_m ** 2 - pi_n ** 2 - f ** 2 / p.weymouth ** 2) / pi_m ** 2
    return out


def measure_relaxation_gap(values: np.ndarray, gv: GasVars,
                           instance: IegsInstance) -> float:
    """Maximum relative SOC relaxation gap over all pipelines and hours."""
    if not instance.gas_network.pipelines:
        return 0.0
    return float(np.max(weymouth_residuals(values, gv, instance)))


def linearization_points(values: np.ndarray, gv: GasVars,
                         instance: IegsInstance) -> dict[tuple[str, int], tuple[float, float]]:
    """(F, pi_n) iterates per pipeline-hour for the next Taylor expansion."""
    points = {}
    for p in instance.gas_network.pipelines:
        for t in range(instance.horizon):
            points[(p.pid, t)] = (float(values[gv.flow[p.pid][t].idx]),
                                  float(values[gv.pressure[p.to_node][t].idx]))
    return points


# ---------------------------------------------------------------------------
# PCCP state
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PccpParams:
    """Sequential-algorithm controls (defaults follow the reference
    methodology: gap 1e-3, initial penalty 0.02 grown 1.5x to 1000,
    at most 50 iterations)."""

    eps_gap: float = 1e-3
    penalty_init: float = 0.02
    penalty_max: float = 1000.0
    penalty_growth: float = 1.5
    max_iter: int = 50

    def __post_init__(self):
        if self.eps_gap <= 0 or self.penalty_init <= 0:
            raise GasModelError("PCCP tolerances must be positive")
        if self.penalty_growth < 1.0 or self.penalty_max < self.penalty_init:
            raise GasModelError("PCCP penalty schedule is inconsistent")


@dataclass(frozen=True)
class PccpState:
    iteration: int
    points: dict[tuple[str, int], tuple[float, float]]
    penalty: float
    gap: float
    history: tuple[dict, ...] = ()

    def converged(self, params: PccpParams) -> bool:
        return self.gap <= params.eps_gap

    def exhausted(self, params: PccpParams) -> bool:
        return self.iteration >= params.max_iter


def next_penalty(state: PccpState, params: PccpParams) -> float:
    return min(params.penalty_growth * state.penalty, params.penalty_max)


def pccp_step(state: PccpState, values: np.ndarray, gv: GasVars,
              instance: IegsInstance, params: PccpParams,
              objective: float = math.nan, slack_total: float = 0.0) -> PccpState:
    """Advance to the next iterate: refresh linearization points from the
    latest solution, recompute the gap, grow the penalty."""
    gap = measure_relaxation_gap(values, gv, instance)
    penalty = next_penalty(state, params)
    record = {"iteration": state.iteration + 1, "gap": gap, "penalty": penalty,
              "objective": objective, "slack_total": slack_total}
    return PccpState(iteration=state.iteration + 1,
                     points=linearization_points(values, gv, instance),
                     penalty=penalty, gap=gap,
                     history=state.history + (record,))


def initial_pccp_state(values: np.ndarray, gv: GasVars, instance: IegsInstance,
                       params: PccpParams, objective: float = math.nan) -> PccpState:
    gap = measure_relaxation_gap(values, gv, instance)
    record = {"iteration": 0, "gap": gap, "penalty": params.penalty_init,
              "objective": objective, "slack_total": 0.0}
    return PccpState(iteration=0,
                     points=linearization_points(values, gv, instance),
                     penalty=params.penalty_init, gap=gap, history=(record,))


def write_pccp_trace(history, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "max_gap", "penalty", "objective",
                         "slack_total"])
        for rec in history:
            writer.writerow([rec["iteration"], repr(float(rec["gap"])),
                             repr(float(rec["penalty"])),
                             repr(float(rec["objective"])),
                             repr(float(rec["slack_total"]))])
