"""Frequency dynamics: swing-equation simulation, closed-form nadir,
the inertia-response product requirement, and the per-hour frequency
constraint rows (RoCoF, nadir big-M linearization, quasi-steady state).

Conventions: system inertia H_t is in MW*s/Hz (already divided by the
nominal frequency), damping D'_t = D * P_t^D is in MW/Hz, and frequency
deviations are reported as positive drops below nominal.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from .instance import FrequencyParams, IegsInstance
from .optmodel import LinExpr, Model, Var, lin_sum


class FrequencyError(ValueError):
    """Inconsistent frequency-dynamics inputs."""


# ---------------------------------------------------------------------------
# snapshots and simulation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FrequencySnapshot:
    """Commitment and PFR state of one hour, with derived aggregates."""

    hour: int
    gen_status: dict[str, int]
    vi_status: dict[str, int]
    gen_pfr: dict[str, float]
    wind_pfr: dict[str, float]
    load: float                 # MW
    contingency: float          # MW
    inertia: float              # H_t, MW*s/Hz
    total_pfr: float            # R_t, MW

    def damping_of(self, params: FrequencyParams) -> float:
        return params.damping * self.load


def system_inertia(instance: IegsInstance, gen_status: dict[str, int],
                   vi_status: dict[str, int]) -> float:
    """H_t = (sum H_i P_i^max x_i + sum H_w W_w^max y_w) / f0."""
    h = sum(g.inertia * g.p_max * gen_status.get(g.gid, 0)
            for g in instance.generators)
    h += sum(w.virtual_inertia * w.capacity * vi_status.get(w.wid, 0)
             for w in instance.wind_farms)
    return h / instance.frequency.f0


def snapshot_from_schedule(instance: IegsInstance, hour: int,
                           gen_status: dict[str, int], vi_status: dict[str, int],
                           gen_pfr: dict[str, float],
                           wind_pfr: dict[str, float]) -> FrequencySnapshot:
    instance.check_hour(hour)
    return FrequencySnapshot(
        hour=hour,
        gen_status=dict(gen_status), vi_status=dict(vi_status),
        gen_pfr=dict(gen_pfr), wind_pfr=dict(wind_pfr),
        load=instance.total_load(hour),
        contingency=instance.contingency(hour),
        inertia=system_inertia(instance, gen_status, vi_status),
        total_pfr=sum(gen_pfr.values()) + sum(wind_pfr.values()),
    )


@dataclass(frozen=True)
class SwingTrajectory:
    time: np.ndarray            # s
    deviation: np.ndarray       # Hz, signed (negative below nominal)
    rocof: float                # Hz/s, max |df/dt| over the first 0.5 s
    nadir: float                # Hz, largest drop below nominal
    qss: float                  # Hz, asymptotic drop once PFR is delivered

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["tau_s", "delta_f_hz"])
            for t, f in zip(self.time, self.deviation):
                writer.writerow([f"{t:.6f}", f"{f:.9f}"])

    def metrics(self) -> dict:
        return {"rocof_hz_per_s": self.rocof, "nadir_hz": self.nadir,
                "qss_hz": self.qss}

    def write_metrics(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.metrics(), fh, indent=1)
            fh.write("\n")


def simulate_swing(snapshot: FrequencySnapshot, params: FrequencyParams,
                   dt: float = 1e-3, horizon: float = 60.0) -> SwingTrajectory:
    """Integrate 2H df/dt + D'_t f = u(t) - dP with RK4.

    u(t) is the aggregate PFR ramp: zero before the governor dead time,
    linear over the delivery time, then constant at the total PFR.
    """
    if snapshot.inertia <= 0:
        raise FrequencyError(f"hour {snapshot.hour}: nonpositive system inertia")
    if dt > 1e-3 + 1e-12:
        raise FrequencyError("integration step must be at most 1 ms")
    two_h = 2.0 * snapshot.inertia
    dprime = snapshot.damping_of(params)
    dp = snapshot.contingency
    # governors never leave the dead band for disturbances damping can
    # absorb inside it, so the ramp response stays off
    r_total = snapshot.total_pfr if dp > dprime * params.df_db else 0.0
    t_db, t_d = params.t_db, params.delivery_time

    def pfr(tau: float) -> float:
        if tau <= t_db:
            return 0.0
        if tau >= t_db + t_d:
            return r_total
        return r_total * (tau - t_db) / t_d

    def rhs(tau: float, f: float) -> float:
        return (pfr(tau) - dp - dprime * f) / two_h

    n_steps = int(round(horizon / dt))
    time = np.empty(n_steps + 1)
    dev = np.empty(n_steps + 1)
    time[0] = 0.0
    dev[0] = 0.0
    f = 0.0
    half = dt / 2.0
    for k in range(n_steps):
        tau = k * dt
        k1 = rhs(tau, f)
        k2 = rhs(tau + half, f + half * k1)
        k3 = rhs(tau + half, f + half * k2)
        k4 = rhs(tau + dt, f + dt * k3)
        f += dt * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
        if not math.isfinite(f):
            raise FrequencyError(f"hour {snapshot.hour}: non-finite state at "
                                 f"tau={tau + dt:.3f} s")
        time[k + 1] = tau + dt
        dev[k + 1] = f

    window = max(1, min(int(round(0.5 / dt)), n_steps))
    slopes = np.diff(dev[:window + 1]) / dt
    rocof = float(np.max(np.abs(slopes)))
    nadir = float(max(0.0, -np.min(dev)))
    # the trajectory decays exponentially to the quasi-steady state once the
    # ramp is delivered; report the asymptote rather than a truncated sample
    if horizon >= t_db + t_d:
        qss = (dp - r_total) / dprime
    else:
        qss = float(-dev[-1])
    return SwingTrajectory(time=time, deviation=dev, rocof=rocof,
                           nadir=nadir, qss=qss)


# ---------------------------------------------------------------------------
# closed-form nadir and the inertia-response requirement
# ---------------------------------------------------------------------------


def nadir_closed_form(r_total: float, h_total: float, params: FrequencyParams,
                      contingency: float, load: float) -> float:
    """Post-contingency frequency drop at nadir, in Hz.

    Valid when the governor starts ramping as the deviation crosses the
    dead band; see :func:`deadband_crossing_time`.
    """
    if r_total <= 0 or h_total <= 0:
        raise FrequencyError("nadir formula needs positive total PFR and inertia")
    dprime = params.damping * load
    excess = contingency - dprime * params.df_db
    if excess <= 0:
        raise FrequencyError("contingency absorbed inside the governor dead band")
    beta = 2.0 * r_total * h_total / (params.delivery_time * dprime ** 2)
    arg = beta / (excess / dprime + beta)
    if arg <= 0:
        raise FrequencyError("nonpositive log argument; inconsistent inputs")
    return beta * math.log(arg) + excess / dprime + params.df_db


def deadband_crossing_time(h_total: float, params: FrequencyParams,
                           contingency: float, load: float) -> float:
    """Time for the unforced post-contingency drop to reach the dead band.

    Setting the governor dead time to this value makes the simulated
    dynamics consistent with the closed-form nadir.
    """
    dprime = params.damping * load
    ratio = dprime * params.df_db / contingency
    if ratio >= 1:
        raise FrequencyError("dead band is never crossed for this contingency")
    return -2.0 * h_total / dprime * math.log1p(-ratio)


def _kappa_lhs(kappa: float, t_d: float, a: float) -> float:
    return 2.0 * kappa / t_d * math.log(2.0 * kappa / (a + 2.0 * kappa))


def solve_kappa(params: FrequencyParams, contingency: float, load: float,
                max_iter: int = 10_000) -> float:
    """Unique positive root of the inertia-response product equation.

    The requirement R_t * H_t >= kappa_t is sufficient for the nadir to
    stay within the limit; at equality the closed-form nadir equals the
    limit exactly.
    """
    dprime = params.damping * load
    excess = contingency - dprime * params.df_db
    if excess <= 0:
        raise FrequencyError("solve_kappa requires a contingency beyond the dead band")
    if params.df_max <= params.df_db:
        raise FrequencyError("nadir limit must exceed the governor dead band")
    t_d = params.delivery_time
    a = t_d * dprime * excess
    rhs = dprime ** 2 * (params.df_max - params.df_db) - dprime * excess
    if rhs >= 0:
        # damping alone keeps the nadir within the limit; no positive root
        raise FrequencyError("no positive root: the nadir limit does not bind "
                             "(contingency too small for this load level)")

    lo, hi = 1e-6, 10.0 * t_d * dprime * contingency
    f_lo = _kappa_lhs(lo, t_d, a) - rhs
    f_hi = _kappa_lhs(hi, t_d, a) - rhs
    grow = 0
    while f_lo * f_hi > 0 and grow < 60:
        hi *= 2.0
        f_hi = _kappa_lhs(hi, t_d, a) - rhs
        grow += 1
    if f_lo * f_hi > 0:
        raise FrequencyError("no sign change in the kappa bracket; "
                             "inputs violate the preconditions")

    tol = 1e-9 * max(1.0, abs(rhs))
    kappa = 0.5 * (lo + hi)
    for _ in range(max_iter):
        kappa = 0.5 * (lo + hi)
        f_mid = _kappa_lhs(kappa, t_d, a) - rhs
        if abs(f_mid) <= tol:
            break
        if f_lo * f_mid <= 0:
            hi = kappa
            f_hi = f_mid
        else:
            lo = kappa
            f_lo = f_mid
    else:
        raise FrequencyError("kappa bisection exceeded the iteration cap")

    # Newton polish: d/dk of the left side is (2/T_d)(log u + 1 - u), u in (0,1)
    for _ in range(8):
        u = 2.0 * kappa / (a + 2.0 * kappa)
        deriv = 2.0 / t_d * (math.log(u) + 1.0 - u)
        if deriv == 0:
            break
        step = (_kappa_lhs(kappa, t_d, a) - rhs) / deriv
        nxt = kappa - step
        if not (lo <= nxt <= hi) or not math.isfinite(nxt):
            break
        kappa = nxt
        if abs(_kappa_lhs(kappa, t_d, a) - rhs) <= tol:
            break
    return kappa


def kappa_requirement(params: FrequencyParams, contingency: float,
                      load: float) -> float:
    """kappa_t, or 0.0 when the nadir limit cannot bind for this hour."""
    dprime = params.damping * load
    if contingency <= dprime * params.df_max:
        return 0.0
    return solve_kappa(params, contingency, load)


# ---------------------------------------------------------------------------
# constraint block
# ---------------------------------------------------------------------------


@dataclass
class FreqConstraintBlock:
    hour: int
    kappa: float
    big_m: float
    rocof_row: object
    nadir_row: object
    qss_row: object
    big_m_rows: list
    aux_gen: dict[str, Var]
    aux_wind: dict[str, Var]

    def row_count(self) -> int:
        return 3 + len(self.big_m_rows)


def pfr_big_m(instance: IegsInstance) -> float:
    """Upper bound on the total PFR plus one MW of slack."""
    return (sum(g.reserve_max for g in instance.generators)
            + sum(w.reserve_max for w in instance.wind_farms) + 1.0)


def build_frequency_block(model: Model, instance: IegsInstance, hour: int,
                          x: dict[str, Var], y: dict[str, Var],
                          rg: dict[str, Var], rw: dict[str, Var],
                          kappa: float, big_m: float | None = None
                          ) -> FreqConstraintBlock:
    """Emit the hour's RoCoF row, nadir rows with big-M auxiliaries, and
    quasi-steady-state row over the given variable handles."""
    t = instance.check_hour(hour)
    params = instance.frequency
    f0 = params.f0
    dp = instance.contingency(t)
    dprime = params.damping * instance.total_load(t)
    big_m = pfr_big_m(instance) if big_m is None else big_m
    if big_m <= 0:
        raise FrequencyError("big-M must be positive")
    if kappa is None:
        raise FrequencyError(f"hour {t}: kappa not precomputed")

    total_pfr = lin_sum([rg[g.gid] for g in instance.generators]
                        + [rw[w.wid] for w in instance.wind_farms])

    inertia = lin_sum([(g.inertia * g.p_max / f0) * x[g.gid]
                       for g in instance.generators]
                      + [(w.virtual_inertia * w.capacity / f0) * y[w.wid]
                         for w in instance.wind_farms])
    rocof_row = model.add_linear(inertia, ">=", abs(dp) / (2.0 * params.rocof_max),
                                 name=f"freq.rocof[{t}]")

    aux_gen: dict[str, Var] = {}
    aux_wind: dict[str, Var] = {}
    big_m_rows = []
    weighted = LinExpr()
    for g in instance.generators:
        aux = model.add_var(f"freq.X[{g.gid},{t}]", -big_m, big_m)
        aux_gen[g.gid] = aux
        weighted._iadd((g.inertia * g.p_max / f0) * aux, 1.0)
        big_m_rows.append(model.add_le(aux, big_m * x[g.gid].expr(),
                                       name=f"freq.on_ub[{g.gid},{t}]"))
        big_m_rows.append(model.add_ge(aux, -big_m * x[g.gid].expr(),
                                       name=f"freq.on_lb[{g.gid},{t}]"))
        gap = aux - total_pfr
        big_m_rows.append(model.add_le(gap, big_m * (1 - x[g.gid].expr()),
                                       name=f"freq.link_ub[{g.gid},{t}]"))
        big_m_rows.append(model.add_ge(gap, -big_m * (1 - x[g.gid].expr()),
                                       name=f"freq.link_lb[{g.gid},{t}]"))
    for w in instance.wind_farms:
        aux = model.add_var(f"freq.Y[{w.wid},{t}]", -big_m, big_m)
        aux_wind[w.wid] = aux
        weighted._iadd((w.virtual_inertia * w.capacity / f0) * aux, 1.0)
        big_m_rows.append(model.add_le(aux, big_m * y[w.wid].expr(),
                                       name=f"freq.vi_ub[{w.wid},{t}]"))
        big_m_rows.append(model.add_ge(aux, -big_m * y[w.wid].expr(),
                                       name=f"freq.vi_lb[{w.wid},{t}]"))
        gap = aux - total_pfr
        big_m_rows.append(model.add_le(gap, big_m * (1 - y[w.wid].expr()),
                                       name=f"freq.vlink_ub[{w.wid},{t}]"))
        big_m_rows.append(model.add_ge(gap, -big_m * (1 - y[w.wid].expr()),
                                       name=f"freq.vlink_lb[{w.wid},{t}]"))

    nadir_row = model.add_linear(weighted, ">=", kappa, name=f"freq.nadir[{t}]")
    qss_row = model.add_linear(total_pfr, ">=", dp - dprime * params.df_qss_max,
                               name=f"freq.qss[{t}]")
    return FreqConstraintBlock(hour=t, kappa=kappa, big_m=big_m,
                               rocof_row=rocof_row, nadir_row=nadir_row,
                               qss_row=qss_row, big_m_rows=big_m_rows,
                               aux_gen=aux_gen, aux_wind=aux_wind)
