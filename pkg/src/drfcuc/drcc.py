"""Wind-power uncertainty machinery.

Covers the moment ambiguity description, its strengthening with
unimodality, the SOC inner approximations of the joint chance
constraint (Bonferroni split with per-farm budgets as decision
variables), the exact individual-chance variants, the scenario-counting
(SAA) baseline, and Monte Carlo scenario generation.

Safety-factor cheat sheet, for a per-constraint budget e:

* exact one-sided moment bound:      sqrt((1-e)/e)
* SOC-friendly conservative form:    1/sqrt(e(1+e))
* exact unimodal bound (e <= 1/6):   sqrt((4/9-e)/e)
* SOC-friendly conservative form:    (4/9)/sqrt(e(4/9+e))
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from .optmodel import Model, Var

UNIMODAL_EPS_MAX = 1.0 / 6.0


class UncertaintyError(ValueError):
    """Invalid ambiguity or scenario inputs."""


# ---------------------------------------------------------------------------
# ambiguity description
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AmbiguitySpec:
    """Per-(farm, hour) mean/std plus the joint violation budget."""

    mean: np.ndarray        # (farms, hours), MW
    std: np.ndarray         # (farms, hours), MW
    epsilon: float
    unimodal: bool = False

    def __post_init__(self):
        mean = np.atleast_2d(np.asarray(self.mean, dtype=float))
        std = np.atleast_2d(np.asarray(self.std, dtype=float))
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)
        if mean.shape != std.shape:
            raise UncertaintyError("mean and std shapes differ")
        if np.any(std < 0):
            raise UncertaintyError("negative standard deviation")
        if not 0.0 < self.epsilon < 1.0:
            raise UncertaintyError(f"epsilon {self.epsilon} outside (0, 1)")
        if self.unimodal and self.epsilon > UNIMODAL_EPS_MAX + 1e-12:
            raise UncertaintyError(
                f"unimodal builds require epsilon <= 1/6, got {self.epsilon}")

    @property
    def n_farms(self) -> int:
        return self.mean.shape[0]

    @property
    def horizon(self) -> int:
        return self.mean.shape[1]

    def with_epsilon(self, epsilon: float, unimodal: bool | None = None) -> "AmbiguitySpec":
        return AmbiguitySpec(self.mean, self.std, epsilon,
                             self.unimodal if unimodal is None else unimodal)


def ambiguity_from_instance(instance, epsilon: float | None = None,
                            unimodal: bool | None = None) -> AmbiguitySpec:
    """Ground-truth moments implied by the instance's forecast and its
    uncertainty configuration."""
    cfg = instance.uncertainty
    mean = (np.array(cfg.mean, dtype=float) if cfg.mean is not None
            else instance.forecast_matrix())
    if cfg.std is not None:
        std = np.array(cfg.std, dtype=float)
    elif cfg.variance_mode == "std_fraction":
        std = cfg.fraction * mean
    else:
        std = np.sqrt(cfg.fraction * mean)
    return AmbiguitySpec(mean, std,
                         cfg.epsilon if epsilon is None else epsilon,
                         cfg.unimodal if unimodal is None else unimodal)


# ---------------------------------------------------------------------------
# scenarios
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScenarioSet:
    """Sampled wind outputs, (samples, farms, hours)."""

    values: np.ndarray
    seed: int
    provenance: str = "in-sample"

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 3 or vals.shape[0] < 1:
            raise UncertaintyError("scenario array must be (samples, farms, hours)")
        object.__setattr__(self, "values", vals)

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    def save(self, csv_path, sidecar_path=None) -> None:
        with open(csv_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["s", "w", "t", "value"])
            n_s, n_w, n_t = self.values.shape
            for s in range(n_s):
                for w in range(n_w):
                    for t in range(n_t):
                        writer.writerow([s, w, t, repr(float(self.values[s, w, t]))])
        side = sidecar_path or str(csv_path) + ".json"
        with open(side, "w") as fh:
            json.dump({"seed": self.seed, "provenance": self.provenance,
                       "shape": list(self.values.shape)}, fh)
            fh.write("\n")


def load_scenarios(csv_path, sidecar_path=None) -> ScenarioSet:
    side = sidecar_path or str(csv_path) + ".json"
    with open(side) as fh:
        meta = json.load(fh)
    values = np.zeros(meta["shape"])
    with open(csv_path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for s, w, t, v in reader:
            values[int(s), int(w), int(t)] = float(v)
    return ScenarioSet(values, seed=meta["seed"], provenance=meta["provenance"])


def generate_scenarios(mean: np.ndarray, std: np.ndarray, capacity: np.ndarray,
                       count: int, seed: int,
                       provenance: str = "in-sample") -> ScenarioSet:
    """Independent Gaussian draws per (farm, hour), clipped to the
    physical band [0, capacity]."""
    if count < 1:
        raise UncertaintyError("need at least one scenario")
    mean = np.atleast_2d(np.asarray(mean, dtype=float))
    std = np.atleast_2d(np.asarray(std, dtype=float))
    cap = np.asarray(capacity, dtype=float).reshape(-1, 1)
    rng = np.random.default_rng(seed)
    draws = rng.normal(loc=mean, scale=std, size=(count, *mean.shape))
    np.clip(draws, 0.0, cap, out=draws)
    return ScenarioSet(draws, seed=seed, provenance=provenance)


def split_scenarios(scn: ScenarioSet, n_first: int) -> tuple[ScenarioSet, ScenarioSet]:
    if not 0 < n_first < scn.n_samples:
        raise UncertaintyError("split point outside the sample range")
    return (ScenarioSet(scn.values[:n_first], scn.seed, "in-sample"),
            ScenarioSet(scn.values[n_first:], scn.seed, "out-of-sample"))


def estimate_moments(samples: ScenarioSet, n: int, epsilon: float,
                     unimodal: bool = False) -> AmbiguitySpec:
    """Empirical mean and unbiased variance over the first n samples."""
    if n < 2:
        raise UncertaintyError("moment estimation needs at least two samples")
    if n > samples.n_samples:
        raise UncertaintyError(f"asked for {n} samples, set holds {samples.n_samples}")
    block = samples.values[:n]
    mean = block.mean(axis=0)
    std = block.std(axis=0, ddof=1)
    return AmbiguitySpec(mean, std, epsilon, unimodal)


# ---------------------------------------------------------------------------
# safety factors
# ---------------------------------------------------------------------------


def cantelli_factor(eps: float) -> float:
    """Exact one-sided moment safety factor."""
    if not 0.0 < eps < 1.0:
        raise UncertaintyError(f"eps {eps} outside (0, 1)")
    return math.sqrt((1.0 - eps) / eps)


def vp_factor(eps: float) -> float:
    """Exact one-sided unimodal safety factor, valid for eps <= 1/6."""
    if not 0.0 < eps <= UNIMODAL_EPS_MAX + 1e-12:
        raise UncertaintyError(f"eps {eps} outside (0, 1/6]")
    return math.sqrt((4.0 / 9.0 - eps) / eps)


def soc_factor_moment(eps: float) -> float:
    """Smallest r admitted by the moment-only SOC rows at a fixed budget:
    s = sqrt(eps(1+eps)), r = 1/s."""
    if not 0.0 < eps < 1.0:
        raise UncertaintyError(f"eps {eps} outside (0, 1)")
    return 1.0 / math.sqrt(eps * (1.0 + eps))


def soc_factor_unimodal(eps: float) -> float:
    """Smallest r admitted by the unimodal SOC rows at a fixed budget:
    s = sqrt(eps(4/9+eps)), r = (4/9)/s."""
    if not 0.0 < eps <= UNIMODAL_EPS_MAX + 1e-12:
        raise UncertaintyError(f"eps {eps} outside (0, 1/6]")
    return (4.0 / 9.0) / math.sqrt(eps * (4.0 / 9.0 + eps))


# ---------------------------------------------------------------------------
# constraint blocks
# ---------------------------------------------------------------------------


@dataclass
class DrccBlock:
    hour: int
    kind: str                       # "moment" | "unimodal"
    eps_vars: dict[str, Var]
    r_vars: dict[str, Var]
    s_vars: dict[str, Var]
    wind_rows: list
    cones: list
    budget_row: object


def _theorem_block(model: Model, spec: AmbiguitySpec, farm_ids: list[str],
                   pw: dict[str, Var], rw: dict[str, Var], hour: int,
                   kind: str) -> DrccBlock:
    if kind == "moment":
        c_small, c_big = 1.0, 2.0      # cone constants 1 and 2
    else:
        c_small, c_big = 4.0 / 9.0, 4.0 / 3.0
        if spec.epsilon > UNIMODAL_EPS_MAX + 1e-12:
            raise UncertaintyError(
                f"the unimodal reformulation requires epsilon <= 1/6, "
                f"got {spec.epsilon}")
    eps_vars, r_vars, s_vars = {}, {}, {}
    wind_rows, cones = [], []
    for w, wid in enumerate(farm_ids):
        mu = float(spec.mean[w, hour])
        sigma = float(spec.std[w, hour])
        e = model.add_var(f"drcc.eps[{wid},{hour}]", 0.0, spec.epsilon)
        r = model.add_var(f"drcc.r[{wid},{hour}]", 0.0, 1e6)
        s = model.add_var(f"drcc.s[{wid},{hour}]", 0.0, 2.0)
        eps_vars[wid], r_vars[wid], s_vars[wid] = e, r, s
        wind_rows.append(model.add_le(sigma * r + pw[wid] + rw[wid], mu,
                                      name=f"drcc.wind[{wid},{hour}]"))
        cones.append(model.add_soc([2.0 * s.expr(), c_small], 2.0 * e + c_small,
                                   name=f"drcc.cone_es[{wid},{hour}]"))
        cones.append(model.add_soc([c_big, r - s], r + s,
                                   name=f"drcc.cone_rs[{wid},{hour}]"))
    budget = model.add_linear(sum(e.expr() for e in eps_vars.values()),
                              "<=", spec.epsilon, name=f"drcc.budget[{hour}]")
    return DrccBlock(hour=hour, kind=kind, eps_vars=eps_vars, r_vars=r_vars,
                     s_vars=s_vars, wind_rows=wind_rows, cones=cones,
                     budget_row=budget)


def build_theorem1_soc(model: Model, spec: AmbiguitySpec, farm_ids: list[str],
                       pw: dict[str, Var], rw: dict[str, Var],
                       hour: int) -> DrccBlock:
    """Joint chance constraint under the moment ambiguity set: Bonferroni
    split with optimized budgets, conservative SOC form."""
    return _theorem_block(model, spec, farm_ids, pw, rw, hour, "moment")


def build_theorem2_soc(model: Model, spec: AmbiguitySpec, farm_ids: list[str],
                       pw: dict[str, Var], rw: dict[str, Var],
                       hour: int) -> DrccBlock:
    """As theorem 1 but under the moment+unimodality set; requires the
    joint budget epsilon <= 1/6."""
    return _theorem_block(model, spec, farm_ids, pw, rw, hour, "unimodal")


def build_individual_drcc(model: Model, spec: AmbiguitySpec, farm_ids: list[str],
                          pw: dict[str, Var], rw: dict[str, Var], hour: int,
                          eps_ind: float, unimodal: bool = False) -> list:
    """Individual chance rows at a fixed per-constraint budget; exact
    reformulation, no auxiliaries."""
    factor = vp_factor(eps_ind) if unimodal else cantelli_factor(eps_ind)
    rows = []
    for w, wid in enumerate(farm_ids):
        mu = float(spec.mean[w, hour])
        sigma = float(spec.std[w, hour])
        rows.append(model.add_le(pw[wid] + rw[wid], mu - factor * sigma,
                                 name=f"drcc.ind[{wid},{hour}]"))
    return rows


@dataclass
class SaaBlock:
    hour: int
    indicator_vars: list[Var]
    rows: list
    budget_row: object
    budget: int


def build_saa_block(model: Model, scenarios: ScenarioSet, farm_ids: list[str],
                    pw: dict[str, Var], rw: dict[str, Var], epsilon: float,
                    hour: int, capacities: np.ndarray) -> SaaBlock:
    """Scenario-counting approximation of the hour's joint chance
    constraint: one shared violation indicator per sample, at most
    floor(eps * S) samples may be violated."""
    n_s = scenarios.n_samples
    budget = int(math.floor(epsilon * n_s))
    z_vars = []
    rows = []
    for s in range(n_s):
        z = model.add_binary(f"saa.z[{s},{hour}]")
        z_vars.append(z)
        for w, wid in enumerate(farm_ids):
            sample = float(scenarios.values[s, w, hour])
            big_m = float(capacities[w])
            rows.append(model.add_le(pw[wid] + rw[wid] - big_m * z,
                                     sample, name=f"saa.wind[{s},{wid},{hour}]"))
    budget_row = model.add_linear(sum(z.expr() for z in z_vars), "<=",
                                  float(budget), name=f"saa.budget[{hour}]")
    return SaaBlock(hour=hour, indicator_vars=z_vars, rows=rows,
                    budget_row=budget_row, budget=budget)
