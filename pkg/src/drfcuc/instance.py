"""Domain data model of an integrated electricity-gas study case.

Instances are loaded from a single versioned JSON document (schema v1,
see ``load_instance``), validated eagerly, and immutable afterwards so
they can be shared freely across threads.  Units throughout: power in
MW, frequency in Hz, time in hours (series) and seconds (dynamics),
gas flow in kcf/h, pressure in MPa.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

SCHEMA_VERSION = 1

GFU = "gfu"
NON_GFU = "non_gfu"


class InstanceError(ValueError):
    """Instance file failed schema or invariant validation."""


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise InstanceError(msg)


# ---------------------------------------------------------------------------
# component records
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Generator:
    gid: str
    kind: str                 # gfu | non_gfu
    bus: str
    p_min: float
    p_max: float
    ramp_up: float            # MW/h
    ramp_down: float
    min_up: int               # hours
    min_down: int
    inertia: float            # s
    reserve_max: float        # MW
    cost_energy: float        # $/MWh
    cost_no_load: float       # $/h
    cost_startup: float       # $/event
    cost_shutdown: float
    cost_pfr: float           # $/MW
    gas_node: str | None = None
    conversion: float | None = None   # kcf per MWh, GFUs only

    def validate(self) -> None:
        g = f"generator {self.gid}"
        _require(self.kind in (GFU, NON_GFU), f"{g}: unknown kind {self.kind!r}")
        _require(0.0 <= self.p_min <= self.p_max, f"{g}: requires 0 <= p_min <= p_max")
        _require(self.ramp_up >= 0 and self.ramp_down >= 0, f"{g}: negative ramp rate")
        _require(self.min_up >= 1 and self.min_down >= 1,
                 f"{g}: min up/down times must be >= 1 hour")
        _require(self.inertia >= 0, f"{g}: negative inertia constant")
        _require(0.0 <= self.reserve_max <= self.p_max,
                 f"{g}: reserve_max outside [0, p_max]")
        if self.kind == GFU:
            _require(self.gas_node is not None, f"{g}: GFU needs a gas node")
            _require(self.conversion is not None and self.conversion > 0,
                     f"{g}: GFU needs a positive conversion efficiency")
        else:
            _require(self.gas_node is None, f"{g}: non-GFU must not bind a gas node")


@dataclass(frozen=True)
class WindFarm:
    wid: str
    bus: str
    capacity: float           # MW installed
    virtual_inertia: float    # s
    reserve_max: float        # MW
    cost_vi: float            # $/h while committed
    cost_pfr: float           # $/MW
    forecast: tuple[float, ...]   # MW per hour

    def validate(self, horizon: int) -> None:
        w = f"wind farm {self.wid}"
        _require(self.capacity > 0, f"{w}: capacity must be positive")
        _require(0.0 <= self.reserve_max <= self.capacity,
                 f"{w}: reserve_max outside [0, capacity]")
        _require(self.virtual_inertia >= 0, f"{w}: negative virtual inertia")
        _require(len(self.forecast) == horizon,
                 f"{w}: forecast length {len(self.forecast)} != horizon {horizon}")
        _require(all(0.0 <= v <= self.capacity for v in self.forecast),
                 f"{w}: forecast outside [0, capacity]")


@dataclass(frozen=True)
class Line:
    lid: str
    from_bus: str
    to_bus: str
    capacity: float           # MW
    reactance: float | None = None   # p.u., used when shift factors are derived


@dataclass(frozen=True)
class PowerLoad:
    lid: str
    bus: str
    series: tuple[float, ...]   # MW per hour


@dataclass(frozen=True)
class PowerNetwork:
    buses: tuple[str, ...]
    lines: tuple[Line, ...]
    loads: tuple[PowerLoad, ...]
    shift_factors: tuple[tuple[float, ...], ...] | None = None
    reference_bus: str | None = None

    def validate(self, horizon: int) -> None:
        _require(len(set(self.buses)) == len(self.buses), "duplicate bus ids")
        busset = set(self.buses)
        for ln in self.lines:
            _require(ln.from_bus in busset and ln.to_bus in busset,
                     f"line {ln.lid}: endpoint not a known bus")
            _require(ln.capacity > 0, f"line {ln.lid}: nonpositive capacity")
        for ld in self.loads:
            _require(ld.bus in busset, f"load {ld.lid}: bus {ld.bus!r} unknown")
            _require(len(ld.series) == horizon,
                     f"load {ld.lid}: series length != horizon")
            _require(all(v >= 0 for v in ld.series), f"load {ld.lid}: negative demand")
        if self.shift_factors is not None:
            _require(len(self.shift_factors) == len(self.lines),
                     "shift-factor row count != line count")
            for row in self.shift_factors:
                _require(len(row) == len(self.buses),
                         "shift-factor column count != bus count")
        if self.reference_bus is not None:
            _require(self.reference_bus in busset,
                     f"reference bus {self.reference_bus!r} unknown")

    def bus_index(self, bus: str) -> int:
        return self.buses.index(bus)

    def total_load(self, t: int) -> float:
        return sum(ld.series[t] for ld in self.loads)


@dataclass(frozen=True)
class GasNode:
    nid: str
    pressure_min: float       # MPa
    pressure_max: float


@dataclass(frozen=True)
class Pipeline:
    pid: str
    from_node: str            # assumed flow direction from -> to
    to_node: str
    weymouth: float           # kcf/h per MPa
    linepack: float           # kcf per MPa of average pressure
    linepack_init: float      # kcf


@dataclass(frozen=True)
class Compressor:
    cid: str
    inlet: str
    outlet: str
    flow_max: float           # kcf/h
    consumption_fraction: float
    ratio_min: float
    ratio_max: float


@dataclass(frozen=True)
class GasSource:
    sid: str
    node: str
    flow_min: float
    flow_max: float


@dataclass(frozen=True)
class GasLoad:
    lid: str
    node: str
    series: tuple[float, ...]


@dataclass(frozen=True)
class GasNetwork:
    nodes: tuple[GasNode, ...]
    pipelines: tuple[Pipeline, ...]
    compressors: tuple[Compressor, ...]
    sources: tuple[GasSource, ...]
    loads: tuple[GasLoad, ...]

    def validate(self, horizon: int) -> None:
        _require(len({n.nid for n in self.nodes}) == len(self.nodes),
                 "duplicate gas node ids")
        nodeset = {n.nid for n in self.nodes}
        for n in self.nodes:
            _require(0.0 < n.pressure_min <= n.pressure_max,
                     f"gas node {n.nid}: requires 0 < pressure_min <= pressure_max")
        for p in self.pipelines:
            _require(p.from_node in nodeset and p.to_node in nodeset,
                     f"pipeline {p.pid}: endpoint not a known gas node")
            _require(p.weymouth > 0, f"pipeline {p.pid}: Weymouth constant must be > 0")
            _require(p.linepack > 0, f"pipeline {p.pid}: linepack constant must be > 0")
            _require(p.linepack_init >= 0, f"pipeline {p.pid}: negative initial linepack")
        for c in self.compressors:
            _require(c.inlet in nodeset and c.outlet in nodeset,
                     f"compressor {c.cid}: endpoint not a known gas node")
            _require(c.inlet != c.outlet, f"compressor {c.cid}: inlet equals outlet")
            _require(0.0 <= c.consumption_fraction < 1.0,
                     f"compressor {c.cid}: consumption fraction outside [0, 1)")
            _require(1.0 <= c.ratio_min <= c.ratio_max,
                     f"compressor {c.cid}: requires 1 <= ratio_min <= ratio_max")
            _require(c.flow_max > 0, f"compressor {c.cid}: nonpositive flow limit")
        for s in self.sources:
            _require(s.node in nodeset, f"gas source {s.sid}: node unknown")
            _require(s.flow_min <= s.flow_max, f"gas source {s.sid}: flow_min > flow_max")
        for ld in self.loads:
            _require(ld.node in nodeset, f"gas load {ld.lid}: node unknown")
            _require(len(ld.series) == horizon,
                     f"gas load {ld.lid}: series length != horizon")

    def node_ids(self) -> list[str]:
        return [n.nid for n in self.nodes]


@dataclass(frozen=True)
class FrequencyParams:
    damping: float            # load damping, fraction of load per Hz
    f0: float                 # Hz
    df_db: float              # governor dead band, Hz
    t_db: float               # governor dead time, s
    delivery_time: float      # PFR delivery time T_d, s
    rocof_max: float          # Hz/s
    f_min: float              # Hz
    df_qss_max: float         # Hz
    dp_loss: tuple[float, ...]   # contingency size per hour, MW

    @property
    def df_max(self) -> float:
        return self.f0 - self.f_min

    def validate(self, horizon: int) -> None:
        for name in ("damping", "f0", "df_db", "t_db", "delivery_time",
                     "rocof_max", "f_min", "df_qss_max"):
            _require(getattr(self, name) > 0, f"frequency parameter {name} must be > 0")
        _require(self.f_min < self.f0, "f_min must lie below nominal frequency")
        _require(self.df_db < self.df_max, "dead band must lie below the nadir limit")
        _require(self.df_qss_max <= self.df_max,
                 "quasi-steady-state limit exceeds the nadir limit")
        _require(len(self.dp_loss) == horizon, "contingency series length != horizon")
        _require(all(v >= 0 for v in self.dp_loss), "negative contingency size")


@dataclass(frozen=True)
class UncertaintyConfig:
    """Wind uncertainty description as stored in the instance file.

    ``fraction`` scales the forecast into a dispersion parameter:
    ``std_fraction`` reads it as sigma = fraction * mean, ``var_fraction``
    as sigma^2 = fraction * mean.
    """

    epsilon: float
    unimodal: bool = False
    variance_mode: str = "std_fraction"
    fraction: float = 0.05
    mean: tuple[tuple[float, ...], ...] | None = None   # explicit (farm, hour)
    std: tuple[tuple[float, ...], ...] | None = None

    def validate(self, n_farms: int, horizon: int) -> None:
        _require(0.0 < self.epsilon < 1.0, "epsilon must lie in (0, 1)")
        _require(self.variance_mode in ("std_fraction", "var_fraction"),
                 f"unknown variance_mode {self.variance_mode!r}")
        _require(self.fraction >= 0, "negative uncertainty fraction")
        for name, table in (("mean", self.mean), ("std", self.std)):
            if table is not None:
                _require(len(table) == n_farms and
                         all(len(row) == horizon for row in table),
                         f"uncertainty.{name} shape != (farms, horizon)")


# ---------------------------------------------------------------------------
# the instance
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IegsInstance:
    name: str
    horizon: int
    generators: tuple[Generator, ...]
    wind_farms: tuple[WindFarm, ...]
    power_network: PowerNetwork
    gas_network: GasNetwork
    frequency: FrequencyParams
    uncertainty: UncertaintyConfig
    initial_status: dict[str, int] = field(default_factory=dict)
    initial_output: dict[str, float] = field(default_factory=dict)
    initial_pfr: dict[str, float] = field(default_factory=dict)

    def validate(self) -> "IegsInstance":
        _require(self.horizon >= 1, "horizon must be at least one hour")
        _require(len({g.gid for g in self.generators}) == len(self.generators),
                 "duplicate generator ids")
        _require(len({w.wid for w in self.wind_farms}) == len(self.wind_farms),
                 "duplicate wind farm ids")
        self.power_network.validate(self.horizon)
        self.gas_network.validate(self.horizon)
        self.frequency.validate(self.horizon)
        self.uncertainty.validate(len(self.wind_farms), self.horizon)
        busset = set(self.power_network.buses)
        gas_nodes = {n.nid for n in self.gas_network.nodes}
        for g in self.generators:
            g.validate()
            _require(g.bus in busset, f"generator {g.gid}: bus {g.bus!r} unknown")
            if g.kind == GFU:
                _require(g.gas_node in gas_nodes,
                         f"generator {g.gid}: gas node {g.gas_node!r} unknown")
        for w in self.wind_farms:
            w.validate(self.horizon)
            _require(w.bus in busset, f"wind farm {w.wid}: bus {w.bus!r} unknown")
        for gid in (*self.initial_status, *self.initial_output, *self.initial_pfr):
            _require(any(g.gid == gid for g in self.generators),
                     f"initial condition references unknown generator {gid!r}")
        return self

    # -- convenience accessors ---------------------------------------------

    def check_hour(self, t: int) -> int:
        if not 0 <= t < self.horizon:
            raise InstanceError(f"hour index {t} outside 0..{self.horizon - 1}")
        return t

    def total_load(self, t: int) -> float:
        return self.power_network.total_load(self.check_hour(t))

    def contingency(self, t: int) -> float:
        return self.frequency.dp_loss[self.check_hour(t)]

    def gfus(self) -> list[Generator]:
        return [g for g in self.generators if g.kind == GFU]

    def status0(self, gid: str) -> int:
        return int(self.initial_status.get(gid, 1))

    def output0(self, g: Generator) -> float:
        if g.gid in self.initial_output:
            return float(self.initial_output[g.gid])
        return g.p_min if self.status0(g.gid) else 0.0

    def pfr0(self, gid: str) -> float:
        return float(self.initial_pfr.get(gid, 0.0))

    def forecast_matrix(self) -> np.ndarray:
        """(farms, horizon) forecast means."""
        return np.array([w.forecast for w in self.wind_farms], dtype=float)

    def capacities(self) -> np.ndarray:
        return np.array([w.capacity for w in self.wind_farms], dtype=float)


# ---------------------------------------------------------------------------
# JSON serialization
# ---------------------------------------------------------------------------


def _tuplify(rows):
    return tuple(tuple(float(v) for v in row) for row in rows) if rows is not None else None


def instance_from_dict(doc: dict, name: str = "instance") -> IegsInstance:
    try:
        version = doc["schema_version"]
        if int(version) != SCHEMA_VERSION:
            raise InstanceError(f"unsupported schema_version {version!r}")
        horizon = int(doc["horizon"])
        gens = tuple(
            Generator(
                gid=g["id"], kind=g["kind"], bus=g["bus"],
                p_min=float(g["p_min"]), p_max=float(g["p_max"]),
                ramp_up=float(g["ramp_up"]), ramp_down=float(g["ramp_down"]),
                min_up=int(g["min_up"]), min_down=int(g["min_down"]),
                inertia=float(g["inertia"]), reserve_max=float(g["reserve_max"]),
                cost_energy=float(g["cost_energy"]),
                cost_no_load=float(g["cost_no_load"]),
                cost_startup=float(g["cost_startup"]),
                cost_shutdown=float(g["cost_shutdown"]),
                cost_pfr=float(g["cost_pfr"]),
                gas_node=g.get("gas_node"),
                conversion=(float(g["conversion"]) if g.get("conversion") is not None
                            else None),
            ) for g in doc["generators"])
        farms = tuple(
            WindFarm(
                wid=w["id"], bus=w["bus"], capacity=float(w["capacity"]),
                virtual_inertia=float(w["virtual_inertia"]),
                reserve_max=float(w["reserve_max"]),
                cost_vi=float(w["cost_vi"]), cost_pfr=float(w["cost_pfr"]),
                forecast=tuple(float(v) for v in w["forecast"]),
            ) for w in doc["wind_farms"])
        pn = doc["power_network"]
        power = PowerNetwork(
            buses=tuple(pn["buses"]),
            lines=tuple(Line(l["id"], l["from"], l["to"], float(l["capacity"]),
                             (float(l["reactance"]) if l.get("reactance") is not None
                              else None))
                        for l in pn["lines"]),
            loads=tuple(PowerLoad(l["id"], l["bus"],
                                  tuple(float(v) for v in l["series"]))
                        for l in pn["loads"]),
            shift_factors=_tuplify(pn.get("shift_factors")),
            reference_bus=pn.get("reference_bus"),
        )
        gn = doc["gas_network"]
        gas = GasNetwork(
            nodes=tuple(GasNode(n["id"], float(n["pressure_min"]),
                                float(n["pressure_max"])) for n in gn["nodes"]),
            pipelines=tuple(Pipeline(p["id"], p["from"], p["to"], float(p["weymouth"]),
                                     float(p["linepack"]), float(p["linepack_init"]))
                            for p in gn["pipelines"]),
            compressors=tuple(Compressor(c["id"], c["inlet"], c["outlet"],
                                         float(c["flow_max"]),
                                         float(c["consumption_fraction"]),
                                         float(c["ratio_min"]), float(c["ratio_max"]))
                              for c in gn.get("compressors", [])),
            sources=tuple(GasSource(s["id"], s["node"], float(s["flow_min"]),
                                    float(s["flow_max"])) for s in gn["sources"]),
            loads=tuple(GasLoad(l["id"], l["node"], tuple(float(v) for v in l["series"]))
                        for l in gn.get("loads", [])),
        )
        fq = doc["frequency"]
        freq = FrequencyParams(
            damping=float(fq["D"]), f0=float(fq["f0"]), df_db=float(fq["df_db"]),
            t_db=float(fq["t_db"]), delivery_time=float(fq["Td"]),
            rocof_max=float(fq["rocof_max"]), f_min=float(fq["f_min"]),
            df_qss_max=float(fq["df_qss_max"]),
            dp_loss=tuple(float(v) for v in fq["dP_loss"]),
        )
        un = doc["uncertainty"]
        unc = UncertaintyConfig(
            epsilon=float(un["epsilon"]),
            unimodal=bool(un.get("unimodal", False)),
            variance_mode=un.get("variance_mode", "std_fraction"),
            fraction=float(un.get("fraction", 0.05)),
            mean=_tuplify(un.get("mean")),
            std=_tuplify(un.get("std")),
        )
        inst = IegsInstance(
            name=doc.get("name", name),
            horizon=horizon,
            generators=gens,
            wind_farms=farms,
            power_network=power,
            gas_network=gas,
            frequency=freq,
            uncertainty=unc,
            initial_status={k: int(v) for k, v in doc.get("initial_status", {}).items()},
            initial_output={k: float(v) for k, v in doc.get("initial_output", {}).items()},
            initial_pfr={k: float(v) for k, v in doc.get("initial_pfr", {}).items()},
        )
    except KeyError as exc:
        raise InstanceError(f"missing required field {exc.args[0]!r}") from exc
    inst = inst.validate()
    if power.shift_factors is not None and any(
            ln.reactance is not None for ln in power.lines):
        warnings.warn("instance supplies both shift factors and line reactances; "
                      "the supplied shift factors win", stacklevel=2)
    return inst


def instance_to_dict(inst: IegsInstance) -> dict:
    pn = inst.power_network
    gn = inst.gas_network
    fq = inst.frequency
    un = inst.uncertainty
    doc = {
        "schema_version": SCHEMA_VERSION,
        "name": inst.name,
        "horizon": inst.horizon,
        "generators": [
            {"id": g.gid, "kind": g.kind, "bus": g.bus,
             "p_min": g.p_min, "p_max": g.p_max,
             "ramp_up": g.ramp_up, "ramp_down": g.ramp_down,
             "min_up": g.min_up, "min_down": g.min_down,
             "inertia": g.inertia, "reserve_max": g.reserve_max,
             "cost_energy": g.cost_energy, "cost_no_load": g.cost_no_load,
             "cost_startup": g.cost_startup, "cost_shutdown": g.cost_shutdown,
             "cost_pfr": g.cost_pfr,
             **({"gas_node": g.gas_node, "conversion": g.conversion}
                if g.kind == GFU else {})}
            for g in inst.generators],
        "wind_farms": [
            {"id": w.wid, "bus": w.bus, "capacity": w.capacity,
             "virtual_inertia": w.virtual_inertia, "reserve_max": w.reserve_max,
             "cost_vi": w.cost_vi, "cost_pfr": w.cost_pfr,
             "forecast": list(w.forecast)} for w in inst.wind_farms],
        "power_network": {
            "buses": list(pn.buses),
            "lines": [{"id": l.lid, "from": l.from_bus, "to": l.to_bus,
                       "capacity": l.capacity,
                       **({"reactance": l.reactance} if l.reactance is not None else {})}
                      for l in pn.lines],
            "loads": [{"id": l.lid, "bus": l.bus, "series": list(l.series)}
                      for l in pn.loads],
            **({"shift_factors": [list(r) for r in pn.shift_factors]}
               if pn.shift_factors is not None else {}),
            **({"reference_bus": pn.reference_bus}
               if pn.reference_bus is not None else {}),
        },
        "gas_network": {
            "nodes": [{"id": n.nid, "pressure_min": n.pressure_min,
                       "pressure_max": n.pressure_max} for n in gn.nodes],
            "pipelines": [{"id": p.pid, "from": p.from_node, "to": p.to_node,
                           "weymouth": p.weymouth, "linepack": p.linepack,
                           "linepack_init": p.linepack_init} for p in gn.pipelines],
            "compressors": [{"id": c.cid, "inlet": c.inlet, "outlet": c.outlet,
                             "flow_max": c.flow_max,
                             "consumption_fraction": c.consumption_fraction,
                             "ratio_min": c.ratio_min, "ratio_max": c.ratio_max}
                            for c in gn.compressors],
            "sources": [{"id": s.sid, "node": s.node, "flow_min": s.flow_min,
                         "flow_max": s.flow_max} for s in gn.sources],
            "loads": [{"id": l.lid, "node": l.node, "series": list(l.series)}
                      for l in gn.loads],
        },
        "frequency": {
            "D": fq.damping, "f0": fq.f0, "df_db": fq.df_db, "t_db": fq.t_db,
            "Td": fq.delivery_time, "rocof_max": fq.rocof_max, "f_min": fq.f_min,
            "df_qss_max": fq.df_qss_max, "dP_loss": list(fq.dp_loss),
        },
        "uncertainty": {
            "epsilon": un.epsilon, "unimodal": un.unimodal,
            "variance_mode": un.variance_mode, "fraction": un.fraction,
            **({"mean": [list(r) for r in un.mean]} if un.mean is not None else {}),
            **({"std": [list(r) for r in un.std]} if un.std is not None else {}),
        },
    }
    if inst.initial_status:
        doc["initial_status"] = dict(inst.initial_status)
    if inst.initial_output:
        doc["initial_output"] = dict(inst.initial_output)
    if inst.initial_pfr:
        doc["initial_pfr"] = dict(inst.initial_pfr)
    return doc


def load_instance(path) -> IegsInstance:
    """Load and validate an instance file; raises InstanceError on any
    malformed content, naming the failing element."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise InstanceError(f"cannot read instance file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InstanceError(f"instance file {path} is not valid JSON: {exc}") from exc
    return instance_from_dict(doc, name=str(path))


def save_instance(inst: IegsInstance, path) -> None:
    with open(path, "w") as fh:
        json.dump(instance_to_dict(inst), fh, indent=1)
        fh.write("\n")


def bundled_instance_path(name: str):
    """Path of a packaged example instance, e.g. ``iegs5_7``."""
    from importlib.resources import files

    fname = name if name.endswith(".json") else f"{name}.json"
    return files("drfcuc.data").joinpath(fname)


def load_bundled_instance(name: str) -> IegsInstance:
    return load_instance(str(bundled_instance_path(name)))


# ---------------------------------------------------------------------------
# DC shift factors
# ---------------------------------------------------------------------------


def compute_shift_factors(network: PowerNetwork) -> np.ndarray:
    """Power-transfer sensitivities from line reactances.

    Row l, column b holds the MW flow induced on line l by 1 MW injected
    at bus b and withdrawn at the reference bus; the reference column is
    identically zero.
    """
    buses = list(network.buses)
    nb, nl = len(buses), len(network.lines)
    if any(ln.reactance is None for ln in network.lines):
        raise InstanceError("cannot compute shift factors: line reactances missing")
    ref = network.reference_bus or buses[0]
    ref_i = buses.index(ref)

    # connectivity check on the undirected line graph
    adj: dict[int, set[int]] = {i: set() for i in range(nb)}
    for ln in network.lines:
        i, j = buses.index(ln.from_bus), buses.index(ln.to_bus)
        adj[i].add(j)
        adj[j].add(i)
    seen = {ref_i}
    stack = [ref_i]
    while stack:
        for nxt in adj[stack.pop()]:
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    if len(seen) != nb:
        missing = [buses[i] for i in range(nb) if i not in seen]
        raise InstanceError(f"power network is disconnected; unreachable: {missing}")

    b_mat = np.zeros((nb, nb))
    bf = np.zeros((nl, nb))
    for k, ln in enumerate(network.lines):
        i, j = buses.index(ln.from_bus), buses.index(ln.to_bus)
        b = 1.0 / ln.reactance
        b_mat[i, i] += b
        b_mat[j, j] += b
        b_mat[i, j] -= b
        b_mat[j, i] -= b
        bf[k, i] = b
        bf[k, j] = -b

    keep = [i for i in range(nb) if i != ref_i]
    reduced = b_mat[np.ix_(keep, keep)]
    try:
        inv = np.linalg.solve(reduced, np.eye(nb - 1))
    except np.linalg.LinAlgError as exc:
        raise InstanceError(f"singular susceptance matrix: {exc}") from exc
    psi = np.zeros((nl, nb))
    psi[:, keep] = bf[:, keep] @ inv
    return psi


def resolve_shift_factors(network: PowerNetwork) -> np.ndarray:
    """Supplied shift factors win over derived ones."""
    if network.shift_factors is not None:
        return np.array(network.shift_factors, dtype=float)
    return compute_shift_factors(network)
