#!/usr/bin/env python3
"""Construct the bundled desk-scale study instances.

Two cases are produced:

* ``iegs5_7`` — 5-bus power system coupled to a 7-node gas system
  (1 non-GFU, 2 GFUs, 2 wind farms, 2 gas sources, 1 compressor,
  3 gas loads).  The gas side is sized so that running both GFUs near
  their cap is not deliverable, which makes gas-blind schedules
  physically infeasible, and virtual inertia is priced so that using it
  is cheaper than committing an extra thermal unit overnight.
* ``iegs6_w6`` — 6-bus case with six wind farms and a light gas side,
  used for the individual-vs-joint chance constraint comparisons at a
  0.1 budget.

Deterministic by construction; rerunning overwrites identical files.
"""

import json
import math
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
OUT = ROOT / "src" / "drfcuc" / "data"


def diurnal(base: float, amplitude: float, peak_hour: float, hours: int = 24):
    """Smooth day profile: base + amplitude * shifted cosine."""
    return [round(base + amplitude * math.cos(2 * math.pi * (t - peak_hour) / 24.0), 3)
            for t in range(hours)]


def iegs5_7() -> dict:
    T = 24
    total_load = diurnal(325.0, 75.0, 13.0, T)          # 250 .. 400 MW
    share_d1 = 0.45
    load_d1 = [round(share_d1 * v, 3) for v in total_load]
    load_d2 = [round((1 - share_d1) * v, 3) for v in total_load]
    dp_loss = [round(0.05 * v, 4) for v in total_load]  # 5% load-step contingency

    wind1 = diurnal(62.0, 23.0, 2.0, T)                 # windy nights
    wind2 = diurnal(58.0, 20.0, 4.0, T)

    gas_d1 = diurnal(800.0, 120.0, 19.0, T)
    gas_d2 = diurnal(700.0, 100.0, 12.0, T)
    gas_d3 = diurnal(550.0, 90.0, 20.0, T)

    return {
        "schema_version": 1,
        "name": "iegs5_7",
        "horizon": T,
        "generators": [
            {"id": "G1", "kind": "gfu", "bus": "b1",
             "p_min": 30.0, "p_max": 150.0, "ramp_up": 100.0, "ramp_down": 100.0,
             "min_up": 2, "min_down": 2, "inertia": 6.5, "reserve_max": 40.0,
             "cost_energy": 16.0, "cost_no_load": 180.0, "cost_startup": 550.0,
             "cost_shutdown": 60.0, "cost_pfr": 3.5,
             "gas_node": "n5", "conversion": 8.0},
            {"id": "G2", "kind": "non_gfu", "bus": "b3",
             "p_min": 60.0, "p_max": 240.0, "ramp_up": 120.0, "ramp_down": 120.0,
             "min_up": 4, "min_down": 2, "inertia": 10.0, "reserve_max": 50.0,
             "cost_energy": 35.0, "cost_no_load": 400.0, "cost_startup": 900.0,
             "cost_shutdown": 100.0, "cost_pfr": 4.0},
            {"id": "G3", "kind": "gfu", "bus": "b5",
             "p_min": 30.0, "p_max": 150.0, "ramp_up": 100.0, "ramp_down": 100.0,
             "min_up": 2, "min_down": 2, "inertia": 6.5, "reserve_max": 40.0,
             "cost_energy": 13.0, "cost_no_load": 150.0, "cost_startup": 500.0,
             "cost_shutdown": 60.0, "cost_pfr": 3.0,
             "gas_node": "n7", "conversion": 8.0},
        ],
        "wind_farms": [
            {"id": "W1", "bus": "b2", "capacity": 100.0, "virtual_inertia": 8.0,
             "reserve_max": 30.0, "cost_vi": 150.0, "cost_pfr": 2.5,
             "forecast": wind1},
            {"id": "W2", "bus": "b4", "capacity": 100.0, "virtual_inertia": 8.0,
             "reserve_max": 30.0, "cost_vi": 160.0, "cost_pfr": 2.6,
             "forecast": wind2},
        ],
        "power_network": {
            "buses": ["b1", "b2", "b3", "b4", "b5"],
            "lines": [
                {"id": "l12", "from": "b1", "to": "b2", "capacity": 400.0,
                 "reactance": 0.0281},
                {"id": "l14", "from": "b1", "to": "b4", "capacity": 400.0,
                 "reactance": 0.0304},
                {"id": "l15", "from": "b1", "to": "b5", "capacity": 400.0,
                 "reactance": 0.0064},
                {"id": "l23", "from": "b2", "to": "b3", "capacity": 400.0,
                 "reactance": 0.0108},
                {"id": "l34", "from": "b3", "to": "b4", "capacity": 400.0,
                 "reactance": 0.0297},
                {"id": "l45", "from": "b4", "to": "b5", "capacity": 400.0,
                 "reactance": 0.0297},
            ],
            "loads": [
                {"id": "d1", "bus": "b2", "series": load_d1},
                {"id": "d2", "bus": "b3", "series": load_d2},
            ],
            "reference_bus": "b1",
        },
        "gas_network": {
            "nodes": [
                {"id": "n1", "pressure_min": 5.0, "pressure_max": 8.0},
                {"id": "n2", "pressure_min": 4.0, "pressure_max": 7.0},
                {"id": "n3", "pressure_min": 4.5, "pressure_max": 8.0},
                {"id": "n4", "pressure_min": 4.0, "pressure_max": 7.5},
                {"id": "n5", "pressure_min": 3.5, "pressure_max": 7.0},
                {"id": "n6", "pressure_min": 4.0, "pressure_max": 7.5},
                {"id": "n7", "pressure_min": 3.0, "pressure_max": 7.0},
            ],
            "pipelines": [
                {"id": "p12", "from": "n1", "to": "n2", "weymouth": 900.0,
                 "linepack": 15.0, "linepack_init": 75.0},
                {"id": "p34", "from": "n3", "to": "n4", "weymouth": 900.0,
                 "linepack": 15.0, "linepack_init": 75.0},
                {"id": "p45", "from": "n4", "to": "n5", "weymouth": 700.0,
                 "linepack": 12.0, "linepack_init": 60.0},
                {"id": "p36", "from": "n3", "to": "n6", "weymouth": 700.0,
                 "linepack": 12.0, "linepack_init": 62.0},
                {"id": "p67", "from": "n6", "to": "n7", "weymouth": 800.0,
                 "linepack": 12.0, "linepack_init": 55.0},
            ],
            "compressors": [
                {"id": "c1", "inlet": "n2", "outlet": "n3", "flow_max": 4000.0,
                 "consumption_fraction": 0.012, "ratio_min": 1.0,
                 "ratio_max": 1.8},
            ],
            "sources": [
                {"id": "s1", "node": "n1", "flow_min": 0.0, "flow_max": 3200.0},
                {"id": "s2", "node": "n6", "flow_min": 0.0, "flow_max": 1200.0},
            ],
            "loads": [
                {"id": "gd1", "node": "n4", "series": gas_d1},
                {"id": "gd2", "node": "n6", "series": gas_d2},
                {"id": "gd3", "node": "n7", "series": gas_d3},
            ],
        },
        "frequency": {
            "D": 0.01, "f0": 50.0, "df_db": 0.015, "t_db": 0.02, "Td": 10.0,
            "rocof_max": 0.125, "f_min": 49.2, "df_qss_max": 0.2,
            "dP_loss": dp_loss,
        },
        "uncertainty": {
            "epsilon": 0.05, "unimodal": False,
            "variance_mode": "std_fraction", "fraction": 0.05,
        },
    }


def iegs6_w6() -> dict:
    T = 24
    total_load = diurnal(700.0, 120.0, 14.0, T)        # 580 .. 820 MW
    load_a = [round(0.4 * v, 3) for v in total_load]
    load_b = [round(0.35 * v, 3) for v in total_load]
    load_c = [round(0.25 * v, 3) for v in total_load]
    dp_loss = [round(0.05 * v, 4) for v in total_load]
    gas_d = diurnal(600.0, 80.0, 18.0, T)

    farms = []
    for k in range(6):
        profile = diurnal(24.0 + 2.0 * k, 6.0 + 0.8 * k, (3 * k) % 24, T)
        farms.append({
            "id": f"W{k + 1}", "bus": ["b2", "b3", "b4", "b5", "b6", "b2"][k],
            "capacity": 50.0, "virtual_inertia": 7.0, "reserve_max": 15.0,
            "cost_vi": 120.0 + 5.0 * k, "cost_pfr": 2.0 + 0.1 * k,
            "forecast": profile,
        })

    return {
        "schema_version": 1,
        "name": "iegs6_w6",
        "horizon": T,
        "generators": [
            {"id": "G1", "kind": "non_gfu", "bus": "b1",
             "p_min": 80.0, "p_max": 400.0, "ramp_up": 200.0, "ramp_down": 200.0,
             "min_up": 3, "min_down": 3, "inertia": 6.0, "reserve_max": 80.0,
             "cost_energy": 24.0, "cost_no_load": 500.0, "cost_startup": 1200.0,
             "cost_shutdown": 120.0, "cost_pfr": 4.0},
            {"id": "G2", "kind": "gfu", "bus": "b4",
             "p_min": 50.0, "p_max": 250.0, "ramp_up": 150.0, "ramp_down": 150.0,
             "min_up": 2, "min_down": 2, "inertia": 5.0, "reserve_max": 60.0,
             "cost_energy": 18.0, "cost_no_load": 260.0, "cost_startup": 700.0,
             "cost_shutdown": 80.0, "cost_pfr": 3.2,
             "gas_node": "m3", "conversion": 8.0},
            {"id": "G3", "kind": "non_gfu", "bus": "b6",
             "p_min": 60.0, "p_max": 300.0, "ramp_up": 180.0, "ramp_down": 180.0,
             "min_up": 2, "min_down": 2, "inertia": 5.5, "reserve_max": 70.0,
             "cost_energy": 30.0, "cost_no_load": 350.0, "cost_startup": 900.0,
             "cost_shutdown": 90.0, "cost_pfr": 3.8},
        ],
        "wind_farms": farms,
        "power_network": {
            "buses": ["b1", "b2", "b3", "b4", "b5", "b6"],
            "lines": [
                {"id": "l12", "from": "b1", "to": "b2", "capacity": 600.0,
                 "reactance": 0.02},
                {"id": "l23", "from": "b2", "to": "b3", "capacity": 600.0,
                 "reactance": 0.025},
                {"id": "l34", "from": "b3", "to": "b4", "capacity": 600.0,
                 "reactance": 0.02},
                {"id": "l45", "from": "b4", "to": "b5", "capacity": 600.0,
                 "reactance": 0.03},
                {"id": "l56", "from": "b5", "to": "b6", "capacity": 600.0,
                 "reactance": 0.025},
                {"id": "l16", "from": "b1", "to": "b6", "capacity": 600.0,
                 "reactance": 0.02},
                {"id": "l25", "from": "b2", "to": "b5", "capacity": 600.0,
                 "reactance": 0.04},
            ],
            "loads": [
                {"id": "d1", "bus": "b2", "series": load_a},
                {"id": "d2", "bus": "b4", "series": load_b},
                {"id": "d3", "bus": "b6", "series": load_c},
            ],
            "reference_bus": "b1",
        },
        "gas_network": {
            "nodes": [
                {"id": "m1", "pressure_min": 5.0, "pressure_max": 8.0},
                {"id": "m2", "pressure_min": 4.0, "pressure_max": 7.5},
                {"id": "m3", "pressure_min": 3.5, "pressure_max": 7.0},
            ],
            "pipelines": [
                {"id": "q12", "from": "m1", "to": "m2", "weymouth": 900.0,
                 "linepack": 40.0, "linepack_init": 250.0},
                {"id": "q23", "from": "m2", "to": "m3", "weymouth": 800.0,
                 "linepack": 40.0, "linepack_init": 190.0},
            ],
            "compressors": [],
            "sources": [
                {"id": "s1", "node": "m1", "flow_min": 0.0, "flow_max": 3600.0},
            ],
            "loads": [
                {"id": "gd1", "node": "m2", "series": gas_d},
            ],
        },
        "frequency": {
            "D": 0.01, "f0": 50.0, "df_db": 0.015, "t_db": 0.02, "Td": 10.0,
            "rocof_max": 0.5, "f_min": 49.2, "df_qss_max": 0.2,
            "dP_loss": dp_loss,
        },
        "uncertainty": {
            "epsilon": 0.10, "unimodal": False,
            "variance_mode": "std_fraction", "fraction": 0.05,
        },
    }


def main() -> int:
    OUT.mkdir(parents=True, exist_ok=True)
    for builder in (iegs5_7, iegs6_w6):
        doc = builder()
        path = OUT / f"{doc['name']}.json"
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=1)
            fh.write("\n")
        print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
