"""Shared fixtures: bundled instances, a fast micro instance, and
session-cached variant solves reused by the scheduler/evaluation/
acceptance tests."""

import pytest

from drfcuc import drcc
from drfcuc.instance import instance_from_dict, load_bundled_instance
from drfcuc.optmodel import SolveOptions
from drfcuc.scheduler import ModelVariant, run_algorithm1


def micro_doc(horizon: int = 4) -> dict:
    """Two-generator, one-farm, one-pipe case that solves in seconds."""
    load = [120.0, 130.0, 140.0, 125.0, 135.0, 128.0][:horizon]
    wind = [30.0, 32.0, 28.0, 31.0, 29.0, 30.0][:horizon]
    gas_load = [300.0, 320.0, 310.0, 305.0, 315.0, 300.0][:horizon]
    return {
        "schema_version": 1,
        "name": "micro",
        "horizon": horizon,
        "generators": [
            {"id": "G1", "kind": "non_gfu", "bus": "b1",
             "p_min": 20.0, "p_max": 120.0, "ramp_up": 120.0, "ramp_down": 120.0,
             "min_up": 1, "min_down": 1, "inertia": 7.0, "reserve_max": 30.0,
             "cost_energy": 25.0, "cost_no_load": 200.0, "cost_startup": 400.0,
             "cost_shutdown": 50.0, "cost_pfr": 4.0},
            {"id": "G2", "kind": "gfu", "bus": "b2",
             "p_min": 10.0, "p_max": 80.0, "ramp_up": 80.0, "ramp_down": 80.0,
             "min_up": 1, "min_down": 1, "inertia": 6.0, "reserve_max": 25.0,
             "cost_energy": 15.0, "cost_no_load": 120.0, "cost_startup": 300.0,
             "cost_shutdown": 40.0, "cost_pfr": 3.0,
             "gas_node": "m2", "conversion": 8.0},
        ],
        "wind_farms": [
            {"id": "W1", "bus": "b2", "capacity": 50.0, "virtual_inertia": 8.0,
             "reserve_max": 15.0, "cost_vi": 100.0, "cost_pfr": 2.0,
             "forecast": wind},
        ],
        "power_network": {
            "buses": ["b1", "b2"],
            "lines": [{"id": "l1", "from": "b1", "to": "b2",
                       "capacity": 200.0, "reactance": 0.1}],
            "loads": [{"id": "d1", "bus": "b2", "series": load}],
            "reference_bus": "b1",
        },
        "gas_network": {
            "nodes": [{"id": "m1", "pressure_min": 4.0, "pressure_max": 8.0},
                      {"id": "m2", "pressure_min": 3.0, "pressure_max": 7.0}],
            "pipelines": [{"id": "q1", "from": "m1", "to": "m2",
                           "weymouth": 400.0, "linepack": 15.0,
                           "linepack_init": 80.0}],
            "compressors": [],
            "sources": [{"id": "s1", "node": "m1", "flow_min": 0.0,
                         "flow_max": 1400.0}],
            "loads": [{"id": "gd1", "node": "m2", "series": gas_load}],
        },
        "frequency": {
            "D": 0.01, "f0": 50.0, "df_db": 0.015, "t_db": 0.02, "Td": 10.0,
            "rocof_max": 0.25, "f_min": 49.2, "df_qss_max": 0.25,
            "dP_loss": [0.05 * v for v in load],
        },
        "uncertainty": {"epsilon": 0.05, "unimodal": False,
                        "variance_mode": "std_fraction", "fraction": 0.05},
    }


@pytest.fixture(scope="session")
def micro():
    return instance_from_dict(micro_doc())


@pytest.fixture(scope="session")
def iegs5():
    return load_bundled_instance("iegs5_7")


@pytest.fixture(scope="session")
def iegs6():
    return load_bundled_instance("iegs6_w6")


@pytest.fixture(scope="session")
def fast_options():
    return SolveOptions(mip_gap=0.01)


@pytest.fixture(scope="session")
def out_samples_5(iegs5):
    truth = drcc.ambiguity_from_instance(iegs5)
    return drcc.generate_scenarios(truth.mean, truth.std, iegs5.capacities(),
                                   10_000, seed=99, provenance="out-of-sample")


@pytest.fixture(scope="session")
def out_samples_6(iegs6):
    truth = drcc.ambiguity_from_instance(iegs6)
    return drcc.generate_scenarios(truth.mean, truth.std, iegs6.capacities(),
                                   10_000, seed=99, provenance="out-of-sample")


@pytest.fixture(scope="session")
def solved(iegs5, iegs6, fast_options):
    """Solve each variant once per session; tests share the results."""
    cache = {}

    def get(kind: str, which: str = "iegs5"):
        key = (kind, which)
        if key not in cache:
            inst = iegs5 if which == "iegs5" else iegs6
            cache[key] = run_algorithm1(
                inst, ModelVariant(kind, sample_size=20, scenario_seed=11),
                options=fast_options)
        return cache[key]

    return get
