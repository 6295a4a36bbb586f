"""Distributionally robust frequency-constrained unit commitment for
integrated electricity-gas systems: model assembly, sequential MISOCP
solution, and out-of-sample validation."""

from .instance import (IegsInstance, InstanceError, compute_shift_factors,
                       load_bundled_instance, load_instance, save_instance)
from .optmodel import Model, SolveOptions, export_conic, import_conic, solve_misocp
from .scheduler import (InfeasibleModelError, ModelVariant, ScheduleSolution,
                        run_algorithm1)

__all__ = [
    "IegsInstance", "InstanceError", "compute_shift_factors",
    "load_bundled_instance", "load_instance", "save_instance",
    "Model", "SolveOptions", "export_conic", "import_conic", "solve_misocp",
    "InfeasibleModelError", "ModelVariant", "ScheduleSolution", "run_algorithm1",
]

__version__ = "0.1.0"
