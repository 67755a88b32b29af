"""Age of Information and energy efficiency in correlated slotted-Aloha networks."""

__version__ = "0.1.0"

from .analytic import (
    MetricsReport,
    energy_efficiency,
    evaluate,
    lifetime_throughput,
    mean_aoi,
    network_aoi,
    objective,
    reset_probs,
    steady_state,
    success_probs,
)
from .model import (
    CorrelationMatrix,
    NetworkModel,
    ObjectiveWeights,
    Policy,
    PowerProfile,
    generate_correlation,
    load_matrix,
    save_matrix,
    validate,
)
from .mspadam import OptimizerConfig, optimize
from .simulator import SimConfig, simulate

__all__ = [
    "CorrelationMatrix",
    "MetricsReport",
    "NetworkModel",
    "ObjectiveWeights",
    "OptimizerConfig",
    "Policy",
    "PowerProfile",
    "SimConfig",
    "energy_efficiency",
    "evaluate",
    "generate_correlation",
    "lifetime_throughput",
    "load_matrix",
    "mean_aoi",
    "network_aoi",
    "objective",
    "optimize",
    "reset_probs",
    "save_matrix",
    "simulate",
    "steady_state",
    "success_probs",
    "validate",
]
