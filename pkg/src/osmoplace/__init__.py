"""Fitness-based osmotic placement of heterogeneous services across fog and cloud layers."""

__version__ = "0.1.0"

from .domain import (  # noqa: E402
    FitnessWeights,
    Layer,
    LayerKind,
    ResourceDemand,
    ServerNode,
    ServiceRequest,
    WeightMode,
    remaining_capacity,
)
from .exceptions import (  # noqa: E402
    ConfigurationError,
    DegenerateDistributionError,
    DegenerateWeightsError,
    IndivisibleServiceError,
    PlacementOverflow,
)
from .fitness import concentration, fitness, is_shift_blocked, weights_dependent, weights_independent  # noqa: E402
from .osmosis import OsmosisConfig, OsmosisState, run_osmosis, split_service  # noqa: E402
from .workload import InfrastructureConfig, WorkloadConfig, build_infrastructure, generate_services  # noqa: E402
from .harness import ExperimentRecord, ExperimentSuite, run_experiment, summarize  # noqa: E402
from .estimator import OsmoticPlacer  # noqa: E402

__all__ = [
    "ConfigurationError",
    "DegenerateDistributionError",
    "DegenerateWeightsError",
    "ExperimentRecord",
    "ExperimentSuite",
    "FitnessWeights",
    "IndivisibleServiceError",
    "InfrastructureConfig",
    "Layer",
    "LayerKind",
    "OsmosisConfig",
    "OsmosisState",
    "OsmoticPlacer",
    "PlacementOverflow",
    "ResourceDemand",
    "ServerNode",
    "ServiceRequest",
    "WeightMode",
    "WorkloadConfig",
    "build_infrastructure",
    "concentration",
    "fitness",
    "generate_services",
    "is_shift_blocked",
    "remaining_capacity",
    "run_experiment",
    "run_osmosis",
    "split_service",
    "summarize",
    "weights_dependent",
    "weights_independent",
]
