"""Concentration, weighted-mean fitness and the two weighting schemes."""
from __future__ import annotations

from typing import Optional, Sequence, Union

from .domain import FitnessWeights, ResourceDemand, ServerNode, WeightMode
from .exceptions import ConfigurationError, DegenerateWeightsError

# Normalised fitness is reported as a percentage of the reference capacity.
PERCENT = 100.0
ONE_TOL = 1e-12

WeightsLike = Union[FitnessWeights, Sequence[float]]


def concentration(num_services: int, num_properties: int) -> float:
    """Services per resource property, ``|S| / |R|``."""
    if num_properties <= 0:
        raise ZeroDivisionError("concentration needs at least one resource property")
    if num_services < 0:
        raise ValueError("num_services must be non-negative")
    return num_services / num_properties


def weights_independent(server: ServerNode) -> FitnessWeights:
    """Consumed share of each resource: (L_a/L_t, E_c/E_t, tau_p/tau_t).

    Pass an aggregate node (see :func:`aggregate_server`) for a whole layer.
    """
    if min(server.load_total, server.energy_total, server.time_total) <= 0:
        raise ConfigurationError("server totals must be positive to derive weights")
    return FitnessWeights(
        WeightMode.INDEPENDENT,
        (
            min(1.0, server.load_current / server.load_total),
            min(1.0, server.energy_consumed / server.energy_total),
            min(1.0, server.time_used / server.time_total),
        ),
    )


def weights_dependent(k: int, dominant_index: int) -> FitnessWeights:
    if k < 2:
        raise ValueError("dependent weighting needs k >= 2")
    if not 0 <= dominant_index < k:
        raise ValueError(f"dominant_index must be in [0, {k}), got {dominant_index}")
    other = 0.5 / (k - 1)
    alphas = tuple(0.5 if i == dominant_index else other for i in range(k))
    return FitnessWeights(WeightMode.DEPENDENT, alphas, dominant_index)


def aggregate_server(servers: Sequence[ServerNode]) -> ServerNode:
    """Sum totals and consumption across ``servers`` into one virtual node."""
    if not servers:
        raise ConfigurationError("cannot aggregate an empty server list")
    return ServerNode(
        id=-1,
        load_total=sum(s.load_total for s in servers),
        energy_total=sum(s.energy_total for s in servers),
        time_total=sum(s.time_total for s in servers),
        concurrent_capacity=sum(s.concurrent_capacity for s in servers),
        load_current=sum(s.load_current for s in servers),
        energy_consumed=sum(s.energy_consumed for s in servers),
        time_used=sum(s.time_used for s in servers),
    )


def _alphas(weights: WeightsLike) -> tuple[float, ...]:
    if isinstance(weights, FitnessWeights):
        return weights.alphas
    return tuple(float(a) for a in weights)


def fitness(values: Union[ResourceDemand, Sequence[float]], weights: WeightsLike) -> float:
    """Weighted mean ``sum(a_i * R_i) / sum(a_i)`` of a property vector."""
    if isinstance(values, ResourceDemand):
        values = values.as_tuple()
    alphas = _alphas(weights)
    if len(values) != len(alphas):
        raise ValueError(f"got {len(values)} property values for {len(alphas)} weights")
    if any(v < 0 for v in values):
        raise ValueError("property values must be non-negative")
    total = sum(alphas)
    if total <= 0:
        raise DegenerateWeightsError("fitness weights sum to zero")
    return sum(a * v for a, v in zip(alphas, values)) / total


def normalize(values: ResourceDemand, reference: ResourceDemand, scale: float = PERCENT) -> tuple[float, ...]:
    """Express each property as ``scale * value / reference``."""
    out = []
    for v, r in zip(values.as_tuple(), reference.as_tuple()):
        if r <= 0:
            raise ConfigurationError("normalisation reference must be positive")
        out.append(scale * v / r)
    return tuple(out)


def demand_fitness(
    demand: ResourceDemand,
    weights: WeightsLike,
    reference: Optional[ResourceDemand] = None,
) -> float:
    """Fitness of a demand or capacity vector; raw units when ``reference`` is None."""
    if reference is None:
        return fitness(demand, weights)
    return fitness(normalize(demand, reference), weights)


def is_shift_blocked(weights: WeightsLike) -> bool:
    return any(abs(a - 1.0) <= ONE_TOL for a in _alphas(weights))
