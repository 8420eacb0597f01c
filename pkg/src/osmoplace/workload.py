"""Seeded generation of service batches and server pools."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .domain import Layer, LayerKind, ResourceDemand, ServerNode, ServiceRequest
from .exceptions import ConfigurationError


@dataclass(frozen=True)
class WorkloadConfig:
    num_users: int = 10
    services_min: int = 12
    services_max: int = 110
    load_min: float = 0.5
    load_max: float = 1.5
    energy_min: float = 1.5
    energy_max: float = 1.5
    time_min: float = 5.0
    time_max: float = 20.0
    divisible_fraction: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.num_users < 1:
            raise ConfigurationError("workload.num_users must be >= 1")
        if not 1 <= self.services_min <= self.services_max:
            raise ConfigurationError("workload.services_min must be in [1, services_max]")
        for name in ("load", "energy", "time"):
            lo, hi = getattr(self, f"{name}_min"), getattr(self, f"{name}_max")
            if lo < 0 or hi < lo:
                raise ConfigurationError(f"workload.{name}_min/{name}_max must satisfy 0 <= min <= max")
        if self.load_max == 0 and self.energy_max == 0 and self.time_max == 0:
            raise ConfigurationError("workload demand ranges are all zero")
        if not 0.0 <= self.divisible_fraction <= 1.0:
            raise ConfigurationError("workload.divisible_fraction must be in [0, 1]")
        if not 0 <= self.seed < 2**64:
            raise ConfigurationError("workload.seed must be an unsigned 64-bit integer")


@dataclass(frozen=True)
class InfrastructureConfig:
    num_osmotic: int = 5
    num_public: int = 10
    load_total: float = 10.0
    energy_total: float = 2000.0
    time_total: float = 100.0
    concurrent_capacity: int = 10
    # public servers are this many times larger than osmotic ones in every total
    public_scale: float = 2.0
    public_concurrent_capacity: Optional[int] = None
    energy_per_iteration: float = 1.5
    min_processing_time: float = 5.0

    def __post_init__(self):
        if self.num_osmotic < 1:
            raise ConfigurationError("infrastructure.num_osmotic must be >= 1")
        if self.num_public < 1:
            raise ConfigurationError("infrastructure.num_public must be >= 1")
        for name in ("load_total", "energy_total", "time_total", "energy_per_iteration", "min_processing_time"):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"infrastructure.{name} must be positive")
        if self.concurrent_capacity < 1:
            raise ConfigurationError("infrastructure.concurrent_capacity must be >= 1")
        if self.public_scale < 1.0:
            raise ConfigurationError(
                "infrastructure.public_scale must be >= 1 (public servers may not be smaller than osmotic ones)"
            )
        if self.public_concurrent_capacity is not None and self.public_concurrent_capacity < self.concurrent_capacity:
            raise ConfigurationError(
                "infrastructure.public_concurrent_capacity must be >= concurrent_capacity"
            )

    @property
    def public_slots(self) -> int:
        if self.public_concurrent_capacity is None:
            return self.concurrent_capacity
        return self.public_concurrent_capacity


def rng_for(seed: int, run_index: int) -> np.random.Generator:
    """Independent, reproducible stream per (seed, run_index)."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(run_index)]))


def generate_services(
    cfg: WorkloadConfig,
    run_index: int = 0,
    count: Optional[int] = None,
    infra: Optional[InfrastructureConfig] = None,
) -> list[ServiceRequest]:
    """Draw one batch of services.

    ``count`` overrides the uniform draw from ``[services_min, services_max]``
    (used by the sweep mode). When ``infra`` is given, its per-iteration energy
    cost and minimum processing time clamp the energy and time draws from below.
    """
    rng = rng_for(cfg.seed, run_index)
    n = int(rng.integers(cfg.services_min, cfg.services_max + 1))
    if count is not None:
        if count < 1:
            raise ConfigurationError("service count must be >= 1")
        n = count
    loads = rng.uniform(cfg.load_min, cfg.load_max, n)
    energies = rng.uniform(cfg.energy_min, cfg.energy_max, n)
    times = rng.uniform(cfg.time_min, cfg.time_max, n)
    divisible = rng.random(n) < cfg.divisible_fraction
    if infra is not None:
        energies = np.maximum(energies, infra.energy_per_iteration)
        times = np.maximum(times, infra.min_processing_time)
    width = max(3, len(str(n - 1)))
    return [
        ServiceRequest(
            id=f"s{i:0{width}d}",
            user_id=i % cfg.num_users,
            demand=ResourceDemand(float(loads[i]), float(energies[i]), float(times[i])),
            divisible=bool(divisible[i]),
        )
        for i in range(n)
    ]


def sweep_counts(cfg: WorkloadConfig, runs: int) -> list[int]:
    """Evenly spaced service totals from services_min to services_max."""
    if runs == 1:
        return [cfg.services_min]
    span = cfg.services_max - cfg.services_min
    return [cfg.services_min + round(j * span / (runs - 1)) for j in range(runs)]


def build_infrastructure(cfg: InfrastructureConfig) -> tuple[Layer, Layer]:
    osmotic = [
        ServerNode(
            id=i,
            load_total=cfg.load_total,
            energy_total=cfg.energy_total,
            time_total=cfg.time_total,
            concurrent_capacity=cfg.concurrent_capacity,
        )
        for i in range(cfg.num_osmotic)
    ]
    public = [
        ServerNode(
            id=cfg.num_osmotic + j,
            load_total=cfg.load_total * cfg.public_scale,
            energy_total=cfg.energy_total * cfg.public_scale,
            time_total=cfg.time_total * cfg.public_scale,
            concurrent_capacity=cfg.public_slots,
        )
        for j in range(cfg.num_public)
    ]
    return Layer(LayerKind.OSMOTIC, osmotic), Layer(LayerKind.PUBLIC, public)


def service_iterations_until_exhausted(energy_total: float, energy_per_iteration: float) -> int:
    """How many fixed-cost iterations a server's energy budget covers."""
    if energy_per_iteration <= 0:
        raise ConfigurationError("energy_per_iteration must be positive")
    return int(energy_total // energy_per_iteration)
