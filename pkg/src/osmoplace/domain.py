"""Core value types: service demands, servers, layers and fitness weights."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .exceptions import ConfigurationError

PROPERTIES = ("load", "energy", "time")


@dataclass(frozen=True)
class ResourceDemand:
    """A (load, energy, time) triple.

    Used both for what a service asks for and for what a server has left.
    Load is in abstract work units, energy in joules, time in seconds.
    """

    load: float = 0.0
    energy: float = 0.0
    time: float = 0.0

    def __post_init__(self):
        for name in PROPERTIES:
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ValueError(f"{name} must be a finite non-negative number, got {value!r}")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.load, self.energy, self.time)

    @property
    def is_empty(self) -> bool:
        return not any(self.as_tuple())

    def scaled(self, factor: float) -> "ResourceDemand":
        return ResourceDemand(self.load * factor, self.energy * factor, self.time * factor)

    def __add__(self, other: "ResourceDemand") -> "ResourceDemand":
        return ResourceDemand(self.load + other.load, self.energy + other.energy, self.time + other.time)

    def fits_within(self, capacity: "ResourceDemand", tol: float = 1e-9) -> bool:
        return all(d <= c + tol for d, c in zip(self.as_tuple(), capacity.as_tuple()))

    @classmethod
    def total(cls, demands: Iterable["ResourceDemand"]) -> "ResourceDemand":
        load = energy = time = 0.0
        for d in demands:
            load += d.load
            energy += d.energy
            time += d.time
        return cls(load, energy, time)


@dataclass(frozen=True)
class ServiceRequest:
    id: str
    user_id: int
    demand: ResourceDemand
    divisible: bool = False
    parent_id: Optional[str] = None

    def __post_init__(self):
        if self.demand.is_empty:
            raise ValueError(f"service {self.id!r} demands nothing")


@dataclass
class ServerNode:
    """A compute resource with totals and running consumption counters."""

    id: int
    load_total: float
    energy_total: float
    time_total: float
    concurrent_capacity: int = 10
    load_current: float = 0.0
    energy_consumed: float = 0.0
    time_used: float = 0.0
    hosted: list[str] = field(default_factory=list)

    def __post_init__(self):
        if min(self.load_total, self.energy_total, self.time_total) <= 0:
            raise ConfigurationError(f"server {self.id}: totals must be positive")
        if self.concurrent_capacity < 1:
            raise ConfigurationError(f"server {self.id}: concurrent_capacity must be >= 1")

    @property
    def totals(self) -> ResourceDemand:
        return ResourceDemand(self.load_total, self.energy_total, self.time_total)

    @property
    def consumed(self) -> ResourceDemand:
        return ResourceDemand(self.load_current, self.energy_consumed, self.time_used)

    @property
    def free_slots(self) -> int:
        return self.concurrent_capacity - len(self.hosted)

    def admits(self, demand: ResourceDemand, reserve: float = 0.0) -> bool:
        return self.free_slots > 0 and demand.fits_within(headroom(self, reserve))

    def host(self, service: ServiceRequest) -> None:
        """Account for ``service`` on this server. Caller checks :meth:`admits` first."""
        d = service.demand
        # clamp float drift so the 0 <= used <= total invariant survives exact fills
        self.load_current = min(self.load_total, self.load_current + d.load)
        self.energy_consumed = min(self.energy_total, self.energy_consumed + d.energy)
        self.time_used = min(self.time_total, self.time_used + d.time)
        self.hosted.append(service.id)


def remaining_capacity(server: ServerNode) -> ResourceDemand:
    return ResourceDemand(
        max(0.0, server.load_total - server.load_current),
        max(0.0, server.energy_total - server.energy_consumed),
        max(0.0, server.time_total - server.time_used),
    )


def headroom(server: ServerNode, reserve: float = 0.0) -> ResourceDemand:
    """Remaining capacity after holding back ``reserve`` (a fraction) of every total."""
    if reserve <= 0:
        return remaining_capacity(server)
    left = remaining_capacity(server)
    return ResourceDemand(
        max(0.0, left.load - reserve * server.load_total),
        max(0.0, left.energy - reserve * server.energy_total),
        max(0.0, left.time - reserve * server.time_total),
    )


class LayerKind(str, enum.Enum):
    OSMOTIC = "osmotic"
    PUBLIC = "public"


@dataclass
class Layer:
    kind: LayerKind
    servers: list[ServerNode]
    placed: list[str] = field(default_factory=list)

    def __post_init__(self):
        if not self.servers:
            raise ConfigurationError(f"{self.kind.value} layer needs at least one server")

    def aggregate_totals(self) -> ResourceDemand:
        return ResourceDemand.total(s.totals for s in self.servers)

    def aggregate_consumed(self) -> ResourceDemand:
        return ResourceDemand.total(s.consumed for s in self.servers)

    def host_of(self, service_id: str) -> Optional[ServerNode]:
        for server in self.servers:
            if service_id in server.hosted:
                return server
        return None


class WeightMode(str, enum.Enum):
    DEPENDENT = "dependent"
    INDEPENDENT = "independent"


@dataclass(frozen=True)
class FitnessWeights:
    mode: WeightMode
    alphas: tuple[float, ...]
    dominant_index: Optional[int] = None

    def __post_init__(self):
        alphas = tuple(float(a) for a in self.alphas)
        object.__setattr__(self, "alphas", alphas)
        if not alphas:
            raise ValueError("at least one weight is required")
        for a in alphas:
            if not (0.0 <= a <= 1.0):
                raise ValueError(f"weights must lie in [0, 1], got {a!r}")
        if self.mode is WeightMode.DEPENDENT and abs(sum(alphas) - 1.0) > 1e-9:
            raise ValueError(f"dependent weights must sum to 1, got {sum(alphas)!r}")
        if self.dominant_index is not None:
            if self.mode is not WeightMode.DEPENDENT:
                raise ValueError("dominant_index only applies to dependent weights")
            if not 0 <= self.dominant_index < len(alphas):
                raise ValueError("dominant_index out of range")

    @property
    def k(self) -> int:
        return len(self.alphas)

    @classmethod
    def of(cls, alphas: Sequence[float]) -> "FitnessWeights":
        """Independent-mode weights from a plain sequence."""
        return cls(WeightMode.INDEPENDENT, tuple(alphas))
