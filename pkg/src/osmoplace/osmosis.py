"""Fitness-based osmosis: split services between the osmotic and public layers.

Each pass of the loop takes the next pending service, computes its fitness and
the two layer thresholds, and routes it:

* ``f <= th_osm``            -> osmotic layer (micro-service)
* ``th_osm < f <= th_pub``   -> public layer (macro-service)
* ``f > th_pub``             -> cannot be handled currently

A threshold is the fitness of the largest remaining-capacity vector among the
layer's servers that still have a free slot. Osmotic servers additionally hold
back ``osmotic_reserve * epsilon`` (a fraction) of every resource total, both
in the threshold and when admitting a service, so a wider tolerance leaves
more of the osmotic layer idle and pushes borderline services to the public
cloud. A pass that leaves a service unhandled enlarges epsilon by
``epsilon_multiplier`` and re-queues the service at the back of the queue.
"""
from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .domain import (
    FitnessWeights,
    Layer,
    LayerKind,
    ResourceDemand,
    ServerNode,
    ServiceRequest,
    WeightMode,
    headroom,
    remaining_capacity,
)
from .exceptions import ConfigurationError, IndivisibleServiceError, PlacementOverflow
from .fitness import (
    PERCENT,
    aggregate_server,
    demand_fitness,
    fitness,
    is_shift_blocked,
    normalize,
    weights_dependent,
    weights_independent,
)

TOL = 1e-9


class Classification(str, enum.Enum):
    TO_OSMOTIC = "to_osmotic"
    TO_PUBLIC = "to_public"
    UNHANDLEABLE = "unhandleable"


@dataclass(frozen=True)
class OsmosisConfig:
    epsilon: float = 100.0
    epsilon_multiplier: float = 2.0
    max_epsilon_adjustments: int = 10
    # fraction of each osmotic server total held back per unit of epsilon
    osmotic_reserve: float = 0.001
    weight_mode: WeightMode = WeightMode.DEPENDENT
    dominant_index: int = 0
    normalize: bool = True
    split_services: bool = False
    split_parts: int = 2
    max_split_depth: int = 4

    def __post_init__(self):
        object.__setattr__(self, "weight_mode", WeightMode(self.weight_mode))
        if not (self.epsilon > 0 and math.isfinite(self.epsilon)):
            raise ConfigurationError("osmosis.epsilon must be a positive finite number")
        if self.epsilon_multiplier <= 1:
            raise ConfigurationError("osmosis.epsilon_multiplier must be > 1 (epsilon only grows)")
        if self.max_epsilon_adjustments < 0:
            raise ConfigurationError("osmosis.max_epsilon_adjustments must be >= 0")
        if self.osmotic_reserve < 0:
            raise ConfigurationError("osmosis.osmotic_reserve must be >= 0")
        if not 0 <= self.dominant_index < 3:
            raise ConfigurationError("osmosis.dominant_index must be 0, 1 or 2")
        if self.split_parts < 2:
            raise ConfigurationError("osmosis.split_parts must be >= 2")
        if self.max_split_depth < 0:
            raise ConfigurationError("osmosis.max_split_depth must be >= 0")


@dataclass(frozen=True)
class PlacementEvent:
    """One pass of the loop, enough to replay the routing decision."""

    track: int
    service_id: str
    demand: ResourceDemand
    fitness: float
    th_osmotic: float
    th_public: float
    epsilon: float
    classification: Classification
    layer: Optional[LayerKind]
    server_id: Optional[int]
    osmotic_overflow: bool
    public_overflow: bool
    weights: tuple[float, ...]


@dataclass
class OsmosisState:
    epsilon: float
    epsilon_initial: float
    multiplier: float
    max_adjustments: int
    osmotic: Layer
    public: Layer
    pending: deque = field(default_factory=deque)
    unhandled: list[ServiceRequest] = field(default_factory=list)
    epsilon_adjust_count: int = 0
    track: int = 0
    leaf_count: int = 0
    log: list[PlacementEvent] = field(default_factory=list)
    f_osmotic: float = 0.0
    f_public: float = 0.0

    @property
    def within_band(self) -> bool:
        return abs(self.f_osmotic - self.f_public) <= self.epsilon + TOL

    @property
    def exhausted(self) -> bool:
        return self.epsilon_adjust_count >= self.max_adjustments


def reference_scale(osmotic: Layer) -> ResourceDemand:
    """Mean per-server totals of the osmotic layer; the unit for normalised fitness."""
    n = len(osmotic.servers)
    return osmotic.aggregate_totals().scaled(1.0 / n)


def layer_fitness(layer: Layer, weights: FitnessWeights, normalized: bool = True) -> float:
    """Fitness of the layer's aggregate consumption.

    Normalised, each property is the percentage of the layer's aggregate total
    already consumed, so layers of different size are comparable.
    """
    consumed = layer.aggregate_consumed()
    if not normalized:
        return fitness(consumed, weights)
    return fitness(normalize(consumed, layer.aggregate_totals()), weights)


def server_threshold(
    server: ServerNode,
    weights: FitnessWeights,
    reference: Optional[ResourceDemand] = None,
    reserve: float = 0.0,
) -> float:
    if server.free_slots <= 0:
        return 0.0
    return demand_fitness(headroom(server, reserve), weights, reference)


def reserve_fraction(config: OsmosisConfig, epsilon: float) -> float:
    return min(1.0, config.osmotic_reserve * epsilon)


def thresholds(
    osmotic: Layer,
    public: Layer,
    weights: FitnessWeights,
    reference: Optional[ResourceDemand] = None,
    osmotic_reserve: float = 0.0,
) -> tuple[float, float]:
    """Return ``(th_osm, th_pub)`` for the current server state.

    ``osmotic_reserve`` is the fraction of each osmotic total held back.
    """
    th_osm = max(server_threshold(s, weights, reference, osmotic_reserve) for s in osmotic.servers)
    th_pub = max(server_threshold(s, weights, reference) for s in public.servers)
    return th_osm, th_pub


def classify_fitness(f: float, th_osm: float, th_pub: float) -> Classification:
    if f <= th_osm + TOL:
        return Classification.TO_OSMOTIC
    if f <= th_pub + TOL:
        return Classification.TO_PUBLIC
    return Classification.UNHANDLEABLE


def classify(
    service: ServiceRequest,
    th_osm: float,
    th_pub: float,
    weights: FitnessWeights,
    reference: Optional[ResourceDemand] = None,
) -> Classification:
    return classify_fitness(demand_fitness(service.demand, weights, reference), th_osm, th_pub)


def select_server(
    service: ServiceRequest,
    layer: Layer,
    weights: FitnessWeights,
    reference: Optional[ResourceDemand] = None,
    reserve: float = 0.0,
) -> Optional[ServerNode]:
    """Best fit: the admitting server with the least remaining fitness, lowest id on ties."""
    candidates = [s for s in layer.servers if s.admits(service.demand, reserve)]
    if not candidates:
        return None
    return min(candidates, key=lambda s: (demand_fitness(remaining_capacity(s), weights, reference), s.id))


def place(
    service: ServiceRequest,
    layer: Layer,
    weights: Optional[FitnessWeights] = None,
    reference: Optional[ResourceDemand] = None,
    reserve: float = 0.0,
) -> ServerNode:
    """Host ``service`` on the best-fit server of ``layer``; mutates the layer in place."""
    if weights is None:
        weights = weights_dependent(3, 0)
    server = select_server(service, layer, weights, reference, reserve)
    if server is None:
        raise PlacementOverflow(f"no {layer.kind.value} server admits service {service.id}")
    server.host(service)
    layer.placed.append(service.id)
    return server


def adjust_epsilon(state: OsmosisState) -> bool:
    """Enlarge epsilon and re-queue unhandled services.

    Returns False without touching the state when nothing is unhandled or the
    adjustment budget is spent.
    """
    if not state.unhandled or state.exhausted:
        return False
    state.epsilon *= state.multiplier
    state.epsilon_adjust_count += 1
    state.pending.extend(state.unhandled)
    state.unhandled.clear()
    return True


def split_service(service: ServiceRequest, parts: int) -> list[ServiceRequest]:
    if not service.divisible:
        raise IndivisibleServiceError(f"service {service.id} is not divisible")
    if parts < 2:
        raise ValueError("parts must be >= 2")
    share = service.demand.scaled(1.0 / parts)
    return [
        ServiceRequest(
            id=f"{service.id}.{i}",
            user_id=service.user_id,
            demand=share,
            divisible=True,
            parent_id=service.id,
        )
        for i in range(parts)
    ]


def current_weights(osmotic: Layer, public: Layer, config: OsmosisConfig) -> FitnessWeights:
    if config.weight_mode is WeightMode.DEPENDENT:
        return weights_dependent(3, config.dominant_index)
    weights = weights_independent(aggregate_server(osmotic.servers + public.servers))
    if sum(weights.alphas) <= 0:
        # idle infrastructure has no consumption to weight by
        return weights_dependent(3, config.dominant_index)
    return weights


def _layer_open(layer: Layer, config: OsmosisConfig) -> bool:
    if config.weight_mode is not WeightMode.INDEPENDENT:
        return True
    return not is_shift_blocked(weights_independent(aggregate_server(layer.servers)))


class _Osmosis:
    """Mutable run context; keeps run_osmosis itself short."""

    def __init__(self, state: OsmosisState, config: OsmosisConfig):
        self.state = state
        self.config = config
        self.reference = reference_scale(state.osmotic) if config.normalize else None
        self.split_depth: dict[str, int] = {}

    def refresh_layer_fitness(self, weights: FitnessWeights) -> None:
        st = self.state
        st.f_osmotic = layer_fitness(st.osmotic, weights, self.config.normalize)
        st.f_public = layer_fitness(st.public, weights, self.config.normalize)

    def route(self, service: ServiceRequest, weights: FitnessWeights):
        st, cfg = self.state, self.config
        reserve = reserve_fraction(cfg, st.epsilon)
        th_osm, th_pub = thresholds(st.osmotic, st.public, weights, self.reference, reserve)
        if not _layer_open(st.osmotic, cfg):
            th_osm = -math.inf
        if not _layer_open(st.public, cfg):
            th_pub = -math.inf
        f = demand_fitness(service.demand, weights, self.reference)
        cls = classify_fitness(f, th_osm, th_pub)
        order = {
            Classification.TO_OSMOTIC: (st.osmotic, st.public),
            Classification.TO_PUBLIC: (st.public, st.osmotic),
            Classification.UNHANDLEABLE: (),
        }[cls]
        overflow = {LayerKind.OSMOTIC: False, LayerKind.PUBLIC: False}
        target = server = None
        for i, layer in enumerate(order):
            # the fallback layer must be open as well
            if i > 0 and not _layer_open(layer, cfg):
                break
            try:
                layer_reserve = reserve if layer is st.osmotic else 0.0
                server = place(service, layer, weights, self.reference, layer_reserve)
            except PlacementOverflow:
                overflow[layer.kind] = True
                continue
            target = layer
            break
        return f, th_osm, th_pub, cls, target, server, overflow

    def can_split(self, service: ServiceRequest) -> bool:
        cfg = self.config
        return (
            cfg.split_services
            and service.divisible
            and self.split_depth.get(service.id, 0) < cfg.max_split_depth
        )

    def step(self) -> None:
        st, cfg = self.state, self.config
        service = st.pending.popleft()
        weights = current_weights(st.osmotic, st.public, cfg)
        f, th_osm, th_pub, cls, target, server, overflow = self.route(service, weights)
        while target is None and self.can_split(service):
            depth = self.split_depth.get(service.id, 0) + 1
            children = split_service(service, cfg.split_parts)
            for child in children:
                self.split_depth[child.id] = depth
            st.leaf_count += len(children) - 1
            service = children[0]
            st.pending.extendleft(reversed(children[1:]))
            f, th_osm, th_pub, cls, target, server, overflow = self.route(service, weights)

        if target is None:
            st.unhandled.append(service)
        st.log.append(
            PlacementEvent(
                track=st.track,
                service_id=service.id,
                demand=service.demand,
                fitness=f,
                th_osmotic=th_osm,
                th_public=th_pub,
                epsilon=st.epsilon,
                classification=cls,
                layer=None if target is None else target.kind,
                server_id=None if server is None else server.id,
                osmotic_overflow=overflow[LayerKind.OSMOTIC],
                public_overflow=overflow[LayerKind.PUBLIC],
                weights=weights.alphas,
            )
        )
        st.track += 1
        if target is not None:
            self.refresh_layer_fitness(weights)
        elif st.unhandled:
            adjust_epsilon(st)


def run_osmosis(
    services: Iterable[ServiceRequest],
    osmotic: Layer,
    public: Layer,
    config: Optional[OsmosisConfig] = None,
) -> OsmosisState:
    """Place every service, returning the final state with ``track`` and the placement log.

    The loop runs until the queue is empty. Once the epsilon adjustment budget
    is spent, services that cannot be handled stay in ``unhandled`` and the
    remaining queue is still processed.
    """
    config = config or OsmosisConfig()
    if osmotic.kind is not LayerKind.OSMOTIC or public.kind is not LayerKind.PUBLIC:
        raise ConfigurationError("layers passed in the wrong order")
    services = list(services)
    ids = [s.id for s in services]
    if len(set(ids)) != len(ids):
        raise ConfigurationError("service ids must be unique within a run")

    state = OsmosisState(
        epsilon=config.epsilon,
        epsilon_initial=config.epsilon,
        multiplier=config.epsilon_multiplier,
        max_adjustments=config.max_epsilon_adjustments,
        osmotic=osmotic,
        public=public,
        pending=deque(services),
        leaf_count=len(services),
    )
    run = _Osmosis(state, config)
    weights = current_weights(osmotic, public, config)
    th_osm, th_pub = thresholds(osmotic, public, weights, run.reference)
    if th_pub + TOL < th_osm:
        raise ConfigurationError(
            f"public threshold {th_pub:.6g} is below osmotic threshold {th_osm:.6g}; "
            "public servers need at least the osmotic servers' capacity"
        )
    run.refresh_layer_fitness(weights)
    while state.pending:
        run.step()
    return state


__all__ = [
    "Classification",
    "OsmosisConfig",
    "OsmosisState",
    "PlacementEvent",
    "PERCENT",
    "adjust_epsilon",
    "classify",
    "classify_fitness",
    "layer_fitness",
    "place",
    "reference_scale",
    "reserve_fraction",
    "run_osmosis",
    "select_server",
    "server_threshold",
    "split_service",
    "thresholds",
]
