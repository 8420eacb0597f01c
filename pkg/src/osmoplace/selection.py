"""Fitness-proportionate (roulette-wheel) selection and per-layer selection scores."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .exceptions import DegenerateDistributionError

TOL = 1e-9


@dataclass(frozen=True)
class SelectionDistribution:
    ids: tuple[str, ...]
    probabilities: tuple[float, ...]

    def __post_init__(self):
        if len(self.ids) != len(self.probabilities):
            raise ValueError("ids and probabilities differ in length")
        if not self.ids:
            raise ValueError("empty distribution")
        if any(p < 0 or p > 1 + TOL for p in self.probabilities):
            raise ValueError("probabilities must lie in [0, 1]")
        if abs(math.fsum(self.probabilities) - 1.0) > TOL:
            raise ValueError("probabilities must sum to 1")

    def __len__(self) -> int:
        return len(self.ids)

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.ids, self.probabilities))


@dataclass(frozen=True)
class LayerProbabilities:
    """Selection scores ``f / sum(th)`` for both layers.

    The raw values can exceed 1; ``osmotic`` and ``public`` are capped at 1.
    """

    osmotic_raw: float
    public_raw: float

    @property
    def osmotic(self) -> float:
        return min(1.0, self.osmotic_raw)

    @property
    def public(self) -> float:
        return min(1.0, self.public_raw)


def roulette_distribution(
    fitnesses: Sequence[float], ids: Optional[Sequence[str]] = None
) -> SelectionDistribution:
    """``P(s_i) = f_i / sum(f)``."""
    values = [float(f) for f in fitnesses]
    if not values:
        raise ValueError("no fitness values given")
    if any(f < 0 or not math.isfinite(f) for f in values):
        raise ValueError("fitness values must be finite and non-negative")
    total = math.fsum(values)
    if total <= 0:
        raise DegenerateDistributionError("all fitness values are zero")
    if ids is None:
        ids = [str(i) for i in range(len(values))]
    elif len(ids) != len(values):
        raise ValueError("ids and fitnesses differ in length")
    return SelectionDistribution(tuple(ids), tuple(f / total for f in values))


def layer_selection_probabilities(fitness: float, th_osm_sum: float, th_pub_sum: float) -> LayerProbabilities:
    """Score a service against the summed per-server thresholds of each layer."""
    if th_osm_sum <= 0 or th_pub_sum <= 0:
        raise ValueError("threshold sums must be positive")
    if fitness < 0:
        raise ValueError("fitness must be non-negative")
    return LayerProbabilities(fitness / th_osm_sum, fitness / th_pub_sum)


def sandwich_applicable(fitnesses: Sequence[float], th_osm_sum: float, th_pub_sum: float) -> bool:
    """True when ``th_osm_sum <= sum(f) <= th_pub_sum``, the regime where the sandwich holds."""
    total = math.fsum(fitnesses)
    return th_osm_sum > 0 and total > 0 and th_osm_sum <= total <= th_pub_sum


def check_sandwich_bounds(
    fitnesses: Sequence[float], th_osm_sum: float, th_pub_sum: float
) -> Optional[bool]:
    """Check ``f/th_pub_sum <= f/sum(f) <= f/th_osm_sum`` for every service.

    Returns None outside the applicable regime rather than reporting a failure.
    """
    if not sandwich_applicable(fitnesses, th_osm_sum, th_pub_sum):
        return None
    total = math.fsum(fitnesses)
    for f in fitnesses:
        p = f / total
        lower, upper = f / th_pub_sum, f / th_osm_sum
        if not (lower <= p + TOL * max(1.0, p) and p <= upper + TOL * max(1.0, upper)):
            return False
    return True


def sample(dist: SelectionDistribution, rng: np.random.Generator) -> str:
    """Spin the wheel once."""
    cumulative = np.cumsum(dist.probabilities)
    u = rng.random() * cumulative[-1]
    idx = int(np.searchsorted(cumulative, u, side="right"))
    return dist.ids[min(idx, len(dist.ids) - 1)]


def sample_many(dist: SelectionDistribution, rng: np.random.Generator, n: int) -> list[str]:
    cumulative = np.cumsum(dist.probabilities)
    u = rng.random(n) * cumulative[-1]
    idx = np.minimum(np.searchsorted(cumulative, u, side="right"), len(dist.ids) - 1)
    return [dist.ids[i] for i in idx]
