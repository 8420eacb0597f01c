"""scikit-learn style front end to the osmosis placement loop.

Rows of ``X`` are service demands ``[load, energy, time]``; :meth:`OsmoticPlacer.fit`
places them on a fresh infrastructure and exposes the outcome as ``labels_``
(0 osmotic, 1 public, -1 unhandled), in the spirit of a clustering estimator.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .domain import ResourceDemand, ServiceRequest, WeightMode
from .fitness import demand_fitness
from .osmosis import (
    Classification,
    OsmosisConfig,
    classify_fitness,
    current_weights,
    reference_scale,
    reserve_fraction,
    run_osmosis,
    thresholds,
)
from .workload import InfrastructureConfig, build_infrastructure

OSMOTIC, PUBLIC, UNHANDLED = 0, 1, -1
_LABELS = {
    Classification.TO_OSMOTIC: OSMOTIC,
    Classification.TO_PUBLIC: PUBLIC,
    Classification.UNHANDLEABLE: UNHANDLED,
}


def check_demands(X) -> np.ndarray:
    """Validate a demand matrix: 2-D, three columns, finite, non-negative, no all-zero rows."""
    X = check_array(X, dtype=np.float64, ensure_min_samples=0)
    if X.shape[1] != 3:
        raise ValueError(f"expected 3 columns [load, energy, time], got {X.shape[1]}")
    if (X < 0).any():
        raise ValueError("demands must be non-negative")
    if len(X) and not X.any(axis=1).all():
        raise ValueError("every service must demand at least one resource")
    return X


class OsmoticPlacer(ClusterMixin, TransformerMixin, BaseEstimator):
    """Place a batch of services across an osmotic and a public layer.

    Parameters mirror :class:`~osmoplace.osmosis.OsmosisConfig` and
    :class:`~osmoplace.workload.InfrastructureConfig`.

    Attributes
    ----------
    labels_ : ndarray of shape (n_samples,)
        0 for the osmotic layer, 1 for the public layer, -1 when unhandled.
        Rows split into several parts take the label of their first part.
    track_ : int
    n_epsilon_adjustments_ : int
    epsilon_final_ : float
    state_ : OsmosisState
    """

    def __init__(
        self,
        epsilon=100.0,
        epsilon_multiplier=2.0,
        max_epsilon_adjustments=10,
        osmotic_reserve=0.001,
        weight_mode="dependent",
        dominant_index=0,
        normalize=True,
        num_osmotic=5,
        num_public=10,
        load_total=10.0,
        energy_total=2000.0,
        time_total=100.0,
        concurrent_capacity=10,
        public_scale=2.0,
    ):
        self.epsilon = epsilon
        self.epsilon_multiplier = epsilon_multiplier
        self.max_epsilon_adjustments = max_epsilon_adjustments
        self.osmotic_reserve = osmotic_reserve
        self.weight_mode = weight_mode
        self.dominant_index = dominant_index
        self.normalize = normalize
        self.num_osmotic = num_osmotic
        self.num_public = num_public
        self.load_total = load_total
        self.energy_total = energy_total
        self.time_total = time_total
        self.concurrent_capacity = concurrent_capacity
        self.public_scale = public_scale

    def _configs(self):
        osmosis = OsmosisConfig(
            epsilon=self.epsilon,
            epsilon_multiplier=self.epsilon_multiplier,
            max_epsilon_adjustments=self.max_epsilon_adjustments,
            osmotic_reserve=self.osmotic_reserve,
            weight_mode=WeightMode(self.weight_mode),
            dominant_index=self.dominant_index,
            normalize=self.normalize,
        )
        infra = InfrastructureConfig(
            num_osmotic=self.num_osmotic,
            num_public=self.num_public,
            load_total=self.load_total,
            energy_total=self.energy_total,
            time_total=self.time_total,
            concurrent_capacity=self.concurrent_capacity,
            public_scale=self.public_scale,
        )
        return osmosis, infra

    def fit(self, X, y=None):
        X = check_demands(X)
        osmosis, infra = self._configs()
        osmotic, public = build_infrastructure(infra)
        services = [ServiceRequest(f"s{i}", 0, ResourceDemand(*map(float, row))) for i, row in enumerate(X)]
        state = run_osmosis(services, osmotic, public, osmosis)

        where = {sid: OSMOTIC for sid in osmotic.placed}
        where.update({sid: PUBLIC for sid in public.placed})
        self.labels_ = np.array([where.get(s.id, UNHANDLED) for s in services], dtype=int)
        self.state_ = state
        self.track_ = state.track
        self.n_epsilon_adjustments_ = state.epsilon_adjust_count
        self.epsilon_final_ = state.epsilon
        self.layer_fitness_ = (state.f_osmotic, state.f_public)
        self.n_features_in_ = 3
        self._osmosis_config = osmosis
        return self

    def transform(self, X):
        """Fitness of each demand row under the fitted weights, shape (n, 1)."""
        check_is_fitted(self, "state_")
        X = check_demands(X)
        weights, reference = self._weights_reference()
        return np.array([[demand_fitness(ResourceDemand(*row), weights, reference)] for row in X])

    def predict(self, X):
        """Classify new demands against the fitted infrastructure without placing them."""
        check_is_fitted(self, "state_")
        X = check_demands(X)
        state = self.state_
        weights, reference = self._weights_reference()
        reserve = reserve_fraction(self._osmosis_config, state.epsilon)
        th_osm, th_pub = thresholds(state.osmotic, state.public, weights, reference, reserve)
        return np.array(
            [_LABELS[classify_fitness(demand_fitness(ResourceDemand(*row), weights, reference), th_osm, th_pub)]
             for row in X],
            dtype=int,
        )

    def _weights_reference(self):
        state = self.state_
        reference = reference_scale(state.osmotic) if self._osmosis_config.normalize else None
        weights = current_weights(state.osmotic, state.public, self._osmosis_config)
        return weights, reference

    def fit_predict(self, X, y=None):
        return self.fit(X).labels_

    @property
    def p_osmotic_(self) -> float:
        check_is_fitted(self, "labels_")
        return float(np.mean(self.labels_ == OSMOTIC)) if len(self.labels_) else 0.0


__all__ = ["OsmoticPlacer", "check_demands", "OSMOTIC", "PUBLIC", "UNHANDLED"]
