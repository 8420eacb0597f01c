import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from osmoplace.domain import Layer, LayerKind, ResourceDemand, ServerNode, ServiceRequest, WeightMode
from osmoplace.exceptions import ConfigurationError, IndivisibleServiceError, PlacementOverflow
from osmoplace.fitness import FitnessWeights, demand_fitness, weights_dependent
from osmoplace.osmosis import (
    Classification,
    OsmosisConfig,
    OsmosisState,
    adjust_epsilon,
    classify,
    classify_fitness,
    layer_fitness,
    place,
    reference_scale,
    run_osmosis,
    split_service,
    thresholds,
)
from osmoplace.workload import InfrastructureConfig, WorkloadConfig, build_infrastructure, generate_services

import oracles

DEP = weights_dependent(3, 0)
EQUAL = FitnessWeights.of((1, 1, 1))


def layer(kind, n, totals=(10, 2000, 100), slots=10, first_id=0):
    return Layer(kind, [ServerNode(first_id + i, *totals, concurrent_capacity=slots) for i in range(n)])


def svc(i, load, energy=1.5, time=5.0, **kw):
    return ServiceRequest(f"s{i}", 0, ResourceDemand(load, energy, time), **kw)


# layer_fitness

def test_idle_layer_fitness_is_zero():
    assert layer_fitness(layer(LayerKind.OSMOTIC, 5), DEP) == 0.0


def test_half_consumed_layers_agree_regardless_of_size():
    one = layer(LayerKind.OSMOTIC, 1)
    two = layer(LayerKind.OSMOTIC, 2)
    for s in one.servers + two.servers:
        s.load_current, s.energy_consumed, s.time_used = 5, 1000, 50
    assert layer_fitness(one, DEP) == pytest.approx(layer_fitness(two, DEP))
    assert layer_fitness(one, DEP) == pytest.approx(50.0)


def test_layer_fitness_matches_recomputed_aggregates():
    osm = layer(LayerKind.OSMOTIC, 5)
    demands = [(4, 1.5, 5), (4, 1.5, 5), (4, 1.5, 5), (4, 1.5, 5), (4, 1.5, 5)]
    for i, d in enumerate(demands):
        place(svc(i, *d), osm, EQUAL, reference_scale(osm))
    total = np.sum(demands, axis=0)
    assert tuple(total) == (20, 7.5, 25)
    expected = oracles.layer_utilisation(demands, (10, 2000, 100), 5, (1, 1, 1))
    assert layer_fitness(osm, EQUAL) == pytest.approx(expected, abs=1e-9)
    assert expected == pytest.approx((40 + 0.075 + 5) / 3)


def test_layer_fitness_raw_mode():
    osm = layer(LayerKind.OSMOTIC, 2)
    place(svc(0, 2, 3, 4), osm, DEP)
    assert layer_fitness(osm, DEP, normalized=False) == pytest.approx(0.5 * 2 + 0.25 * 3 + 0.25 * 4)


# thresholds

def test_fresh_identical_layers_share_threshold():
    osm, pub = layer(LayerKind.OSMOTIC, 5), layer(LayerKind.PUBLIC, 10, first_id=5)
    ref = reference_scale(osm)
    assert thresholds(osm, pub, DEP, ref) == pytest.approx((100.0, 100.0))
    raw = demand_fitness(ResourceDemand(10, 2000, 100), DEP)
    assert thresholds(osm, pub, DEP) == pytest.approx((raw, raw))
    assert raw == pytest.approx(530.0)


def test_saturated_load_blocks_loaded_services():
    osm = layer(LayerKind.OSMOTIC, 1)
    osm.servers[0].load_current = 10
    with pytest.raises(PlacementOverflow):
        place(svc(0, 0.1), osm, DEP)
    place(svc(1, 0.0, 1.5, 5), osm, DEP)
    assert osm.placed == ["s1"]


def test_thresholds_match_oracle_on_default_infrastructure():
    osm, pub = build_infrastructure(InfrastructureConfig())
    ref = reference_scale(osm)
    services = generate_services(WorkloadConfig(seed=7), 0, count=60)
    sims_o = [oracles.SimServer(s.id, s.totals.as_tuple(), s.concurrent_capacity) for s in osm.servers]
    sims_p = [oracles.SimServer(s.id, s.totals.as_tuple(), s.concurrent_capacity) for s in pub.servers]
    sims = {s.id: s for s in sims_o + sims_p}
    refv = ref.as_tuple()
    for i, s in enumerate(services):
        target = osm if i % 3 else pub
        try:
            server = place(s, target, DEP, ref)
        except PlacementOverflow:
            continue
        sims[server.id].add(s.demand.as_tuple())
        th_o, th_p = thresholds(osm, pub, DEP, ref, osmotic_reserve=0.1)
        exp_o = max(
            oracles.weighted_mean(oracles.percent_of(x.headroom(0.1), refv), DEP.alphas) if x.count < x.slots else 0.0
            for x in sims_o
        )
        exp_p = max(
            oracles.weighted_mean(oracles.percent_of(x.headroom(), refv), DEP.alphas) if x.count < x.slots else 0.0
            for x in sims_p
        )
        assert th_o == pytest.approx(exp_o, abs=1e-9)
        assert th_p == pytest.approx(exp_p, abs=1e-9)
        assert th_p >= th_o


def test_public_smaller_than_osmotic_is_rejected_up_front():
    osm = layer(LayerKind.OSMOTIC, 1, totals=(20, 4000, 200))
    pub = layer(LayerKind.PUBLIC, 1, first_id=1)
    with pytest.raises(ConfigurationError):
        run_osmosis([svc(0, 1)], osm, pub)


# classify

def test_classify_examples():
    assert classify_fitness(0.0, 10, 20) is Classification.TO_OSMOTIC
    assert classify_fitness(10.0, 10, 20) is Classification.TO_OSMOTIC
    assert classify_fitness(15.0, 10, 20) is Classification.TO_PUBLIC
    assert classify_fitness(20.0, 10, 20) is Classification.TO_PUBLIC
    assert classify_fitness(20.5, 10, 20) is Classification.UNHANDLEABLE


def test_classify_service_uses_its_fitness():
    s = svc(0, 2, 4, 8)
    f = demand_fitness(s.demand, DEP)
    assert f == pytest.approx(4.0)
    assert classify(s, 4.0, 10.0, DEP) is Classification.TO_OSMOTIC
    assert classify(s, 3.9, 10.0, DEP) is Classification.TO_PUBLIC
    assert classify(s, 1.0, 3.0, DEP) is Classification.UNHANDLEABLE


# place

def test_place_accounting():
    osm = layer(LayerKind.OSMOTIC, 1)
    server = place(svc(0, 1, 1.5, 5), osm, DEP)
    assert (server.load_current, server.energy_consumed, server.time_used) == (1, 1.5, 5)
    assert server.hosted == ["s0"] and osm.placed == ["s0"]


def test_eleventh_concurrent_service_overflows():
    osm = layer(LayerKind.OSMOTIC, 1, totals=(100, 2000, 1000))
    for i in range(10):
        place(svc(i, 1), osm, DEP)
    with pytest.raises(PlacementOverflow):
        place(svc(10, 1), osm, DEP)


@pytest.mark.parametrize("demand", [(1, 1.5, 5), (5, 1.5, 5), (6, 1.5, 5), (3, 1.5, 60)])
def test_best_fit_against_enumeration(demand):
    osm = layer(LayerKind.OSMOTIC, 2)
    half = osm.servers[1]
    half.load_current, half.energy_consumed, half.time_used = 5, 1000, 50
    ref = reference_scale(osm)

    # oracle: try each server, keep the feasible one with the least remaining fitness
    options = []
    for s in osm.servers:
        left = np.array(s.totals.as_tuple()) - np.array(s.consumed.as_tuple())
        if np.all(np.array(demand) <= left + 1e-9):
            options.append((oracles.weighted_mean(oracles.percent_of(left, ref.as_tuple()), DEP.alphas), s.id))
    expected = min(options)[1]
    assert place(svc(0, *demand), osm, DEP, ref).id == expected


def test_best_fit_prefers_half_full_server():
    osm = layer(LayerKind.OSMOTIC, 2)
    osm.servers[1].load_current = 5
    assert place(svc(0, 1), osm, DEP, reference_scale(osm)).id == 1


def test_best_fit_tie_goes_to_lowest_id():
    osm = layer(LayerKind.OSMOTIC, 3, first_id=4)
    assert place(svc(0, 1), osm, DEP).id == 4


# adjust_epsilon

def _state(**kw):
    osm, pub = layer(LayerKind.OSMOTIC, 1), layer(LayerKind.PUBLIC, 1, first_id=1)
    base = dict(epsilon=100.0, epsilon_initial=100.0, multiplier=2.0, max_adjustments=10, osmotic=osm, public=pub)
    base.update(kw)
    return OsmosisState(**base)


def test_adjust_epsilon_doubles_and_requeues():
    st_ = _state()
    s = svc(0, 1)
    st_.unhandled.append(s)
    assert adjust_epsilon(st_)
    assert st_.epsilon == 200 and st_.epsilon_adjust_count == 1
    assert list(st_.pending) == [s] and not st_.unhandled


def test_adjust_epsilon_needs_unhandled():
    st_ = _state()
    assert not adjust_epsilon(st_)
    assert st_.epsilon == 100 and st_.epsilon_adjust_count == 0


def test_adjust_epsilon_respects_cap():
    st_ = _state(max_adjustments=2)
    st_.unhandled.append(svc(0, 1))
    assert adjust_epsilon(st_)
    st_.unhandled.append(st_.pending.popleft())
    assert adjust_epsilon(st_)
    st_.unhandled.append(st_.pending.popleft())
    assert not adjust_epsilon(st_)
    assert st_.unhandled and st_.epsilon == 400


# run_osmosis

def test_empty_run():
    osm, pub = build_infrastructure(InfrastructureConfig())
    state = run_osmosis([], osm, pub)
    assert state.track == 0 and state.epsilon_adjust_count == 0
    assert state.f_osmotic == state.f_public == 0.0


def test_huge_epsilon_single_pass():
    osm, pub = build_infrastructure(InfrastructureConfig())
    services = generate_services(WorkloadConfig(seed=1), 0)
    state = run_osmosis(services, osm, pub, OsmosisConfig(epsilon=1e12, osmotic_reserve=0.0))
    assert state.track == len(services)
    assert state.epsilon_adjust_count == 0 and not state.unhandled


def test_capacity_crunch_exhausts_epsilon_budget():
    osm = layer(LayerKind.OSMOTIC, 1, totals=(3, 2000, 100))
    pub = layer(LayerKind.PUBLIC, 1, totals=(3, 2000, 100), first_id=1)
    services = [svc(i, 1.0) for i in range(10)]
    cfg = OsmosisConfig(max_epsilon_adjustments=3, osmotic_reserve=0.0)
    state = run_osmosis(services, osm, pub, cfg)
    assert len(osm.placed) + len(pub.placed) == 6
    assert len(state.unhandled) == 4
    assert state.epsilon_adjust_count == 3
    assert state.epsilon == 100 * 2 ** 3
    assert state.track == len(services) + 3


SMALL_OSM = ((4.0, 20.0, 40.0), 2, 3)
SMALL_PUB = ((8.0, 40.0, 80.0), 2, 3)


def small_layers():
    (ot, n, k), (pt, m, kp) = SMALL_OSM, SMALL_PUB
    return (
        Layer(LayerKind.OSMOTIC, [ServerNode(i, *ot, concurrent_capacity=k) for i in range(n)]),
        Layer(LayerKind.PUBLIC, [ServerNode(n + j, *pt, concurrent_capacity=kp) for j in range(m)]),
    )


def test_six_services_against_partition_enumeration():
    rng = np.random.default_rng(2024)
    demands = [(float(rng.uniform(0.5, 1.5)), 1.5, float(rng.uniform(5, 20))) for _ in range(6)]
    cfg = OsmosisConfig()
    reserve = cfg.osmotic_reserve * cfg.epsilon
    hits = list(oracles.balanced_feasible_partitions(demands, SMALL_OSM, SMALL_PUB, DEP.alphas, cfg.epsilon, reserve))
    assert hits, "the instance should admit at least one split"
    osm, pub = small_layers()
    state = run_osmosis([svc(i, *d) for i, d in enumerate(demands)], osm, pub, cfg)
    assert state.epsilon_adjust_count == 0 and not state.unhandled
    assert abs(state.f_osmotic - state.f_public) <= cfg.epsilon
    # the algorithm's own split is one of the enumerated ones
    mask = sum(1 << i for i in range(6) if f"s{i}" in osm.placed)
    assert mask in {m for m, _ in hits}


def test_split_halves_demand():
    parent = ServiceRequest("p", 0, ResourceDemand(10, 20, 40), divisible=True)
    kids = split_service(parent, 2)
    assert [k.demand for k in kids] == [ResourceDemand(5, 10, 20)] * 2
    for k in kids:
        assert demand_fitness(k.demand, DEP) == pytest.approx(demand_fitness(parent.demand, DEP) / 2)


def test_split_requires_divisible():
    with pytest.raises(IndivisibleServiceError):
        split_service(svc(0, 1), 2)


@pytest.mark.parametrize("scale, th", [(1, 3.0), (3, 2.5), (17, 1.0), (40, 0.7)])
def test_halvings_until_below_threshold(scale, th):
    s = ServiceRequest("p", 0, ResourceDemand(scale, 2 * scale, scale), divisible=True)
    f0 = demand_fitness(s.demand, DEP)
    h = 0
    while demand_fitness(s.demand, DEP) > th + 1e-9:
        s = split_service(s, 2)[0]
        h += 1
    assert h == oracles.halvings_needed(f0, th) == oracles.log2_bound(f0, th)


def test_splitting_places_oversized_divisible_service():
    osm, pub = small_layers()
    big = ServiceRequest("big", 0, ResourceDemand(10, 6, 60), divisible=True)
    cfg = OsmosisConfig(split_services=True)
    state = run_osmosis([big, svc(1, 1)], osm, pub, cfg)
    assert not state.unhandled and state.epsilon_adjust_count == 0
    placed = osm.placed + pub.placed
    assert state.leaf_count == len(placed) == 3  # one halving suffices for the public servers
    assert state.track == state.leaf_count
    leaves = [osm.host_of(i) or pub.host_of(i) for i in placed]
    assert all(leaves)
    total = ResourceDemand.total(ev.demand for ev in state.log if ev.service_id.startswith("big"))
    assert total.as_tuple() == pytest.approx((10, 6, 60))


def test_indivisible_oversized_service_is_unhandled():
    osm, pub = small_layers()
    big = ServiceRequest("big", 0, ResourceDemand(10, 6, 60))
    state = run_osmosis([big], osm, pub, OsmosisConfig(split_services=True, max_epsilon_adjustments=2))
    assert [s.id for s in state.unhandled] == ["big"]
    assert state.epsilon_adjust_count == 2


def test_independent_weights_run():
    osm, pub = build_infrastructure(InfrastructureConfig())
    services = generate_services(WorkloadConfig(seed=3), 0, count=80)
    state = run_osmosis(services, osm, pub, OsmosisConfig(weight_mode=WeightMode.INDEPENDENT))
    assert len(osm.placed) + len(pub.placed) + len(state.unhandled) == 80
    # first pass falls back to dependent weights, later passes use consumption ratios
    assert state.log[0].weights == pytest.approx(DEP.alphas)
    assert state.log[-1].weights != state.log[0].weights


def test_shift_blocked_layer_receives_nothing():
    osm = layer(LayerKind.OSMOTIC, 1, totals=(10, 2000, 100))
    pub = layer(LayerKind.PUBLIC, 1, totals=(20, 4000, 200), first_id=1)
    osm.servers[0].time_used = 100  # alpha_time == 1 on the osmotic layer
    run_osmosis([svc(0, 0.1, 0.0, 0.0)], osm, pub, OsmosisConfig(weight_mode="independent"))
    assert pub.placed == ["s0"] and not osm.placed


# properties over random workloads

@settings(max_examples=60, deadline=None)
@given(
    seed=st.integers(0, 2**32),
    count=st.integers(1, 140),
    mult=st.sampled_from([1.0, 2.0, 3.0, 8.0]),
    split=st.booleans(),
    tight=st.booleans(),
)
def test_run_invariants(seed, count, mult, split, tight):
    infra = InfrastructureConfig(num_osmotic=2, num_public=3) if tight else InfrastructureConfig()
    wl = WorkloadConfig(seed=seed, load_max=3.0 if tight else 1.5, divisible_fraction=0.5)
    services = generate_services(wl, 0, count=count, infra=infra)
    osm, pub = build_infrastructure(infra)
    cfg = OsmosisConfig(epsilon=100 * mult, split_services=split, max_epsilon_adjustments=4)
    state = run_osmosis(services, osm, pub, cfg)

    placed = len(osm.placed) + len(pub.placed)
    assert placed + len(state.unhandled) == state.leaf_count
    assert not state.pending
    assert state.track <= state.leaf_count * (state.epsilon_adjust_count + 1)
    assert state.epsilon == cfg.epsilon * cfg.epsilon_multiplier ** state.epsilon_adjust_count
    assert state.epsilon >= state.epsilon_initial
    assert len(state.log) == state.track
    assert all(isinstance(ev.classification, Classification) for ev in state.log)
    if not any(ev.layer is None for ev in state.log):
        assert state.epsilon_adjust_count == 0 and state.track == state.leaf_count
    for lay in (osm, pub):
        for sid in lay.placed:
            assert sum(sid in s.hosted for s in lay.servers) == 1
        for s in lay.servers:
            assert len(s.hosted) <= s.concurrent_capacity
            assert 0 <= s.load_current <= s.load_total
            assert 0 <= s.energy_consumed <= s.energy_total
            assert 0 <= s.time_used <= s.time_total
    if not state.unhandled:
        assert state.within_band
    violations = oracles.replay_micro_priority(
        state.log, osm.servers, pub.servers, reference_scale(osm).as_tuple(), cfg.osmotic_reserve
    )
    assert violations == []
