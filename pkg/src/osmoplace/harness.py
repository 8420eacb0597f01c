"""Experiment suites producing plot-ready series for the three result figures."""
from __future__ import annotations

import enum
import logging
import statistics
import time
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Optional, Sequence

from .osmosis import OsmosisConfig, run_osmosis
from .workload import InfrastructureConfig, WorkloadConfig, build_infrastructure, generate_services, sweep_counts

log = logging.getLogger(__name__)


class SuiteName(str, enum.Enum):
    DISTRIBUTION = "distribution"
    PROBABILITY_VS_EPSILON = "probability_vs_epsilon"
    ALLOCATION_TIME_VS_EPSILON = "allocation_time_vs_epsilon"


DEFAULT_MULTIPLIERS = {
    SuiteName.DISTRIBUTION: (1.0,),
    SuiteName.PROBABILITY_VS_EPSILON: (1.0, 2.0, 3.0),
    SuiteName.ALLOCATION_TIME_VS_EPSILON: (1.0, 2.0, 3.0),
}


@dataclass(frozen=True)
class ExperimentSuite:
    name: SuiteName
    runs: int = 30
    epsilon_multipliers: Optional[tuple[float, ...]] = None
    sweep_services: bool = False
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "name", SuiteName(self.name))
        if self.runs < 1:
            raise ValueError("experiment.runs must be >= 1")
        if self.epsilon_multipliers is None:
            object.__setattr__(self, "epsilon_multipliers", DEFAULT_MULTIPLIERS[self.name])
        mults = tuple(float(m) for m in self.epsilon_multipliers)
        if not mults or any(m <= 0 for m in mults):
            raise ValueError("experiment.epsilon_multipliers must be positive")
        object.__setattr__(self, "epsilon_multipliers", mults)
        if self.workers < 1:
            raise ValueError("experiment.workers must be >= 1")


@dataclass
class ExperimentRecord:
    run_id: int
    seed: int
    epsilon_initial: float
    epsilon_final: float
    total_services: int
    osmotic_count: int
    public_count: int
    unhandled_count: int
    track: int
    epsilon_adjustments: int
    p_osmotic: float
    wallclock_us: int
    # not part of the CSV schema
    error: Optional[str] = field(default=None, compare=False)
    within_band: Optional[bool] = field(default=None, compare=False)


COLUMNS = tuple(f.name for f in fields(ExperimentRecord) if f.name not in ("error", "within_band"))
DETERMINISTIC_COLUMNS = tuple(c for c in COLUMNS if c != "wallclock_us")


def record_row(record: ExperimentRecord) -> dict:
    d = asdict(record)
    return {c: d[c] for c in COLUMNS}


def run_single(
    run_id: int,
    multiplier: float,
    workload_cfg: WorkloadConfig,
    infra_cfg: InfrastructureConfig,
    osmosis_cfg: OsmosisConfig,
    count: Optional[int] = None,
) -> ExperimentRecord:
    """One simulation. The same run_id sees the same workload at every multiplier."""
    cfg = replace(osmosis_cfg, epsilon=osmosis_cfg.epsilon * multiplier)
    services = generate_services(workload_cfg, run_id, count=count, infra=infra_cfg)
    osmotic, public = build_infrastructure(infra_cfg)
    start = time.perf_counter_ns()
    state = run_osmosis(services, osmotic, public, cfg)
    elapsed_us = (time.perf_counter_ns() - start) // 1000
    total = state.leaf_count
    return ExperimentRecord(
        run_id=run_id,
        seed=workload_cfg.seed,
        epsilon_initial=state.epsilon_initial,
        epsilon_final=state.epsilon,
        total_services=total,
        osmotic_count=len(osmotic.placed),
        public_count=len(public.placed),
        unhandled_count=len(state.unhandled),
        track=state.track,
        epsilon_adjustments=state.epsilon_adjust_count,
        p_osmotic=len(osmotic.placed) / total,
        wallclock_us=int(elapsed_us),
        within_band=state.within_band,
    )


def _failed(run_id: int, multiplier: float, workload_cfg, osmosis_cfg, exc: Exception) -> ExperimentRecord:
    return ExperimentRecord(
        run_id=run_id,
        seed=workload_cfg.seed,
        epsilon_initial=osmosis_cfg.epsilon * multiplier,
        epsilon_final=float("nan"),
        total_services=0,
        osmotic_count=0,
        public_count=0,
        unhandled_count=0,
        track=0,
        epsilon_adjustments=0,
        p_osmotic=float("nan"),
        wallclock_us=0,
        error=f"{type(exc).__name__}: {exc}",
    )


def run_experiment(
    suite: ExperimentSuite,
    workload_cfg: Optional[WorkloadConfig] = None,
    infra_cfg: Optional[InfrastructureConfig] = None,
    osmosis_cfg: Optional[OsmosisConfig] = None,
) -> list[ExperimentRecord]:
    """Run ``runs x len(epsilon_multipliers)`` simulations, ordered by (multiplier, run_id)."""
    workload_cfg = workload_cfg or WorkloadConfig()
    infra_cfg = infra_cfg or InfrastructureConfig()
    osmosis_cfg = osmosis_cfg or OsmosisConfig()
    counts: Sequence[Optional[int]] = (
        sweep_counts(workload_cfg, suite.runs) if suite.sweep_services else [None] * suite.runs
    )
    jobs = [(m, j) for m in suite.epsilon_multipliers for j in range(suite.runs)]

    def job(item):
        m, j = item
        try:
            return run_single(j, m, workload_cfg, infra_cfg, osmosis_cfg, counts[j])
        except Exception as exc:  # attach to the record, keep the suite going
            log.warning("run %d (x%g) failed: %s", j, m, exc)
            return _failed(j, m, workload_cfg, osmosis_cfg, exc)

    if suite.workers == 1:
        return [job(item) for item in jobs]
    with ThreadPoolExecutor(max_workers=suite.workers) as pool:
        # map preserves submission order
        return list(pool.map(job, jobs))


def summarize(records: Sequence[ExperimentRecord], bucket_width: int = 10) -> list[dict]:
    """Mean and population stddev of p_osmotic, track and wallclock per (epsilon, bucket)."""
    if not records:
        raise ValueError("cannot summarise an empty record list")
    if bucket_width < 1:
        raise ValueError("bucket_width must be >= 1")
    groups: dict[tuple[float, int], list[ExperimentRecord]] = defaultdict(list)
    for r in records:
        if r.error is None:
            groups[(r.epsilon_initial, (r.total_services // bucket_width) * bucket_width)].append(r)
    rows = []
    for (eps, lo), rs in sorted(groups.items()):
        row = {"epsilon_initial": eps, "bucket_min": lo, "bucket_max": lo + bucket_width - 1, "n": len(rs)}
        for name in ("p_osmotic", "track", "wallclock_us", "epsilon_adjustments"):
            values = [float(getattr(r, name)) for r in rs]
            row[f"{name}_mean"] = statistics.fmean(values)
            row[f"{name}_std"] = statistics.pstdev(values) if len(values) > 1 else 0.0
        rows.append(row)
    return rows


def trend(records: Sequence[ExperimentRecord], column: str, per_service: bool = False) -> dict[float, float]:
    """Mean of ``column`` per initial epsilon, optionally divided by total_services."""
    by_eps: dict[float, list[float]] = defaultdict(list)
    for r in records:
        if r.error is not None:
            continue
        value = float(getattr(r, column))
        by_eps[r.epsilon_initial].append(value / r.total_services if per_service else value)
    return {eps: statistics.fmean(v) for eps, v in sorted(by_eps.items())}
