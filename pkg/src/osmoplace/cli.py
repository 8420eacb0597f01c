"""Command-line entry point: ``osmoplace --suite distribution --seed 42 --format csv``.

Configuration is a TOML file with up to four sections. Every key is optional
and falls back to the defaults below; unknown keys are rejected::

    [workload]
    num_users = 10
    services_min = 12
    services_max = 110
    load_min = 0.5
    load_max = 1.5
    energy_min = 1.5
    energy_max = 1.5
    time_min = 5.0
    time_max = 20.0
    divisible_fraction = 0.0
    seed = 0

    [infrastructure]
    num_osmotic = 5
    num_public = 10
    load_total = 10.0
    energy_total = 2000.0
    time_total = 100.0
    concurrent_capacity = 10
    public_scale = 2.0
    energy_per_iteration = 1.5
    min_processing_time = 5.0

    [osmosis]
    epsilon = 100.0
    epsilon_multiplier = 2.0
    max_epsilon_adjustments = 10
    osmotic_reserve = 0.001
    weight_mode = "dependent"
    dominant_index = 0
    normalize = true
    split_services = false

    [experiment]
    suite = "distribution"
    runs = 30
    epsilon_multipliers = [1.0, 2.0, 3.0]
    sweep_services = false
    workers = 1
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import logging
import sys
import typing
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

import tomli

from . import __version__
from .domain import WeightMode
from .exceptions import ConfigurationError
from .harness import COLUMNS, ExperimentSuite, SuiteName, record_row, run_experiment, summarize
from .osmosis import OsmosisConfig
from .workload import InfrastructureConfig, WorkloadConfig

log = logging.getLogger("osmoplace")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2
FORMATS = ("csv", "json")
MANIFEST_PREFIX = "# manifest: "

SECTIONS = {
    "workload": WorkloadConfig,
    "infrastructure": InfrastructureConfig,
    "osmosis": OsmosisConfig,
    "experiment": ExperimentSuite,
}


@dataclass(frozen=True)
class RunManifest:
    config_path: Optional[str]
    suite: str
    seed: int
    out: Optional[str]
    format: str

    def __post_init__(self):
        if self.suite not in {s.value for s in SuiteName}:
            raise ConfigurationError(f"unknown suite {self.suite!r}; valid suites: {', '.join(valid_suites())}")
        if self.format not in FORMATS:
            raise ConfigurationError(f"format must be one of {FORMATS}")


def valid_suites() -> list[str]:
    return [s.value for s in SuiteName]


def _coerce(path: str, value: Any, annotation: Any) -> Any:
    """Check a TOML scalar against a dataclass field annotation."""
    origin = typing.get_origin(annotation)
    args = typing.get_args(annotation)
    if origin is typing.Union and type(None) in args:
        if value is None:
            return None
        inner = [a for a in args if a is not type(None)][0]
        return _coerce(path, value, inner)
    if annotation is bool:
        if not isinstance(value, bool):
            raise ConfigurationError(f"{path}: expected true/false, got {value!r}")
        return value
    if annotation is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigurationError(f"{path}: expected an integer, got {value!r}")
        return value
    if annotation is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigurationError(f"{path}: expected a number, got {value!r}")
        return float(value)
    if origin is tuple:
        if not isinstance(value, (list, tuple)):
            raise ConfigurationError(f"{path}: expected a list, got {value!r}")
        return tuple(_coerce(f"{path}[{i}]", v, args[0]) for i, v in enumerate(value))
    if annotation in (WeightMode, SuiteName):
        try:
            return annotation(value)
        except ValueError:
            choices = ", ".join(m.value for m in annotation)
            raise ConfigurationError(f"{path}: {value!r} is not one of {choices}") from None
    return value


def _build(section: str, cls, values: dict):
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls) if f.init}
    kwargs = {}
    for key, value in values.items():
        path = f"{section}.{key}"
        if key not in names:
            raise ConfigurationError(f"unknown key {path!r}")
        kwargs[key] = _coerce(path, value, hints[key])
    try:
        return cls(**kwargs)
    except ConfigurationError:
        raise
    except (TypeError, ValueError) as exc:
        msg = str(exc)
        raise ConfigurationError(msg if msg.startswith(f"{section}.") else f"{section}: {msg}") from None


def config_from_dict(data: dict) -> tuple[WorkloadConfig, InfrastructureConfig, ExperimentSuite, OsmosisConfig]:
    for key, value in data.items():
        if key not in SECTIONS:
            raise ConfigurationError(f"unknown section {key!r}; expected one of {', '.join(SECTIONS)}")
        if not isinstance(value, dict):
            raise ConfigurationError(f"{key!r} must be a section")
    experiment = dict(data.get("experiment", {}))
    experiment.setdefault("name", experiment.pop("suite", SuiteName.DISTRIBUTION.value))
    workload = _build("workload", WorkloadConfig, data.get("workload", {}))
    infra = _build("infrastructure", InfrastructureConfig, data.get("infrastructure", {}))
    suite = _build("experiment", ExperimentSuite, experiment)
    osmosis = _build("osmosis", OsmosisConfig, data.get("osmosis", {}))
    return workload, infra, suite, osmosis


def parse_config(path) -> tuple[WorkloadConfig, InfrastructureConfig, ExperimentSuite, OsmosisConfig]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConfigurationError(f"config file not found: {path}") from None
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigurationError(f"{path}: malformed config: {exc}") from None
    return config_from_dict(data)


def _plain(obj):
    if isinstance(obj, (WeightMode, SuiteName)):
        return obj.value
    if isinstance(obj, tuple):
        return [_plain(v) for v in obj]
    return obj


def resolved_config(workload, infra, suite, osmosis) -> dict:
    out = {}
    for section, cfg in (("workload", workload), ("infrastructure", infra), ("osmosis", osmosis)):
        out[section] = {k: _plain(v) for k, v in dataclasses.asdict(cfg).items() if v is not None}
    exp = {k: _plain(v) for k, v in dataclasses.asdict(suite).items()}
    exp["suite"] = exp.pop("name")
    out["experiment"] = exp
    return out


def render(records, manifest: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps({"manifest": manifest, "records": [record_row(r) for r in records]}, indent=2) + "\n"
    buf = io.StringIO()
    buf.write(MANIFEST_PREFIX + json.dumps(manifest, sort_keys=True) + "\n")
    writer = csv.DictWriter(buf, fieldnames=COLUMNS, lineterminator="\n")
    writer.writeheader()
    for r in records:
        writer.writerow(record_row(r))
    return buf.getvalue()


def read_manifest(path) -> dict:
    """Pull the embedded manifest out of a previous CSV or JSON output."""
    text = Path(path).read_text(encoding="utf-8")
    if text.startswith(MANIFEST_PREFIX):
        return json.loads(text.splitlines()[0][len(MANIFEST_PREFIX):])
    try:
        return json.loads(text)["manifest"]
    except (ValueError, KeyError):
        raise ConfigurationError(f"{path}: no embedded manifest found") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="osmoplace", description="Fitness-based osmosis placement experiments.")
    p.add_argument("--config", help="TOML config file; defaults when omitted")
    p.add_argument("--suite", help=f"one of: {', '.join(valid_suites())}")
    p.add_argument("--seed", type=int, help="unsigned 64-bit workload seed")
    p.add_argument("--out", help="output path (stdout when omitted)")
    p.add_argument("--format", default="csv", help="csv or json")
    p.add_argument("--runs", type=int, help="simulation runs per epsilon multiplier")
    p.add_argument("--sweep-services", action="store_true", help="sweep the service total instead of drawing it")
    p.add_argument("--replay", metavar="OUTPUT", help="re-run from the manifest embedded in a previous output")
    p.add_argument("--summary", metavar="PATH", help="also write a per-bucket summary CSV")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _resolve(args) -> tuple[tuple, dict, str]:
    if args.replay:
        data = read_manifest(args.replay)["config"]
        workload, infra, suite, osmosis = config_from_dict(data)
        return (workload, infra, suite, osmosis), data, args.format

    if args.config:
        workload, infra, suite, osmosis = parse_config(args.config)
    else:
        workload, infra, suite, osmosis = config_from_dict({})
    if args.suite is not None:
        if args.suite not in valid_suites():
            raise ConfigurationError(f"unknown suite {args.suite!r}; valid suites: {', '.join(valid_suites())}")
        changes = {"name": SuiteName(args.suite)}
        # a named suite brings its own multipliers unless the config file set them
        if not (args.config and "epsilon_multipliers" in _experiment_keys(args.config)):
            changes["epsilon_multipliers"] = None
        suite = dataclasses.replace(suite, **changes)
    if args.seed is not None:
        workload = _replace(workload, "workload", seed=args.seed)
    if args.runs is not None:
        suite = _replace(suite, "experiment", runs=args.runs)
    if args.sweep_services:
        suite = dataclasses.replace(suite, sweep_services=True)
    RunManifest(args.config, suite.name.value, workload.seed, args.out, args.format)
    return (workload, infra, suite, osmosis), resolved_config(workload, infra, suite, osmosis), args.format


def _experiment_keys(path) -> set:
    return set(tomli.loads(Path(path).read_text(encoding="utf-8")).get("experiment", {}))


def _replace(cfg, section, **changes):
    try:
        return dataclasses.replace(cfg, **changes)
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"{section}: {exc}") from None


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        (workload, infra, suite, osmosis), config, fmt = _resolve(args)
        if fmt not in FORMATS:
            raise ConfigurationError(f"format must be one of {FORMATS}, got {fmt!r}")
    except ConfigurationError as exc:
        print(f"osmoplace: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    manifest = {
        "artifact": "osmoplace",
        "version": __version__,
        "suite": suite.name.value,
        "seed": workload.seed,
        "config": config,
    }
    try:
        records = run_experiment(suite, workload, infra, osmosis)
        text = render(records, manifest, fmt)
        if args.out:
            Path(args.out).write_text(text, encoding="utf-8")
        else:
            sys.stdout.write(text)
        if args.summary:
            rows = summarize(records)
            with open(args.summary, "w", newline="", encoding="utf-8") as fh:
                writer = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
                writer.writeheader()
                writer.writerows(rows)
    except Exception as exc:
        print(f"osmoplace: runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    failed = [r for r in records if r.error]
    for r in failed:
        log.warning("run %d at epsilon %g failed: %s", r.run_id, r.epsilon_initial, r.error)
    return EXIT_RUNTIME if failed else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
