"""
Replay runner

Streams frames through integration and ESDF epochs on dataset time,
scores the final field against the exact EDT and writes results.csv,
stats.json and the requested slices. A sweep repeats the same frame
stream once per parameter value.
"""

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence

import numpy as np

from core.config import RunConfig, UpdateRule
from core.errors import CorruptionError, DataError
from core.types import Connectivity
from mapping.esdf_map import EsdfMap
from mapping.esdf_updater import EpochReport
from mapping.occupancy import SensorFrame
from mapping.oracle import CSV_HEADER, ErrorReport, field_error
from mapping.slices import export_slice
from .dataset import DatasetReader, load_dataset
from .scenario import NO_RETURN_FACTOR, ScenarioSpec, generate_scenario, load_scenario

logger = logging.getLogger(__name__)

SWEEPS: Dict[str, Sequence[str]] = {
    "connectivity": [c.value for c in Connectivity],
    "block_size": ["1", "2", "4", "8", "16"],
    "rule": [r.value for r in UpdateRule],
    "voxel_size": ["0.2", "0.1", "0.05"],
}

SWEEP_KEYS = {
    "connectivity": "esdf.connectivity",
    "block_size": "index.block_size",
    "rule": "esdf.update_rule",
    "voxel_size": "occupancy.voxel_size",
}


@dataclass
class FrameSource:
    """A re-iterable frame stream; frames() may depend on the run config"""
    scenario_id: str
    frames: Callable[[RunConfig], Iterable[SensorFrame]]
    dataset: Optional[DatasetReader] = None


def scenario_source(spec: ScenarioSpec) -> FrameSource:
    def frames(config: RunConfig) -> Iterable[SensorFrame]:
        far = NO_RETURN_FACTOR * max(spec.sensor.max_range, config.occupancy.max_ray_range)
        return generate_scenario(spec, no_return_range=far)
    return FrameSource(scenario_id=spec.scenario_id, frames=frames)


def dataset_source(directory) -> FrameSource:
    reader = load_dataset(directory)
    return FrameSource(scenario_id=Path(directory).name, frames=lambda _: reader, dataset=reader)


def open_source(dataset: Optional[str] = None, scenario: Optional[str] = None) -> FrameSource:
    if (dataset is None) == (scenario is None):
        raise DataError("exactly one of --dataset or --scenario is required")
    if dataset is not None:
        return dataset_source(dataset)
    return scenario_source(load_scenario(scenario))


@dataclass
class RunResult:
    scenario_id: str
    labels: Dict[str, str]
    error: ErrorReport
    epoch_reports: List[EpochReport] = field(default_factory=list)
    epoch_errors: List[Dict[str, Any]] = field(default_factory=list)
    memory_stats: Dict[str, int] = field(default_factory=dict)
    skipped_rows: int = 0
    esdf_map: Optional[EsdfMap] = None

    @property
    def wall_time_ms(self) -> float:
        return sum(r.wall_time for r in self.epoch_reports) * 1e3

    def csv_row(self) -> List[str]:
        return self.error.to_csv_row(self.scenario_id, self.wall_time_ms)

    def stats(self) -> Dict[str, Any]:
        times = np.array([r.wall_time * 1e3 for r in self.epoch_reports]) if self.epoch_reports else np.zeros(1)
        totals = EpochReport()
        for report in self.epoch_reports:
            totals = totals.merge(report)
        return {
            "scenario_id": self.scenario_id,
            "labels": self.labels,
            "epochs": len(self.epoch_reports),
            "epoch_wall_time_ms": {
                "mean": float(np.mean(times)),
                "median": float(np.median(times)),
                "p90": float(np.percentile(times, 90)),
                "p99": float(np.percentile(times, 99)),
                "max": float(np.max(times)),
            },
            "totals": {
                "k_initialized": totals.k_initialized,
                "n_expanded": totals.n_expanded,
                "m_observed": totals.m_observed_total,
                "pushes": totals.pushes,
                "patch_adoptions": totals.patch_adoptions,
                "inserted": totals.inserted,
                "deleted": totals.deleted,
            },
            "memory_stats": self.memory_stats,
            "error": {
                "empty": self.error.empty,
                "rms_voxels": self.error.rms_error_voxels,
                "max_voxels": self.error.max_error_voxels,
                "min_signed_voxels": self.error.min_signed_error_voxels,
                "compared": self.error.compared_voxel_count,
                "excluded": self.error.excluded_voxel_count,
            },
            "epoch_errors": self.epoch_errors,
            "skipped_rows": self.skipped_rows,
        }


def run_labels(config: RunConfig) -> Dict[str, str]:
    return {
        "connectivity": config.esdf.connectivity.value,
        "rule": config.esdf.update_rule.value,
        "block_size": str(config.index.block_size),
        "voxel_size": f"{config.occupancy.voxel_size:g}",
    }


def verify_map(esdf_map: EsdfMap) -> None:
    """Full-scan invariant checks; CorruptionError on any violation"""
    layers = [esdf_map.layer] + ([esdf_map.complement] if esdf_map.complement is not None else [])
    for layer in layers:
        pairs = esdf_map.check_fixed_point(layer)
        if pairs:
            raise CorruptionError(f"{layer.name}: {len(pairs)} fixed-point violations, first {pairs[0]}")
        bad = esdf_map.check_upper_bound(layer)
        if bad:
            raise CorruptionError(f"{layer.name}: closest obstacle invalid at {len(bad)} voxels, first {bad[0]}")
        problems = esdf_map.check_dll_partition(layer)
        if problems:
            raise CorruptionError(f"{layer.name}: DLL partition broken: {problems[0]}")


def replay(esdf_map: EsdfMap, frames: Iterable[SensorFrame], update_period: float,
           on_epoch: Optional[Callable[[EpochReport], None]] = None) -> None:
    """
    Integrate frames and run an epoch whenever dataset time passes the
    next update boundary, plus a final epoch for the tail.
    """
    next_epoch: Optional[float] = None
    for frame in frames:
        if next_epoch is None:
            next_epoch = frame.timestamp + update_period
        elif frame.timestamp >= next_epoch:
            report = esdf_map.run_epoch()
            if on_epoch:
                on_epoch(report)
            while next_epoch <= frame.timestamp:
                next_epoch += update_period
        esdf_map.integrate_frame(frame)
    if not esdf_map.pending.is_empty():
        report = esdf_map.run_epoch()
        if on_epoch:
            on_epoch(report)


def run(config: RunConfig, source: FrameSource) -> RunResult:
    """One replay of source under config"""
    esdf_map = EsdfMap.from_config(config)
    labels = run_labels(config)
    result = RunResult(scenario_id=source.scenario_id, labels=labels, error=ErrorReport(labels=labels))
    logger.info("Run %s %s", source.scenario_id, labels)

    def on_epoch(report: EpochReport) -> None:
        result.epoch_reports.append(report)
        if config.run.verify:
            verify_map(esdf_map)
        if config.run.error_per_epoch:
            err = field_error(esdf_map, labels)
            result.epoch_errors.append({
                "epoch": esdf_map.epoch,
                "rms_voxels": err.rms_error_voxels,
                "max_voxels": err.max_error_voxels,
                "empty": err.empty,
            })

    replay(esdf_map, source.frames(config), config.run.update_period, on_epoch)

    result.error = field_error(esdf_map, labels)
    result.memory_stats = esdf_map.memory_stats().to_dict()
    result.skipped_rows = source.dataset.skipped_rows if source.dataset is not None else 0
    result.esdf_map = esdf_map
    logger.info(
        "Run %s done: %d epochs, rms %.4f voxels over %d voxels",
        source.scenario_id, len(result.epoch_reports),
        result.error.rms_error_voxels, result.error.compared_voxel_count,
    )
    return result


def sweep_configs(config: RunConfig, sweep: Optional[str]) -> List[RunConfig]:
    if sweep is None:
        return [config]
    if sweep not in SWEEPS:
        raise DataError(f"unknown sweep '{sweep}', expected one of {', '.join(SWEEPS)}")
    return [config.with_overrides({SWEEP_KEYS[sweep]: value}) for value in SWEEPS[sweep]]


def write_artifacts(out_dir: Path, results: List[RunResult], failure: Optional[str] = None) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "results.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(CSV_HEADER)
        for result in results:
            writer.writerow(result.csv_row())
    stats: Dict[str, Any] = {"runs": [r.stats() for r in results]}
    if failure is not None:
        stats["failure"] = failure
    with open(out_dir / "stats.json", "w") as f:
        json.dump(stats, f, indent=2)
    logger.info("Wrote %s and %s", out_dir / "results.csv", out_dir / "stats.json")


def run_all(config: RunConfig, source: FrameSource, sweep: Optional[str] = None) -> List[RunResult]:
    """
    Run once (or once per sweep value) and write artifacts to
    config.run.output_dir. On failure, the runs completed so far are
    flushed before the error propagates.
    """
    out_dir = Path(config.run.output_dir)
    results: List[RunResult] = []
    try:
        for run_config in sweep_configs(config, sweep):
            result = run(run_config, source)
            results.append(result)
            if run_config.run.slices:
                slice_dir = out_dir
                if sweep is not None:
                    slice_dir = out_dir / f"{sweep}_{result.labels[sweep]}"
                for request in run_config.run.slices:
                    export_slice(result.esdf_map, request, slice_dir)
    except Exception as e:
        write_artifacts(out_dir, results, failure=f"{type(e).__name__}: {e}")
        raise
    write_artifacts(out_dir, results)
    return results
