"""
Ground truth for the incremental field

Exact Euclidean distance transform over a finite voxel domain, computed
independently of the BFS propagation code, and the RMS error report
comparing a field against it. Everything here is in voxel units.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from core.types import VoxelKey

logger = logging.getLogger(__name__)

# Above this many domain x obstacle pairs the kd-tree path is used
DIRECT_SCAN_PAIRS = 2_000_000
_CHUNK = 4096

CSV_HEADER = [
    "scenario_id", "connectivity", "rule", "block_size",
    "rms", "max", "count", "wall_time_ms", "voxel_size",
]


def _as_array(keys: Iterable[Sequence[int]]) -> np.ndarray:
    arr = np.array([tuple(k) for k in keys], dtype=np.int64)
    return arr.reshape(-1, 3)


def exact_edt_direct(occupied: Iterable[Sequence[int]], domain: Iterable[Sequence[int]]) -> Dict[VoxelKey, float]:
    """Brute-force scan: min over every obstacle, chunked over the domain"""
    domain_keys = [VoxelKey(*k) for k in domain]
    obstacles = _as_array(occupied)
    if len(obstacles) == 0:
        return {k: math.inf for k in domain_keys}
    points = _as_array(domain_keys)
    result = np.empty(len(points))
    for start in range(0, len(points), _CHUNK):
        chunk = points[start:start + _CHUNK]
        diff = chunk[:, None, :] - obstacles[None, :, :]
        result[start:start + _CHUNK] = np.sqrt(np.min(np.einsum("ijk,ijk->ij", diff, diff), axis=1))
    return dict(zip(domain_keys, result.tolist()))


def exact_edt_kdtree(occupied: Iterable[Sequence[int]], domain: Iterable[Sequence[int]]) -> Dict[VoxelKey, float]:
    """K-D tree over the obstacles, one nearest-neighbor query per domain voxel"""
    domain_keys = [VoxelKey(*k) for k in domain]
    obstacles = _as_array(occupied)
    if len(obstacles) == 0:
        return {k: math.inf for k in domain_keys}
    if not domain_keys:
        return {}
    tree = cKDTree(obstacles.astype(float))
    distances, _ = tree.query(_as_array(domain_keys).astype(float), k=1)
    return dict(zip(domain_keys, np.atleast_1d(distances).tolist()))


def exact_edt(occupied: Iterable[Sequence[int]], domain: Iterable[Sequence[int]]) -> Dict[VoxelKey, float]:
    """Exact EDT of every domain voxel; +inf everywhere when nothing is occupied"""
    occupied = list(occupied)
    domain = list(domain)
    if len(occupied) * len(domain) > DIRECT_SCAN_PAIRS:
        return exact_edt_kdtree(occupied, domain)
    return exact_edt_direct(occupied, domain)


@dataclass
class ErrorReport:
    """RMS/max error of a field against the exact EDT, voxel units"""
    rms_error_voxels: float = 0.0
    max_error_voxels: float = 0.0
    compared_voxel_count: int = 0
    excluded_voxel_count: int = 0
    # most negative field - truth; below zero means the field underestimates
    min_signed_error_voxels: float = 0.0
    labels: Dict[str, str] = field(default_factory=dict)
    empty: bool = False

    def to_csv_row(self, scenario_id: str, wall_time_ms: float) -> List[str]:
        rms = "" if self.empty else f"{self.rms_error_voxels:.9f}"
        mx = "" if self.empty else f"{self.max_error_voxels:.9f}"
        return [
            scenario_id,
            self.labels.get("connectivity", ""),
            self.labels.get("rule", ""),
            self.labels.get("block_size", ""),
            rms,
            mx,
            str(self.compared_voxel_count),
            f"{wall_time_ms:.3f}",
            self.labels.get("voxel_size", ""),
        ]


def rms_error(
    field: Mapping[VoxelKey, float],
    truth: Mapping[VoxelKey, float],
    labels: Optional[Mapping[str, str]] = None,
) -> ErrorReport:
    """
    Compare field (voxel -> dis) with truth over the keys both define.

    Voxels where either side is +inf are left out and counted separately;
    an empty comparison yields a report flagged empty.
    """
    if hasattr(field, "distance_map"):
        field = field.distance_map()
    errors = []
    excluded = 0
    for key, exact in truth.items():
        value = field.get(key)
        if value is None:
            continue
        if math.isinf(value) or math.isinf(exact):
            excluded += 1
            continue
        errors.append(value - exact)

    report = ErrorReport(labels=dict(labels or {}), excluded_voxel_count=excluded)
    if not errors:
        report.empty = True
        logger.warning("RMS report is empty: no voxel with finite distance on both sides")
        return report
    diffs = np.asarray(errors)
    report.rms_error_voxels = float(np.sqrt(np.mean(diffs ** 2)))
    report.max_error_voxels = float(np.max(np.abs(diffs)))
    report.min_signed_error_voxels = float(np.min(diffs))
    report.compared_voxel_count = len(errors)
    return report


def field_error(esdf_map, labels: Optional[Mapping[str, str]] = None) -> ErrorReport:
    """ErrorReport of a map (or snapshot) against the exact EDT of its own occupancy"""
    distances = esdf_map.distance_map()
    truth = exact_edt(esdf_map.occupied_keys(), distances.keys())
    return rms_error(distances, truth, labels)
