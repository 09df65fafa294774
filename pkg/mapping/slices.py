"""Axis-aligned slice export: CSV for scripts, 8-bit PGM for a quick look"""

import csv
import logging
import math
from pathlib import Path
from typing import List

import numpy as np

from core.config import SliceRequest

logger = logging.getLogger(__name__)

PGM_MAXVAL = 255


def write_slice_csv(grid: np.ndarray, path: Path) -> None:
    """Row-major dis values; infinite or unobserved cells as 'inf'"""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        for row in grid:
            writer.writerow(["inf" if not math.isfinite(v) else f"{v:.6f}" for v in row])


def write_slice_pgm(grid: np.ndarray, path: Path, max_distance: float) -> None:
    """Binary PGM; distances clamped to max_distance and scaled to 0..255"""
    clamped = np.where(np.isfinite(grid), np.clip(grid, 0.0, max_distance), max_distance)
    pixels = np.rint(clamped / max_distance * PGM_MAXVAL).astype(np.uint8)
    height, width = pixels.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{width} {height}\n{PGM_MAXVAL}\n".encode("ascii"))
        f.write(pixels.tobytes())


def export_slice(esdf_map, request: SliceRequest, out_dir: Path) -> List[Path]:
    """Write slice_<axis><index>.csv/.pgm and return their paths"""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    grid, _, _ = esdf_map.slice_grid(request.axis, request.index)
    stem = out_dir / f"slice_{request.axis}{request.index}"
    csv_path = stem.with_suffix(".csv")
    pgm_path = stem.with_suffix(".pgm")
    write_slice_csv(grid, csv_path)
    if grid.size:
        write_slice_pgm(grid, pgm_path, request.max_distance)
    else:
        logger.warning("Slice %s=%d has no observed voxels; PGM skipped", request.axis, request.index)
        return [csv_path]
    logger.info("Wrote slice %s=%d (%dx%d)", request.axis, request.index, grid.shape[1], grid.shape[0])
    return [csv_path, pgm_path]
