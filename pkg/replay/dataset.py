"""
Recorded datasets

Directory layout:

    poses.csv       timestamp,tx,ty,tz,qx,qy,qz,qw   (one row per frame)
    cloud_<i>.csv   x,y,z                            (sensor frame, meters)

<i> is the 0-based data row index in poses.csv. Pose rows without a cloud
file are skipped with a warning.
"""

import csv
import logging
import math
from pathlib import Path
from typing import Iterable, Iterator, List, Optional, Union

import numpy as np

from core.errors import DataError, ParseError
from mapping.occupancy import SensorFrame

logger = logging.getLogger(__name__)

POSE_HEADER = ["timestamp", "tx", "ty", "tz", "qx", "qy", "qz", "qw"]
CLOUD_HEADER = ["x", "y", "z"]


def cloud_name(row_index: int) -> str:
    return f"cloud_{row_index}.csv"


def _floats(row: List[str], width: int, path: Path, line: int) -> List[float]:
    if len(row) != width:
        raise ParseError(f"expected {width} fields, got {len(row)}", str(path), line)
    try:
        return [float(v) for v in row]
    except ValueError as e:
        raise ParseError(str(e), str(path), line) from e


def _check_header(header: Optional[List[str]], expected: List[str], path: Path) -> None:
    if header is None:
        raise ParseError("missing header", str(path), 1)
    if [h.strip() for h in header] != expected:
        raise ParseError(f"header must be {','.join(expected)}", str(path), 1)


def read_cloud(path: Path) -> np.ndarray:
    with open(path, newline="") as f:
        reader = csv.reader(f)
        _check_header(next(reader, None), CLOUD_HEADER, path)
        points = [
            _floats(row, 3, path, reader.line_num)
            for row in reader if row
        ]
    return np.asarray(points, dtype=float).reshape(-1, 3)


class DatasetReader:
    """Iterates frames of a dataset directory in file order"""

    def __init__(self, directory: Union[str, Path]):
        self.directory = Path(directory)
        self.poses_path = self.directory / "poses.csv"
        if not self.poses_path.is_file():
            raise DataError(f"dataset has no poses.csv: {self.directory}")
        self.skipped_rows = 0

    def __iter__(self) -> Iterator[SensorFrame]:
        self.skipped_rows = 0
        last_timestamp = -math.inf
        with open(self.poses_path, newline="") as f:
            reader = csv.reader(f)
            _check_header(next(reader, None), POSE_HEADER, self.poses_path)
            row_index = 0
            for row in reader:
                if not row:
                    continue
                values = _floats(row, 8, self.poses_path, reader.line_num)
                index, row_index = row_index, row_index + 1
                timestamp = values[0]
                if timestamp < last_timestamp:
                    raise DataError(
                        f"{self.poses_path}:{reader.line_num}: timestamp {timestamp} after {last_timestamp}"
                    )
                last_timestamp = timestamp

                cloud_path = self.directory / cloud_name(index)
                if not cloud_path.is_file():
                    self.skipped_rows += 1
                    logger.warning("Pose row %d has no %s; skipped", index, cloud_path.name)
                    continue
                yield SensorFrame(
                    timestamp=timestamp,
                    translation=values[1:4],
                    rotation=values[4:8],
                    points=read_cloud(cloud_path),
                )


def load_dataset(directory: Union[str, Path]) -> DatasetReader:
    return DatasetReader(directory)


def write_dataset(frames: Iterable[SensorFrame], directory: Union[str, Path]) -> int:
    """Write frames in the dataset layout; returns the number of frames written"""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    count = 0
    with open(directory / "poses.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(POSE_HEADER)
        for i, frame in enumerate(frames):
            writer.writerow([repr(float(v)) for v in (frame.timestamp, *frame.translation, *frame.rotation)])
            with open(directory / cloud_name(i), "w", newline="") as cf:
                cloud_writer = csv.writer(cf)
                cloud_writer.writerow(CLOUD_HEADER)
                cloud_writer.writerows([repr(float(c)) for c in p] for p in frame.points)
            count += 1
    logger.info("Wrote %d frames to %s", count, directory)
    return count
