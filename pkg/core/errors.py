"""
VoxField error hierarchy

Every failure the library raises derives from VoxFieldError so callers
(the replay CLI, the query API) can map families of errors to exit codes
or HTTP statuses without string matching.
"""

from typing import Optional


class VoxFieldError(Exception):
    """Base class for all library errors"""


class BoundsError(VoxFieldError, IndexError):
    """Voxel key outside the bounds of a DenseArray index"""


class ResourceError(VoxFieldError, MemoryError):
    """Voxel storage could not be allocated"""


class DllError(VoxFieldError):
    """Closest-obstacle list misuse (double insert, foreign delete)"""


class CorruptionError(VoxFieldError):
    """Internal state no longer satisfies the map invariants"""


class DataError(VoxFieldError, ValueError):
    """Input data (frames, datasets, scenarios, config) is invalid"""


class ParseError(DataError):
    """Malformed row in a dataset file"""

    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None):
        self.path = path
        self.line = line
        location = ""
        if path is not None:
            location = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(f"{location}{message}")


class ScenarioSpecError(DataError):
    """Synthetic scenario description is degenerate"""


class ConfigError(DataError):
    """Configuration file or override is invalid"""
