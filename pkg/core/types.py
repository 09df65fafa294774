"""
VoxField value types

Voxel and block addresses, the Ideal Point sentinel and the neighbor
connectivities used by propagation.
"""

from enum import Enum
from itertools import product
from typing import NamedTuple, Tuple, Union


class VoxelKey(NamedTuple):
    """Integer voxel coordinate; tuple ordering gives lexicographic x, y, z order"""
    x: int
    y: int
    z: int

    def offset(self, dx: int, dy: int, dz: int) -> "VoxelKey":
        return VoxelKey(self.x + dx, self.y + dy, self.z + dz)


class BlockKey(NamedTuple):
    """Integer block coordinate (units of block_size voxels)"""
    bx: int
    by: int
    bz: int


class IdealPoint(Enum):
    """Point at infinity: closest obstacle of every observed but not yet updated voxel"""
    IP = "ideal_point"

    def __repr__(self) -> str:
        return "IdealPoint"


IDEAL_POINT = IdealPoint.IP

# Closest-obstacle reference: a lattice voxel or the Ideal Point
Owner = Union[VoxelKey, IdealPoint]


class OccupancyState(Enum):
    UNKNOWN = "unknown"
    FREE = "free"
    OCCUPIED = "occupied"


def squared_distance(a: Tuple[int, int, int], b: Tuple[int, int, int]) -> int:
    dx = a[0] - b[0]
    dy = a[1] - b[1]
    dz = a[2] - b[2]
    return dx * dx + dy * dy + dz * dz


def _offsets(predicate) -> Tuple[Tuple[int, int, int], ...]:
    return tuple(
        off for off in product((-2, -1, 0, 1, 2), repeat=3)
        if off != (0, 0, 0) and predicate(off)
    )


def _unit(off) -> bool:
    return max(abs(c) for c in off) == 1


def _faces(off) -> bool:
    return _unit(off) and sum(abs(c) for c in off) == 1


def _faces_edges(off) -> bool:
    return _unit(off) and sum(abs(c) for c in off) <= 2


def _two_step_face(off) -> bool:
    return sorted(abs(c) for c in off) == [0, 0, 2]


_OFFSET_SETS = {
    "C6": _offsets(_faces),
    "C18": _offsets(_faces_edges),
    "C24": _offsets(lambda o: _faces_edges(o) or _two_step_face(o)),
    "C26": _offsets(_unit),
    "C32": _offsets(lambda o: _unit(o) or _two_step_face(o)),
}


class Connectivity(Enum):
    """
    Neighbor offset sets.

    C6: faces, C18: faces and edges, C26: faces, edges and corners,
    C24: faces, edges and two-step faces (Manhattan distance <= 2),
    C32: C26 plus two-step faces.
    """
    C6 = "C6"
    C18 = "C18"
    C24 = "C24"
    C26 = "C26"
    C32 = "C32"

    @property
    def offsets(self) -> Tuple[Tuple[int, int, int], ...]:
        return _OFFSET_SETS[self.value]

    @property
    def degree(self) -> int:
        return len(self.offsets)
