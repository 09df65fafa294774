"""
Voxel Information Structures and closest-obstacle lists

Each VoxelInfo carries occupancy, distance, closest obstacle (coc) and the
links of the doubly linked list that threads, per obstacle, every voxel
whose closest obstacle it is. The Ideal Point owns the list of voxels that
were observed but never reached by an update.

Links are VoxelKeys resolved through the index, so the store behaves the
same under every index backend.
"""

import logging
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterator, List, Optional

from .errors import CorruptionError, DllError
from .types import IDEAL_POINT, Connectivity, IdealPoint, Owner, VoxelKey, squared_distance

if TYPE_CHECKING:
    from .voxel_index import VoxelIndex

logger = logging.getLogger(__name__)

INF = math.inf


@dataclass(slots=True, eq=False)
class VoxelInfo:
    """Per-voxel record"""
    pos: VoxelKey
    occ: float = 0.0
    dis: float = INF
    coc: Owner = IDEAL_POINT
    obs: bool = False
    prev: Optional[VoxelKey] = None
    next: Optional[VoxelKey] = None
    head: Optional[VoxelKey] = None
    # List this record is currently linked into (None when unlinked)
    dll_owner: Optional[Owner] = None

    def coc_squared_distance(self) -> Optional[int]:
        if self.coc is IDEAL_POINT:
            return None
        return squared_distance(self.coc, self.pos)


class VoxelStore:
    """
    Record access plus DLL bookkeeping on top of a VoxelIndex.

    insert/delete are O(1): the index resolves keys in O(1) and each splice
    touches at most three records.
    """

    def __init__(self, index: "VoxelIndex"):
        self.index = index
        self._ip_head: Optional[VoxelKey] = None
        self._ip_size = 0

    # ------------------------------------------------------------------
    # record access
    # ------------------------------------------------------------------

    def get(self, key: VoxelKey) -> Optional[VoxelInfo]:
        return self.index.lookup(key)

    def require(self, key: VoxelKey) -> VoxelInfo:
        record = self.index.lookup(key)
        if record is None:
            raise CorruptionError(f"voxel {tuple(key)} referenced but not allocated")
        return record

    def allocate(self, key: VoxelKey) -> VoxelInfo:
        return self.index.allocate(key)

    # ------------------------------------------------------------------
    # DLL heads
    # ------------------------------------------------------------------

    def _head_of(self, owner: Owner) -> Optional[VoxelKey]:
        if owner is IDEAL_POINT:
            return self._ip_head
        return self.require(owner).head

    def _set_head(self, owner: Owner, key: Optional[VoxelKey]) -> None:
        if owner is IDEAL_POINT:
            self._ip_head = key
        else:
            self.require(owner).head = key

    @property
    def ideal_point_size(self) -> int:
        return self._ip_size

    # ------------------------------------------------------------------
    # DLL operations
    # ------------------------------------------------------------------

    def insert_into_dll(self, owner: Owner, member: VoxelKey) -> None:
        """Link member as the new head of owner's list"""
        record = self.require(member)
        if record.dll_owner is not None:
            raise DllError(
                f"voxel {tuple(member)} already linked under {_describe(record.dll_owner)}"
            )
        old_head = self._head_of(owner)
        record.prev = None
        record.next = old_head
        if old_head is not None:
            self.require(old_head).prev = record.pos
        self._set_head(owner, record.pos)
        record.dll_owner = owner
        if owner is IDEAL_POINT:
            self._ip_size += 1

    def delete_from_dll(self, owner: Owner, member: VoxelKey) -> None:
        """Unlink member from owner's list"""
        record = self.require(member)
        if record.dll_owner is None or record.dll_owner != owner:
            raise DllError(f"voxel {tuple(member)} is not linked under {_describe(owner)}")
        if record.prev is not None:
            self.require(record.prev).next = record.next
        else:
            self._set_head(owner, record.next)
        if record.next is not None:
            self.require(record.next).prev = record.prev
        record.prev = None
        record.next = None
        record.dll_owner = None
        if owner is IDEAL_POINT:
            self._ip_size -= 1

    def iterate_dll(self, owner: Owner) -> Iterator[VoxelKey]:
        """
        Yield every member of owner's list once.

        The walk is bounded by the number of allocated records; exceeding
        it means the list has a cycle.
        """
        limit = self.index.memory_stats().allocated_voxel_records
        key = self._head_of(owner)
        steps = 0
        while key is not None:
            steps += 1
            if steps > limit:
                raise CorruptionError(f"cycle detected in list of {_describe(owner)}")
            yield key
            key = self.require(key).next

    def dll_members(self, owner: Owner) -> List[VoxelKey]:
        """Materialized list; safe to mutate the DLL while consuming it"""
        return list(self.iterate_dll(owner))

    # ------------------------------------------------------------------
    # neighborhood
    # ------------------------------------------------------------------

    def neighbors(self, key: VoxelKey, connectivity: Connectivity) -> List[VoxelInfo]:
        """Observed, allocated neighbor records of key"""
        lookup = self.index.lookup_unchecked
        x, y, z = key
        found = []
        for dx, dy, dz in connectivity.offsets:
            record = lookup(VoxelKey(x + dx, y + dy, z + dz))
            if record is not None and record.obs:
                found.append(record)
        return found

    def clear_links(self) -> None:
        """Drop every list link and the Ideal Point head (used by batch rebuilds)"""
        for record in self.index.records():
            record.prev = record.next = record.head = None
            record.dll_owner = None
        self._ip_head = None
        self._ip_size = 0


def _describe(owner: Optional[Owner]) -> str:
    if owner is None:
        return "nothing"
    if isinstance(owner, IdealPoint):
        return "IdealPoint"
    return str(tuple(owner))
