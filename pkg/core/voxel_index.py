"""
Indexing data structures: voxel coordinate -> VoxelInfo

Two interchangeable backends:
- DenseArrayIndex: one slot per voxel of a known bounding box
- HashedBlockIndex: hash table of block_size^3 blocks, each a contiguous
  record array addressed by intra-block offset

Lookup is O(1) on average for both.
"""

import logging
from abc import ABC, abstractmethod
from dataclasses import asdict, dataclass
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np

from .config import IndexBackend, IndexConfig, VoxelBox
from .errors import BoundsError, ResourceError
from .types import BlockKey, VoxelKey
from .voxel_store import VoxelInfo

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MemoryStats:
    allocated_voxel_records: int
    allocated_blocks: int

    def to_dict(self) -> Dict[str, int]:
        return asdict(self)


def is_power_of_two(n: int) -> bool:
    return n > 0 and n & (n - 1) == 0


def block_of_reference(key: Tuple[int, int, int], block_size: int) -> Tuple[BlockKey, Tuple[int, int, int]]:
    """Floor-division form of block_of"""
    block = BlockKey(*(c // block_size for c in key))
    offset = tuple(c - b * block_size for c, b in zip(key, block))
    return block, offset


def block_of(key: Tuple[int, int, int], block_size: int) -> Tuple[BlockKey, Tuple[int, int, int]]:
    """
    Split a voxel key into (block key, intra-block offset).

    Floor semantics: (-1, 0, 0) with block_size 8 lives in block (-1, 0, 0)
    at offset (7, 0, 0). Power-of-two sizes use arithmetic shift and mask.
    """
    if is_power_of_two(block_size):
        shift = block_size.bit_length() - 1
        mask = block_size - 1
        x, y, z = key
        return BlockKey(x >> shift, y >> shift, z >> shift), (x & mask, y & mask, z & mask)
    return block_of_reference(key, block_size)


class VoxelIndex(ABC):
    """Coordinate -> record mapping with lazy allocation"""

    def __init__(self, config: IndexConfig):
        self.config = config

    @abstractmethod
    def lookup(self, key: VoxelKey) -> Optional[VoxelInfo]:
        """Record for key, or None when nothing was allocated there. Never allocates."""

    @abstractmethod
    def lookup_unchecked(self, key: VoxelKey) -> Optional[VoxelInfo]:
        """lookup() that answers None instead of raising for out-of-bounds keys"""

    @abstractmethod
    def allocate(self, key: VoxelKey) -> VoxelInfo:
        """Record for key, created with default state when absent"""

    @abstractmethod
    def memory_stats(self) -> MemoryStats:
        pass

    @abstractmethod
    def records(self) -> Iterator[VoxelInfo]:
        """Every allocated record"""

    @abstractmethod
    def clear(self) -> None:
        pass


class DenseArrayIndex(VoxelIndex):
    """
    Pointer array over a pre-known bounding box.

    The slot array is reserved up front (counted as one block); records are
    created when a voxel is first allocated.
    """

    def __init__(self, config: IndexConfig):
        super().__init__(config)
        self.bounds: VoxelBox = config.bounds
        self._origin = self.bounds.min_key
        try:
            self._slots = np.empty(self.bounds.shape, dtype=object)
        except MemoryError as e:
            raise ResourceError(f"cannot reserve dense index of shape {self.bounds.shape}") from e
        self._count = 0

    def _slot(self, key: VoxelKey) -> Tuple[int, int, int]:
        if not self.bounds.contains(key):
            raise BoundsError(f"voxel {tuple(key)} outside bounds {self.bounds.min_key}..{self.bounds.max_key}")
        ox, oy, oz = self._origin
        return key[0] - ox, key[1] - oy, key[2] - oz

    def lookup(self, key: VoxelKey) -> Optional[VoxelInfo]:
        return self._slots[self._slot(key)]

    def lookup_unchecked(self, key: VoxelKey) -> Optional[VoxelInfo]:
        if not self.bounds.contains(key):
            return None
        return self.lookup(key)

    def allocate(self, key: VoxelKey) -> VoxelInfo:
        slot = self._slot(key)
        record = self._slots[slot]
        if record is None:
            record = VoxelInfo(pos=VoxelKey(*key))
            self._slots[slot] = record
            self._count += 1
        return record

    def memory_stats(self) -> MemoryStats:
        return MemoryStats(allocated_voxel_records=self._count, allocated_blocks=1)

    def records(self) -> Iterator[VoxelInfo]:
        for record in self._slots.flat:
            if record is not None:
                yield record

    def clear(self) -> None:
        self._slots.fill(None)
        self._count = 0


class HashedBlockIndex(VoxelIndex):
    """
    Hash table of blocks.

    Python's dict is an open-addressing table; BlockKey hashing mixes the
    three integer components deterministically within a run. Allocating any
    voxel allocates its whole block.
    """

    def __init__(self, config: IndexConfig):
        super().__init__(config)
        self.block_size = config.block_size
        self._blocks: Dict[BlockKey, List[VoxelInfo]] = {}

    def _split(self, key: VoxelKey) -> Tuple[BlockKey, int]:
        """(block key, flat offset into the block's record list)"""
        bs = self.block_size
        block, (ox, oy, oz) = block_of(key, bs)
        return block, (ox * bs + oy) * bs + oz

    def lookup(self, key: VoxelKey) -> Optional[VoxelInfo]:
        block, offset = self._split(key)
        records = self._blocks.get(block)
        if records is None:
            return None
        return records[offset]

    lookup_unchecked = lookup

    def _allocate_block(self, block: BlockKey) -> List[VoxelInfo]:
        bs = self.block_size
        bx, by, bz = block[0] * bs, block[1] * bs, block[2] * bs
        try:
            records = [
                VoxelInfo(pos=VoxelKey(bx + i, by + j, bz + k))
                for i in range(bs) for j in range(bs) for k in range(bs)
            ]
        except MemoryError as e:
            raise ResourceError(f"cannot allocate block {tuple(block)}") from e
        self._blocks[block] = records
        return records

    def allocate(self, key: VoxelKey) -> VoxelInfo:
        block, offset = self._split(key)
        records = self._blocks.get(block)
        if records is None:
            records = self._allocate_block(block)
        return records[offset]

    def memory_stats(self) -> MemoryStats:
        blocks = len(self._blocks)
        return MemoryStats(
            allocated_voxel_records=blocks * self.block_size ** 3,
            allocated_blocks=blocks,
        )

    def records(self) -> Iterator[VoxelInfo]:
        for records in self._blocks.values():
            yield from records

    def clear(self) -> None:
        self._blocks.clear()


def create_index(config: Optional[IndexConfig] = None) -> VoxelIndex:
    """Build the backend named by config"""
    config = config or IndexConfig()
    if config.backend is IndexBackend.DENSE_ARRAY:
        index = DenseArrayIndex(config)
    else:
        index = HashedBlockIndex(config)
    logger.debug("Created %s index (block_size=%d)", config.backend.value, config.block_size)
    return index
