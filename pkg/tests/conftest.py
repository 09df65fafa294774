import sys
from itertools import product
from pathlib import Path

import pytest

# Add project root to path
sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from core.config import EsdfConfig, IndexBackend, IndexConfig, OccupancyConfig, VoxelBox  # noqa: E402
from core.types import Connectivity  # noqa: E402
from mapping.esdf_map import EsdfMap  # noqa: E402


def grid_keys(lo, hi):
    """All keys of the box lo..hi inclusive"""
    return [tuple(k) for k in product(*(range(a, b + 1) for a, b in zip(lo, hi)))]


def make_map(connectivity=Connectivity.C26, block_size=4, voxel_size=1.0, **esdf_kwargs):
    return EsdfMap(
        index=IndexConfig(block_size=block_size),
        occupancy=OccupancyConfig(voxel_size=voxel_size, max_ray_range=50.0),
        esdf=EsdfConfig(connectivity=connectivity, **esdf_kwargs),
    )


def observe(esdf_map, domain, occupied):
    """Observe every domain key; keys in occupied as obstacles, the rest free"""
    occupied = set(map(tuple, occupied))
    esdf_map.set_occupancy([k for k in domain if tuple(k) in occupied], True)
    esdf_map.set_occupancy([k for k in domain if tuple(k) not in occupied], False)
    return esdf_map.run_epoch()


def assert_invariants(esdf_map):
    layers = [esdf_map.layer] + ([esdf_map.complement] if esdf_map.complement is not None else [])
    for layer in layers:
        assert esdf_map.check_fixed_point(layer) == []
        assert esdf_map.check_upper_bound(layer) == []
        assert esdf_map.check_dll_partition(layer) == []


@pytest.fixture
def small_map():
    return make_map()


@pytest.fixture
def dense_config():
    return IndexConfig(
        backend=IndexBackend.DENSE_ARRAY,
        bounds=VoxelBox(min_key=(-4, -4, -4), max_key=(4, 4, 4)),
    )
