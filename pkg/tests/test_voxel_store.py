import numpy as np
import pytest

from core.config import IndexConfig
from core.errors import CorruptionError, DllError
from core.types import IDEAL_POINT, Connectivity, VoxelKey
from core.voxel_index import create_index
from core.voxel_store import VoxelStore


@pytest.fixture
def store():
    return VoxelStore(create_index(IndexConfig(block_size=4)))


def _keys(*coords):
    return [VoxelKey(*c) for c in coords]


def test_insert_and_iterate(store):
    owner, a, b, c = _keys((0, 0, 0), (1, 0, 0), (2, 0, 0), (3, 0, 0))
    for key in (owner, a, b, c):
        store.allocate(key)
    for member in (a, b, c):
        store.insert_into_dll(owner, member)
    assert sorted(store.iterate_dll(owner)) == [a, b, c]
    assert store.require(a).dll_owner == owner


def test_delete_middle_head_and_tail(store):
    owner, a, b, c = _keys((0, 0, 0), (1, 0, 0), (2, 0, 0), (3, 0, 0))
    for key in (owner, a, b, c):
        store.allocate(key)
    for member in (a, b, c):
        store.insert_into_dll(owner, member)
    store.delete_from_dll(owner, b)
    assert sorted(store.iterate_dll(owner)) == [a, c]
    store.delete_from_dll(owner, c)
    store.delete_from_dll(owner, a)
    assert list(store.iterate_dll(owner)) == []
    assert store.require(owner).head is None


def test_ideal_point_list(store):
    a, b = _keys((0, 0, 0), (5, 5, 5))
    store.allocate(a)
    store.allocate(b)
    store.insert_into_dll(IDEAL_POINT, a)
    store.insert_into_dll(IDEAL_POINT, b)
    assert store.ideal_point_size == 2
    store.delete_from_dll(IDEAL_POINT, a)
    assert store.dll_members(IDEAL_POINT) == [b]
    assert store.ideal_point_size == 1


def test_double_insert_rejected(store):
    owner, other, a = _keys((0, 0, 0), (9, 9, 9), (1, 0, 0))
    for key in (owner, other, a):
        store.allocate(key)
    store.insert_into_dll(owner, a)
    with pytest.raises(DllError):
        store.insert_into_dll(other, a)


def test_foreign_delete_rejected(store):
    owner, other, a = _keys((0, 0, 0), (9, 9, 9), (1, 0, 0))
    for key in (owner, other, a):
        store.allocate(key)
    store.insert_into_dll(owner, a)
    with pytest.raises(DllError):
        store.delete_from_dll(other, a)
    with pytest.raises(DllError):
        store.delete_from_dll(IDEAL_POINT, owner)


def test_cycle_detected(store):
    owner, a, b = _keys((0, 0, 0), (1, 0, 0), (2, 0, 0))
    for key in (owner, a, b):
        store.allocate(key)
    store.insert_into_dll(owner, a)
    store.insert_into_dll(owner, b)
    store.require(a).next = b
    with pytest.raises(CorruptionError):
        list(store.iterate_dll(owner))


def test_require_unallocated(store):
    with pytest.raises(CorruptionError):
        store.require(VoxelKey(100, 100, 100))


def test_neighbors_only_observed(store):
    center = VoxelKey(1, 1, 1)
    store.allocate(center)
    seen = store.allocate(VoxelKey(2, 1, 1))
    seen.obs = True
    store.allocate(VoxelKey(1, 2, 1))
    assert store.neighbors(center, Connectivity.C6) == [seen]


@pytest.mark.parametrize("connectivity,degree", [
    (Connectivity.C6, 6), (Connectivity.C18, 18), (Connectivity.C24, 24),
    (Connectivity.C26, 26), (Connectivity.C32, 32),
])
def test_connectivity_degree(connectivity, degree):
    assert connectivity.degree == degree
    assert len(set(connectivity.offsets)) == degree
    # every set is symmetric
    assert all((-x, -y, -z) in connectivity.offsets for x, y, z in connectivity.offsets)


def test_c24_two_step_faces_without_corners(store):
    assert (2, 0, 0) in Connectivity.C24.offsets
    assert (1, 1, 1) not in Connectivity.C24.offsets
    assert (1, 1, 1) in Connectivity.C32.offsets

    center = store.allocate(VoxelKey(0, 0, 0))
    far, corner = store.allocate(VoxelKey(2, 0, 0)), store.allocate(VoxelKey(1, 1, 1))
    far.obs = corner.obs = True
    assert store.neighbors(center.pos, Connectivity.C24) == [far]
    assert set(r.pos for r in store.neighbors(center.pos, Connectivity.C32)) == {far.pos, corner.pos}


def test_random_links_match_set_model(store):
    rng = np.random.default_rng(3)
    owners = _keys((0, 0, 10), (0, 0, 11), (0, 0, 12), (0, 0, 13)) + [IDEAL_POINT]
    members = [VoxelKey(x, y, 0) for x in range(8) for y in range(5)]
    for key in owners[:-1] + members:
        store.allocate(key)
    model = {owner: set() for owner in owners}
    linked = {}

    for _ in range(2000):
        member = members[rng.integers(len(members))]
        if member in linked:
            owner = linked.pop(member)
            store.delete_from_dll(owner, member)
            model[owner].discard(member)
        else:
            owner = owners[rng.integers(len(owners))]
            store.insert_into_dll(owner, member)
            model[owner].add(member)
            linked[member] = owner

        for owner, expected in model.items():
            walked = list(store.iterate_dll(owner))
            assert len(walked) == len(set(walked))
            assert set(walked) == expected
            if walked:
                assert store.require(walked[0]).prev is None
                assert store.require(walked[-1]).next is None
        for member in members:
            record = store.require(member)
            assert record.dll_owner == linked.get(member)
            if record.prev is not None:
                assert store.require(record.prev).next == member
            if record.next is not None:
                assert store.require(record.next).prev == member
    assert store.ideal_point_size == len(model[IDEAL_POINT])
