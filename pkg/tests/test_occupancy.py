import math

import numpy as np
import pytest

from core.config import IndexConfig, OccupancyConfig
from core.errors import DataError
from core.types import IDEAL_POINT, OccupancyState, VoxelKey
from core.voxel_index import create_index
from core.voxel_store import VoxelStore
from mapping.occupancy import KeyQueue, OccupancyIntegrator, SensorFrame, UpdateQueues, traverse_ray

IDENTITY = (0.0, 0.0, 0.0, 1.0)
ORIGIN = (0.5, 0.5, 0.5)


def frame(t, points, translation=ORIGIN, rotation=IDENTITY):
    return SensorFrame(timestamp=t, translation=translation, rotation=rotation, points=points)


def integrator(**kwargs):
    kwargs.setdefault("voxel_size", 1.0)
    store = VoxelStore(create_index(IndexConfig(block_size=4)))
    return OccupancyIntegrator(store, OccupancyConfig(**kwargs))


# ----------------------------------------------------------------------
# traversal
# ----------------------------------------------------------------------

def test_traverse_straight():
    keys = traverse_ray((0.5, 0.5, 0.5), (3.5, 0.5, 0.5), 1.0)
    assert keys == [VoxelKey(i, 0, 0) for i in range(4)]


def test_traverse_negative_direction():
    keys = traverse_ray((0.5, 0.5, 0.5), (-2.5, 0.5, 0.5), 1.0)
    assert keys == [VoxelKey(i, 0, 0) for i in (0, -1, -2, -3)]


def test_traverse_single_voxel():
    assert traverse_ray((0.2, 0.3, 0.4), (0.8, 0.1, 0.9), 1.0) == [VoxelKey(0, 0, 0)]


def test_traverse_diagonal_is_face_connected():
    keys = traverse_ray((0.5, 0.5, 0.5), (2.5, 2.5, 0.5), 1.0)
    assert keys[0] == (0, 0, 0)
    assert keys[-1] == (2, 2, 0)
    assert len(keys) == 5
    for a, b in zip(keys, keys[1:]):
        assert sum(abs(p - q) for p, q in zip(a, b)) == 1


def test_traverse_scaled_voxels():
    keys = traverse_ray((0.05, 0.05, 0.05), (0.35, 0.05, 0.05), 0.1)
    assert keys == [VoxelKey(i, 0, 0) for i in range(4)]


def voxels_crossed(p0, p1):
    """Brute force: every unit voxel whose box the segment p0-p1 overlaps"""
    lo = np.floor(np.minimum(p0, p1)).astype(int)
    hi = np.floor(np.maximum(p0, p1)).astype(int)
    axes = [np.arange(a, b + 1) for a, b in zip(lo, hi)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    d = p1 - p0
    t0 = (grid - p0) / d
    t1 = (grid + 1 - p0) / d
    enter = np.maximum(np.minimum(t0, t1).max(axis=1), 0.0)
    leave = np.minimum(np.maximum(t0, t1).min(axis=1), 1.0)
    return {VoxelKey(*map(int, k)) for k in grid[enter < leave]}


@pytest.mark.parametrize("voxel_size", [1.0, 0.25])
def test_traverse_matches_brute_force(voxel_size):
    rng = np.random.default_rng(7)
    for _ in range(5000):
        p0 = rng.uniform(-8.0, 8.0, 3)
        p1 = p0 + rng.uniform(-4.0, 4.0, 3)
        keys = traverse_ray(p0 * voxel_size, p1 * voxel_size, voxel_size)
        assert len(keys) == len(set(keys))
        assert set(keys) == voxels_crossed(p0, p1)
        assert keys[0] == tuple(np.floor(p0).astype(int))
        assert keys[-1] == tuple(np.floor(p1).astype(int))
        for a, b in zip(keys, keys[1:]):
            assert sum(abs(p - q) for p, q in zip(a, b)) == 1


# ----------------------------------------------------------------------
# integration
# ----------------------------------------------------------------------

def test_hit_and_misses():
    occ = integrator()
    queues = occ.integrate_frame(frame(0.0, [(3.0, 0.0, 0.0)]))
    assert occ.occupancy_state((3, 0, 0)) is OccupancyState.OCCUPIED
    for x in range(3):
        assert occ.occupancy_state((x, 0, 0)) is OccupancyState.FREE
    assert list(queues.insert_queue) == [VoxelKey(3, 0, 0)]
    assert list(queues.delete_queue) == []
    assert sorted(queues.newly_observed) == [VoxelKey(x, 0, 0) for x in range(4)]
    assert occ.store.ideal_point_size == 4
    assert queues.stats.m_observed_total == 4
    assert occ.occupancy_state((9, 9, 9)) is OccupancyState.UNKNOWN


def test_hit_wins_over_miss_within_frame():
    occ = integrator()
    occ.integrate_frame(frame(0.0, [(2.0, 0.0, 0.0), (4.0, 0.0, 0.0)]))
    assert occ.occupancy_state((2, 0, 0)) is OccupancyState.OCCUPIED
    assert occ.store.get(VoxelKey(2, 0, 0)).occ == pytest.approx(0.85)


def test_rotation_applied():
    occ = integrator()
    half = math.sqrt(0.5)
    occ.integrate_frame(frame(0.0, [(2.0, 0.0, 0.0)], rotation=(0.0, 0.0, half, half)))
    assert occ.occupancy_state((0, 2, 0)) is OccupancyState.OCCUPIED


def test_out_of_range_is_miss_only():
    occ = integrator(max_ray_range=5.0)
    queues = occ.integrate_frame(frame(0.0, [(10.0, 0.0, 0.0)]))
    assert list(queues.insert_queue) == []
    assert occ.occupancy_state((5, 0, 0)) is OccupancyState.FREE
    assert occ.occupancy_state((6, 0, 0)) is OccupancyState.UNKNOWN


def test_empty_cloud():
    occ = integrator()
    queues = occ.integrate_frame(frame(0.0, np.zeros((0, 3))))
    assert queues.is_empty()


def test_repeated_misses_free_a_clamped_voxel():
    occ = integrator()
    t = 0.0
    for _ in range(5):
        occ.integrate_frame(frame(t, [(3.0, 0.0, 0.0)]))
        t += 1.0
    assert occ.store.get(VoxelKey(3, 0, 0)).occ == pytest.approx(3.5)
    for _ in range(6):
        occ.integrate_frame(frame(t, [(5.0, 0.0, 0.0)]))
        t += 1.0
    assert occ.occupancy_state((3, 0, 0)) is OccupancyState.OCCUPIED
    queues = occ.integrate_frame(frame(t, [(5.0, 0.0, 0.0)]))
    assert occ.occupancy_state((3, 0, 0)) is OccupancyState.FREE
    assert VoxelKey(3, 0, 0) in queues.delete_queue


def test_deterministic_mode_is_insert_only():
    occ = integrator(deterministic=True)
    occ.integrate_frame(frame(0.0, [(3.0, 0.0, 0.0)]))
    assert occ.store.get(VoxelKey(3, 0, 0)).occ == 3.5
    for t in range(1, 10):
        queues = occ.integrate_frame(frame(float(t), [(6.0, 0.0, 0.0)]))
        assert list(queues.delete_queue) == []
    assert occ.occupancy_state((3, 0, 0)) is OccupancyState.OCCUPIED
    assert occ.store.get(VoxelKey(1, 0, 0)).occ == -2.0


@pytest.mark.parametrize("bad", [
    frame(0.0, [(1.0, 0.0, 0.0)], rotation=(0.0, 0.0, 0.0, 2.0)),
    frame(0.0, [(float("nan"), 0.0, 0.0)]),
    frame(0.0, [(1.0, 0.0, 0.0)], translation=(float("inf"), 0.0, 0.0)),
    frame(float("nan"), [(1.0, 0.0, 0.0)]),
])
def test_invalid_frames(bad):
    with pytest.raises(DataError):
        integrator().integrate_frame(bad)


def test_timestamp_regression():
    occ = integrator()
    occ.integrate_frame(frame(2.0, [(1.0, 0.0, 0.0)]))
    with pytest.raises(DataError):
        occ.integrate_frame(frame(1.0, [(1.0, 0.0, 0.0)]))


# ----------------------------------------------------------------------
# queues
# ----------------------------------------------------------------------

def test_net_crossing_only():
    queues = UpdateQueues()
    key = VoxelKey(1, 2, 3)
    queues.record_transition(key, OccupancyState.FREE, OccupancyState.OCCUPIED)
    assert list(queues.insert_queue) == [key]
    queues.record_transition(key, OccupancyState.OCCUPIED, OccupancyState.FREE)
    assert list(queues.insert_queue) == []
    assert list(queues.delete_queue) == []


def test_unknown_to_occupied_is_insert():
    queues = UpdateQueues()
    key = VoxelKey(0, 0, 0)
    queues.record_transition(key, OccupancyState.UNKNOWN, OccupancyState.OCCUPIED)
    assert list(queues.insert_queue) == [key]
    queues.record_transition(key, OccupancyState.OCCUPIED, OccupancyState.FREE)
    assert list(queues.insert_queue) == []
    assert list(queues.delete_queue) == []


def test_complement_queues():
    queues = UpdateQueues()
    a, b = VoxelKey(0, 0, 0), VoxelKey(1, 0, 0)
    queues.record_transition(a, OccupancyState.UNKNOWN, OccupancyState.FREE)
    queues.record_transition(b, OccupancyState.FREE, OccupancyState.OCCUPIED)
    complement = queues.for_complement()
    assert list(complement.insert_queue) == [a]
    assert list(complement.delete_queue) == [b]
    assert list(queues.insert_queue) == [b]


def test_first_observation_links_under_ideal_point():
    occ = integrator()
    occ.integrate_frame(frame(0.0, [(1.0, 0.0, 0.0)]))
    record = occ.store.get(VoxelKey(0, 0, 0))
    assert record.obs
    assert record.dll_owner is IDEAL_POINT
    assert math.isinf(record.dis)


def test_key_queue_moves_requeued_key_to_back():
    queue = KeyQueue([VoxelKey(0, 0, 0), VoxelKey(1, 0, 0)])
    queue.append(VoxelKey(0, 0, 0))
    assert list(queue) == [VoxelKey(1, 0, 0), VoxelKey(0, 0, 0)]
    queue.discard(VoxelKey(5, 5, 5))
    assert queue.popleft() == VoxelKey(1, 0, 0)
    assert VoxelKey(0, 0, 0) in queue
    assert len(queue) == 1


def test_queues_scale_to_many_crossings():
    queues = UpdateQueues()
    keys = [VoxelKey(i, 0, 0) for i in range(50_000)]
    for key in keys:
        queues.record_transition(key, OccupancyState.FREE, OccupancyState.OCCUPIED)
    for key in keys[::2]:
        queues.record_transition(key, OccupancyState.OCCUPIED, OccupancyState.FREE)
    assert list(queues.insert_queue) == keys[1::2]
    assert len(queues.delete_queue) == 0

    queues.record_transition(keys[1], OccupancyState.OCCUPIED, OccupancyState.FREE)
    queues.record_transition(keys[1], OccupancyState.FREE, OccupancyState.OCCUPIED)
    assert list(queues.insert_queue)[-1] == keys[1]
    assert len(queues.insert_queue) == len(keys) // 2
