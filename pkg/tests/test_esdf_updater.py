import math

import pytest

from core.config import QueueDiscipline, UpdateRule
from core.errors import CorruptionError
from core.types import IDEAL_POINT, Connectivity, VoxelKey
from mapping.esdf_updater import EpochReport, UpdateQueue
from mapping.oracle import exact_edt

from conftest import assert_invariants, grid_keys, make_map, observe


def test_single_obstacle_exact_c26():
    esdf_map = make_map(Connectivity.C26)
    domain = grid_keys((0, 0, 0), (10, 10, 10))
    observe(esdf_map, domain, [(5, 5, 5)])
    truth = exact_edt([(5, 5, 5)], domain)
    for key in domain:
        assert esdf_map.voxel(key).dis == pytest.approx(truth[key], abs=1e-12)
        assert esdf_map.voxel(key).coc == (5, 5, 5)
    assert_invariants(esdf_map)


@pytest.mark.parametrize("discipline", list(QueueDiscipline))
def test_initialize_then_propagate_line(discipline):
    esdf_map = make_map(Connectivity.C6, queue_discipline=discipline)
    domain = [(x, 0, 0) for x in range(6)]
    report = observe(esdf_map, domain, [(0, 0, 0)])
    assert [esdf_map.voxel(k).dis for k in domain] == [0.0, 1.0, 2.0, 3.0, 4.0, 5.0]
    assert report.inserted == 1
    assert report.k_initialized == 1
    assert report.n_expanded >= 6
    assert_invariants(esdf_map)


def test_delete_falls_back_to_other_obstacle():
    esdf_map = make_map(Connectivity.C6)
    domain = [(x, 0, 0) for x in range(8)]
    observe(esdf_map, domain, [(0, 0, 0), (7, 0, 0)])
    assert esdf_map.voxel((3, 0, 0)).coc == (0, 0, 0)
    esdf_map.set_occupancy([(0, 0, 0)], False)
    report = esdf_map.run_epoch()
    assert report.deleted == 1
    assert [esdf_map.voxel(k).dis for k in domain] == [7.0, 6.0, 5.0, 4.0, 3.0, 2.0, 1.0, 0.0]
    assert all(esdf_map.voxel(k).coc == (7, 0, 0) for k in domain)
    assert_invariants(esdf_map)


def test_delete_last_obstacle_returns_to_ideal_point():
    esdf_map = make_map(Connectivity.C26)
    domain = grid_keys((0, 0, 0), (3, 3, 3))
    observe(esdf_map, domain, [(1, 1, 1)])
    esdf_map.set_occupancy([(1, 1, 1)], False)
    esdf_map.run_epoch()
    for key in domain:
        record = esdf_map.voxel(key)
        assert record.coc is IDEAL_POINT
        assert math.isinf(record.dis)
    assert esdf_map.store.ideal_point_size == len(domain)
    assert_invariants(esdf_map)


def test_limited_observation_patch():
    esdf_map = make_map(Connectivity.C6)
    esdf_map.set_occupancy([(0, 0, 0)], True)
    esdf_map.run_epoch()
    esdf_map.set_occupancy([(1, 0, 0), (2, 0, 0)], False)
    esdf_map.set_occupancy([(3, 0, 0)], True)
    assert list(esdf_map.pending.insert_queue) == [VoxelKey(3, 0, 0)]
    report = esdf_map.run_epoch()
    record = esdf_map.voxel((1, 0, 0))
    assert record.dis == 1.0
    assert record.coc == (0, 0, 0)
    assert report.patch_adoptions >= 1
    assert_invariants(esdf_map)


def test_limited_observation_without_patch():
    esdf_map = make_map(Connectivity.C6)
    esdf_map.updater._patch_enabled = False
    esdf_map.set_occupancy([(0, 0, 0)], True)
    esdf_map.run_epoch()
    esdf_map.set_occupancy([(1, 0, 0), (2, 0, 0)], False)
    esdf_map.set_occupancy([(3, 0, 0)], True)
    esdf_map.run_epoch()
    assert esdf_map.voxel((1, 0, 0)).dis == 2.0
    assert esdf_map.voxel((1, 0, 0)).coc == (3, 0, 0)
    assert esdf_map.check_fixed_point() != []


def test_worst_case_planar_geometry():
    esdf_map = make_map(Connectivity.C6)
    domain = grid_keys((-5, -5, 0), (5, 5, 0))
    obstacles = [(0, 5, 0), (0, -5, 0), (5, 0, 0), (-5, 0, 0)]
    observe(esdf_map, domain, obstacles)
    origin = esdf_map.voxel((0, 0, 0))
    assert origin.dis == 5.0
    assert origin.coc in obstacles
    assert_invariants(esdf_map)


def test_equidistant_keeps_incumbent():
    esdf_map = make_map(Connectivity.C6)
    domain = [(x, 0, 0) for x in range(5)]
    observe(esdf_map, domain, [(0, 0, 0)])
    esdf_map.set_occupancy([(4, 0, 0)], True)
    esdf_map.run_epoch()
    # (2) is 2 from both; the first obstacle stays its closest
    assert esdf_map.voxel((2, 0, 0)).coc == (0, 0, 0)


def test_quasi_euclidean_overestimates():
    euclid = make_map(Connectivity.C6)
    quasi = make_map(Connectivity.C6, update_rule=UpdateRule.QUASI_EUCLIDEAN)
    domain = grid_keys((0, 0, 0), (4, 4, 0))
    for m in (euclid, quasi):
        observe(m, domain, [(0, 0, 0)])
    assert euclid.voxel((3, 4, 0)).dis == 5.0
    # Manhattan path length under face steps
    assert quasi.voxel((3, 4, 0)).dis == 7.0
    assert quasi.check_upper_bound() == []
    assert quasi.check_fixed_point() == []


def test_update_queue_priority_order():
    esdf_map = make_map(Connectivity.C6)
    observe(esdf_map, [(x, 0, 0) for x in range(4)], [])
    queue = UpdateQueue(QueueDiscipline.PRIORITY_BY_DISTANCE)
    for x, priority in [(3, 2.0), (1, 1.0), (2, 1.0)]:
        queue.push(esdf_map.voxel((x, 0, 0)), priority)
    assert queue.keys() == [(1, 0, 0), (2, 0, 0), (3, 0, 0)]
    assert queue.pop()[0].pos == (1, 0, 0)
    assert len(queue) == 2


def test_nontermination_guard():
    esdf_map = make_map(Connectivity.C6)
    observe(esdf_map, [(x, 0, 0) for x in range(3)], [(0, 0, 0)])
    queues = esdf_map.pending
    queue = UpdateQueue(QueueDiscipline.FIFO)
    record = esdf_map.voxel((1, 0, 0))
    for _ in range(esdf_map.updater._guard_limit() + 1):
        queue.push(record, 0.0)
    queues.update_queue = queue
    with pytest.raises(CorruptionError):
        esdf_map.updater.propagate(queues)


def test_report_merge():
    a = EpochReport(k_initialized=2, n_expanded=3, m_observed_total=10, wall_time=0.5)
    b = EpochReport(k_initialized=1, n_expanded=4, m_observed_total=10, wall_time=0.25)
    merged = a.merge(b)
    assert merged.k_initialized == 3
    assert merged.n_expanded == 7
    assert merged.m_observed_total == 10
    assert merged.wall_time == 0.75
