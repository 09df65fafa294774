#!/usr/bin/env python3
"""
VoxField - Demo Script
Builds a small map incrementally, deletes an obstacle and checks the field
"""

import sys
from pathlib import Path

# Add project root to path
sys.path.insert(0, str(Path(__file__).parent))

from core.config import EsdfConfig, OccupancyConfig
from mapping.esdf_map import EsdfMap
from mapping.oracle import field_error
from replay.scenario import ObstacleSpec, PoseSpec, ScenarioSpec, SensorModel, generate_scenario


def print_header(text: str):
    print("\n" + "=" * 60)
    print(f"  {text}")
    print("=" * 60)


def print_report(esdf_map: EsdfMap, report):
    error = field_error(esdf_map)
    print(f"Epoch {esdf_map.epoch}: k={report.k_initialized} n={report.n_expanded} "
          f"m={report.m_observed_total} +{report.inserted}/-{report.deleted} "
          f"in {report.wall_time * 1e3:.1f} ms")
    if error.empty:
        print("   RMS error: (no obstacles yet)")
    else:
        print(f"   RMS error: {error.rms_error_voxels:.4f} voxels "
              f"(max {error.max_error_voxels:.3f}, {error.compared_voxel_count} voxels)")


def build_scenario() -> ScenarioSpec:
    return ScenarioSpec(
        seed=7,
        scenario_id="demo",
        world_min=(0.0, 0.0, 0.0),
        world_max=(2.0, 2.0, 2.0),
        obstacles=[
            ObstacleSpec(kind="box", min_corner=(1.4, 0.8, 0.8), max_corner=(1.6, 1.2, 1.2)),
            ObstacleSpec(kind="sphere", center=(0.5, 1.5, 1.0), radius=0.2, disappear_epoch=3),
        ],
        trajectory=[
            PoseSpec(timestamp=0.5 * i, position=(1.0, 1.0, 1.0)) for i in range(8)
        ],
        sensor=SensorModel(kind="sphere", max_range=1.5, rays_per_frame=1500),
    )


def demo_incremental():
    print_header("SCENARIO 1: Incremental updates with a disappearing sphere")
    esdf_map = EsdfMap(occupancy=OccupancyConfig(voxel_size=0.1, max_ray_range=1.5))
    for frame in generate_scenario(build_scenario()):
        esdf_map.integrate_frame(frame)
        print_report(esdf_map, esdf_map.run_epoch())
    return esdf_map


def demo_queries(esdf_map: EsdfMap):
    print_header("SCENARIO 2: Distance and gradient queries")
    for point in [(1.0, 1.0, 1.0), (1.3, 1.0, 1.0), (0.5, 1.5, 1.0)]:
        d = esdf_map.query_distance(point, interpolate=True)
        g = esdf_map.query_gradient(point)
        grad = f"({g.gradient[0]:+.2f}, {g.gradient[1]:+.2f}, {g.gradient[2]:+.2f})" if g.available else "n/a"
        print(f"   {point}: distance {d.distance:.3f} m, gradient {grad}")


def demo_signed():
    print_header("SCENARIO 3: Signed distances")
    esdf_map = EsdfMap(
        occupancy=OccupancyConfig(voxel_size=0.1, max_ray_range=1.5),
        esdf=EsdfConfig(signed_mode=True),
    )
    for frame in generate_scenario(build_scenario()):
        esdf_map.update(frame)
    for point in [(1.0, 1.0, 1.0), (1.45, 1.0, 1.0)]:
        s = esdf_map.signed_distance(point)
        print(f"   {point}: signed distance {s.distance:+.3f} m")


def show_stats(esdf_map: EsdfMap):
    print_header("MAP STATISTICS")
    stats = esdf_map.memory_stats()
    print(f"Observed voxels: {len(esdf_map.observed_keys())}")
    print(f"Occupied voxels: {len(esdf_map.occupied_keys())}")
    print(f"Allocated records: {stats.allocated_voxel_records} in {stats.allocated_blocks} blocks")
    print(f"Fixed-point violations: {len(esdf_map.check_fixed_point())}")
    print(f"DLL problems: {len(esdf_map.check_dll_partition())}")


def main():
    print("\n" + "=" * 60)
    print("  VOXFIELD - INCREMENTAL DISTANCE FIELD DEMO")
    print("=" * 60)

    esdf_map = demo_incremental()
    demo_queries(esdf_map)
    demo_signed()
    show_stats(esdf_map)

    print("\n" + "=" * 60)
    print("  Demo complete")
    print("=" * 60 + "\n")


if __name__ == "__main__":
    main()
