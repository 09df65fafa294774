"""
VoxField - Incremental Euclidean Distance Field Mapping
Occupancy grid + BFS-updated ESDF with replay and verification tooling
"""

__version__ = "1.0.0"
__author__ = "VoxField Team"
