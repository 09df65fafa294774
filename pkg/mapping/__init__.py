"""VoxField mapping layer: occupancy, ESDF updating, queries and verification"""
from .esdf_map import DistanceResult, EsdfLayer, EsdfMap, FieldSnapshot, GradientResult
from .esdf_updater import EpochReport, EsdfUpdater, UpdateQueue
from .occupancy import KeyQueue, OccupancyIntegrator, SensorFrame, UpdateQueues, traverse_ray
from .oracle import ErrorReport, exact_edt, exact_edt_direct, exact_edt_kdtree, field_error, rms_error
from .slices import export_slice
