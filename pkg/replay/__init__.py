"""VoxField replay: datasets, synthetic scenarios and the benchmark runner"""
from .dataset import DatasetReader, load_dataset, write_dataset
from .runner import FrameSource, RunResult, dataset_source, open_source, run, run_all, scenario_source
from .scenario import (
    ObstacleSpec, PoseSpec, ScenarioSpec, SensorModel, generate_scenario,
    load_scenario, parse_scenario, random_scenario,
)
