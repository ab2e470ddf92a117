"""Slip characterization for skid-steer robots.

Sample commands uniformly over the admissible command space, hold each one on
a simulated (or logged) terrain, reduce the steady part of every hold to slip,
and smooth slip and unpredictability over the command space.
"""

from .command_space import CommandPolygon, SampleSet, build_polygon, clamp_transition, sample_uniform
from .io import LogFormatError, read_log, write_log
from .metric import risk_points, unpredictability
from .model import HUSKY, WARTHOG, BodyVelocity, RobotGeometry, WheelCommand, idd_forward, idd_inverse
from .protocol import DriveRun, Episode, run_drive, segment
from .slip import auto_sigma, compute_slip, kernel_smooth, slip_distribution, smooth_grid
from .terrain import PRESET_NAMES, SafeZone, TerrainModel, steady_state_velocity, terrain_preset

__all__ = [
    "BodyVelocity", "CommandPolygon", "DriveRun", "Episode", "HUSKY", "LogFormatError", "PRESET_NAMES",
    "RobotGeometry", "SafeZone", "SampleSet", "TerrainModel", "WARTHOG", "WheelCommand", "auto_sigma",
    "build_polygon", "clamp_transition", "compute_slip", "idd_forward", "idd_inverse", "kernel_smooth",
    "read_log", "risk_points", "run_drive", "sample_uniform", "segment", "slip_distribution", "smooth_grid",
    "steady_state_velocity", "terrain_preset", "unpredictability", "write_log",
]
