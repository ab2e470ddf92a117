"""Calibration of preset knobs against steady-state targets.

Targets are population statistics over the command polygon, computed with
the noise-free steady-state oracle on a fixed uniform sample, so a
calibration is deterministic and independent of the protocol simulator.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np
from scipy.optimize import brentq

from .command_space import build_polygon, sample_uniform
from .metric import planar_pair, unpredictability
from .model import RobotGeometry, WheelCommand, idd_forward
from .terrain import TerrainParams, make_terrain, preset_params, steady_state_velocity

POPULATION = 4000
POPULATION_SEED = 12345

# median |angular slip| (rad/s) of the small platform on three surfaces
HUSKY_YAW_TARGETS = {"mud": 0.735, "grass": 0.708, "asphalt": 0.690}
ICE_RATIO_TARGET = 1.6


def _population(geom: RobotGeometry, n: int, seed: int) -> WheelCommand:
    cmds = sample_uniform(build_polygon(geom), n, seed).wheel
    return WheelCommand(cmds[:, 0], cmds[:, 1])


def steady_yaw_slip(geom: RobotGeometry, params: TerrainParams, n: int = POPULATION,
                    seed: int = POPULATION_SEED) -> np.ndarray:
    """|commanded - steady yaw rate| for ``n`` uniform commands."""
    cmd = _population(geom, n, seed)
    _, body = steady_state_velocity(geom, make_terrain("tune", geom, params), cmd)
    return np.abs(idd_forward(geom, cmd).w_z - body.w_z)


def steady_rho(geom: RobotGeometry, params: TerrainParams, n: int = POPULATION,
               seed: int = POPULATION_SEED) -> np.ndarray:
    cmd = _population(geom, n, seed)
    _, body = steady_state_velocity(geom, make_terrain("tune", geom, params), cmd)
    u = idd_forward(geom, cmd)
    return unpredictability(geom, planar_pair(u.v_x, u.w_z, body.v_x, body.v_y, body.w_z))


def calibrate_yaw_saturation(geom: RobotGeometry, terrain: str, target: float,
                             bracket: tuple[float, float] | None = None) -> float:
    """Absolute ``w_sat`` (rad/s) giving median |angular slip| = ``target``.

    The slip falls monotonically as ``w_sat`` grows, so a bracketed root
    search is enough.
    """
    base = preset_params(terrain, geom)
    lo, hi = bracket or (1e-4, 10.0 * geom.max_angular_speed)

    def gap(w_sat: float) -> float:
        return float(np.median(steady_yaw_slip(geom, replace(base, w_sat=w_sat)))) - target

    if gap(lo) * gap(hi) > 0:
        raise ValueError(f"target {target} rad/s not reachable on {terrain!r} by varying w_sat")
    return brentq(gap, lo, hi, xtol=1e-10)


def ice_grip(geom: RobotGeometry, scale: float, base: TerrainParams | None = None) -> TerrainParams:
    """Ice preset with both saturation speeds multiplied by ``scale``."""
    base = base or preset_params("ice", geom)
    return replace(base, v_sat=base.v_sat * scale, w_sat=base.w_sat * scale)


def ice_rho_ratio(geom: RobotGeometry, scale: float, baseline: tuple[str, ...] = ("asphalt",)) -> float:
    """Median ice rho over the median of the pooled ``baseline`` terrains."""
    ice = float(np.median(steady_rho(geom, ice_grip(geom, scale))))
    pooled = np.concatenate([steady_rho(geom, preset_params(name, geom)) for name in baseline])
    return ice / float(np.median(pooled))


def calibrate_ice_grip(geom: RobotGeometry, ratio: float = ICE_RATIO_TARGET,
                       bracket: tuple[float, float] = (0.05, 3.0),
                       baseline: tuple[str, ...] = ("asphalt",)) -> float:
    """Grip scale making median ice rho ``ratio`` times the baseline's."""
    lo, hi = bracket
    f = lambda s: ice_rho_ratio(geom, s, baseline) - ratio
    if f(lo) * f(hi) > 0:
        raise ValueError(f"ice/baseline rho ratio {ratio} not reachable in grip scale {bracket}")
    return brentq(f, lo, hi, xtol=1e-10)
