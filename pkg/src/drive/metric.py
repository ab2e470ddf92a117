"""Kinetic-energy based unpredictability and risk coordinates."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping, NamedTuple, Sequence

import numpy as np
from scipy import stats

from .command_space import CommandPolygon, build_polygon
from .model import RobotGeometry, WheelCommand, idd_forward, inertia_matrix
from .slip import SlipGrid, SlipSample, kernel_smooth

QUARTER_PI = math.pi / 4.0


class VelocityPair(NamedTuple):
    """Commanded and measured velocities as 3-vectors.

    Each side is ``(translation, rotation)``; translation in m/s, rotation in
    rad/s. Leading dimensions broadcast, so arrays of shape ``(n, 3)`` work.
    """

    u_trans: np.ndarray
    u_rot: np.ndarray
    x_trans: np.ndarray
    x_rot: np.ndarray


def planar_pair(cmd_vx, cmd_wz, meas_vx, meas_vy, meas_wz) -> VelocityPair:
    """Lift planar (v_x, v_y, w_z) velocities to 3-vectors."""
    cmd_vx, cmd_wz, meas_vx, meas_vy, meas_wz = np.broadcast_arrays(
        *(np.asarray(a, dtype=float) for a in (cmd_vx, cmd_wz, meas_vx, meas_vy, meas_wz)))
    z = np.zeros_like(cmd_vx)
    return VelocityPair(
        np.stack([cmd_vx, z, z], axis=-1),
        np.stack([z, z, cmd_wz], axis=-1),
        np.stack([meas_vx, meas_vy, z], axis=-1),
        np.stack([z, z, meas_wz], axis=-1),
    )


def kinetic_energies(geom: RobotGeometry, translation, rotation) -> tuple[np.ndarray, np.ndarray]:
    """Translational and rotational kinetic energy (J)."""
    t = np.asarray(translation, dtype=float)
    w = np.asarray(rotation, dtype=float)
    k_t = 0.5 * geom.mass * np.sum(t * t, axis=-1)
    k_r = 0.5 * np.einsum("...i,ij,...j->...", w, inertia_matrix(geom), w)
    return k_t, k_r


def _alignment(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    na = np.linalg.norm(a, axis=-1)
    nb = np.linalg.norm(b, axis=-1)
    ok = (na > 0) & (nb > 0)
    with np.errstate(invalid="ignore", divide="ignore"):
        cos = np.sum(a * b, axis=-1) / (na * nb)
    # no direction on one side: nothing to penalize
    return np.where(ok, 0.5 * (np.clip(cos, -1.0, 1.0) + 1.0), 1.0)


def alignment_penalties(u: Sequence, x: Sequence) -> tuple[np.ndarray, np.ndarray]:
    """``(alpha, beta)`` for translation and rotation direction agreement.

    ``u`` and ``x`` are ``(translation, rotation)`` pairs. A zero vector on
    either side gives a penalty of 1.
    """
    u_t, u_r = (np.asarray(a, dtype=float) for a in u)
    x_t, x_r = (np.asarray(a, dtype=float) for a in x)
    return _alignment(u_t, x_t), _alignment(u_r, x_r)


def rho_from_energies(k_u, k_x, *, literal_zero: bool = False):
    """Unpredictability from commanded and weighted measured energies.

    For non-negative energies ``|atan2(k_u, k_x) - pi/4|`` equals
    ``atan2(|k_u - k_x|, k_u + k_x)``; the second form is exactly symmetric in
    floating point and gives 0 at ``k_u = k_x = 0``. ``literal_zero`` instead
    returns 1 there, as ``atan2(0, 0) = 0`` would in the first form.
    """
    k_u = np.asarray(k_u, dtype=float)
    k_x = np.asarray(k_x, dtype=float)
    rho = np.minimum(np.arctan2(np.abs(k_u - k_x), k_u + k_x) / QUARTER_PI, 1.0)
    if literal_zero:
        rho = np.where((k_u == 0) & (k_x == 0), 1.0, rho)
    return rho[()] if rho.ndim == 0 else rho


def unpredictability(geom: RobotGeometry, pair: VelocityPair, *, literal_zero: bool = False):
    """rho in [0, 1]: 0 for perfectly predicted motion, 1 when immobilized."""
    k_ut, k_ur = kinetic_energies(geom, pair.u_trans, pair.u_rot)
    k_xt, k_xr = kinetic_energies(geom, pair.x_trans, pair.x_rot)
    alpha, beta = alignment_penalties((pair.u_trans, pair.u_rot), (pair.x_trans, pair.x_rot))
    return rho_from_energies(k_ut + k_ur, alpha * k_xt + beta * k_xr, literal_zero=literal_zero)


def sample_pairs(samples: Sequence[SlipSample]) -> VelocityPair:
    cmd = np.array([s.command_body for s in samples], dtype=float).reshape(-1, 2)
    meas = np.array([s.measured_body for s in samples], dtype=float).reshape(-1, 3)
    return planar_pair(cmd[:, 0], cmd[:, 1], meas[:, 0], meas[:, 1], meas[:, 2])


def sample_unpredictability(geom: RobotGeometry, samples: Sequence[SlipSample]) -> np.ndarray:
    """Per-sample rho of steady-state measurements against the IDD prediction."""
    return np.atleast_1d(unpredictability(geom, sample_pairs(samples)))


def measured_energy(geom: RobotGeometry, samples: Sequence[SlipSample]) -> np.ndarray:
    """Total measured kinetic energy (J), without direction penalties."""
    pair = sample_pairs(samples)
    k_t, k_r = kinetic_energies(geom, pair.x_trans, pair.x_rot)
    return np.atleast_1d(k_t + k_r)


def metric_grid(samples: Sequence[SlipSample], geom: RobotGeometry, resolution: float, sigma,
                polygon: CommandPolygon | None = None, **kw) -> SlipGrid:
    """Kernel-smoothed rho over the command space."""
    if not samples:
        raise ValueError("cannot smooth an empty sample list")
    u = np.array([s.command_body for s in samples], dtype=float)
    rho = sample_unpredictability(geom, samples)
    return kernel_smooth(u, rho, resolution, sigma, polygon, channel="rho", **kw)


def max_kinetic_energy(geom: RobotGeometry, polygon: CommandPolygon | None = None) -> float:
    """Largest IDD kinetic energy over the command polygon (attained at a vertex)."""
    poly = polygon or build_polygon(geom)
    wv = poly.wheel_vertices
    v = idd_forward(geom, WheelCommand(wv[:, 0], wv[:, 1]))
    pair = planar_pair(v.v_x, v.w_z, v.v_x, 0.0, v.w_z)
    k_t, k_r = kinetic_energies(geom, pair.u_trans, pair.u_rot)
    return float(np.max(k_t + k_r))


@dataclass(frozen=True)
class RiskPoint:
    rho: float
    energy: float  # measured kinetic energy, J
    terrain: str
    motion: str


@dataclass(frozen=True)
class RiskSummary:
    scenario: str
    motion: str
    n: int
    median_rho: float
    median_energy: float
    center_rho: float
    center_energy: float
    semi_major: float
    semi_minor: float
    angle: float  # rad, major axis from the rho axis


MOTION_FILTERS: dict[str, Callable[[RobotGeometry, np.ndarray], np.ndarray]] = {
    "all": lambda g, u: np.ones(len(u), bool),
    # high forward speed, little turning
    "forward": lambda g, u: (np.abs(u[:, 0]) >= 0.6 * g.max_linear_speed)
    & (np.abs(u[:, 1]) <= 0.25 * g.max_angular_speed),
    # high yaw rate, little forward speed
    "turn": lambda g, u: (np.abs(u[:, 1]) >= 0.6 * g.max_angular_speed)
    & (np.abs(u[:, 0]) <= 0.25 * g.max_linear_speed),
}


def covariance_ellipse(points: np.ndarray, mass: float = 0.95) -> tuple[np.ndarray, float, float, float]:
    """Centre, semi-axes and angle of the Gaussian ``mass`` ellipse of 2-D points."""
    center = points.mean(axis=0)
    cov = np.cov(points, rowvar=False)
    evals, evecs = np.linalg.eigh(cov)
    scale = stats.chi2.ppf(mass, df=2)
    major = evecs[:, 1]
    a, b = np.sqrt(np.maximum(evals[::-1], 0.0) * scale)
    return center, float(a), float(b), float(math.atan2(major[1], major[0]))


def risk_points(
    runs: Mapping[str, Sequence[SlipSample]],
    geom: RobotGeometry | Mapping[str, RobotGeometry],
    motion_filter: str = "all",
) -> tuple[list[RiskPoint], list[RiskSummary]]:
    """(rho, measured energy) per sample and a median + 95 % ellipse per scenario.

    ``geom`` may be one geometry for all scenarios or one per scenario.
    """
    if motion_filter not in MOTION_FILTERS:
        raise KeyError(f"unknown motion filter {motion_filter!r}")
    points: list[RiskPoint] = []
    summaries: list[RiskSummary] = []
    for name, samples in runs.items():
        g = geom[name] if isinstance(geom, Mapping) else geom
        u = np.array([s.command_body for s in samples], dtype=float).reshape(-1, 2)
        keep = MOTION_FILTERS[motion_filter](g, u)
        chosen = [s for s, k in zip(samples, keep) if k]
        if len(chosen) < 5:
            raise ValueError(f"scenario {name!r} has {len(chosen)} samples after filtering, need >= 5")
        rho = sample_unpredictability(g, chosen)
        energy = measured_energy(g, chosen)
        points += [RiskPoint(float(r), float(e), name, motion_filter) for r, e in zip(rho, energy)]
        pts = np.column_stack([rho, energy])
        center, a, b, angle = covariance_ellipse(pts)
        summaries.append(RiskSummary(name, motion_filter, len(chosen), float(np.median(rho)),
                                     float(np.median(energy)), float(center[0]), float(center[1]),
                                     a, b, angle))
    return points, summaries
