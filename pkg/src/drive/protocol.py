"""Command hold protocol: sample, hold each command, split into windows."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .command_space import CommandPolygon, SampleSet, sample_uniform
from .model import BodyVelocity, RobotGeometry, WheelCommand, geometry_from_mapping, idd_forward
from .terrain import Action, SafeZone, Simulator, SimState, TerrainModel, minimum_area_check, operator_check

log = logging.getLogger(__name__)

RATE_HZ = 20.0
DT = 1.0 / RATE_HZ
WINDOW_S = 2.0
H_CALIB_S = 6.0
MAX_INTERRUPTS = 50


class ConfigurationError(ValueError):
    pass


@dataclass
class Episode:
    """One held command and its recording.

    Arrays have one row per sample: ``t`` (n,), ``meas_wheels`` (n, 2),
    ``meas_body`` (n, 3) as (v_x, v_y, w_z), ``pose`` (n, 3) as (x, y, yaw).
    """

    command: WheelCommand
    t: np.ndarray
    meas_wheels: np.ndarray
    meas_body: np.ndarray
    pose: np.ndarray
    interrupted_count: int = 0

    def __len__(self):
        return len(self.t)

    def command_body(self, geom: RobotGeometry) -> BodyVelocity:
        v = idd_forward(geom, self.command)
        return BodyVelocity(float(v.v_x), 0.0, float(v.w_z))


@dataclass
class DriveRun:
    """Output of one protocol run plus what is needed to reproduce it."""

    geom: RobotGeometry
    episodes: list[Episode]
    terrain: str = ""
    seed: int = 0
    h_calib: float = H_CALIB_S
    dt: float = DT
    noise_std: float = 0.0
    zone: tuple[float, float] | None = None
    idle_time: float = 0.0
    distance: float = 0.0
    extra: dict[str, str] = field(default_factory=dict)

    @property
    def samples(self) -> SampleSet:
        wheel = np.array([ep.command for ep in self.episodes], dtype=float).reshape(-1, 2)
        return SampleSet(self.geom, wheel, self.seed)

    def metadata(self) -> dict[str, str]:
        meta = {k: repr(float(v)) for k, v in self.geom.to_dict().items()}
        meta.update(
            terrain=self.terrain,
            seed=str(self.seed),
            h_calib=repr(float(self.h_calib)),
            dt=repr(float(self.dt)),
            noise_std=repr(float(self.noise_std)),
            idle_time=repr(float(self.idle_time)),
            distance=repr(float(self.distance)),
            interrupts=";".join(str(ep.interrupted_count) for ep in self.episodes),
        )
        if self.zone is not None:
            meta["zone"] = f"{self.zone[0]!r}x{self.zone[1]!r}"
        meta.update(self.extra)
        return meta

    @classmethod
    def from_metadata(cls, meta: dict[str, str], episodes: list[Episode]) -> "DriveRun":
        geom = geometry_from_mapping(meta)
        counts = [int(c) for c in meta.get("interrupts", "").split(";") if c != ""]
        if counts and len(counts) == len(episodes):
            for ep, c in zip(episodes, counts):
                ep.interrupted_count = c
        zone = None
        if meta.get("zone"):
            w, h = meta["zone"].split("x")
            zone = (float(w), float(h))
        known = set(geom.to_dict()) | {"terrain", "seed", "h_calib", "dt", "noise_std", "idle_time",
                                       "distance", "interrupts", "zone"}
        return cls(
            geom=geom,
            episodes=episodes,
            terrain=meta.get("terrain", ""),
            seed=int(meta.get("seed", 0)),
            h_calib=float(meta.get("h_calib", H_CALIB_S)),
            dt=float(meta.get("dt", DT)),
            noise_std=float(meta.get("noise_std", 0.0)),
            zone=zone,
            idle_time=float(meta.get("idle_time", 0.0)),
            distance=float(meta.get("distance", math.nan)),
            extra={k: v for k, v in meta.items() if k not in known},
        )


def samples_per_episode(h_calib: float = H_CALIB_S, dt: float = DT) -> int:
    return int(round(h_calib / dt))


def run_drive(
    poly: CommandPolygon,
    terrain: TerrainModel,
    zone: SafeZone,
    s: int,
    h_calib: float = H_CALIB_S,
    seed: int = 0,
    *,
    dt: float = DT,
    horizon: float = 1.0,
    window: float = WINDOW_S,
    samples: SampleSet | None = None,
    start: tuple[float, float, float] = (0.0, 0.0, 0.0),
) -> DriveRun:
    """Sample ``s`` commands and hold each for ``h_calib`` seconds.

    The vehicle starts at rest at ``start`` (x, y, yaw). When the safety
    operator interrupts a hold, the buffer is cleared, the vehicle is
    reoriented and the same command restarts from scratch.
    """
    geom = poly.geom
    if s < 1:
        raise ConfigurationError("need at least one command (s >= 1)")
    if not math.isclose(h_calib, 3.0 * window):
        raise ConfigurationError("h_calib must be three windows (one transient, two steady)")
    if not minimum_area_check(geom, zone, h_calib):
        raise ConfigurationError(
            f"safe zone {zone.size[0]:g}x{zone.size[1]:g} m is too small: the longest side must be "
            f">= {1.5 * geom.max_linear_speed * h_calib:g} m for this robot"
        )
    sample_rng, noise_rng = (np.random.default_rng(s_) for s_ in np.random.SeedSequence(seed).spawn(2))
    if samples is None:
        samples = sample_uniform(poly, s, sample_rng)
    n_hold = samples_per_episode(h_calib, dt)

    sim = Simulator(geom, terrain, dt, noise_rng, SimState(x=start[0], y=start[1], yaw=start[2]))
    episodes = []
    for n, cmd in enumerate(samples.commands):
        forward = idd_forward(geom, cmd).v_x >= 0
        interrupts = 0
        rows: list[tuple] = []
        while len(rows) < n_hold:
            st = sim.step(cmd)
            if operator_check(st, zone, horizon) is Action.INTERRUPT:
                interrupts += 1
                if interrupts > MAX_INTERRUPTS:
                    raise RuntimeError(f"command {n} interrupted {interrupts} times; zone too small?")
                rows = []
                sim.reorient(zone, forward=forward, attempt=interrupts, command=cmd,
                             horizon=horizon, hold=h_calib)
                continue
            rows.append((sim.clock, *st.measured_wheels, *st.measured_body, st.x, st.y, st.yaw))
        arr = np.array(rows, dtype=float)
        episodes.append(Episode(cmd, arr[:, 0], arr[:, 1:3], arr[:, 3:6], arr[:, 6:9], interrupts))
        log.debug("episode %d done, %d interrupts", n, interrupts)

    idle = sim.clock - s * n_hold * dt
    return DriveRun(
        geom=geom,
        episodes=episodes,
        terrain=terrain.name,
        seed=seed if isinstance(seed, int) else 0,
        h_calib=h_calib,
        dt=dt,
        noise_std=terrain.noise_std,
        zone=zone.size,
        idle_time=max(idle, 0.0),
        distance=sim.distance,
    )


@dataclass
class WindowedEpisode:
    episode: Episode
    transient: slice
    steady: tuple[slice, slice]
    steady_mean_body_velocity: np.ndarray  # (v_x, v_y, w_z)
    steady_mean_wheel_speeds: np.ndarray  # (w_l, w_r)
    steadiness: float  # std/|mean| of v_x over the last window; large means not settled


def _mean(rows: np.ndarray) -> np.ndarray:
    # shifted by the first row so a constant signal averages to itself exactly
    ref = rows[0]
    return ref + (rows - ref).mean(axis=0)


def segment(ep: Episode, window: int = 40) -> WindowedEpisode:
    """Split a complete episode into one transient and two steady windows."""
    if len(ep) != 3 * window:
        raise ValueError(f"episode has {len(ep)} samples, expected {3 * window}")
    steady = slice(window, 3 * window)
    last = ep.meas_body[2 * window :, 0]
    mean_last = float(np.mean(last))
    steadiness = float(np.std(last) / abs(mean_last)) if mean_last != 0 else math.inf
    return WindowedEpisode(
        episode=ep,
        transient=slice(0, window),
        steady=(slice(window, 2 * window), slice(2 * window, 3 * window)),
        steady_mean_body_velocity=_mean(ep.meas_body[steady]),
        steady_mean_wheel_speeds=_mean(ep.meas_wheels[steady]),
        steadiness=steadiness,
    )


def efficiency_report(run: DriveRun) -> dict[str, float]:
    """Share of wall time spent recording, distance and interrupt count."""
    data_time = len(run.episodes) * run.h_calib
    total = data_time + run.idle_time
    distance = run.distance
    if not math.isfinite(distance):
        distance = sum(float(np.sum(np.hypot(*np.diff(ep.pose[:, :2], axis=0).T))) for ep in run.episodes)
    return {
        "data_time_fraction": round(data_time / total, 3) if total > 0 else 1.0,
        "distance_m": distance,
        "total_time_s": total,
        "interrupts": sum(ep.interrupted_count for ep in run.episodes),
    }
