"""Planar robot-terrain simulator with known steady-state slip.

A terrain is two slip surfaces plus a powertrain lag:

* ``wheel_slip_fn`` maps a wheel command to the wheel-frame slip, so the
  realized wheel speeds settle at ``cmd - wheel_slip_fn(cmd)``;
* ``body_slip_fn`` maps a body command to the residual body-frame slip left
  after the realized wheel speeds go through the IDD model.

Both settle through the same first-order lag. Because the surfaces are known,
``steady_state_velocity`` is an exact oracle for anything estimated from
simulated logs.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, fields, replace
from typing import Callable

import numpy as np

from .command_space import clamp_transition
from .model import GEOMETRY_PRESETS, BodyVelocity, RobotGeometry, WheelCommand, idd_forward, idd_inverse

INF = math.inf


@dataclass(frozen=True)
class TerrainParams:
    """Knobs of the parametric slip surfaces.

    Speeds are absolute (m/s, rad/s); ``left_wheel_limit`` is a fraction of
    the robot's wheel speed limit.
    """

    tau: float = 0.1
    noise_std: float = 0.0
    v_sat: float = INF  # realized forward speed saturates near this value
    v_loss: float = 0.0  # proportional forward speed loss
    turn_drag: float = 0.0  # extra forward loss at full yaw rate command
    w_sat: float = INF  # realized yaw rate saturates near this value
    yaw_backlash: float = 0.0  # proportional yaw loss (suspension torsion)
    lat_gain: float = 0.0  # s, lateral drift per unit of v_x * w_z
    lat_max: float = INF
    left_wheel_limit: float = INF
    wheel_torque_loss: float = 0.0  # wheel speed loss at full differential |w_r - w_l|

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("tau must be > 0")
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")
        if not 0 <= self.wheel_torque_loss < 1:
            raise ValueError("wheel_torque_loss must be in [0, 1)")


@dataclass(frozen=True)
class TerrainModel:
    name: str
    wheel_slip_fn: Callable[[WheelCommand], WheelCommand]
    body_slip_fn: Callable[[BodyVelocity], BodyVelocity]
    tau: float
    noise_std: float = 0.0
    params: TerrainParams | None = None


def _soft_limit(x, limit):
    if math.isinf(limit):
        return x
    return limit * np.tanh(np.asarray(x) / limit)


def make_terrain(name: str, geom: RobotGeometry, params: TerrainParams) -> TerrainModel:
    """Build the slip surfaces for ``params`` on a given robot."""

    w_max = geom.max_wheel_speed
    left_lim = params.left_wheel_limit * w_max

    def realized_wheels(cmd: WheelCommand) -> WheelCommand:
        w_l = np.asarray(cmd[0], dtype=float)
        w_r = np.asarray(cmd[1], dtype=float)
        if params.wheel_torque_loss:
            keep = 1.0 - params.wheel_torque_loss * np.abs(w_r - w_l) / (2.0 * w_max)
            w_l, w_r = w_l * keep, w_r * keep
        w_l = _soft_limit(w_l, left_lim)
        return WheelCommand(w_l, w_r)

    def wheel_slip_fn(cmd: WheelCommand) -> WheelCommand:
        real = realized_wheels(cmd)
        return WheelCommand(cmd[0] - real.w_l, cmd[1] - real.w_r)

    def body_slip_fn(cmd: BodyVelocity) -> BodyVelocity:
        wheels = realized_wheels(idd_inverse(geom, BodyVelocity(cmd[0], 0.0, cmd[2])))
        base = idd_forward(geom, wheels)
        v0, w0 = np.asarray(base.v_x), np.asarray(base.w_z)
        v = _soft_limit(v0, params.v_sat) * (1.0 - params.v_loss)
        v = v * (1.0 - params.turn_drag * np.minimum(np.abs(w0) / geom.max_angular_speed, 1.0))
        w = _soft_limit(w0, params.w_sat) * (1.0 - params.yaw_backlash)
        lateral = _soft_limit(params.lat_gain * v0 * w0, params.lat_max)
        return BodyVelocity(v0 - v, -lateral, w0 - w)

    return TerrainModel(name, wheel_slip_fn, body_slip_fn, params.tau, params.noise_std, params)


def _scaled(geom: RobotGeometry, **kw) -> TerrainParams:
    v, w = geom.max_linear_speed, geom.max_angular_speed
    for key in ("v_sat", "lat_max"):
        if key in kw:
            kw[key] = kw[key] * v
    if "w_sat" in kw:
        kw["w_sat"] = kw["w_sat"] * w
    return TerrainParams(**kw)


# Shapes relative to the robot's own limits: v_sat and lat_max are fractions of
# max_linear_speed, w_sat a fraction of max_angular_speed.
_BASE_PRESETS: dict[str, dict[str, float]] = {
    "perfect": dict(tau=0.01),
    "asphalt": dict(tau=0.2, v_loss=0.02, turn_drag=0.15, w_sat=0.9, yaw_backlash=0.28,
                    lat_gain=0.02, lat_max=0.2, left_wheel_limit=0.85),
    "grass": dict(tau=0.2, v_loss=0.03, turn_drag=0.18, w_sat=0.85, yaw_backlash=0.28,
                  lat_gain=0.025, lat_max=0.2),
    "gravel": dict(tau=0.2, v_loss=0.02, turn_drag=0.12, w_sat=0.95, yaw_backlash=0.28,
                   lat_gain=0.02, lat_max=0.2),
    "sand": dict(tau=0.25, v_loss=0.06, turn_drag=0.25, w_sat=0.7, yaw_backlash=0.28,
                 lat_gain=0.04, lat_max=0.25),
    "ice": dict(tau=0.4, v_sat=0.5, w_sat=0.6, yaw_backlash=0.28, lat_gain=0.1, lat_max=0.4),
    "mud": dict(tau=0.25, v_loss=0.08, turn_drag=0.2, w_sat=0.6, yaw_backlash=0.28,
                lat_gain=0.02, lat_max=0.2, wheel_torque_loss=0.35),
}

# Per-platform overrides. Husky has no torsion backlash nor the weak left
# motor; its yaw saturation is tuned so the population median of |angular
# slip| is 0.735 / 0.708 / 0.690 rad/s on mud / grass / asphalt (see
# drive.tuning). Warthog ice grip is tuned so the median unpredictability on
# ice is 1.6 times the one on asphalt.
PLATFORM_OVERRIDES: dict[str, dict[str, dict[str, float]]] = {
    "husky": {
        "*": dict(yaw_backlash=0.0, left_wheel_limit=INF),
        "mud": dict(w_sat=0.034479662660047115),
        "grass": dict(w_sat=0.04797966769844183),
        "asphalt": dict(w_sat=0.05697974757125798),
    },
    "warthog": {
        "ice": dict(v_sat=0.47645246706811584, w_sat=0.571742960481739),
    },
}

PRESET_NAMES = tuple(_BASE_PRESETS)


def platform_of(geom: RobotGeometry) -> str | None:
    return next((k for k, g in GEOMETRY_PRESETS.items() if g == geom), None)


def preset_params(name: str, geom: RobotGeometry, **overrides) -> TerrainParams:
    """Parameters of a named preset, scaled to ``geom``, plus raw overrides.

    Overrides are absolute values (not fractions) and win over everything.
    """
    if name not in _BASE_PRESETS:
        raise KeyError(f"unknown terrain preset {name!r}; choose from {', '.join(PRESET_NAMES)}")
    kw = dict(_BASE_PRESETS[name])
    platform = PLATFORM_OVERRIDES.get(platform_of(geom) or "", {})
    if name != "perfect":
        kw.update(platform.get("*", {}))
        kw.update(platform.get(name, {}))
    params = _scaled(geom, **kw)
    return replace(params, **overrides) if overrides else params


def terrain_preset(name: str, geom: RobotGeometry, **overrides) -> TerrainModel:
    return make_terrain(name, geom, preset_params(name, geom, **overrides))


def terrain_from_config(values: dict[str, str], geom: RobotGeometry) -> TerrainModel:
    """``preset=<name>`` plus any ``TerrainParams`` field as an absolute override."""
    values = dict(values)
    name = values.pop("preset", values.pop("name", "perfect"))
    known = {f.name for f in fields(TerrainParams)}
    unknown = set(values) - known
    if unknown:
        raise ValueError(f"unknown terrain keys: {', '.join(sorted(unknown))}")
    return terrain_preset(name, geom, **{k: float(v) for k, v in values.items()})


def steady_state_velocity(geom: RobotGeometry, terrain: TerrainModel, cmd: WheelCommand):
    """Fixed point of the lagged dynamics under a constant command.

    Returns ``(wheel_speeds, body_velocity)``; works element-wise on arrays.
    """
    w_l, w_r = (np.asarray(c, dtype=float) for c in cmd)
    wg = terrain.wheel_slip_fn(WheelCommand(w_l, w_r))
    wheels = WheelCommand(w_l - wg.w_l, w_r - wg.w_r)
    base = idd_forward(geom, wheels)
    cmd_body = idd_forward(geom, WheelCommand(w_l, w_r))
    bg = terrain.body_slip_fn(cmd_body)
    body = BodyVelocity(base.v_x - bg.v_x, base.v_y - bg.v_y, base.w_z - bg.w_z)
    return wheels, body


def wrap_angle(a: float) -> float:
    """Wrap to (-pi, pi]."""
    a = math.fmod(a + math.pi, 2.0 * math.pi)
    if a <= 0.0:
        a += 2.0 * math.pi
    return a - math.pi


@dataclass(frozen=True)
class SimState:
    x: float = 0.0
    y: float = 0.0
    yaw: float = 0.0
    wheels: WheelCommand = WheelCommand(0.0, 0.0)
    body: BodyVelocity = BodyVelocity(0.0, 0.0, 0.0)
    body_slip: BodyVelocity = BodyVelocity(0.0, 0.0, 0.0)
    cmd: BodyVelocity = BodyVelocity(0.0, 0.0, 0.0)  # rate-limited command in effect
    clock: float = 0.0
    measured_wheels: WheelCommand = WheelCommand(0.0, 0.0)
    measured_body: BodyVelocity = BodyVelocity(0.0, 0.0, 0.0)


def _lag(x: float, target: float, decay: float) -> float:
    return float(target + (x - target) * decay)


def step(state: SimState, geom: RobotGeometry, terrain: TerrainModel, cmd: WheelCommand,
         dt: float, rng: np.random.Generator | None = None) -> SimState:
    """Advance the simulation by ``dt`` under a held wheel command."""
    if not 0 < dt <= 0.1:
        raise ValueError("dt must be in (0, 0.1]")
    target = idd_forward(geom, cmd)
    goal = BodyVelocity(float(target.v_x), 0.0, float(target.w_z))
    ramped = clamp_transition(geom, state.cmd, goal, dt)
    # once the ramp is done use the command itself, not its round trip through the IDD map
    ramped_wheels = WheelCommand(float(cmd[0]), float(cmd[1])) if ramped == goal else idd_inverse(geom, ramped)
    wg = terrain.wheel_slip_fn(ramped_wheels)
    bg = terrain.body_slip_fn(ramped)

    # target + (x - target) * decay lands exactly on the target once the gap rounds away
    decay = math.exp(-dt / terrain.tau)
    w_l = _lag(state.wheels.w_l, ramped_wheels.w_l - float(wg.w_l), decay)
    w_r = _lag(state.wheels.w_r, ramped_wheels.w_r - float(wg.w_r), decay)
    slip = BodyVelocity(*(_lag(s, float(t), decay) for s, t in zip(state.body_slip, bg)))

    base = idd_forward(geom, WheelCommand(w_l, w_r))
    body = BodyVelocity(base.v_x - slip.v_x, -slip.v_y, base.w_z - slip.w_z)

    yaw_mid = state.yaw + 0.5 * dt * body.w_z
    c, s = math.cos(yaw_mid), math.sin(yaw_mid)
    x = state.x + dt * (c * body.v_x - s * body.v_y)
    y = state.y + dt * (s * body.v_x + c * body.v_y)
    yaw = wrap_angle(state.yaw + dt * body.w_z)

    if terrain.noise_std > 0 and rng is not None:
        n = rng.normal(0.0, terrain.noise_std, 5)
        meas_w = WheelCommand(w_l + n[0], w_r + n[1])
        meas_b = BodyVelocity(body.v_x + n[2], body.v_y + n[3], body.w_z + n[4])
    else:
        meas_w, meas_b = WheelCommand(w_l, w_r), body
    return SimState(x, y, yaw, WheelCommand(w_l, w_r), body, slip, ramped,
                    state.clock + dt, meas_w, meas_b)


@dataclass(frozen=True)
class SafeZone:
    """Axis-aligned rectangle centred on the origin of the global frame."""

    half_x: float
    half_y: float

    def __post_init__(self):
        if not (self.half_x > 0 and self.half_y > 0):
            raise ValueError("safe zone half-extents must be > 0")

    @classmethod
    def from_size(cls, text: str) -> "SafeZone":
        """Parse ``"WxH"`` in metres (full width and height)."""
        try:
            w, h = (float(p) for p in text.lower().split("x"))
        except ValueError:
            raise ValueError(f"zone must look like WxH, got {text!r}") from None
        return cls(w / 2.0, h / 2.0)

    @property
    def size(self) -> tuple[float, float]:
        return 2.0 * self.half_x, 2.0 * self.half_y

    def inside(self, x: float, y: float) -> bool:
        return abs(x) <= self.half_x and abs(y) <= self.half_y


def minimum_area_check(geom: RobotGeometry, zone: SafeZone, hold: float = 6.0) -> bool:
    """Longest zone side must cover 1.5x the distance of a full-speed hold."""
    return max(zone.size) >= 1.5 * geom.max_linear_speed * hold


class Action(str, enum.Enum):
    CONTINUE = "continue"
    INTERRUPT = "interrupt"


def operator_check(state: SimState, zone: SafeZone, horizon: float = 1.0) -> Action:
    """Interrupt when the current velocity, held for ``horizon`` s, leaves the zone."""
    if horizon <= 0:
        raise ValueError("horizon must be > 0")
    c, s = math.cos(state.yaw), math.sin(state.yaw)
    vx, vy = state.body.v_x, state.body.v_y
    x = state.x + horizon * (c * vx - s * vy)
    y = state.y + horizon * (s * vx + c * vy)
    return Action.CONTINUE if zone.inside(x, y) else Action.INTERRUPT


def free_distance(zone: SafeZone, x: float, y: float, heading: float) -> float:
    """Straight-line distance from ``(x, y)`` to the zone border along ``heading``."""
    c, s = math.cos(heading), math.sin(heading)
    dist = INF
    for pos, d, half in ((x, c, zone.half_x), (y, s, zone.half_y)):
        if d > 1e-12:
            dist = min(dist, (half - pos) / d)
        elif d < -1e-12:
            dist = min(dist, (-half - pos) / d)
    return max(dist, 0.0)


def plan_start(geom: RobotGeometry, terrain: TerrainModel, zone: SafeZone, cmd: WheelCommand,
               horizon: float = 1.0, hold: float = 6.0, n_headings: int = 72) -> tuple[float, float, float]:
    """Start pose ``(x, y, yaw)`` giving a held command the widest clearance.

    The steady-state path over ``hold`` seconds and its look-ahead points are
    rotated through ``n_headings`` candidate yaws; for each yaw the path's
    bounding box is centred in the zone and the yaw with the largest margin
    wins. The transient ramp is ignored.
    """
    _, body = steady_state_velocity(geom, terrain, cmd)
    vx, vy, wz = float(body.v_x), float(body.v_y), float(body.w_z)
    t = np.linspace(0.0, hold, 121)
    yaw = wz * t
    if abs(wz) > 1e-9:
        px = (vx * np.sin(yaw) + vy * (np.cos(yaw) - 1.0)) / wz
        py = (vx * (1.0 - np.cos(yaw)) + vy * np.sin(yaw)) / wz
    else:
        px, py = vx * t, vy * t
    qx = px + horizon * (np.cos(yaw) * vx - np.sin(yaw) * vy)
    qy = py + horizon * (np.sin(yaw) * vx + np.cos(yaw) * vy)
    pts = np.concatenate([np.stack([px, py], -1), np.stack([qx, qy], -1)])

    th = np.linspace(-math.pi, math.pi, n_headings, endpoint=False)
    c, s = np.cos(th)[:, None], np.sin(th)[:, None]
    rx = c * pts[:, 0] - s * pts[:, 1]
    ry = s * pts[:, 0] + c * pts[:, 1]
    lo_x, hi_x, lo_y, hi_y = rx.min(1), rx.max(1), ry.min(1), ry.max(1)
    margin = np.minimum(zone.half_x - 0.5 * (hi_x - lo_x), zone.half_y - 0.5 * (hi_y - lo_y))
    k = int(np.argmax(margin))
    return -0.5 * (hi_x[k] + lo_x[k]), -0.5 * (hi_y[k] + lo_y[k]), float(th[k])


@dataclass
class Simulator:
    """Stateful wrapper around :func:`step` that also tracks odometry."""

    geom: RobotGeometry
    terrain: TerrainModel
    dt: float = 0.05
    rng: np.random.Generator = field(default_factory=lambda: np.random.default_rng(0))
    state: SimState = field(default_factory=SimState)
    distance: float = 0.0
    ticks: int = 0

    @property
    def clock(self) -> float:
        return self.ticks * self.dt

    def step(self, cmd: WheelCommand) -> SimState:
        prev = self.state
        self.state = step(prev, self.geom, self.terrain, cmd, self.dt, self.rng)
        self.ticks += 1
        self.distance += math.hypot(self.state.x - prev.x, self.state.y - prev.y)
        return self.state

    def _hold(self, cmd: WheelCommand, done: Callable[[SimState], bool], max_time: float) -> None:
        for _ in range(int(math.ceil(max_time / self.dt))):
            if done(self.step(cmd)):
                return

    def stop(self, max_time: float = 30.0, tol: float = 0.02) -> None:
        zero = WheelCommand(0.0, 0.0)

        def at_rest(s: SimState) -> bool:
            return max(abs(s.body.v_x), abs(s.body.v_y), abs(s.body.w_z)) < tol

        if not at_rest(self.state):
            self._hold(zero, at_rest, max_time)

    def turn_to(self, heading: float, tol: float = 0.05, max_time: float = 120.0) -> None:
        """Turn in place toward ``heading``, slowing down as the error shrinks."""
        w_lim = self.geom.max_angular_speed / 2.0
        for _ in range(int(math.ceil(max_time / self.dt))):
            s = self.state
            err = wrap_angle(heading - s.yaw)
            if abs(err) < tol and abs(s.body.w_z) < 0.05:
                break
            w_z = max(-w_lim, min(w_lim, 1.5 * err))
            self.step(idd_inverse(self.geom, BodyVelocity(0.0, 0.0, w_z)))

    def drive_to(self, x: float, y: float, tol: float = 0.5, max_time: float = 120.0) -> None:
        """Drive to a point at half speed, steering on the bearing error."""
        self.turn_to(math.atan2(y - self.state.y, x - self.state.x))
        self.stop()
        speed = self.geom.max_linear_speed / 2.0
        w_lim = self.geom.max_angular_speed / 2.0
        best = math.hypot(x - self.state.x, y - self.state.y)
        for _ in range(int(math.ceil(max_time / self.dt))):
            s = self.state
            d = math.hypot(x - s.x, y - s.y)
            if d < tol or d > best + tol:
                break
            best = min(best, d)
            err = wrap_angle(math.atan2(y - s.y, x - s.x) - s.yaw)
            w_z = max(-w_lim, min(w_lim, 2.0 * err))
            self.step(idd_inverse(self.geom, BodyVelocity(speed * max(math.cos(err), 0.0), 0.0, w_z)))
        self.stop()

    def reorient(self, zone: SafeZone, forward: bool = True, attempt: int = 1,
                 command: WheelCommand | None = None, horizon: float = 1.0, hold: float = 6.0) -> None:
        """Operator intervention after an interrupt.

        Stops, then turns in place so the interrupted command restarts toward
        the zone centre (backing commands face away from it). From the second
        interrupt of the same command on, the vehicle is driven to the start
        pose from :func:`plan_start` instead.
        """
        self.stop()
        s = self.state
        if attempt >= 2 and command is not None:
            x, y, heading = plan_start(self.geom, self.terrain, zone, command, horizon, hold)
            self.drive_to(x, y)
        elif math.hypot(s.x, s.y) < 1e-6:
            heading = 0.0 if zone.half_x >= zone.half_y else math.pi / 2
        else:
            heading = math.atan2(-s.y, -s.x)
            if not forward:
                heading += math.pi
        self.turn_to(wrap_angle(heading))
        self.stop()
