"""Skid-steer robot geometry and the ideal differential-drive (IDD) map.

Wheel frame commands are ``(w_l, w_r)`` in rad/s. Body frame velocities are
``(v_x, v_y, w_z)`` in m/s and rad/s. Both are plain named tuples so the same
functions accept scalars or numpy arrays component-wise.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import NamedTuple

import numpy as np


class WheelCommand(NamedTuple):
    w_l: float
    w_r: float


class BodyVelocity(NamedTuple):
    v_x: float
    v_y: float
    w_z: float


@dataclass(frozen=True)
class RobotGeometry:
    """Rigid box approximation of a skid-steer vehicle plus its command limits.

    Attributes:
        mass: Vehicle mass (kg).
        base_width: Distance between left and right wheel contact lines (m).
        wheel_radius: Effective wheel radius (m).
        body_depth: Box length along the forward axis (m).
        body_height: Box height (m).
        max_wheel_speed: Motor controller wheel speed limit (rad/s).
        max_linear_speed: Body frame forward speed limit (m/s).
        max_angular_speed: Body frame yaw rate limit (rad/s).
        max_linear_accel: Forward acceleration limit between commands (m/s^2).
    """

    mass: float
    base_width: float
    wheel_radius: float
    body_depth: float
    body_height: float
    max_wheel_speed: float
    max_linear_speed: float
    max_angular_speed: float
    max_linear_accel: float

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ValueError(f"{f.name} must be finite and > 0, got {value!r}")

    def to_dict(self) -> dict[str, float]:
        return asdict(self)


# Clearpath-like platforms. Mass and speed limits are the published ones; the
# remaining dimensions are approximate.
WARTHOG = RobotGeometry(
    mass=470.0,
    base_width=1.08,
    wheel_radius=0.3,
    body_depth=1.52,
    body_height=0.83,
    max_wheel_speed=5.0 / 0.3,
    max_linear_speed=5.0,
    max_angular_speed=4.0,
    max_linear_accel=4.0,
)

HUSKY = RobotGeometry(
    mass=75.0,
    base_width=0.555,
    wheel_radius=0.165,
    body_depth=0.99,
    body_height=0.39,
    max_wheel_speed=1.0 / 0.165,
    max_linear_speed=1.0,
    max_angular_speed=2.0,
    max_linear_accel=2.0,
)

GEOMETRY_PRESETS = {"warthog": WARTHOG, "husky": HUSKY}


def idd_forward(geom: RobotGeometry, cmd: WheelCommand) -> BodyVelocity:
    """Map wheel speeds to the no-slip body velocity."""
    w_l, w_r = cmd
    r, b = geom.wheel_radius, geom.base_width
    v_y = np.zeros(np.shape(w_l)) if np.ndim(w_l) else 0.0
    return BodyVelocity(r * (w_l + w_r) / 2.0, v_y, r * (w_r - w_l) / b)


def idd_inverse(geom: RobotGeometry, vel: BodyVelocity) -> WheelCommand:
    """Wheel speeds producing ``vel`` under the IDD model.

    Only defined for commands, i.e. ``v_y == 0``. A measured velocity with
    lateral slip has no wheel-speed preimage and is rejected.
    """
    v_x, v_y, w_z = vel
    if np.any(np.asarray(v_y) != 0):
        raise ValueError("idd_inverse needs a command with v_y == 0 (got a slipping velocity)")
    r, b = geom.wheel_radius, geom.base_width
    return WheelCommand((v_x - w_z * b / 2.0) / r, (v_x + w_z * b / 2.0) / r)


def idd_matrix(geom: RobotGeometry) -> np.ndarray:
    """The 3x2 matrix M with ``[v_x, 0, w_z] = M @ [w_l, w_r]``."""
    r, b = geom.wheel_radius, geom.base_width
    return r * np.array([[0.5, 0.5], [0.0, 0.0], [-1.0 / b, 1.0 / b]])


def inertia_matrix(geom: RobotGeometry) -> np.ndarray:
    """Diagonal inertia (kg m^2) of a uniform box of width b, depth d, height c."""
    m, b, d, c = geom.mass, geom.base_width, geom.body_depth, geom.body_height
    return (m / 12.0) * np.diag([b * b + c * c, d * d + c * c, d * d + b * b])


def read_config(path: str | Path) -> dict[str, str]:
    """Parse a ``key=value`` text file; ``#`` starts a comment."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def geometry_from_mapping(values: dict[str, str | float]) -> RobotGeometry:
    names = [f.name for f in fields(RobotGeometry)]
    missing = [n for n in names if n not in values]
    if missing:
        raise ValueError(f"robot geometry is missing keys: {', '.join(missing)}")
    return RobotGeometry(**{n: float(values[n]) for n in names})


def load_geometry(source: str | Path) -> RobotGeometry:
    """Resolve a preset name (``warthog``/``husky``) or a key=value config file."""
    key = str(source).lower()
    if key in GEOMETRY_PRESETS:
        return GEOMETRY_PRESETS[key]
    path = Path(source)
    if not path.is_file():
        raise FileNotFoundError(f"no geometry preset or file named {source}")
    return geometry_from_mapping(read_config(path))


def write_geometry(geom: RobotGeometry, path: str | Path) -> None:
    lines = [f"{k}={v!r}" for k, v in geom.to_dict().items()]
    Path(path).write_text("\n".join(lines) + "\n")
