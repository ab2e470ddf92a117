"""Admissible command polygon and uniform command sampling.

The polygon lives in the body frame as ``(v_x, w_z)`` vertices. Wheel speed
limits are a square in the wheel frame; the IDD map turns that square into a
diamond in the body frame, which is then clipped by the body speed limits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import BodyVelocity, RobotGeometry, WheelCommand, idd_forward, idd_inverse

MERGE_TOL = 1e-9


def _clip(poly: list[tuple[float, float]], a: float, b: float, c: float) -> list[tuple[float, float]]:
    """Sutherland-Hodgman clip of a convex polygon by ``a*x + b*y <= c``."""
    out = []
    n = len(poly)
    for i in range(n):
        p, q = poly[i], poly[(i + 1) % n]
        fp = a * p[0] + b * p[1] - c
        fq = a * q[0] + b * q[1] - c
        if fp <= 0:
            out.append(p)
        if (fp < 0 < fq) or (fq < 0 < fp):
            t = fp / (fp - fq)
            out.append((p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])))
    return out


def _cleanup(poly: list[tuple[float, float]]) -> np.ndarray:
    pts: list[tuple[float, float]] = []
    for p in poly:
        if pts and max(abs(p[0] - pts[-1][0]), abs(p[1] - pts[-1][1])) < MERGE_TOL:
            continue
        pts.append(p)
    while len(pts) > 1 and max(abs(pts[0][0] - pts[-1][0]), abs(pts[0][1] - pts[-1][1])) < MERGE_TOL:
        pts.pop()
    # drop vertices lying on a straight edge
    changed = True
    while changed and len(pts) > 3:
        changed = False
        for i in range(len(pts)):
            o, p, q = pts[i - 1], pts[i], pts[(i + 1) % len(pts)]
            cross = (p[0] - o[0]) * (q[1] - o[1]) - (p[1] - o[1]) * (q[0] - o[0])
            if abs(cross) < MERGE_TOL:
                pts.pop(i)
                changed = True
                break
    return np.array(pts, dtype=float)


def _signed_area(v: np.ndarray) -> float:
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def constraint_halfplanes(geom: RobotGeometry) -> list[tuple[float, float, float]]:
    """All limits as ``a*v_x + b*w_z <= c`` rows in the body frame."""
    half_b = geom.base_width / 2.0
    wheel_lim = geom.wheel_radius * geom.max_wheel_speed
    v_lim, w_lim = geom.max_linear_speed, geom.max_angular_speed
    return [
        (1.0, 0.0, v_lim),
        (-1.0, 0.0, v_lim),
        (0.0, 1.0, w_lim),
        (0.0, -1.0, w_lim),
        # r*w_l = v_x - w_z*b/2 and r*w_r = v_x + w_z*b/2, each within +-r*w_max
        (1.0, -half_b, wheel_lim),
        (-1.0, half_b, wheel_lim),
        (1.0, half_b, wheel_lim),
        (-1.0, -half_b, wheel_lim),
    ]


@dataclass(frozen=True)
class CommandPolygon:
    geom: RobotGeometry
    vertices: np.ndarray  # (k, 2) body frame (v_x, w_z), counter-clockwise

    @property
    def wheel_vertices(self) -> np.ndarray:
        w = idd_inverse(self.geom, BodyVelocity(self.vertices[:, 0], 0.0, self.vertices[:, 1]))
        return np.column_stack(w)

    @property
    def area(self) -> float:
        return _signed_area(self.vertices)

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        lo = self.vertices.min(axis=0)
        hi = self.vertices.max(axis=0)
        return float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1])

    @property
    def centroid(self) -> np.ndarray:
        v = self.vertices
        nxt = np.roll(v, -1, axis=0)
        cross = v[:, 0] * nxt[:, 1] - nxt[:, 0] * v[:, 1]
        return ((v + nxt) * cross[:, None]).sum(axis=0) / (3.0 * cross.sum())

    def contains(self, points, frame: str = "body", tol: float = 1e-9) -> np.ndarray:
        """Boolean mask of points inside (or on) the polygon.

        ``points`` is an ``(n, 2)`` array of ``(v_x, w_z)`` for ``frame="body"``
        or ``(w_l, w_r)`` for ``frame="wheel"``.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        verts = self.vertices if frame == "body" else self.wheel_vertices
        if frame == "wheel" and _signed_area(verts) < 0:
            verts = verts[::-1]
        edges = np.roll(verts, -1, axis=0) - verts
        rel = pts[:, None, :] - verts[None, :, :]
        cross = edges[None, :, 0] * rel[:, :, 1] - edges[None, :, 1] * rel[:, :, 0]
        scale = np.hypot(edges[:, 0], edges[:, 1])[None, :]
        return np.all(cross >= -tol * scale, axis=1)


def build_polygon(geom: RobotGeometry) -> CommandPolygon:
    """Intersect the wheel speed square with the body speed rectangle."""
    v_lim, w_lim = geom.max_linear_speed, geom.max_angular_speed
    poly = [(-v_lim, -w_lim), (v_lim, -w_lim), (v_lim, w_lim), (-v_lim, w_lim)]
    for a, b, c in constraint_halfplanes(geom)[4:]:
        poly = _clip(poly, a, b, c)
    verts = _cleanup(poly)
    assert len(verts) >= 3 and _signed_area(verts) > 0, "empty command polygon"
    return CommandPolygon(geom, verts)


@dataclass(frozen=True)
class SampleSet:
    geom: RobotGeometry
    wheel: np.ndarray  # (s, 2) commanded (w_l, w_r)
    seed: int

    def __len__(self):
        return len(self.wheel)

    @property
    def body(self) -> np.ndarray:
        """Commands as ``(v_x, w_z)`` rows."""
        v = idd_forward(self.geom, WheelCommand(self.wheel[:, 0], self.wheel[:, 1]))
        return np.column_stack([v.v_x, v.w_z])

    @property
    def commands(self) -> list[WheelCommand]:
        return [WheelCommand(float(a), float(b)) for a, b in self.wheel]


def sample_uniform(poly: CommandPolygon, s: int, seed: int | np.random.Generator) -> SampleSet:
    """Draw ``s`` commands uniformly over the wheel frame polygon.

    Rejection sampling from the bounding box. The IDD map is linear so a
    uniform density in the wheel frame is uniform in the body frame too.
    """
    if s < 1:
        raise ValueError(f"need at least one sample, got s={s}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    wv = poly.wheel_vertices
    lo, hi = wv.min(axis=0), wv.max(axis=0)
    accepted: list[np.ndarray] = []
    count = 0
    while count < s:
        batch = rng.uniform(lo, hi, size=(max(2 * (s - count), 16), 2))
        keep = batch[poly.contains(batch, frame="wheel", tol=0.0)]
        accepted.append(keep)
        count += len(keep)
    wheel = np.concatenate(accepted)[:s]
    return SampleSet(poly.geom, wheel, seed if isinstance(seed, int) else -1)


def clamp_transition(geom: RobotGeometry, prev_cmd: BodyVelocity, next_cmd: BodyVelocity, dt: float) -> BodyVelocity:
    """One control step from ``prev_cmd`` toward ``next_cmd``.

    Moves along the straight segment between the two commands so the forward
    acceleration stays under ``max_linear_accel``. The segment stays inside
    the convex command polygon. Yaw rate is not separately limited.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    dv = next_cmd.v_x - prev_cmd.v_x
    max_step = geom.max_linear_accel * dt
    if abs(dv) <= max_step * (1.0 + 1e-12):
        return BodyVelocity(next_cmd.v_x, 0.0, next_cmd.w_z)
    frac = max_step / abs(dv)
    return BodyVelocity(
        prev_cmd.v_x + math.copysign(max_step, dv),
        0.0,
        prev_cmd.w_z + frac * (next_cmd.w_z - prev_cmd.w_z),
    )
