"""CSV run logs and the small CSV outputs of the analysis commands.

A run log is ``# key=value`` metadata lines, the fixed header, then one row
per 20 Hz sample grouped by ``episode_id``. Floats are written with ``repr``
so reading a log back gives bit-identical values.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .command_space import CommandPolygon
from .metric import RiskSummary
from .model import WheelCommand
from .protocol import DriveRun, Episode, samples_per_episode
from .slip import SlipGrid

HEADER = ("t,episode_id,cmd_wl,cmd_wr,meas_wl,meas_wr,cmd_vx,cmd_wz,meas_vx,meas_vy,meas_wz,"
          "pose_x,pose_y,pose_yaw")
COLUMNS = HEADER.split(",")
SPACING_TOL = 1e-6


class LogFormatError(ValueError):
    """Malformed run log; the message names the offending line."""


def _fmt(x: float) -> str:
    return repr(float(x))


def format_log(run: DriveRun) -> str:
    lines = [f"# {k}={v}" for k, v in run.metadata().items()]
    lines.append(HEADER)
    for eid, ep in enumerate(run.episodes):
        body = ep.command_body(run.geom)
        const = [_fmt(ep.command[0]), _fmt(ep.command[1])]
        cmd_b = [_fmt(body.v_x), _fmt(body.w_z)]
        for i in range(len(ep)):
            row = [_fmt(ep.t[i]), str(eid), *const, _fmt(ep.meas_wheels[i, 0]), _fmt(ep.meas_wheels[i, 1]),
                   *cmd_b, *(_fmt(v) for v in ep.meas_body[i]), *(_fmt(v) for v in ep.pose[i])]
            lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def write_log(run: DriveRun, path: str | Path) -> None:
    Path(path).write_text(format_log(run))


def read_log(path: str | Path) -> DriveRun:
    """Parse and validate a run log."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such log file: {path}")
    meta: dict[str, str] = {}
    header_seen = False
    groups: dict[int, list[tuple[int, list[float]]]] = {}
    order: list[int] = []
    with path.open() as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            if line.startswith("#"):
                if header_seen:
                    raise LogFormatError(f"{path}:{lineno}: metadata after the header")
                body = line[1:].strip()
                if "=" in body:
                    k, v = body.split("=", 1)
                    meta[k.strip()] = v.strip()
                continue
            if not header_seen:
                if line.strip() != HEADER:
                    raise LogFormatError(f"{path}:{lineno}: bad header, expected {HEADER!r}")
                header_seen = True
                continue
            parts = line.split(",")
            if len(parts) != len(COLUMNS):
                raise LogFormatError(f"{path}:{lineno}: expected {len(COLUMNS)} fields, got {len(parts)}")
            try:
                eid = int(parts[1])
                vals = [float(p) for p in parts]
            except ValueError:
                raise LogFormatError(f"{path}:{lineno}: non-numeric field") from None
            if eid not in groups:
                if order and eid < order[-1]:
                    raise LogFormatError(f"{path}:{lineno}: episode {eid} out of order")
                groups[eid] = []
                order.append(eid)
            elif eid != order[-1]:
                raise LogFormatError(f"{path}:{lineno}: rows of episode {eid} are not contiguous")
            groups[eid].append((lineno, vals))
    if not header_seen:
        raise LogFormatError(f"{path}: missing header line")

    dt = float(meta.get("dt", 0.05))
    n_hold = samples_per_episode(float(meta.get("h_calib", 6.0)), dt)
    episodes = []
    for eid in order:
        rows = groups[eid]
        if len(rows) != n_hold:
            raise LogFormatError(
                f"{path}:{rows[-1][0]}: episode {eid} has {len(rows)} rows, expected {n_hold}")
        arr = np.array([v for _, v in rows])
        steps = np.diff(arr[:, 0])
        bad = np.flatnonzero((steps <= 0) | (np.abs(steps - dt) > SPACING_TOL))
        if bad.size:
            raise LogFormatError(
                f"{path}:{rows[bad[0] + 1][0]}: timestamps in episode {eid} must increase by {dt:g} s")
        episodes.append(Episode(
            command=WheelCommand(float(arr[0, 2]), float(arr[0, 3])),
            t=arr[:, 0].copy(),
            meas_wheels=arr[:, 4:6].copy(),
            meas_body=arr[:, 8:11].copy(),
            pose=arr[:, 11:14].copy(),
        ))
    try:
        return DriveRun.from_metadata(meta, episodes)
    except ValueError as exc:
        raise LogFormatError(f"{path}: bad metadata: {exc}") from None


def format_grid(grid: SlipGrid) -> str:
    lines = ["vx,wz,value,support"]
    for vx, wz, val, sup in grid.rows():
        lines.append(f"{_fmt(vx)},{_fmt(wz)},{'' if val is None else _fmt(val)},{_fmt(sup)}")
    return "\n".join(lines) + "\n"


def read_grid(path: str | Path) -> list[tuple[float, float, float, float]]:
    """Rows of a grid CSV; missing values come back as NaN."""
    out = []
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != "vx,wz,value,support":
        raise LogFormatError(f"{path}: not a grid file")
    for line in lines[1:]:
        vx, wz, val, sup = line.split(",")
        out.append((float(vx), float(wz), float(val) if val else math.nan, float(sup)))
    return out


def format_polygon(poly: CommandPolygon) -> str:
    lines = ["frame,v1,v2"]
    lines += [f"body,{_fmt(a)},{_fmt(b)}" for a, b in poly.vertices]
    lines += [f"wheel,{_fmt(a)},{_fmt(b)}" for a, b in poly.wheel_vertices]
    return "\n".join(lines) + "\n"


RISK_HEADER = ("scenario,motion,n,median_rho,median_energy,center_rho,center_energy,"
               "semi_major,semi_minor,angle")


def format_risk(summaries: Sequence[RiskSummary], k_max: dict[str, float] | None = None) -> str:
    lines = [f"# k_max_{name}={_fmt(v)}" for name, v in (k_max or {}).items()]
    lines.append(RISK_HEADER)
    for s in summaries:
        lines.append(",".join([s.scenario, s.motion, str(s.n)] + [_fmt(v) for v in (
            s.median_rho, s.median_energy, s.center_rho, s.center_energy, s.semi_major, s.semi_minor, s.angle)]))
    return "\n".join(lines) + "\n"


def format_values(header: str, rows: Iterable[Sequence]) -> str:
    lines = [header]
    for r in rows:
        lines.append(",".join(_fmt(v) if isinstance(v, (float, np.floating)) else str(v) for v in r))
    return "\n".join(lines) + "\n"
