"""``drive`` command line: simulate runs, reduce them to grids and risk data."""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from .command_space import build_polygon
from .io import format_grid, format_log, format_polygon, format_risk, format_values, read_log
from .metric import MOTION_FILTERS, max_kinetic_energy, measured_energy, metric_grid, risk_points, sample_unpredictability
from .model import GEOMETRY_PRESETS, BodyVelocity, RobotGeometry, idd_inverse, load_geometry, read_config
from .protocol import H_CALIB_S, DriveRun, run_drive, segment
from .slip import CHANNELS, auto_sigma, compute_slip, grid_axes, smooth_grid, stack
from .terrain import PRESET_NAMES, SafeZone, steady_state_velocity, terrain_from_config, terrain_preset

DEFAULT_ZONES = {"warthog": "20x45", "husky": "9x6"}


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # one line instead of the usage block
        self.exit(2, f"{self.prog}: error: {message}\n")


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _default_zone(geom: RobotGeometry, h_calib: float) -> SafeZone:
    for name, g in GEOMETRY_PRESETS.items():
        if g == geom and name in DEFAULT_ZONES:
            return SafeZone.from_size(DEFAULT_ZONES[name])
    side = math.ceil(1.5 * geom.max_linear_speed * h_calib)
    return SafeZone(side / 2.0, side / 2.0)


def _slip_samples(run: DriveRun):
    return [compute_slip(segment(ep), run.geom) for ep in run.episodes]


def _sigma(arg: str, samples, poly, res: float):
    if arg == "auto":
        u, _ = stack(samples, "gx")
        return auto_sigma(u, poly, res)
    try:
        return float(arg)
    except ValueError:
        raise CliError(f"--sigma must be a number or 'auto', got {arg!r}") from None


def cmd_run_sim(a) -> None:
    geom = load_geometry(a.geom)
    if a.terrain_config:
        values = read_config(a.terrain_config)
        values.setdefault("preset", a.terrain)
        values.setdefault("noise_std", str(a.noise))
        terrain = terrain_from_config(values, geom)
    else:
        terrain = terrain_preset(a.terrain, geom, noise_std=a.noise)
    zone = SafeZone.from_size(a.zone) if a.zone else _default_zone(geom, a.h_calib)
    run = run_drive(build_polygon(geom), terrain, zone, a.steps, a.h_calib, a.seed)
    _emit(format_log(run), a.out)


def cmd_analyze(a) -> None:
    run = read_log(a.input)
    samples = _slip_samples(run)
    if not samples:
        raise CliError(f"{a.input}: log has no episodes")
    poly = build_polygon(run.geom)
    grid = smooth_grid(samples, a.channel, a.res, _sigma(a.sigma, samples, poly, a.res), poly, strict=a.strict)
    _emit(format_grid(grid), a.out)


def cmd_metric(a) -> None:
    run = read_log(a.input)
    geom = load_geometry(a.geom) if a.geom else run.geom
    samples = [compute_slip(segment(ep), geom) for ep in run.episodes]
    if not samples:
        raise CliError(f"{a.input}: log has no episodes")
    if a.per_episode:
        rho = sample_unpredictability(geom, samples)
        energy = measured_energy(geom, samples)
        rows = [(i, float(s.command_body[0]), float(s.command_body[1]), float(r), float(e))
                for i, (s, r, e) in enumerate(zip(samples, rho, energy))]
        _emit(format_values("episode_id,cmd_vx,cmd_wz,rho,energy", rows), a.out)
        return
    poly = build_polygon(geom)
    grid = metric_grid(samples, geom, a.res, _sigma(a.sigma, samples, poly, a.res), poly)
    _emit(format_grid(grid), a.out)


def cmd_riskmap(a) -> None:
    paths = [p for p in a.input.split(",") if p]
    if not paths:
        raise CliError("--in needs at least one log")
    runs, geoms, k_max = {}, {}, {}
    for p in paths:
        run = read_log(p)
        name = run.terrain or Path(p).stem
        if name in runs:
            name = f"{name}:{Path(p).stem}"
        runs[name] = _slip_samples(run)
        geoms[name] = run.geom
        k_max[name] = max_kinetic_energy(run.geom)
    _, summaries = risk_points(runs, geoms, a.motion)
    _emit(format_risk(summaries, k_max), a.out)


def cmd_export_polygon(a) -> None:
    _emit(format_polygon(build_polygon(load_geometry(a.geom))), a.out)


def cmd_export_grid(a) -> None:
    """Grid nodes inside the polygon, with the steady-state truth of a terrain if given."""
    geom = load_geometry(a.geom)
    poly = build_polygon(geom)
    vx, wz = grid_axes(poly.bounds, a.res)
    nodes = np.stack(np.meshgrid(vx, wz, indexing="ij"), axis=-1).reshape(-1, 2)
    nodes = nodes[poly.contains(nodes)]
    if not a.terrain:
        _emit(format_values("vx,wz", [(float(v), float(w)) for v, w in nodes]), a.out)
        return
    terrain = terrain_preset(a.terrain, geom)
    cmd = idd_inverse(geom, BodyVelocity(nodes[:, 0], 0.0, nodes[:, 1]))
    wheels, body = steady_state_velocity(geom, terrain, cmd)
    truth = {
        "gx": nodes[:, 0] - body.v_x,
        "gy": -np.asarray(body.v_y) * np.ones(len(nodes)),
        "gtheta": nodes[:, 1] - body.w_z,
        "wheel_l": cmd.w_l - wheels.w_l,
        "wheel_r": cmd.w_r - wheels.w_r,
    }[a.channel]
    _emit(format_values("vx,wz,value", [(float(v), float(w), float(g)) for (v, w), g in zip(nodes, truth)]), a.out)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="drive", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("run-sim", help="simulate a command-hold run and write its log")
    s.add_argument("--terrain", default="perfect", choices=PRESET_NAMES)
    s.add_argument("--terrain-config", help="key=value file of terrain overrides")
    s.add_argument("--steps", type=int, default=150, help="number of sampled commands")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--zone", help="safe zone WxH in metres (default depends on the robot)")
    s.add_argument("--geom", default="warthog", help="preset name or key=value geometry file")
    s.add_argument("--noise", type=float, default=0.05, help="measurement noise std")
    s.add_argument("--h-calib", type=float, default=H_CALIB_S, help="hold duration (s)")
    s.add_argument("--out")
    s.set_defaults(func=cmd_run_sim)

    s = sub.add_parser("analyze", help="smooth one slip channel over the command space")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--channel", default="gx", choices=CHANNELS)
    s.add_argument("--res", type=float, default=0.1)
    s.add_argument("--sigma", default="auto", help="covariance diagonal, or 'auto'")
    s.add_argument("--strict", action="store_true", help="use the exponent without the -1/2 factor")
    s.add_argument("--out")
    s.set_defaults(func=cmd_analyze)

    s = sub.add_parser("metric", help="unpredictability grid (or per-episode values) of a run")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--geom", help="geometry override; default is the log's metadata")
    s.add_argument("--res", type=float, default=0.1)
    s.add_argument("--sigma", default="auto")
    s.add_argument("--per-episode", action="store_true")
    s.add_argument("--out")
    s.set_defaults(func=cmd_metric)

    s = sub.add_parser("riskmap", help="per-scenario risk medians and 95%% ellipses")
    s.add_argument("--in", dest="input", required=True, help="comma separated logs")
    s.add_argument("--motion", default="all", choices=tuple(MOTION_FILTERS))
    s.add_argument("--out")
    s.set_defaults(func=cmd_riskmap)

    s = sub.add_parser("export-polygon", help="command polygon vertices in both frames")
    s.add_argument("--geom", default="warthog")
    s.add_argument("--out")
    s.set_defaults(func=cmd_export_polygon)

    s = sub.add_parser("export-grid", help="grid nodes, optionally with a terrain's true slip")
    s.add_argument("--geom", default="warthog")
    s.add_argument("--res", type=float, default=0.1)
    s.add_argument("--terrain", choices=PRESET_NAMES)
    s.add_argument("--channel", default="gx", choices=CHANNELS)
    s.add_argument("--out")
    s.set_defaults(func=cmd_export_grid)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        args.func(args)
    except (CliError, OSError, ValueError, KeyError, RuntimeError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"drive {args.command}: error: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
