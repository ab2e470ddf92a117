"""Steady-state slip per command and kernel-smoothed slip grids."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .command_space import CommandPolygon
from .model import RobotGeometry, idd_forward
from .protocol import WindowedEpisode

CHANNELS = ("gx", "gy", "gtheta", "wheel_l", "wheel_r")
LOW_SUPPORT_FRACTION = 0.01


@dataclass(frozen=True)
class SlipSample:
    command_wheel: np.ndarray  # (w_l, w_r)
    command_body: np.ndarray  # (v_x, w_z)
    wheel_slip: np.ndarray  # (g_l, g_r), rad/s
    body_slip: np.ndarray  # (g_vx, g_vy, g_wz)

    def channel(self, name: str) -> float:
        return float(_channel_value(self, name))

    @property
    def measured_body(self) -> np.ndarray:
        """Realized (v_x, v_y, w_z) recovered from command minus slip."""
        return np.array([self.command_body[0], 0.0, self.command_body[1]]) - self.body_slip


def _channel_value(s: SlipSample, name: str):
    idx = {"gx": ("body", 0), "gy": ("body", 1), "gtheta": ("body", 2), "wheel_l": ("wheel", 0),
           "wheel_r": ("wheel", 1)}
    if name not in idx:
        raise KeyError(f"unknown channel {name!r}; choose from {', '.join(CHANNELS)}")
    frame, i = idx[name]
    return s.body_slip[i] if frame == "body" else s.wheel_slip[i]


def compute_slip(w: WindowedEpisode, geom: RobotGeometry) -> SlipSample:
    """Command minus steady mean, in both frames."""
    cmd = np.asarray(w.episode.command, dtype=float)
    body = idd_forward(geom, w.episode.command)
    cmd_body = np.array([float(body.v_x), 0.0, float(body.w_z)])
    return SlipSample(
        command_wheel=cmd,
        command_body=cmd_body[[0, 2]],
        wheel_slip=cmd - w.steady_mean_wheel_speeds,
        body_slip=cmd_body - w.steady_mean_body_velocity,
    )


def stack(samples: Sequence[SlipSample], channel: str) -> tuple[np.ndarray, np.ndarray]:
    """Commands as an (n, 2) array of (v_x, w_z) and the channel values."""
    if not samples:
        raise ValueError("no slip samples")
    u = np.array([s.command_body for s in samples], dtype=float)
    g = np.array([_channel_value(s, channel) for s in samples], dtype=float)
    return u, g


def _as_variances(sigma) -> np.ndarray:
    var = np.broadcast_to(np.asarray(sigma, dtype=float), (2,)).copy()
    if var.ndim != 1 or not np.all(var > 0) or not np.all(np.isfinite(var)):
        raise ValueError(f"covariance diagonal must be positive, got {sigma!r}")
    return var


def _exponent(u, u_node, var, strict: bool):
    d = np.asarray(u, dtype=float) - np.asarray(u_node, dtype=float)
    q = np.sum(d * d / var, axis=-1)
    # the printed form has no -1/2 and grows with distance; kept only for comparison
    return q if strict else -0.5 * q


def kernel_weight(u, u_node, sigma, strict: bool = False):
    """2-D Gaussian weight of command ``u`` for grid node ``u_node``.

    ``sigma`` is the diagonal of the covariance (variances), either a scalar
    for the isotropic case or a pair.
    """
    var = _as_variances(sigma)
    norm = 1.0 / (2.0 * math.pi * math.sqrt(float(np.prod(var))))
    return norm * np.exp(_exponent(u, u_node, var, strict))


def grid_axes(bounds: tuple[float, float, float, float], resolution: float) -> tuple[np.ndarray, np.ndarray]:
    """Uniform ticks covering ``(vx_min, wz_min, vx_max, wz_max)``."""
    if not resolution > 0:
        raise ValueError("resolution must be > 0")
    axes = []
    for lo, hi in ((bounds[0], bounds[2]), (bounds[1], bounds[3])):
        i0 = math.floor(lo / resolution + 1e-9)
        i1 = math.ceil(hi / resolution - 1e-9)
        axes.append(np.round(np.arange(i0, i1 + 1) * resolution, 12))
    return axes[0], axes[1]


@dataclass
class SlipGrid:
    """Smoothed values on a (v_x, w_z) mesh; arrays are indexed ``[i_vx, j_wz]``."""

    vx: np.ndarray
    wz: np.ndarray
    values: np.ndarray
    support: np.ndarray
    inside: np.ndarray
    missing: np.ndarray
    sigma: np.ndarray
    channel: str = ""

    @property
    def nodes(self) -> np.ndarray:
        gx, gw = np.meshgrid(self.vx, self.wz, indexing="ij")
        return np.stack([gx, gw], axis=-1)

    def valid(self) -> np.ndarray:
        return self.inside & ~self.missing

    def rows(self) -> Iterable[tuple[float, float, float | None, float]]:
        """(vx, wz, value or None, support) for nodes inside the polygon."""
        for i, v in enumerate(self.vx):
            for j, w in enumerate(self.wz):
                if not self.inside[i, j]:
                    continue
                val = None if self.missing[i, j] else float(self.values[i, j])
                yield float(v), float(w), val, float(self.support[i, j])


def kernel_smooth(
    u: np.ndarray,
    g: np.ndarray,
    resolution: float,
    sigma,
    polygon: CommandPolygon | None = None,
    *,
    strict: bool = False,
    low_support: float = LOW_SUPPORT_FRACTION,
    channel: str = "",
) -> SlipGrid:
    """Nadaraya-Watson average of ``g`` at every grid node.

    Weights are normalized per node, so the kernel's constant factor only
    matters for ``support``. Exponents are shifted by their per-node maximum
    before exponentiation so small covariances do not underflow to 0/0.
    """
    u = np.asarray(u, dtype=float).reshape(-1, 2)
    g = np.asarray(g, dtype=float).reshape(-1)
    if len(u) == 0:
        raise ValueError("cannot smooth an empty sample list")
    var = _as_variances(sigma)
    bounds = polygon.bounds if polygon is not None else (*u.min(axis=0), *u.max(axis=0))
    vx, wz = grid_axes(bounds, resolution)
    nodes = np.stack(np.meshgrid(vx, wz, indexing="ij"), axis=-1).reshape(-1, 2)

    e = _exponent(u[None, :, :], nodes[:, None, :], var, strict)  # (nodes, samples)
    e_max = e.max(axis=1, keepdims=True)
    w = np.exp(e - e_max)
    values = (w @ g) / w.sum(axis=1)
    norm = 1.0 / (2.0 * math.pi * math.sqrt(float(np.prod(var))))
    with np.errstate(over="ignore"):
        support = norm * np.exp(e_max[:, 0]) * w.sum(axis=1)

    shape = (len(vx), len(wz))
    inside = polygon.contains(nodes).reshape(shape) if polygon is not None else np.ones(shape, bool)
    support = support.reshape(shape)
    ref = support[inside].max() if inside.any() else support.max()
    missing = support < low_support * ref
    return SlipGrid(vx, wz, values.reshape(shape), support, inside, missing, var, channel)


def boundary_distance(points: np.ndarray, polygon: CommandPolygon) -> np.ndarray:
    """Euclidean distance from each (v_x, w_z) point to the polygon outline."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    verts = polygon.vertices
    d = np.full(len(pts), np.inf)
    for p, q in zip(verts, np.roll(verts, -1, axis=0)):
        e = q - p
        t = np.clip((pts - p) @ e / (e @ e), 0.0, 1.0)
        d = np.minimum(d, np.hypot(*(pts - p - t[:, None] * e).T))
    return d


def adequate_support(grid: SlipGrid, polygon: CommandPolygon) -> np.ndarray:
    """Nodes whose one-std kernel disc lies inside the polygon and which are not missing.

    Near the outline the smoother only sees samples from one side and its
    bias grows with the local slope of the surface; these nodes are reported
    but not trusted for accuracy checks.
    """
    std = float(np.sqrt(np.max(grid.sigma)))
    d = boundary_distance(grid.nodes.reshape(-1, 2), polygon).reshape(grid.values.shape)
    return grid.valid() & (d >= std)


def smooth_grid(
    samples: Sequence[SlipSample],
    channel: str,
    resolution: float,
    sigma,
    polygon: CommandPolygon | None = None,
    **kw,
) -> SlipGrid:
    """Transfer function grid of one slip channel over the command space."""
    if not samples:
        raise ValueError("cannot smooth an empty sample list")
    u, g = stack(samples, channel)
    return kernel_smooth(u, g, resolution, sigma, polygon, channel=channel, **kw)


def mean_count_within_sigma(u: np.ndarray, nodes: np.ndarray, std: float) -> float:
    d2 = np.sum((nodes[:, None, :] - u[None, :, :]) ** 2, axis=-1)
    return float(np.mean(np.sum(d2 <= std * std, axis=1)))


def auto_sigma(u: np.ndarray, polygon: CommandPolygon, resolution: float = 0.1, min_count: float = 4.0) -> float:
    """Smallest isotropic variance giving ``min_count`` samples within one std.

    The count is averaged over the grid nodes inside the polygon. Returns the
    variance (the diagonal entry of the covariance), not the std.
    """
    u = np.asarray(u, dtype=float).reshape(-1, 2)
    if len(u) < min_count:
        raise ValueError(f"need at least {min_count:g} samples to size the kernel")
    vx, wz = grid_axes(polygon.bounds, resolution)
    nodes = np.stack(np.meshgrid(vx, wz, indexing="ij"), axis=-1).reshape(-1, 2)
    nodes = nodes[polygon.contains(nodes)]
    lo, hi = resolution / 100.0, float(np.hypot(*np.ptp(np.vstack([u, nodes]), axis=0)))
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if mean_count_within_sigma(u, nodes, mid) >= min_count:
            hi = mid
        else:
            lo = mid
    return hi * hi


def slip_distribution(
    samples: Sequence[SlipSample],
    channel: str,
    *,
    absolute: bool = False,
    max_vx: float = 4.0,
    max_wz: float = 4.0,
) -> dict[str, float]:
    """Box-plot statistics (quartiles and 95 % whiskers) of one channel.

    Only commands with ``|v_x| <= max_vx`` and ``|w_z| <= max_wz`` count.
    ``absolute`` takes magnitudes first, for symmetric channels like the
    angular slip whose signed median sits near zero.
    """
    u, g = stack(samples, channel)
    keep = (np.abs(u[:, 0]) <= max_vx) & (np.abs(u[:, 1]) <= max_wz)
    g = g[keep]
    if len(g) < 5:
        raise ValueError(f"need at least 5 samples after filtering, got {len(g)}")
    if absolute:
        g = np.abs(g)
    p = np.percentile(g, [2.5, 25, 50, 75, 97.5])
    return {"p2.5": float(p[0]), "q1": float(p[1]), "median": float(p[2]), "q3": float(p[3]),
            "p97.5": float(p[4]), "n": int(len(g))}
