import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from drive.command_space import build_polygon
from drive.metric import (alignment_penalties, covariance_ellipse, kinetic_energies, max_kinetic_energy,
                          metric_grid, planar_pair, rho_from_energies, risk_points, unpredictability)
from drive.model import HUSKY, WARTHOG, inertia_matrix
from drive.protocol import run_drive, segment
from drive.slip import SlipSample, compute_slip
from drive.terrain import SafeZone, terrain_preset

from conftest import make_geom

energy = st.floats(0.0, 1e12, allow_nan=False)
# exact zero or physically sized magnitudes; squares of ~1e-160 underflow to 0
vel = st.one_of(st.just(0.0), st.floats(1e-6, 20), st.floats(-20, -1e-6))


def scalar_rho(geom, u_vx, u_wz, x_vx, x_vy, x_wz):
    """Direct scalar evaluation, written independently of the vectorized code."""
    izz = geom.mass / 12.0 * (geom.body_depth**2 + geom.base_width**2)
    ku = 0.5 * geom.mass * u_vx**2 + 0.5 * izz * u_wz**2
    nu, nx = abs(u_vx), math.hypot(x_vx, x_vy)
    alpha = 1.0 if nu == 0 or nx == 0 else 0.5 * (u_vx * x_vx / (nu * nx) + 1)
    beta = 1.0 if u_wz == 0 or x_wz == 0 else 0.5 * (math.copysign(1, u_wz * x_wz) + 1)
    kx = alpha * 0.5 * geom.mass * (x_vx**2 + x_vy**2) + beta * 0.5 * izz * x_wz**2
    return abs(math.atan2(ku, kx) - math.pi / 4) / (math.pi / 4)


def test_energy_examples():
    g = make_geom(mass=470.0)
    assert kinetic_energies(g, [0, 0, 0], [0, 0, 0]) == (0.0, 0.0)
    assert kinetic_energies(g, [2.0, 0, 0], [0, 0, 0])[0] == pytest.approx(940.0)
    izz = inertia_matrix(g)[2, 2]
    assert kinetic_energies(g, [0, 0, 0], [0, 0, 1.5])[1] == pytest.approx(0.5 * izz * 1.5**2)


def test_alignment_cases():
    t = np.array([1.0, 0.0, 0.0])
    z = np.zeros(3)
    cases = [(t, 1.0), (-t, 0.0), (np.array([0.0, 1.0, 0.0]), 0.5), (z, 1.0)]
    for x, expected in cases:
        a, _ = alignment_penalties((t, z), (x, z))
        assert a == pytest.approx(expected)


def test_rho_examples():
    assert rho_from_energies(3.0, 3.0) == 0.0
    assert rho_from_energies(3.0, 0.0) == 1.0
    assert rho_from_energies(0.0, 0.0) == 0.0
    assert rho_from_energies(0.0, 0.0, literal_zero=True) == 1.0
    g = make_geom(mass=470.0)
    rho = unpredictability(g, planar_pair(2.0, 0.0, 1.0, 0.0, 0.0))
    assert rho == pytest.approx(abs(math.atan(4.0) - math.pi / 4) / (math.pi / 4), abs=1e-15)


@given(vel, vel, vel, vel, vel)
def test_rho_matches_scalar_oracle(u_vx, u_wz, x_vx, x_vy, x_wz):
    for g in (WARTHOG, HUSKY):
        got = float(unpredictability(g, planar_pair(u_vx, u_wz, x_vx, x_vy, x_wz)))
        if u_vx == u_wz == x_vx == x_vy == x_wz == 0:
            assert got == 0.0
        else:
            assert got == pytest.approx(scalar_rho(g, u_vx, u_wz, x_vx, x_vy, x_wz), abs=1e-12)


@given(energy, energy)
def test_bounds_and_symmetry(a, b):
    r = rho_from_energies(a, b)
    assert 0.0 <= r <= 1.0
    assert r == rho_from_energies(b, a)


@given(vel, vel, vel, vel, vel, st.floats(1e-3, 1e3))
def test_scale_invariance(u_vx, u_wz, x_vx, x_vy, x_wz, lam):
    # aligned directions keep alpha = beta = 1
    x_vx, x_vy, x_wz = abs(x_vx) * np.sign(u_vx), 0.0, abs(x_wz) * np.sign(u_wz)
    a = unpredictability(WARTHOG, planar_pair(u_vx, u_wz, x_vx, x_vy, x_wz))
    b = unpredictability(WARTHOG, planar_pair(lam * u_vx, lam * u_wz, lam * x_vx, lam * x_vy, lam * x_wz))
    assert a == pytest.approx(b, abs=1e-12)


@given(st.floats(1e-6, 1e6))
def test_monotonic_in_measured_energy(ku):
    kx = np.concatenate([np.linspace(0, ku, 50), np.linspace(ku, 10 * ku, 50)])
    r = rho_from_energies(ku, kx)
    assert np.all(np.diff(r[:50]) <= 1e-15) and np.all(np.diff(r[50:]) >= -1e-15)


@given(energy, energy)
def test_zero_iff_equal_positive(a, b):
    if rho_from_energies(a, b) == 0.0:
        assert a == b
    if a == b and a > 0:
        assert rho_from_energies(a, b) == 0.0


def test_immobilized_is_one():
    for u in [(1.0, 0.0), (0.0, 2.0), (-3.0, 1.0)]:
        assert unpredictability(WARTHOG, planar_pair(*u, 0.0, 0.0, 0.0)) == 1.0


def test_metric_grids():
    geom, poly = WARTHOG, build_polygon(WARTHOG)
    zone = SafeZone.from_size("20x45")
    perfect = run_drive(poly, terrain_preset("perfect", geom), zone, 40, seed=1)
    samples = [compute_slip(segment(ep), geom) for ep in perfect.episodes]
    grid = metric_grid(samples, geom, 0.2, 0.64, poly)
    assert np.all(grid.values[grid.valid()] < 1e-9)
    ice = run_drive(poly, terrain_preset("ice", geom), zone, 60, seed=1)
    samples = [compute_slip(segment(ep), geom) for ep in ice.episodes]
    grid = metric_grid(samples, geom, 0.2, 0.64, poly)
    j = int(np.argmin(np.abs(grid.wz)))
    i_slow, i_fast = int(np.argmin(np.abs(grid.vx - 1.0))), int(np.argmin(np.abs(grid.vx - 4.0)))
    assert grid.values[i_fast, j] > grid.values[i_slow, j]


def test_max_kinetic_energy_at_vertex():
    poly = build_polygon(WARTHOG)
    k = max_kinetic_energy(WARTHOG, poly)
    assert k == pytest.approx(0.5 * 470.0 * 25.0)


def fake(vx, wz, meas):
    cmd = np.array([vx, wz])
    return SlipSample(np.zeros(2), cmd, np.zeros(2), np.array([vx, 0.0, wz]) - np.asarray(meas))


def test_risk_regions():
    rng = np.random.default_rng(0)
    stationary = [fake(v, 0.0, [0.01 * rng.normal(), 0.0, 0.0]) for v in rng.uniform(1, 2, 30)]
    fast = [fake(v, 0.0, [v, 0.0, 0.0]) for v in rng.uniform(4.5, 5.0, 30)]
    pts, summ = risk_points({"stuck": stationary, "fast": fast}, WARTHOG)
    by = {s.scenario: s for s in summ}
    assert by["stuck"].median_rho > 0.9 and by["stuck"].median_energy < 1.0
    assert by["fast"].median_rho < 1e-9 and by["fast"].median_energy > 4000
    assert len(pts) == 60


def test_risk_filters():
    samples = [fake(4.5, 0.1, [4.0, 0.0, 0.1])] * 6 + [fake(0.2, 3.9, [0.1, 0.0, 3.0])] * 2
    _, s = risk_points({"a": samples}, WARTHOG, "forward")
    assert s[0].n == 6
    with pytest.raises(ValueError):
        risk_points({"a": samples}, WARTHOG, "turn")
    with pytest.raises(KeyError):
        risk_points({"a": samples}, WARTHOG, "sideways")


def test_covariance_ellipse_axes():
    rng = np.random.default_rng(3)
    pts = rng.normal(size=(20000, 2)) * [3.0, 1.0]
    c, a, b, ang = covariance_ellipse(pts)
    k = math.sqrt(-2 * math.log(0.05))  # chi-square with 2 dof has a closed form quantile
    assert a == pytest.approx(3.0 * k, rel=0.03) and b == pytest.approx(k, rel=0.03)
    assert abs(math.sin(ang)) < 0.05
    inside = ((pts - c) @ np.linalg.inv(np.cov(pts, rowvar=False)) * (pts - c)).sum(axis=1) <= k * k
    assert inside.mean() == pytest.approx(0.95, abs=0.01)
