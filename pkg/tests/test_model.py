import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from drive.model import (HUSKY, WARTHOG, BodyVelocity, RobotGeometry, WheelCommand, idd_forward, idd_inverse,
                         inertia_matrix, load_geometry, write_geometry)

from conftest import geometries, make_geom


def test_equal_wheels_translate():
    v = idd_forward(make_geom(), WheelCommand(2.0, 2.0))
    assert (v.v_x, v.v_y, v.w_z) == (1.0, 0.0, 0.0)


def test_zero_command():
    v = idd_forward(WARTHOG, WheelCommand(0.0, 0.0))
    assert (v.v_x, v.v_y, v.w_z) == (0.0, 0.0, 0.0)


def test_opposite_wheels_spin():
    # r/b * (w_r - w_l) = 0.5 / 1.0 * 4
    v = idd_forward(make_geom(), WheelCommand(-2.0, 2.0))
    assert v.v_x == 0.0 and v.w_z == pytest.approx(2.0)


def test_inverse_examples():
    w = idd_inverse(make_geom(), BodyVelocity(1.0, 0.0, 0.0))
    assert (w.w_l, w.w_r) == (2.0, 2.0)
    w = idd_inverse(make_geom(), BodyVelocity(0.0, 0.0, 0.0))
    assert (w.w_l, w.w_r) == (0.0, 0.0)
    g = make_geom(wheel_radius=0.3, base_width=1.2)
    w = idd_inverse(g, BodyVelocity(1.0, 0.0, 1.0))
    # hand solution: r*w = v -+ w_z*b/2
    assert w.w_l == pytest.approx((1.0 - 0.6) / 0.3, abs=1e-12)
    assert w.w_r == pytest.approx((1.0 + 0.6) / 0.3, abs=1e-12)
    back = idd_forward(g, w)
    assert abs(back.v_x - 1.0) < 1e-12 and abs(back.w_z - 1.0) < 1e-12


def test_inertia_unit_cube():
    g = make_geom(mass=12.0, base_width=1.0, body_depth=1.0, body_height=1.0)
    np.testing.assert_array_equal(inertia_matrix(g), np.diag([2.0, 2.0, 2.0]))


def test_inertia_box_by_hand():
    g = make_geom(mass=470.0, base_width=1.5, body_depth=2.0, body_height=1.0)
    expected = [470 / 12 * (1.5**2 + 1.0), 470 / 12 * (4.0 + 1.0), 470 / 12 * (4.0 + 1.5**2)]
    np.testing.assert_allclose(np.diag(inertia_matrix(g)), expected, rtol=1e-15)


@given(geometries(), st.floats(-50, 50), st.floats(-50, 50))
def test_round_trip(geom, wl, wr):
    back = idd_inverse(geom, idd_forward(geom, WheelCommand(wl, wr)))
    assert abs(back.w_l - wl) < 1e-12 * max(1.0, abs(wl), abs(wr))
    assert abs(back.w_r - wr) < 1e-12 * max(1.0, abs(wl), abs(wr))


@given(geometries(), st.floats(-10, 10), *[st.floats(-20, 20)] * 4)
def test_forward_is_linear(geom, a, l1, r1, l2, r2):
    lhs = idd_forward(geom, WheelCommand(a * l1 + l2, a * r1 + r2))
    v1, v2 = idd_forward(geom, WheelCommand(l1, r1)), idd_forward(geom, WheelCommand(l2, r2))
    for x, y, z in zip(lhs, v1, v2):
        assert x == pytest.approx(a * y + z, abs=1e-9)


@given(geometries())
def test_inertia_diagonal_positive(geom):
    i = inertia_matrix(geom)
    assert np.count_nonzero(i - np.diag(np.diag(i))) == 0
    assert np.all(np.diag(i) > 0)


def test_vectorized():
    wl = np.linspace(-5, 5, 11)
    v = idd_forward(WARTHOG, WheelCommand(wl, -wl))
    assert v.v_x.shape == (11,) and np.allclose(v.v_x, 0.0)


@pytest.mark.parametrize("bad", [0.0, -1.0, math.inf, math.nan])
def test_invalid_geometry(bad):
    with pytest.raises(ValueError):
        make_geom(mass=bad)


def test_presets_and_config(tmp_path):
    assert load_geometry("warthog") == WARTHOG
    assert load_geometry("HUSKY") == HUSKY
    p = tmp_path / "robot.cfg"
    write_geometry(HUSKY, p)
    assert load_geometry(p) == HUSKY
    p.write_text("mass=3\n")
    with pytest.raises(ValueError, match="missing"):
        load_geometry(p)
    with pytest.raises(FileNotFoundError):
        load_geometry(tmp_path / "nope.cfg")


def test_preset_speed_limits_consistent():
    # body limits match the wheel limit for straight driving
    for g in (WARTHOG, HUSKY):
        assert g.wheel_radius * g.max_wheel_speed == pytest.approx(g.max_linear_speed)
