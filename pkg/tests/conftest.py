import numpy as np
import pytest
from hypothesis import settings, strategies as st

from drive.model import RobotGeometry

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

pos = st.floats(min_value=0.05, max_value=20.0, allow_nan=False, allow_infinity=False)


@st.composite
def geometries(draw):
    return RobotGeometry(
        mass=draw(st.floats(1.0, 1000.0)),
        base_width=draw(st.floats(0.2, 2.0)),
        wheel_radius=draw(st.floats(0.05, 0.6)),
        body_depth=draw(st.floats(0.2, 3.0)),
        body_height=draw(st.floats(0.1, 2.0)),
        max_wheel_speed=draw(st.floats(0.5, 40.0)),
        max_linear_speed=draw(st.floats(0.1, 10.0)),
        max_angular_speed=draw(st.floats(0.1, 10.0)),
        max_linear_accel=draw(st.floats(0.1, 10.0)),
    )


def make_geom(**kw):
    base = dict(mass=10.0, base_width=1.0, wheel_radius=0.5, body_depth=1.0, body_height=1.0,
                max_wheel_speed=10.0, max_linear_speed=4.0, max_angular_speed=6.0, max_linear_accel=4.0)
    base.update(kw)
    return RobotGeometry(**base)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
