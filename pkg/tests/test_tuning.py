import numpy as np
import pytest

from drive.model import HUSKY, WARTHOG
from drive.terrain import preset_params
from drive.tuning import (HUSKY_YAW_TARGETS, ICE_RATIO_TARGET, calibrate_ice_grip, calibrate_yaw_saturation,
                          ice_rho_ratio, steady_rho, steady_yaw_slip)


@pytest.mark.parametrize("name,target", sorted(HUSKY_YAW_TARGETS.items()))
def test_shipped_husky_presets_hit_targets(name, target):
    med = float(np.median(steady_yaw_slip(HUSKY, preset_params(name, HUSKY))))
    assert med == pytest.approx(target, abs=1e-6)


def test_shipped_ice_ratio():
    ratio = np.median(steady_rho(WARTHOG, preset_params("ice", WARTHOG))) / np.median(
        steady_rho(WARTHOG, preset_params("asphalt", WARTHOG)))
    assert ratio == pytest.approx(ICE_RATIO_TARGET, abs=1e-6)


def test_calibration_recovers_shipped_values():
    w_sat = calibrate_yaw_saturation(HUSKY, "grass", HUSKY_YAW_TARGETS["grass"])
    assert w_sat == pytest.approx(preset_params("grass", HUSKY).w_sat, rel=1e-6)
    assert calibrate_ice_grip(WARTHOG, ICE_RATIO_TARGET) == pytest.approx(1.0, rel=1e-6)


def test_ice_ratio_is_configurable():
    for target in (1.3, 2.0):
        scale = calibrate_ice_grip(WARTHOG, target)
        assert ice_rho_ratio(WARTHOG, scale) == pytest.approx(target, abs=1e-6)


def test_pooled_baseline():
    pooled = ("grass", "gravel", "asphalt")
    scale = calibrate_ice_grip(WARTHOG, 1.6, baseline=pooled)
    assert ice_rho_ratio(WARTHOG, scale, pooled) == pytest.approx(1.6, abs=1e-6)


def test_unreachable_targets():
    with pytest.raises(ValueError):
        calibrate_yaw_saturation(HUSKY, "mud", 50.0)
    with pytest.raises(ValueError):
        calibrate_ice_grip(WARTHOG, 100.0)
