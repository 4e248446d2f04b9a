import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fbgshape.core import (
    CalibrationSet,
    CdmConfig,
    InvariantError,
    ParseError,
    WavelengthFrame,
    default_config_text,
    load_config,
    parse_config,
    serialize_config,
    wrap_angle,
)


def _edit(text, key, value):
    lines = [f"{key} = {value}" if ln.split("=")[0].strip() == key else ln for ln in text.splitlines()]
    return "\n".join(lines) + "\n"


def test_default_config_cdm_dimensions(cfg):
    assert cfg.cdm.total_arc_length == 35.0
    assert cfg.cdm.d_offset == 2.45
    assert cfg.cdm.aa_arc_positions == (5.0, 15.0, 25.0)


def test_default_config_node_table(cfg):
    g = cfg.geometry
    assert g.r[0, 0] == pytest.approx(0.159)
    assert math.degrees(g.theta[0, 0]) == pytest.approx(60.848)
    np.testing.assert_allclose(g.r, [[0.159, 0.150, 0.155], [0.159, 0.158, 0.154]])
    np.testing.assert_allclose(np.degrees(g.theta[1]), [60.848, 60.790, 60.733])
    assert g.k_eps == pytest.approx(0.78)


def test_default_calibration_coefficients(cfg):
    assert cfg.calibration.c_pos == pytest.approx((1.024, 0.945, 0.985))
    assert cfg.calibration.c_neg == pytest.approx((0.917, 0.836, 0.655))


def test_negative_offset_is_rejected():
    text = _edit(default_config_text(), "d_offset_mm", "-1")
    with pytest.raises(InvariantError, match="d_offset"):
        parse_config(text)


@pytest.mark.parametrize("key, value", [
    ("d_offset_mm", "0.00245"),
    ("total_arc_length_mm", "0.035"),
    ("r_mm_fiber1", "0.000159, 0.000150, 0.000155"),
    ("lumen_circle_radius_mm", "0.0001328"),
])
def test_metre_scaled_lengths_are_rejected(key, value):
    text = _edit(default_config_text(), key, value)
    with pytest.raises(InvariantError):
        parse_config(text)


def test_metre_scaled_wavelength_rejected():
    text = _edit(default_config_text(), "lambda0_nm_fiber1", "1.535e-6, 1.545e-6, 1.555e-6")
    with pytest.raises(InvariantError, match="lambda0"):
        parse_config(text)


def test_schema_version_is_mandatory():
    text = default_config_text().replace("schema_version = 1", "")
    with pytest.raises(ParseError, match="schema_version"):
        parse_config(text)


def test_unknown_schema_version():
    with pytest.raises(ParseError, match="schema_version"):
        parse_config(_edit(default_config_text(), "schema_version", "7"))


def test_garbage_is_a_parse_error():
    with pytest.raises(ParseError):
        parse_config("this is = not [an ini")


def test_round_trip_is_identity(cfg):
    again = parse_config(serialize_config(cfg))
    assert serialize_config(again) == serialize_config(cfg)
    np.testing.assert_array_equal(again.geometry.r, cfg.geometry.r)
    np.testing.assert_array_equal(again.geometry.theta, cfg.geometry.theta)
    assert again.geometry.z_c == cfg.geometry.z_c
    assert again.calibration == cfg.calibration
    assert again.cdm == cfg.cdm


@given(st.lists(st.floats(0.5, 1.5), min_size=3, max_size=3),
       st.lists(st.floats(-0.7, 0.7), min_size=3, max_size=3),
       st.floats(0.01, 0.2))
def test_round_trip_property(cfg, c, twist, zc):
    cal = CalibrationSet(c, c[::-1], twist)
    geo = cfg.geometry.replace(z_c=zc)
    orig = cfg.replace(calibration=cal, geometry=geo)
    again = parse_config(serialize_config(orig))
    assert again.calibration.c_pos == orig.calibration.c_pos
    assert again.geometry.z_c == zc
    np.testing.assert_allclose(again.calibration.phi_twist, orig.calibration.phi_twist, rtol=1e-15, atol=1e-17)


def test_env_var_overrides_default(tmp_path, monkeypatch, cfg):
    path = tmp_path / "alt.ini"
    path.write_text(_edit(default_config_text(), "d_offset_mm", "2.0"))
    monkeypatch.setenv("FBGSHAPE_CONFIG", str(path))
    assert load_config().cdm.d_offset == 2.0


def test_missing_file():
    with pytest.raises(ParseError, match="not found"):
        load_config("/nonexistent/x.ini")


def test_explicit_z_c(cfg):
    text = _edit(default_config_text(), "z_c_mm", "0.1")
    assert parse_config(text).geometry.z_c == 0.1


def test_coefficient_by_sign():
    cal = CalibrationSet((1.1, 1.2, 1.3), (0.7, 0.8, 0.9))
    assert cal.coefficient(1, 1) == 1.2
    assert cal.coefficient(2, -1) == 0.9
    assert cal.coefficient(0, 0) == 1.0


@pytest.mark.parametrize("kw", [dict(c_pos=(0.2, 1, 1)), dict(c_neg=(1, 2.5, 1)), dict(phi_twist=(0, 0, 1.0))])
def test_calibration_bounds(kw):
    with pytest.raises(InvariantError):
        CalibrationSet(**kw)


def test_cdm_positions_must_increase():
    with pytest.raises(InvariantError):
        CdmConfig(aa_arc_positions=(5, 25, 15))
    with pytest.raises(InvariantError):
        CdmConfig(aa_arc_positions=(5, 15, 40))


def test_frame_bounds(geometry):
    WavelengthFrame(0, geometry.lambda0)
    with pytest.raises(InvariantError):
        WavelengthFrame(0, np.full((2, 3), 1400.0))
    with pytest.raises(InvariantError):
        WavelengthFrame(0, np.full((2, 3), np.nan))


def test_geometry_arrays_are_read_only(geometry):
    with pytest.raises(ValueError):
        geometry.r[0, 0] = 1.0


@given(st.floats(-50, 50))
def test_wrap_angle_range(phi):
    w = wrap_angle(phi)
    assert -math.pi < w <= math.pi
    assert math.isclose(math.cos(w), math.cos(phi), abs_tol=1e-9)
    assert math.isclose(math.sin(w), math.sin(phi), abs_tol=1e-9)


def test_wrap_angle_pi():
    assert wrap_angle(-math.pi) == math.pi
