import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fbgshape.core import CalibrationSet, CdmConfig, InvariantError, WavelengthFrame
from fbgshape.reconstruct import (
    GeometryError,
    PipelineError,
    aa_arclength_on_cdm,
    build_profile,
    centerline_errors,
    curvature_transfer,
    integrate_centerline,
    planar_components,
    profile_from_knots,
    reconstruct_cdm,
    reconstruct_detailed,
    transfer_aa_to_cdm,
    transfer_point,
    transfer_polyline,
)
from fbgshape.sensing import AaState, forward_wavelengths
from fbgshape.simulate import ScenarioSpec, synthesize_frames

from .oracles import arc_endpoint, natural_spline, polyline_length

CDM = CdmConfig()


def constant(kappa, s_max=35.0):
    return profile_from_knots([0.0, s_max], [kappa, kappa], s_max=s_max)


# -------------------------------------------------------------- profile

def test_constant_profile_everywhere():
    p = build_profile([(0.02, 0.0)] * 3, CDM)
    np.testing.assert_allclose(p.kappa_at(np.linspace(-5, 40, 19)), 0.02, rtol=1e-14)


def test_profile_knots_and_hold():
    p = build_profile([(0.01, 0.0), (0.02, 0.0), (0.03, 0.0)], CDM)
    assert p.kappa_at(15.0) == pytest.approx(0.02, abs=1e-16)
    assert p.kappa_at(0.0) == pytest.approx(0.01, abs=1e-16)
    assert p.kappa_at(5.0) == pytest.approx(0.01, abs=1e-16)
    assert p.kappa_at(30.0) == pytest.approx(0.03, abs=1e-16)


def test_profile_between_knots_matches_oracle():
    vals = [0.01, 0.035, 0.02]
    p = build_profile([(v, 0.0) for v in vals], CDM)
    assert p.kappa_at(10.0) == pytest.approx(float(natural_spline([5, 15, 25], vals)(10.0)), abs=1e-15)


def test_negative_direction_gives_negative_curvature():
    p = build_profile([(0.02, math.pi)] * 3, CDM)
    assert p.kappa_at(10.0) == pytest.approx(-0.02)
    np.testing.assert_allclose(p.phi, 0.0, atol=1e-15)


def test_out_of_plane_direction_rejected():
    with pytest.raises(GeometryError, match="out of the bending plane"):
        planar_components(0.02, math.radians(12))
    assert planar_components(0.02, math.radians(9))[0] == 0.02
    # direction of a near-zero curvature is noise and is not checked
    assert planar_components(1e-6, 1.0)[0] == 1e-6


# ---------------------------------------------------------- integration

def test_straight_line():
    line = integrate_centerline(constant(0.0), 35.0)
    np.testing.assert_allclose(line.points[:, 0], 0.0)
    np.testing.assert_allclose(line.tip, [0.0, 35.0], atol=1e-12)


def test_arc_endpoint():
    k = 0.0449
    line = integrate_centerline(constant(k), 35.0)
    exact = arc_endpoint(k, 35.0)
    assert exact == pytest.approx([22.287, 22.272], abs=1e-3)
    np.testing.assert_allclose(line.tip, exact, atol=1e-4)


@given(st.floats(-0.05, 0.05), st.floats(1.0, 35.0))
def test_arc_endpoint_property(k, span):
    line = integrate_centerline(constant(k), span)
    np.testing.assert_allclose(line.tip, arc_endpoint(k, span), atol=1e-4)


def _s_profile():
    return profile_from_knots([0, 10, 20, 35], [0.03, 0.01, -0.03, -0.02])


def test_s_shape_matches_finer_reference():
    coarse = integrate_centerline(_s_profile(), 35.0, step=0.1)
    fine = integrate_centerline(_s_profile(), 35.0, step=0.01)
    np.testing.assert_allclose(coarse.points, fine.points[::10], atol=1e-5)


def test_refinement_convergence():
    tips = [integrate_centerline(_s_profile(), 35.0, step=h).tip for h in (0.4, 0.2, 0.1)]
    d1 = np.linalg.norm(tips[1] - tips[0])
    d2 = np.linalg.norm(tips[2] - tips[1])
    assert d2 <= d1 / 10


@given(st.lists(st.floats(-0.05, 0.05), min_size=3, max_size=3), st.sampled_from([0.1, 0.05, 0.25]))
def test_arc_length_preserved(kappas, step):
    p = build_profile([(abs(k), 0.0 if k >= 0 else math.pi) for k in kappas], CDM)
    line = integrate_centerline(p, 35.0, step=step)
    assert polyline_length(line.points) == pytest.approx(35.0, abs=1e-3)
    assert line.length() == pytest.approx(35.0, abs=1e-3)
    spacing = np.hypot(*np.diff(line.points, axis=0).T)
    np.testing.assert_allclose(spacing, np.diff(line.s), atol=1e-5)


@given(st.lists(st.floats(-0.05, 0.05), min_size=3, max_size=3))
def test_mirror_symmetry(kappas):
    p = profile_from_knots([5, 15, 25], kappas, s_max=25)
    m = profile_from_knots([5, 15, 25], [-k for k in kappas], s_max=25)
    a = integrate_centerline(p, 35.0)
    b = integrate_centerline(m, 35.0)
    np.testing.assert_array_equal(a.points[:, 0], -b.points[:, 0])
    np.testing.assert_array_equal(a.points[:, 1], b.points[:, 1])


def test_step_must_be_positive():
    with pytest.raises(InvariantError):
        integrate_centerline(constant(0.0), 35.0, step=0.0)


# -------------------------------------------------------------- transfer

def test_straight_sensor_maps_onto_axis():
    line = integrate_centerline(constant(0.0, 25), 25.0)
    pts = transfer_aa_to_cdm(line, CDM)
    np.testing.assert_allclose(pts, [[0, 5], [0, 15], [0, 25]], atol=1e-12)


def test_transfer_point_untilted():
    assert transfer_point(2.45, 0.0, 0.0, 2.45) == (2.45, 0.0)
    assert transfer_point(0.0, 7.0, 0.0, 2.45) == (0.0, 7.0)


def test_transfer_lands_on_concentric_circle():
    # sensor path of radius rho inside the bend; manipulator radius rho + d
    k_s = 0.04
    rho = 1 / k_s
    d = CDM.d_offset
    line = integrate_centerline(constant(k_s, 25), 25.0)
    pts = transfer_aa_to_cdm(line, CDM)
    # circle centre in the manipulator distal frame
    centre = np.array([rho + d, 0.0])
    np.testing.assert_allclose(np.linalg.norm(pts - centre, axis=1), rho + d, atol=1e-9)


@given(st.floats(-0.05, 0.05))
def test_cdm_arc_length_on_circle(k_cm):
    d = CDM.d_offset
    k_s = k_cm / (1 - d * k_cm)
    line = integrate_centerline(constant(k_s, 25), 25.0)
    pts = transfer_aa_to_cdm(line, CDM)
    s = aa_arclength_on_cdm(pts, CDM, support=transfer_polyline(line, d),
                            start_slope=0.0, end_slope=math.tan(line.theta[-1]))
    # manipulator radius is the sensor radius plus d
    expected = [35.0 - sj * (1 + d * k_s) for sj in (5, 15, 25)]
    np.testing.assert_allclose(s, expected, atol=1e-3)


def test_cdm_arc_length_straight():
    pts = np.array([[0, 5.0], [0, 15.0], [0, 25.0]])
    np.testing.assert_allclose(aa_arclength_on_cdm(pts, CDM), [30, 20, 10], atol=1e-12)


def test_fold_over_rejected():
    pts = np.array([[1.0, 5.0], [3.0, 4.0], [6.0, 2.0]])
    with pytest.raises(GeometryError, match="fold"):
        aa_arclength_on_cdm(pts, CDM)


# ----------------------------------------------------- curvature transfer

def test_curvature_transfer_values():
    assert curvature_transfer(0.0, 0.0, 2.45) == 0.0
    assert curvature_transfer(0.045, 0.0, 2.45) == pytest.approx(0.045 / 1.11025, abs=1e-12)
    assert curvature_transfer(0.045, 0.0, 2.45) == pytest.approx(0.040531, abs=1e-6)
    assert curvature_transfer(0.03, math.pi / 2, 2.45) == pytest.approx(0.03)


def test_concentric_radii():
    k = 0.045
    assert 1 / curvature_transfer(k, 0.0, 2.45) == pytest.approx(1 / k + 2.45, rel=1e-12)


@given(st.floats(1e-4, 0.05), st.floats(0.1, 2.9))
def test_curvature_transfer_monotone(k, d):
    assert curvature_transfer(k, 0.0, d) < k
    if 1 - d * k > 0:
        assert curvature_transfer(k, math.pi, d) > k


def test_degenerate_offset_curve():
    with pytest.raises(GeometryError):
        curvature_transfer(0.5, math.pi, 2.45)


# ------------------------------------------------------------ full chain

def test_reference_frame_is_straight(geometry, cdm, identity):
    line = reconstruct_cdm(WavelengthFrame(0, geometry.lambda0), geometry, identity, cdm)
    np.testing.assert_allclose(line.points[0], [0, 0])
    np.testing.assert_allclose(line.tip, [0, 35], atol=1e-12)
    assert line.frame == "cdm-proximal"


def test_jig_round_trip(geometry, cdm, identity):
    data = synthesize_frames(ScenarioSpec(parameter=90, noise_sigma=0), geometry, cdm)
    line = reconstruct_cdm(data.frames[0], geometry, identity, cdm)
    assert np.linalg.norm(line.tip - arc_endpoint(math.pi / 2 / 35, 35)) < 0.05
    assert line.theta[0] == 0.0


def test_s_shape_round_trip(geometry, cdm, identity):
    spec = ScenarioSpec(kind="obstacle-middle", parameter=0.015)
    data = synthesize_frames(spec, geometry, cdm, seed=4, n_frames=5)
    errs = [centerline_errors(reconstruct_cdm(f, geometry, identity, cdm), data.polyline)["mean"]
            for f in data.frames]
    assert np.mean(errs) <= 0.25


def test_pipeline_error_names_stage(geometry, cdm):
    frame = forward_wavelengths(geometry, [AaState(0.02, 0.0)] * 3)
    # a grossly wrong twist calibration rotates the direction out of the plane
    bad = CalibrationSet(phi_twist=(math.radians(30),) * 3)
    with pytest.raises(PipelineError) as info:
        reconstruct_cdm(frame, geometry, bad, cdm)
    assert info.value.stage == "sensor-profile"
    assert isinstance(info.value.cause, GeometryError)


def test_same_sign_shifts_fail_in_solve(geometry, cdm, identity):
    frame = forward_wavelengths(geometry, [AaState(0.02, math.radians(60))] * 3)
    with pytest.raises(PipelineError) as info:
        reconstruct_cdm(frame, geometry, identity, cdm)
    assert info.value.stage == "solve"


def test_detailed_exposes_stages(geometry, cdm, identity):
    data = synthesize_frames(ScenarioSpec(parameter=45, noise_sigma=0), geometry, cdm)
    rec = reconstruct_detailed(data.frames[0], geometry, identity, cdm)
    np.testing.assert_allclose(rec.cdm_aa_arclength, [a.s_cdm for a in data.aa], atol=2e-3)
    np.testing.assert_allclose(rec.kappa_cm, [a.kappa_cm for a in data.aa], rtol=2e-4)
