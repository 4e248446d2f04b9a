"""Sensor and manipulator centerline reconstruction.

Planar convention used by both integrations: the tangent angle ``theta`` is
measured from the +y axis, ``dx/ds = sin(theta)``, ``dy/ds = cos(theta)``.
Positive signed curvature bends towards +x, the side of the sensor channel.
The sensor is integrated from its distal end (where it is glued); the
manipulator from its proximal end.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import (
    N_AA,
    CalibrationSet,
    CdmConfig,
    FbgShapeError,
    InvariantError,
    NumericalError,
    SensorGeometry,
    WavelengthFrame,
    wrap_angle,
)
from .numerics import Spline1D, simpson_grid, simpson_sum, spline_fit
from .sensing import estimate_frame

OUT_OF_PLANE_LIMIT = math.radians(10.0)
# below this |kappa| (1/mm) the bending direction is noise and is not checked
DIRECTION_KAPPA_FLOOR = 1e-4
DEFAULT_STEP = 0.1


class GeometryError(FbgShapeError):
    pass


class PipelineError(FbgShapeError):
    """Wraps a failure with the name of the pipeline stage that raised it."""

    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        super().__init__(f"{stage}: {cause}")


@dataclass(frozen=True)
class CurvatureProfile:
    s: np.ndarray  # knot arc lengths, mm
    kappa: np.ndarray  # signed in-plane curvature at the knots, 1/mm
    phi: np.ndarray  # out-of-plane deviation of the bending direction, rad
    kappa_spline: Spline1D
    phi_spline: Spline1D
    s_max: float

    def kappa_at(self, s):
        return self.kappa_spline(s)

    def phi_at(self, s):
        return self.phi_spline(s)


@dataclass(frozen=True)
class CenterlinePolyline:
    frame: str  # "sensor-distal" or "cdm-proximal"
    s: np.ndarray
    points: np.ndarray  # (N, 2) x, y in mm
    theta: np.ndarray  # tangent angle at each point
    step: float
    total_arc: float

    @property
    def tip(self) -> np.ndarray:
        return self.points[-1]

    def index_of(self, s: float) -> int:
        i = int(np.argmin(np.abs(self.s - s)))
        if abs(self.s[i] - s) > 1e-9:
            raise InvariantError("s", s, "a sample of the polyline grid")
        return i

    def length(self) -> float:
        return float(np.sum(np.hypot(*np.diff(self.points, axis=0).T)))


def profile_from_knots(s, kappa, phi=None, s_max: float | None = None) -> CurvatureProfile:
    s = np.asarray(s, dtype=float)
    kappa = np.asarray(kappa, dtype=float)
    phi = np.zeros_like(kappa) if phi is None else np.asarray(phi, dtype=float)
    return CurvatureProfile(
        s=s, kappa=kappa, phi=phi,
        kappa_spline=spline_fit(s, kappa),
        phi_spline=spline_fit(s, phi),
        s_max=float(s[-1] if s_max is None else s_max),
    )


def planar_components(kappa: float, phi: float) -> tuple[float, float]:
    """Split (|kappa|, direction) into signed in-plane curvature and the
    deviation of the direction from the bending plane."""
    phi = wrap_angle(phi)
    if abs(phi) <= math.pi / 2:
        sign, dev = 1.0, phi
    else:
        sign, dev = -1.0, wrap_angle(phi - math.pi)
    if abs(kappa) >= DIRECTION_KAPPA_FLOOR and abs(dev) > OUT_OF_PLANE_LIMIT:
        raise GeometryError(
            f"bending direction {math.degrees(phi):.2f} deg is more than 10 deg out of the bending plane; "
            "check the twist calibration")
    return sign * kappa, dev


def build_profile(aa: Sequence, cdm: CdmConfig) -> CurvatureProfile:
    """Spline the three compensated (kappa, phi) pairs over the sensor arc
    length measured from the distal end."""
    if len(aa) != N_AA:
        raise InvariantError("aa", len(aa), f"exactly {N_AA} estimates")
    pairs = [planar_components(float(k), float(p)) for k, p in aa]
    kappa = [p[0] for p in pairs]
    dev = [p[1] for p in pairs]
    return profile_from_knots(cdm.aa_arc_positions, kappa, dev, s_max=cdm.aa_arc_positions[-1])


def _grid(span: float, step: float) -> np.ndarray:
    n = max(1, math.ceil(span / step - 1e-9))
    if abs(n * step - span) < 1e-9 * max(1.0, span):
        return np.linspace(0.0, span, n + 1)
    return np.append(np.arange(n) * step, span)


def integrate_centerline(profile: CurvatureProfile, arc_span: float, theta0: float = 0.0,
                         x0: float = 0.0, y0: float = 0.0, step: float = DEFAULT_STEP,
                         frame: str = "sensor-distal", use_direction: bool = True) -> CenterlinePolyline:
    """Integrate slope and position along ``[0, arc_span]``.

    ``theta(s) = theta0 + int kappa``; ``x = (x0 + int sin theta) cos phi(s)``;
    ``y = y0 + int cos theta``. Every integral is Simpson's rule per grid
    interval, so positions are accurate to O(step^4).
    """
    if not step > 0:
        raise InvariantError("step", step, "> 0")
    if not arc_span > 0:
        raise InvariantError("arc_span", arc_span, "> 0")
    s = _grid(arc_span, step)
    h = np.diff(s)
    mid = s[:-1] + h / 2
    quarter = s[:-1] + h / 4
    # one spline evaluation over all sample sets
    n = len(s)
    k_all = profile.kappa_at(np.concatenate([s, mid, quarter]))
    if not np.all(np.isfinite(k_all)):
        raise NumericalError("curvature profile evaluated to a non-finite value")
    k_s, k_mid, k_quarter = k_all[:n], k_all[n:2 * n - 1], k_all[2 * n - 1:]

    def cum(fs, fm):
        return np.concatenate([[0.0], np.cumsum(h / 6 * (fs[:-1] + 4 * fm + fs[1:]))])

    theta = theta0 + cum(k_s, k_mid)
    theta_mid = theta[:-1] + h / 12 * (k_s[:-1] + 4 * k_quarter + k_mid)
    x = x0 + cum(np.sin(theta), np.sin(theta_mid))
    if use_direction:
        x = x * np.cos(profile.phi_at(s))
    y = y0 + cum(np.cos(theta), np.cos(theta_mid))
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise NumericalError("centerline integration produced non-finite coordinates")
    return CenterlinePolyline(frame, s, np.column_stack([x, y]), theta, float(step), float(arc_span))


def transfer_point(x: float, y: float, theta: float, d_offset: float) -> tuple[float, float]:
    """Map one sensor-centerline point (distal sensor frame) to the
    manipulator centerline point of the same cross-section, expressed in the
    manipulator distal frame.

    The local frame at the point is the distal frame rotated by ``theta``;
    the manipulator centerline lies ``d_offset`` along its -x axis, and the
    manipulator distal origin sits ``d_offset`` along -x of the sensor tip.
    """
    return (x + d_offset * (1.0 - math.cos(theta)), y + d_offset * math.sin(theta))


def transfer_aa_to_cdm(sensor: CenterlinePolyline, cdm: CdmConfig) -> np.ndarray:
    """Active-area positions on the manipulator centerline, shape (3, 2)."""
    out = np.empty((N_AA, 2))
    for j, s_j in enumerate(cdm.aa_arc_positions):
        i = sensor.index_of(s_j)
        out[j] = transfer_point(sensor.points[i, 0], sensor.points[i, 1], sensor.theta[i], cdm.d_offset)
    return out


def transfer_polyline(sensor: CenterlinePolyline, d_offset: float) -> np.ndarray:
    """Map every sensor sample onto the manipulator centerline, shape (N, 2)."""
    x, y = sensor.points.T
    th = sensor.theta
    return np.column_stack([x + d_offset * (1.0 - np.cos(th)), y + d_offset * np.sin(th)])


def aa_arclength_on_cdm(cdm_points: np.ndarray, cdm: CdmConfig, support: np.ndarray | None = None,
                        start_slope: float = 0.0, end_slope: float | None = None,
                        step: float = DEFAULT_STEP) -> np.ndarray:
    """Arc length of each mapped active area measured from the proximal end.

    Fits x = f(y) in the manipulator distal frame and subtracts the arc
    length from the distal origin to each point from the total length. The
    curve passes through the origin and ``support`` (a dense mapped
    centerline) when given, otherwise through ``cdm_points`` only; the slope
    at the origin is ``start_slope`` (tan of the distal tangent angle).
    """
    pts = np.asarray(cdm_points, dtype=float)
    nodes = pts if support is None else np.asarray(support, dtype=float)
    if np.allclose(nodes[0], 0.0):
        nodes = nodes[1:]
    y = np.concatenate([[0.0], nodes[:, 1]])
    x = np.concatenate([[0.0], nodes[:, 0]])
    if np.any(np.diff(y) <= 0) or np.any(np.diff(np.concatenate([[0.0], pts[:, 1]])) <= 0):
        raise GeometryError(f"mapped active areas fold over (y = {pts[:, 1].round(4).tolist()}); "
                            "centerline is not a function of the distal axis")
    f = spline_fit(y, x, start_slope=start_slope, end_slope=end_slope)
    # composite Simpson from 0 to each y_j; one derivative evaluation for all grids
    grids = [simpson_grid(0.0, yj, step / 4) for yj in pts[:, 1]]
    speed = np.sqrt(1.0 + f.derivative(np.concatenate(grids)) ** 2)
    arcs, lo = [], 0
    for g in grids:
        arcs.append(simpson_sum(speed[lo:lo + len(g)], g[-1] - g[0]))
        lo += len(g)
    return cdm.total_arc_length - np.array(arcs)


def curvature_transfer(kappa, phi, d_offset: float):
    """Curvature of the manipulator centerline from the sensor curvature."""
    denom = 1.0 + d_offset * np.asarray(kappa) * np.cos(phi)
    if np.any(denom <= 0):
        raise GeometryError(f"offset curve degenerate: 1 + d*kappa*cos(phi) = {denom} <= 0")
    out = np.asarray(kappa) / denom
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class Reconstruction:
    centerline: CenterlinePolyline
    sensor: CenterlinePolyline
    estimates: list
    cdm_aa_points: np.ndarray
    cdm_aa_arclength: np.ndarray
    kappa_cm: np.ndarray


def reconstruct_detailed(frame: WavelengthFrame, geometry: SensorGeometry, calib: CalibrationSet,
                         cdm: CdmConfig, step: float = DEFAULT_STEP) -> Reconstruction:
    stage = "solve"
    try:
        est = estimate_frame(frame, geometry, calib)
        stage = "sensor-profile"
        pairs = [(e.kappa, e.phi) for e in est]
        profile = build_profile(pairs, cdm)
        stage = "sensor-centerline"
        sensor = integrate_centerline(profile, cdm.aa_arc_positions[-1], step=step, frame="sensor-distal")
        stage = "transfer"
        pts = transfer_aa_to_cdm(sensor, cdm)
        stage = "cdm-arclength"
        s_cm = aa_arclength_on_cdm(pts, cdm, support=transfer_polyline(sensor, cdm.d_offset),
                                   start_slope=math.tan(sensor.theta[0]),
                                   end_slope=math.tan(sensor.theta[-1]), step=step)
        stage = "curvature-transfer"
        k_cm = curvature_transfer(profile.kappa, profile.phi, cdm.d_offset)
        stage = "cdm-centerline"
        order = np.argsort(s_cm)
        if np.any(np.diff(s_cm[order]) <= 0) or s_cm.min() < 0:
            raise GeometryError(f"active-area arc lengths {s_cm.round(4).tolist()} are not distinct and positive")
        cdm_profile = profile_from_knots(s_cm[order], np.asarray(k_cm)[order], s_max=cdm.total_arc_length)
        line = integrate_centerline(cdm_profile, cdm.total_arc_length, step=step,
                                    frame="cdm-proximal", use_direction=False)
    except PipelineError:
        raise
    except FbgShapeError as exc:
        raise PipelineError(stage, exc) from exc
    return Reconstruction(line, sensor, est, pts, s_cm, np.asarray(k_cm))


def reconstruct_cdm(frame: WavelengthFrame, geometry: SensorGeometry, calib: CalibrationSet,
                    cdm: CdmConfig, step: float = DEFAULT_STEP) -> CenterlinePolyline:
    """Full pipeline from one wavelength frame to the manipulator centerline
    in the proximal frame (starts at the origin, tangent along +y)."""
    return reconstruct_detailed(frame, geometry, calib, cdm, step).centerline


def centerline_errors(recon: CenterlinePolyline, truth: CenterlinePolyline) -> dict:
    """Closest-point shape error statistics and tip error (mm)."""
    P = recon.points
    T = truth.points
    d = np.empty(len(P))
    for lo in range(0, len(P), 256):
        blk = P[lo:lo + 256]
        d[lo:lo + 256] = np.sqrt(((blk[:, None, :] - T[None, :, :]) ** 2).sum(-1)).min(axis=1)
    return {
        "mean": float(d.mean()),
        "std": float(d.std()),
        "max": float(d.max()),
        "tip": float(np.hypot(*(recon.tip - truth.tip))),
    }
