"""Synthetic ground truth: constant-curvature jigs, free bending and
obstacle-shaped S-profiles, run through the forward sensor model with
friction attenuation, twist and Gaussian wavelength noise."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .calibrate import CalibrationDataset, CalibrationSample
from .core import N_AA, CdmConfig, InvariantError, SensorGeometry, WavelengthFrame
from .numerics import integrate
from .reconstruct import CenterlinePolyline, GeometryError, integrate_centerline
from .sensing import STRAIN_LIMIT, AaState, StrainLimitError, forward_wavelengths

REFERENCE_STEP = 0.01
DEFAULT_NOISE_NM = 0.001
JIG_ARC_LENGTH = 35.0

# free-bend family: mean curvature grows linearly with the cable surrogate
FREE_BEND_MAX_INPUT = 5.0
FREE_BEND_KAPPA_AT_MAX = 0.04
FREE_BEND_RAMP = 0.1  # +/- fraction of the mean, proximal end largest

# obstacle family: counter-bend before the obstacle, main bend after it
OBSTACLE_AMPLITUDE = 0.025
OBSTACLE_COUNTER_RATIO = 0.4


class ScenarioKind(str, Enum):
    JIG = "jig"
    FREE_BEND = "free-bend"
    OBSTACLE_PROXIMAL = "obstacle-proximal"
    OBSTACLE_MIDDLE = "obstacle-middle"
    OBSTACLE_DISTAL = "obstacle-distal"


OBSTACLE_WINDOWS = {
    ScenarioKind.OBSTACLE_PROXIMAL: (0.0, 1 / 3),
    ScenarioKind.OBSTACLE_MIDDLE: (1 / 3, 2 / 3),
    ScenarioKind.OBSTACLE_DISTAL: (2 / 3, 1.0),
}


@dataclass(frozen=True)
class JigSpec:
    bend_angle: float  # degrees, sign gives the deflection side
    arc_length: float = JIG_ARC_LENGTH

    def __post_init__(self):
        if not (math.isfinite(self.bend_angle) and abs(self.bend_angle) <= 90):
            raise InvariantError("bend_angle", self.bend_angle, "in [-90, 90] deg")
        if not self.arc_length > 0:
            raise InvariantError("arc_length", self.arc_length, "> 0 mm")

    @property
    def sign(self) -> int:
        return int(np.sign(self.bend_angle))


def jig_curvature(spec: JigSpec) -> float:
    """Curvature magnitude of a constant-curvature groove, 1/mm."""
    return abs(math.radians(spec.bend_angle)) / spec.arc_length


@dataclass(frozen=True)
class ScenarioSpec:
    kind: ScenarioKind = ScenarioKind.JIG
    # jig: bend angle in degrees; free-bend: cable surrogate in [0, 5];
    # obstacle: signed amplitude of the distal bend in 1/mm
    parameter: float = 90.0
    noise_sigma: float = DEFAULT_NOISE_NM
    c_pos: tuple = (1.0, 1.0, 1.0)
    c_neg: tuple = (1.0, 1.0, 1.0)
    twist: tuple = (0.0, 0.0, 0.0)  # rad
    delta_T: tuple = (0.0, 0.0, 0.0)  # K
    sign: int = 1  # free-bend side
    # jig only: the bare sensor lies in the groove (no channel, no friction)
    sensor_only: bool = False

    def __post_init__(self):
        object.__setattr__(self, "kind", ScenarioKind(self.kind))
        if not (math.isfinite(self.noise_sigma) and self.noise_sigma >= 0):
            raise InvariantError("noise_sigma", self.noise_sigma, ">= 0 nm")
        for name in ("c_pos", "c_neg", "twist", "delta_T"):
            vals = tuple(float(v) for v in getattr(self, name))
            if len(vals) != N_AA or not all(math.isfinite(v) for v in vals):
                raise InvariantError(name, vals, f"{N_AA} finite values")
            object.__setattr__(self, name, vals)
        if not all(c > 0 for c in self.c_pos + self.c_neg):
            raise InvariantError("friction_c", (self.c_pos, self.c_neg), "> 0")
        if self.sign not in (-1, 1):
            raise InvariantError("sign", self.sign, "-1 or 1")
        if self.kind is ScenarioKind.JIG:
            JigSpec(self.parameter)
        elif self.kind is ScenarioKind.FREE_BEND:
            if not 0 <= self.parameter <= FREE_BEND_MAX_INPUT:
                raise InvariantError("parameter", self.parameter, f"in [0, {FREE_BEND_MAX_INPUT}]")
        elif not (math.isfinite(self.parameter) and abs(self.parameter) <= 0.1):
            raise InvariantError("parameter", self.parameter, "|amplitude| <= 0.1 1/mm")

    def replace(self, **changes) -> "ScenarioSpec":
        d = {f: getattr(self, f) for f in self.__dataclass_fields__}
        d.update(changes)
        return ScenarioSpec(**d)


@dataclass(frozen=True)
class TruthProfile:
    """Signed manipulator curvature over the proximal arc length."""

    kind: ScenarioKind
    total_arc: float
    level: float  # constant / mean / distal level, 1/mm
    other: float = 0.0  # ramp amplitude or counter level
    window: tuple = (0.0, 0.0)

    def kappa_at(self, s):
        s = np.asarray(s, dtype=float)
        u = s / self.total_arc
        if self.kind is ScenarioKind.JIG:
            out = np.full_like(s, self.level)
        elif self.kind is ScenarioKind.FREE_BEND:
            out = self.level * (1.0 + self.other * (1.0 - 2.0 * u))
        else:
            a, b = self.window
            t = np.clip((u - a) / (b - a), 0.0, 1.0)
            out = self.other + (self.level - self.other) * t * t * (3.0 - 2.0 * t)
        return float(out) if out.ndim == 0 else out

    def phi_at(self, s):
        return np.zeros_like(np.asarray(s, dtype=float))


@dataclass(frozen=True)
class ScenarioTruth:
    profile: TruthProfile
    polyline: CenterlinePolyline


def truth_profile(spec: ScenarioSpec, cdm: CdmConfig) -> TruthProfile:
    L = cdm.total_arc_length
    if spec.kind is ScenarioKind.JIG:
        jig = JigSpec(spec.parameter, JIG_ARC_LENGTH)
        return TruthProfile(spec.kind, L, jig.sign * jig_curvature(jig))
    if spec.kind is ScenarioKind.FREE_BEND:
        mean = spec.sign * FREE_BEND_KAPPA_AT_MAX * spec.parameter / FREE_BEND_MAX_INPUT
        return TruthProfile(spec.kind, L, mean, FREE_BEND_RAMP)
    amp = spec.parameter
    return TruthProfile(spec.kind, L, amp, -OBSTACLE_COUNTER_RATIO * amp, OBSTACLE_WINDOWS[spec.kind])


def sensor_curvature(kappa_cm, d_offset: float):
    """Signed sensor-path curvature of the channel offset by ``d_offset``
    towards +x (inside of a positive bend)."""
    kappa_cm = np.asarray(kappa_cm, dtype=float)
    denom = 1.0 - d_offset * kappa_cm
    if np.any(denom <= 0):
        raise GeometryError(f"sensor path degenerate: 1 - d*kappa = {denom.min()} <= 0")
    out = kappa_cm / denom
    return float(out) if out.ndim == 0 else out


def _check_strain(kappa_sensor, geometry: SensorGeometry) -> None:
    reach = float(np.max(geometry.z_c + geometry.r))
    peak = float(np.max(np.abs(kappa_sensor))) * reach
    if peak > STRAIN_LIMIT:
        raise StrainLimitError(f"scenario strain {peak:.4g} exceeds the fiber limit {STRAIN_LIMIT}")


def scenario_profile(spec: ScenarioSpec, cdm: CdmConfig,
                     geometry: SensorGeometry | None = None) -> ScenarioTruth:
    """Ground-truth curvature profile and its reference centerline
    (proximal frame, step 0.01 mm)."""
    prof = truth_profile(spec, cdm)
    s = np.linspace(0.0, cdm.total_arc_length, 3501)
    if geometry is not None:
        _check_strain(sensor_curvature(prof.kappa_at(s), cdm.d_offset), geometry)
    line = integrate_centerline(prof, cdm.total_arc_length, step=REFERENCE_STEP,
                                frame="cdm-proximal", use_direction=False)
    return ScenarioTruth(prof, line)


def sensor_aa_positions(profile: TruthProfile, cdm: CdmConfig, tol: float = 1e-12) -> np.ndarray:
    """Manipulator arc length (from the proximal end) at which each active
    area sits, found from the sliding of the offset sensor path.

    With ``sigma`` measured from the distal end, the sensor arc to the
    active area is ``int_0^sigma (1 - d kappa(L - u)) du = s_j``.
    """
    L, d = cdm.total_arc_length, cdm.d_offset
    speed = lambda u: 1.0 - d * profile.kappa_at(L - np.asarray(u))
    out = np.empty(N_AA)
    for j, s_j in enumerate(cdm.aa_arc_positions):
        sigma = s_j
        for _ in range(50):
            g = integrate(speed, 0.0, sigma, REFERENCE_STEP) - s_j
            dg = float(speed(sigma))
            nxt = sigma - g / dg
            if not 0 <= nxt <= L:
                raise GeometryError(f"AA{j + 1} slides off the manipulator (sigma = {nxt:.4f} mm)")
            done = abs(nxt - sigma) < tol
            sigma = nxt
            if done:
                break
        out[j] = L - sigma
    return out


@dataclass(frozen=True)
class AaTruth:
    s_cdm: float  # proximal arc length on the manipulator, mm
    kappa_cm: float  # signed
    kappa_sensor: float  # signed sensor-path curvature
    phi: float  # nominal in-plane direction, 0 or pi

    @property
    def kappa(self) -> float:
        return abs(self.kappa_sensor)


@dataclass(frozen=True)
class SyntheticData:
    frames: list
    polyline: CenterlinePolyline | None
    aa: tuple  # AaTruth per active area
    spec: ScenarioSpec
    profile: TruthProfile | None = None

    @property
    def sign(self) -> int:
        k = sum(a.kappa_sensor for a in self.aa)
        return 0 if all(a.kappa_sensor == 0 for a in self.aa) else int(np.sign(k))

    def sample(self, index: int = 0) -> CalibrationSample:
        return CalibrationSample(self.frames[index], [a.kappa for a in self.aa],
                                 [a.phi for a in self.aa], self.sign)


def _aa_truth(spec: ScenarioSpec, cdm: CdmConfig, profile: TruthProfile | None) -> tuple:
    if spec.sensor_only:
        jig = JigSpec(spec.parameter)
        k = jig.sign * jig_curvature(jig)
        return tuple(AaTruth(math.nan, k, k, 0.0 if k >= 0 else math.pi) for _ in range(N_AA))
    pos = sensor_aa_positions(profile, cdm)
    out = []
    for s in pos:
        k_cm = profile.kappa_at(s)
        k_s = sensor_curvature(k_cm, cdm.d_offset)
        out.append(AaTruth(float(s), float(k_cm), float(k_s), 0.0 if k_s >= 0 else math.pi))
    return tuple(out)


def synthesize_frames(spec: ScenarioSpec, geometry: SensorGeometry, cdm: CdmConfig,
                      seed: int = 0, n_frames: int = 1, period: float = 0.01) -> SyntheticData:
    """Forward-model frames for one scenario.

    Each active area reads ``|kappa_sensor| / C`` (C per sign, so the
    calibrated coefficient restores the truth) along ``nominal + twist``;
    Gaussian noise of ``noise_sigma`` nm is added per node and frame.
    """
    if n_frames < 1:
        raise InvariantError("n_frames", n_frames, ">= 1")
    if spec.sensor_only and spec.kind is not ScenarioKind.JIG:
        raise InvariantError("sensor_only", True, "jig scenarios only")
    truth = None if spec.sensor_only else scenario_profile(spec, cdm, geometry)
    aa = _aa_truth(spec, cdm, truth.profile if truth else None)
    _check_strain([a.kappa_sensor for a in aa], geometry)
    states = []
    for j, a in enumerate(aa):
        if spec.sensor_only or a.kappa_sensor == 0:
            c = 1.0
        else:
            c = spec.c_pos[j] if a.kappa_sensor > 0 else spec.c_neg[j]
        states.append(AaState(a.kappa / c, a.phi + spec.twist[j], spec.delta_T[j]))
    clean = forward_wavelengths(geometry, states).wavelengths
    rng = np.random.default_rng(seed)
    frames = []
    for i in range(n_frames):
        noise = rng.normal(0.0, spec.noise_sigma, clean.shape) if spec.noise_sigma > 0 else 0.0
        frames.append(WavelengthFrame(i * period, clean + noise))
    return SyntheticData(frames, truth.polyline if truth else None, aa, spec,
                         truth.profile if truth else None)


def jig_angles(start: float, stop: float, step: float) -> list:
    n = int(round((stop - start) / step))
    return [start + i * step for i in range(n + 1)]


FIT_GROOVES = tuple(jig_angles(-90, 90, 10))
VALIDATION_GROOVES = tuple(jig_angles(-85, 85, 10))


def jig_dataset(angles, geometry: SensorGeometry, cdm: CdmConfig, base: ScenarioSpec | None = None,
                seed: int = 0) -> CalibrationDataset:
    """One sample per groove angle; each groove gets its own noise stream
    derived from ``seed``."""
    base = base or ScenarioSpec()
    seeds = np.random.SeedSequence(seed).spawn(len(angles))
    samples = []
    for angle, ss in zip(angles, seeds):
        spec = base.replace(kind=ScenarioKind.JIG, parameter=float(angle))
        data = synthesize_frames(spec, geometry, cdm, seed=ss)
        samples.append(data.sample())
    return CalibrationDataset(samples)
