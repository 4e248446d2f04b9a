"""Calibration procedures: node geometry, friction coefficients, twist
offsets, and held-out validation statistics."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .core import (
    N_AA,
    CalibrationSet,
    FbgShapeError,
    InvariantError,
    SensorGeometry,
    WavelengthFrame,
    wrap_angle,
)
from .numerics import SingularJacobianError, least_squares, pinv
from .sensing import Deflection, estimate_frame, solve_aa, solve_all

log = logging.getLogger(__name__)

MIN_TWIST_GROOVE_KAPPA = 0.005
# planar data leaves part of each node's (r, theta) unobservable; directions
# weaker than this relative singular value stay at the initial guess
GEOMETRY_RCOND = 1e-4


class InsufficientDataError(FbgShapeError):
    pass


class InsufficientExcitationError(InsufficientDataError):
    pass


@dataclass(frozen=True)
class CalibrationSample:
    frame: WavelengthFrame
    kappa: tuple  # ground-truth curvature magnitude per AA, 1/mm
    phi: tuple  # ground-truth bending direction per AA, rad
    sign: int  # +1 positive, -1 negative, 0 straight

    def __post_init__(self):
        k = tuple(float(v) for v in self.kappa)
        p = tuple(float(v) for v in self.phi)
        if len(k) != N_AA or len(p) != N_AA:
            raise InvariantError("truth", (k, p), f"{N_AA} values each")
        if not all(math.isfinite(v) and v >= 0 for v in k):
            raise InvariantError("kappa", k, "finite and >= 0")
        if not all(math.isfinite(v) for v in p):
            raise InvariantError("phi", p, "finite")
        if self.sign not in (-1, 0, 1):
            raise InvariantError("sign", self.sign, "one of -1, 0, 1")
        object.__setattr__(self, "kappa", k)
        object.__setattr__(self, "phi", p)


@dataclass(frozen=True)
class CalibrationDataset:
    samples: tuple

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(self.samples))

    def __len__(self):
        return len(self.samples)

    def wavelengths(self) -> np.ndarray:
        return np.array([s.frame.wavelengths for s in self.samples])

    def truth(self) -> tuple[np.ndarray, np.ndarray]:
        return (np.array([s.kappa for s in self.samples]), np.array([s.phi for s in self.samples]))

    def signs(self) -> np.ndarray:
        return np.array([s.sign for s in self.samples])

    def count(self, sign: int) -> int:
        return int(np.sum(self.signs() == sign))


# ----------------------------------------------------------- node geometry

def _aa_design(ke, zc, r1, th1, r2, th2):
    return np.array([
        [-ke * (zc + r1 * math.cos(th1)), ke * r1 * math.sin(th1), 1.0],
        [-ke * (zc + r2 * math.cos(th2)), -ke * r2 * math.sin(th2), 1.0],
    ])


def fit_node_geometry(dataset: CalibrationDataset, initial: SensorGeometry,
                      shared_theta: bool = False, tol: float = 1e-12) -> SensorGeometry:
    """Least-squares fit of node radii and orientations per active area.

    Residuals stack curvature errors scaled by ``1/max(kappa_gt)`` and wrapped
    direction errors scaled by ``1/pi`` (directions of straight samples are
    skipped). ``z_c``, ``k_eps`` and the reference wavelengths stay fixed. With
    ``shared_theta`` both fibers of an active area share one orientation.
    """
    kappa_gt, phi_gt = dataset.truth()
    if len(dataset) == 0:
        raise InsufficientDataError("empty calibration dataset")
    if not np.any(kappa_gt > 0):
        raise InsufficientExcitationError(
            "no sample has non-zero curvature; node geometry is unobservable")
    lam = dataset.wavelengths()
    lam0 = initial.lambda0
    frac = (lam - lam0) / lam0  # (N, fiber, aa)
    ke, zc = initial.k_eps, initial.z_c
    r = initial.r.copy()
    theta = initial.theta.copy()
    mode = "shared-theta" if shared_theta else "per-fiber"

    for j in range(N_AA):
        kg, pg = kappa_gt[:, j], phi_gt[:, j]
        if len(np.unique(np.round(kg, 12))) < 4:
            raise InsufficientDataError(
                f"AA{j + 1}: need >= 4 distinct curvature samples, got {len(np.unique(kg))}")
        w_k = 1.0 / kg.max()
        has_dir = kg > 0
        Lam = frac[:, :, j]  # (N, 2)

        def unpack(p):
            if shared_theta:
                return p[0], p[2], p[1], p[2]
            return p[0], p[1], p[2], p[3]

        def residual(p):
            A = _aa_design(ke, zc, *unpack(p))
            B = Lam @ pinv(A).T
            k_model = np.hypot(B[:, 0], B[:, 1])
            phi_model = np.arctan2(B[:, 0], B[:, 1])
            dphi = wrap_angle(phi_model[has_dir] - pg[has_dir])
            return np.concatenate([w_k * (k_model - kg), np.atleast_1d(dphi) / math.pi])

        if shared_theta:
            p0 = np.array([r[0, j], r[1, j], 0.5 * (theta[0, j] + theta[1, j])])
        else:
            p0 = np.array([r[0, j], theta[0, j], r[1, j], theta[1, j]])
        try:
            res = least_squares(residual, p0, tol=tol, rcond=GEOMETRY_RCOND)
        except SingularJacobianError as exc:
            raise InsufficientExcitationError(f"AA{j + 1}: {exc}") from exc
        r1, th1, r2, th2 = unpack(res.x)
        r[:, j] = (r1, r2)
        theta[:, j] = (th1, th2)
        log.info("AA%d geometry fit (%s): residual %.3e after %d iterations",
                 j + 1, mode, res.residual_norm, res.iterations)
    return initial.replace(r=r, theta=theta)


# ------------------------------------------------------------------ friction

def raw_curvatures(dataset: CalibrationDataset, geometry: SensorGeometry) -> np.ndarray:
    """Uncompensated curvature magnitude per sample and active area."""
    B = solve_all(geometry, dataset.wavelengths())
    return np.hypot(B[..., 0], B[..., 1])


def fit_friction_coeffs(dataset: CalibrationDataset, geometry: SensorGeometry,
                        require_both: bool = True, fallback: CalibrationSet | None = None) -> dict:
    """Per-AA, per-sign scalar fit ``C = sum(k_gt k') / sum(k'^2)``.

    Returns ``{"c_pos": (...), "c_neg": (...)}``. A sign without samples keeps
    the ``fallback`` values, unless ``require_both`` is set.
    """
    fallback = fallback or CalibrationSet()
    kraw = raw_curvatures(dataset, geometry)
    kgt, _ = dataset.truth()
    signs = dataset.signs()
    out = {}
    for sign, key in ((1, "c_pos"), (-1, "c_neg")):
        sel = signs == sign
        if np.count_nonzero(sel) == 0 or not np.any(kraw[sel] > 0):
            if require_both:
                raise InsufficientDataError(
                    f"no {'positive' if sign > 0 else 'negative'}-deflection samples in the dataset")
            out[key] = getattr(fallback, key)
            continue
        kr, kg = kraw[sel], kgt[sel]
        out[key] = tuple(float(v) for v in (kg * kr).sum(axis=0) / (kr * kr).sum(axis=0))
    return out


# --------------------------------------------------------------------- twist

@dataclass(frozen=True)
class TwistCalibration:
    phi_twist: tuple  # rad, per AA
    lambda0: np.ndarray  # new reference wavelengths from the straight frame


def measure_twist(straight_frame: WavelengthFrame, groove_frame: WavelengthFrame,
                  groove_kappa: float, geometry: SensorGeometry) -> TwistCalibration:
    """Twist offsets from a straight reference and one constant-curvature groove.

    The straight frame becomes the reference; the bending direction recovered
    in the groove is the offset from the nominal in-plane direction (0 for a
    positive groove, pi for a negative one).
    """
    if abs(groove_kappa) < MIN_TWIST_GROOVE_KAPPA:
        raise InvariantError("groove_kappa", groove_kappa,
                             f"|kappa| >= {MIN_TWIST_GROOVE_KAPPA} 1/mm (direction ill-conditioned below)")
    ref = geometry.replace(lambda0=straight_frame.wavelengths)
    nominal = 0.0 if groove_kappa > 0 else math.pi
    phi_t = tuple(wrap_angle(solve_aa(ref, groove_frame, j).phi - nominal) for j in range(N_AA))
    return TwistCalibration(phi_t, np.array(straight_frame.wavelengths))


# ---------------------------------------------------------------- validation

@dataclass
class ErrorStats:
    mean: float
    std: float
    n: int

    @classmethod
    def of(cls, errors) -> "ErrorStats":
        e = np.asarray(errors, dtype=float)
        if e.size == 0:
            return cls(float("nan"), float("nan"), 0)
        return cls(float(e.mean()), float(e.std()), int(e.size))


@dataclass
class ValidationReport:
    curvature: ErrorStats  # 1/mm
    direction: ErrorStats  # rad
    by_sign: dict = field(default_factory=dict)  # "positive"/"negative" -> (curvature, direction)

    def table(self) -> str:
        lines = [f"{'deflection':<10} {'curvature error (1/mm)':>28} {'direction error (deg)':>26}"]
        rows = [(name, *self.by_sign[name]) for name in ("positive", "negative") if name in self.by_sign]
        rows.append(("all", self.curvature, self.direction))
        for name, c, d in rows:
            lines.append(f"{name:<10} {c.mean:>13.3e} +/- {c.std:<9.3e} "
                         f"{math.degrees(d.mean):>11.3f} +/- {math.degrees(d.std):<8.3f}")
        return "\n".join(lines)


def _sample_errors(samples, geometry, calib):
    k_err, p_err = [], []
    for s in samples:
        est = estimate_frame(s.frame, geometry, calib)
        for j, e in enumerate(est):
            k_err.append(abs(e.kappa - s.kappa[j]))
            if s.kappa[j] > 0:
                p_err.append(abs(wrap_angle(e.phi - s.phi[j])))
    return k_err, p_err


def validate(dataset: CalibrationDataset, geometry: SensorGeometry, calib: CalibrationSet) -> ValidationReport:
    """Absolute curvature and direction errors of the compensated model."""
    if len(dataset) == 0:
        raise InsufficientDataError("empty validation dataset")
    k_all, p_all = _sample_errors(dataset.samples, geometry, calib)
    report = ValidationReport(ErrorStats.of(k_all), ErrorStats.of(p_all))
    for sign, name in ((1, "positive"), (-1, "negative")):
        subset = [s for s in dataset.samples if s.sign == sign]
        if subset:
            k, p = _sample_errors(subset, geometry, calib)
            report.by_sign[name] = (ErrorStats.of(k), ErrorStats.of(p))
    return report


def deflection_of_sign(sign: int) -> Deflection:
    return {1: Deflection.POSITIVE, -1: Deflection.NEGATIVE, 0: Deflection.STRAIGHT}[sign]
