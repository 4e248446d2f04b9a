"""FBG measurement model: forward (bending state -> wavelengths) and inverse
(wavelengths -> curvature, bending direction, lumped temperature term), plus
deflection-sign classification and friction/twist compensation.

Indexing: ``aa`` is 0-based (0..2) and ``fiber`` is 0 or 1 throughout; the
docstrings use 1-based names (AA1, fiber 1) to match the hardware labels.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .core import (
    N_AA,
    CalibrationSet,
    FbgShapeError,
    InvariantError,
    NumericalError,
    SensorGeometry,
    WavelengthFrame,
    wrap_angle,
)
from .numerics import pinv

STRAIN_LIMIT = 0.015
DEADBAND_NM = 0.005


class StrainLimitError(FbgShapeError):
    pass


class AmbiguousSignalError(FbgShapeError):
    pass


class Deflection(str, Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"
    STRAIGHT = "straight"

    @property
    def sign(self) -> int:
        return {"positive": 1, "negative": -1, "straight": 0}[self.value]


@dataclass(frozen=True)
class AaState:
    kappa: float  # 1/mm
    phi: float  # rad
    delta_T: float = 0.0  # K

    def __post_init__(self):
        if not (math.isfinite(self.kappa) and self.kappa >= 0):
            raise InvariantError("kappa", self.kappa, ">= 0 1/mm")
        object.__setattr__(self, "phi", wrap_angle(self.phi))


@dataclass(frozen=True)
class RawEstimate:
    """Direct inversion result for one active area."""

    kappa: float
    phi: float
    b3: float  # lumped K_T * delta_T


@dataclass(frozen=True)
class AaEstimate:
    raw: RawEstimate
    kappa: float  # compensated
    phi: float  # compensated
    deflection: Deflection


def node_strain(geometry: SensorGeometry, aa: int, fiber: int, state: AaState) -> float:
    """Axial strain at node (fiber, aa) under pure bending."""
    r = geometry.r[fiber, aa]
    th = geometry.theta[fiber, aa]
    k, phi, zc = state.kappa, state.phi, geometry.z_c
    if fiber == 0:
        eps = -k * (zc * math.sin(phi) - r * math.sin(th - phi))
    elif fiber == 1:
        eps = -k * (zc * math.sin(phi) + r * math.sin(th + phi))
    else:
        raise InvariantError("fiber", fiber, "0 or 1")
    if abs(eps) > STRAIN_LIMIT:
        raise StrainLimitError(
            f"strain {eps:.4g} at node N{fiber + 1}{aa + 1} exceeds the fiber limit {STRAIN_LIMIT}")
    return eps


def forward_wavelengths(geometry: SensorGeometry, states: Sequence[AaState],
                        timestamp: float = 0.0) -> WavelengthFrame:
    """Bragg wavelengths for the given per-AA states (reference strain zero)."""
    if len(states) != N_AA:
        raise InvariantError("states", len(states), f"exactly {N_AA}")
    frac = np.empty((2, N_AA))
    for j, st in enumerate(states):
        thermal = geometry.k_t * st.delta_T
        for k in (0, 1):
            frac[k, j] = geometry.k_eps * node_strain(geometry, j, k, st) + thermal
    return WavelengthFrame(timestamp, geometry.lambda0 * (1.0 + frac))


def design_matrices(geometry: SensorGeometry) -> np.ndarray:
    """Stack of the three 2x3 matrices mapping (k sin phi, k cos phi, K_T dT)
    to fractional wavelength shifts."""
    ke, zc = geometry.k_eps, geometry.z_c
    r, th = geometry.r, geometry.theta
    A = np.empty((N_AA, 2, 3))
    A[:, :, 0] = (-ke * (zc + r * np.cos(th))).T
    A[:, 0, 1] = ke * r[0] * np.sin(th[0])
    A[:, 1, 1] = -ke * r[1] * np.sin(th[1])
    A[:, :, 2] = 1.0
    return A


def build_design_matrix(geometry: SensorGeometry, aa: int) -> np.ndarray:
    if not 0 <= aa < N_AA:
        raise InvariantError("aa", aa, f"in [0, {N_AA})")
    return design_matrices(geometry)[aa]


_PINV_CACHE: dict = {}


def design_pinvs(geometry: SensorGeometry) -> np.ndarray:
    """Pseudo-inverses of the design matrices, cached per geometry."""
    key = (geometry.k_eps, geometry.z_c, geometry.r.tobytes(), geometry.theta.tobytes())
    hit = _PINV_CACHE.get(key)
    if hit is None:
        if len(_PINV_CACHE) >= 64:
            _PINV_CACHE.clear()
        hit = pinv(design_matrices(geometry))
        hit.flags.writeable = False
        _PINV_CACHE[key] = hit
    return hit


def _direction(b1, b2):
    # atan2(0, 0) is 0 in IEEE arithmetic; wrap -pi to pi
    return wrap_angle(np.arctan2(b1, b2))


def solve_aa(geometry: SensorGeometry, frame: WavelengthFrame, aa: int) -> RawEstimate:
    """Curvature, direction and temperature term at one active area."""
    lam = frame.wavelengths[:, aa]
    lam0 = geometry.lambda0[:, aa]
    if not 0 <= aa < N_AA:
        raise InvariantError("aa", aa, f"in [0, {N_AA})")
    rhs = (lam - lam0) / lam0
    if not np.all(np.isfinite(rhs)):
        raise NumericalError("pseudo-inverse solve with non-finite right-hand side")
    B = design_pinvs(geometry)[aa] @ rhs
    return RawEstimate(float(math.hypot(B[0], B[1])), float(_direction(B[0], B[1])), float(B[2]))


def solve_all(geometry: SensorGeometry, wavelengths: np.ndarray,
              pinvs: np.ndarray | None = None) -> np.ndarray:
    """Vectorised inversion of many frames.

    ``wavelengths`` has shape (..., 2, 3); returns B with shape (..., 3, 3)
    indexed [..., aa, component].
    """
    if pinvs is None:
        pinvs = design_pinvs(geometry)
    lam0 = geometry.lambda0
    frac = (np.asarray(wavelengths, dtype=float) - lam0) / lam0
    frac = np.swapaxes(frac, -1, -2)  # (..., aa, fiber)
    return np.einsum("aij,...aj->...ai", pinvs, frac)


def classify_aa(shift_fiber1: float, shift_fiber2: float, deadband: float = DEADBAND_NM) -> Deflection | None:
    """Sign rule for one active area; ``None`` means the two fibers contradict."""
    big1, big2 = abs(shift_fiber1) > deadband, abs(shift_fiber2) > deadband
    if not big1 and not big2:
        return Deflection.STRAIGHT
    if big1 and big2 and (shift_fiber1 > 0) == (shift_fiber2 > 0):
        return None
    return Deflection.POSITIVE if shift_fiber1 - shift_fiber2 > 0 else Deflection.NEGATIVE


def classify_per_aa(frame: WavelengthFrame, geometry: SensorGeometry,
                    deadband: float = DEADBAND_NM) -> list:
    shift = frame.shift(geometry.lambda0)
    return [classify_aa(shift[0, j], shift[1, j], deadband) for j in range(N_AA)]


def classify_deflection(frame: WavelengthFrame, geometry: SensorGeometry,
                        deadband: float = DEADBAND_NM) -> Deflection:
    """Majority vote of the per-AA sign rule.

    Ties are broken by the summed fiber-1 minus fiber-2 shift.
    """
    shift = frame.shift(geometry.lambda0)
    votes = classify_per_aa(frame, geometry, deadband)
    if all(v is None for v in votes):
        raise AmbiguousSignalError(
            "both fibers shift with the same sign at every active area; cannot resolve deflection")
    if all(v in (Deflection.STRAIGHT, None) for v in votes):
        return Deflection.STRAIGHT
    pos = sum(v is Deflection.POSITIVE for v in votes)
    neg = sum(v is Deflection.NEGATIVE for v in votes)
    if pos != neg:
        return Deflection.POSITIVE if pos > neg else Deflection.NEGATIVE
    return Deflection.POSITIVE if float(np.sum(shift[0] - shift[1])) >= 0 else Deflection.NEGATIVE


def compensate(raw: Sequence[RawEstimate], calib: CalibrationSet, deflection) -> list:
    """Apply friction coefficients and twist offsets.

    ``deflection`` is one :class:`Deflection` for all active areas or a
    sequence with one entry per active area.
    """
    if isinstance(deflection, (Deflection, str)):
        deflection = [Deflection(deflection)] * N_AA
    if len(raw) != N_AA or len(deflection) != N_AA:
        raise InvariantError("raw", len(raw), f"exactly {N_AA} estimates")
    out = []
    for j, (est, dfl) in enumerate(zip(raw, deflection)):
        dfl = Deflection(dfl)
        c = calib.coefficient(j, dfl.sign)
        out.append(AaEstimate(est, c * est.kappa, wrap_angle(est.phi - calib.phi_twist[j]), dfl))
    return out


def estimate_frame(frame: WavelengthFrame, geometry: SensorGeometry, calib: CalibrationSet) -> list:
    """Solve, classify (per active area) and compensate one frame."""
    raw = [solve_aa(geometry, frame, j) for j in range(N_AA)]
    votes = classify_per_aa(frame, geometry)
    if all(v is None for v in votes):
        raise AmbiguousSignalError(
            "both fibers shift with the same sign at every active area; cannot resolve deflection")
    if any(v is None for v in votes):
        overall = classify_deflection(frame, geometry)
        votes = [overall if v is None else v for v in votes]
    return compensate(raw, calib, votes)
