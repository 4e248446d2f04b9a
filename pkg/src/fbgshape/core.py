"""Domain types, unit conventions and the key-value config file.

Units throughout the package: mm for length, nm for wavelength, radians for
angles (degrees only in config files and on the command line), GPa for moduli,
1/mm for curvature.
"""
from __future__ import annotations

import configparser
import io
import math
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

SCHEMA_VERSION = 1
N_FIBERS = 2
N_AA = 3
CONFIG_ENV_VAR = "FBGSHAPE_CONFIG"
SIGN_CONVENTION = "fiber1-positive-is-positive-deflection"
MATERIAL_ROLES = ("tube", "niti-rod", "fiber", "lumen")


class FbgShapeError(Exception):
    """Base class for all package errors."""


class ParseError(FbgShapeError):
    """Malformed input file or record."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class InvariantError(FbgShapeError, ValueError):
    """A value violates a documented bound."""

    def __init__(self, field_name: str, value, bound: str):
        self.field = field_name
        self.value = value
        self.bound = bound
        super().__init__(f"{field_name}={value!r} violates bound {bound}")


class NumericalError(FbgShapeError, ArithmeticError):
    """A numerical stage failed (non-finite values, divergence, degeneracy)."""


def _check(cond: bool, field_name: str, value, bound: str) -> None:
    if not cond:
        raise InvariantError(field_name, value, bound)


def _frozen(a, shape=None) -> np.ndarray:
    arr = np.array(a, dtype=float)
    if shape is not None and arr.shape != shape:
        raise InvariantError("shape", arr.shape, f"== {shape}")
    arr.flags.writeable = False
    return arr


def wrap_angle(phi):
    """Map angles to (-pi, pi]."""
    w = np.mod(np.asarray(phi, dtype=float) + np.pi, 2 * np.pi) - np.pi
    w = np.where(w == -np.pi, np.pi, w)
    return float(w) if np.ndim(w) == 0 else w


@dataclass(frozen=True)
class MaterialComponent:
    role: str
    youngs_modulus: float  # GPa
    diameter: float  # mm
    count: int = 1

    def __post_init__(self):
        _check(self.role in MATERIAL_ROLES, "role", self.role, f"one of {MATERIAL_ROLES}")
        _check(math.isfinite(self.youngs_modulus) and self.youngs_modulus >= 0,
               f"{self.role}.youngs_modulus", self.youngs_modulus, ">= 0 GPa")
        # lower bound rejects metre-scaled diameters
        _check(math.isfinite(self.diameter) and 0.01 <= self.diameter < 10,
               f"{self.role}.diameter", self.diameter, "in [0.01, 10) mm")
        _check(int(self.count) == self.count and self.count >= 1,
               f"{self.role}.count", self.count, ">= 1")

    @property
    def area(self) -> float:
        return math.pi * self.diameter ** 2 / 4


@dataclass(frozen=True)
class SensorGeometry:
    """Per-node FBG geometry. Node arrays are indexed [fiber, active_area]."""

    z_c: float
    k_eps: float
    r: np.ndarray
    theta: np.ndarray
    lambda0: np.ndarray
    lumen_circle_radius: float = 0.1328
    k_t: float = 6.5e-6

    def __post_init__(self):
        shape = (N_FIBERS, N_AA)
        object.__setattr__(self, "r", _frozen(self.r, shape))
        object.__setattr__(self, "theta", _frozen(self.theta, shape))
        object.__setattr__(self, "lambda0", _frozen(self.lambda0, shape))
        _check(math.isfinite(self.z_c) and 0 <= self.z_c < 0.25, "z_c", self.z_c, "in [0, 0.25) mm")
        _check(0 < self.k_eps < 1, "k_eps", self.k_eps, "1 - p_eps with p_eps in (0, 1)")
        _check(bool(np.all((self.r >= 0.01) & (self.r < 0.25))), "r", self.r.tolist(), "in [0.01, 0.25) mm")
        _check(bool(np.all((self.theta > 0) & (self.theta < np.pi))), "theta", self.theta.tolist(), "in (0, pi) rad")
        _check(bool(np.all((self.lambda0 >= 1500) & (self.lambda0 <= 1600))),
               "lambda0", self.lambda0.tolist(), "in [1500, 1600] nm")
        _check(0.01 <= self.lumen_circle_radius < 0.25, "lumen_circle_radius",
               self.lumen_circle_radius, "in [0.01, 0.25) mm")
        _check(math.isfinite(self.k_t) and self.k_t >= 0, "k_t", self.k_t, ">= 0 1/K")

    @property
    def p_eps(self) -> float:
        return 1.0 - self.k_eps

    def replace(self, **changes) -> "SensorGeometry":
        fields = dict(z_c=self.z_c, k_eps=self.k_eps, r=self.r, theta=self.theta,
                      lambda0=self.lambda0, lumen_circle_radius=self.lumen_circle_radius,
                      k_t=self.k_t)
        fields.update(changes)
        return SensorGeometry(**fields)


@dataclass(frozen=True)
class CdmConfig:
    total_arc_length: float = 35.0
    d_offset: float = 2.45
    aa_arc_positions: tuple = (5.0, 15.0, 25.0)
    deflection_sign_convention: str = SIGN_CONVENTION

    def __post_init__(self):
        object.__setattr__(self, "aa_arc_positions", tuple(float(s) for s in self.aa_arc_positions))
        L = self.total_arc_length
        _check(math.isfinite(L) and 1.0 <= L <= 1000.0, "total_arc_length", L, "in [1, 1000] mm")
        _check(0.1 <= self.d_offset < 3, "d_offset", self.d_offset, "in [0.1, 3) mm")
        s = self.aa_arc_positions
        _check(len(s) == N_AA, "aa_arc_positions", s, f"exactly {N_AA} values")
        _check(all(b > a for a, b in zip(s, s[1:])), "aa_arc_positions", s, "strictly increasing")
        _check(all(0 <= v <= L for v in s), "aa_arc_positions", s, f"within [0, {L}] mm")
        _check(self.deflection_sign_convention == SIGN_CONVENTION,
               "deflection_sign_convention", self.deflection_sign_convention, SIGN_CONVENTION)


@dataclass(frozen=True)
class CalibrationSet:
    c_pos: tuple = (1.0, 1.0, 1.0)
    c_neg: tuple = (1.0, 1.0, 1.0)
    phi_twist: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        for name in ("c_pos", "c_neg", "phi_twist"):
            vals = tuple(float(v) for v in getattr(self, name))
            _check(len(vals) == N_AA, name, vals, f"exactly {N_AA} values")
            object.__setattr__(self, name, vals)
        for name in ("c_pos", "c_neg"):
            vals = getattr(self, name)
            _check(all(0.3 < c < 2.0 for c in vals), name, vals, "each in (0.3, 2.0)")
        _check(all(abs(p) < np.pi / 4 for p in self.phi_twist), "phi_twist", self.phi_twist, "|phi_t| < pi/4 rad")

    def coefficient(self, aa: int, sign: int) -> float:
        """Friction coefficient for active area ``aa`` (0-based) and deflection sign."""
        if sign > 0:
            return self.c_pos[aa]
        if sign < 0:
            return self.c_neg[aa]
        return 1.0


@dataclass(frozen=True)
class WavelengthFrame:
    timestamp: float
    wavelengths: np.ndarray  # nm, [fiber, aa]

    def __post_init__(self):
        lam = _frozen(self.wavelengths, (N_FIBERS, N_AA))
        _check(bool(np.all(np.isfinite(lam))), "wavelengths", lam.tolist(), "finite")
        _check(bool(np.all((lam >= 1500) & (lam <= 1600))), "wavelengths", lam.tolist(), "in [1500, 1600] nm")
        object.__setattr__(self, "wavelengths", lam)
        object.__setattr__(self, "timestamp", float(self.timestamp))

    def shift(self, lambda0: np.ndarray) -> np.ndarray:
        return self.wavelengths - lambda0


@dataclass(frozen=True)
class Config:
    geometry: SensorGeometry
    cdm: CdmConfig
    calibration: CalibrationSet
    materials: tuple = field(default_factory=tuple)

    def material(self, role: str) -> MaterialComponent:
        for m in self.materials:
            if m.role == role:
                return m
        raise InvariantError("materials", role, "present in config")

    def replace(self, **changes) -> "Config":
        d = dict(geometry=self.geometry, cdm=self.cdm, calibration=self.calibration,
                 materials=self.materials)
        d.update(changes)
        return Config(**d)


# ---------------------------------------------------------------- config file

def _floats(text: str, key: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ParseError(f"[{key}] expected comma-separated numbers, got {text!r}") from exc


def _fmt(values) -> str:
    return ", ".join(repr(float(v)) for v in np.ravel(values))


def parse_config(text: str, source: str = "<string>") -> Config:
    from .beam import sensor_cross_section, neutral_axis_offset

    cp = configparser.ConfigParser()
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ParseError(f"{source}: {exc}") from exc

    def get(section, key):
        try:
            return cp[section][key]
        except KeyError:
            raise ParseError(f"{source}: missing [{section}] {key}") from None

    def num(section, key):
        return _floats(get(section, key), f"{section}.{key}")[0]

    version = get("meta", "schema_version").strip()
    if version != str(SCHEMA_VERSION):
        raise ParseError(f"{source}: unsupported schema_version {version!r}")

    materials = []
    for role in MATERIAL_ROLES:
        sec = f"material.{role}"
        if sec in cp:
            materials.append(MaterialComponent(
                role=role,
                youngs_modulus=num(sec, "youngs_modulus_gpa"),
                diameter=num(sec, "diameter_mm"),
                count=int(num(sec, "count")),
            ))
    materials = tuple(materials)

    lumen_r = num("sensor", "lumen_circle_radius_mm")
    zc_text = get("sensor", "z_c_mm").strip()
    if zc_text == "auto":
        if len(materials) != len(MATERIAL_ROLES):
            raise ParseError(f"{source}: z_c_mm = auto needs all four [material.*] sections")
        z_c = neutral_axis_offset(sensor_cross_section(materials, lumen_r))
    else:
        z_c = num("sensor", "z_c_mm")

    def node(key):
        rows = [_floats(get("sensor", f"{key}_fiber{k}"), f"sensor.{key}_fiber{k}") for k in (1, 2)]
        if any(len(row) != N_AA for row in rows):
            raise ParseError(f"{source}: [sensor] {key}_fiber* needs {N_AA} values")
        return np.array(rows)

    p_eps = num("sensor", "photoelastic_coefficient")
    _check(0 < p_eps < 1, "photoelastic_coefficient", p_eps, "in (0, 1)")
    geometry = SensorGeometry(
        z_c=z_c,
        k_eps=1.0 - p_eps,
        r=node("r_mm"),
        theta=np.radians(node("theta_deg")),
        lambda0=node("lambda0_nm"),
        lumen_circle_radius=lumen_r,
        k_t=num("sensor", "thermal_coefficient_per_k"),
    )
    cdm = CdmConfig(
        total_arc_length=num("cdm", "total_arc_length_mm"),
        d_offset=num("cdm", "d_offset_mm"),
        aa_arc_positions=tuple(_floats(get("cdm", "aa_arc_positions_mm"), "cdm.aa_arc_positions_mm")),
        deflection_sign_convention=get("cdm", "deflection_sign_convention").strip(),
    )
    calibration = CalibrationSet(
        c_pos=tuple(_floats(get("calibration", "c_pos"), "calibration.c_pos")),
        c_neg=tuple(_floats(get("calibration", "c_neg"), "calibration.c_neg")),
        phi_twist=tuple(np.radians(_floats(get("calibration", "phi_twist_deg"), "calibration.phi_twist_deg"))),
    )
    return Config(geometry=geometry, cdm=cdm, calibration=calibration, materials=materials)


def serialize_config(cfg: Config) -> str:
    g, c, cal = cfg.geometry, cfg.cdm, cfg.calibration
    cp = configparser.ConfigParser()
    cp["meta"] = {"schema_version": str(SCHEMA_VERSION)}
    cp["cdm"] = {
        "total_arc_length_mm": repr(float(c.total_arc_length)),
        "d_offset_mm": repr(float(c.d_offset)),
        "aa_arc_positions_mm": _fmt(c.aa_arc_positions),
        "deflection_sign_convention": c.deflection_sign_convention,
    }
    sensor = {
        "photoelastic_coefficient": repr(g.p_eps),
        "z_c_mm": repr(float(g.z_c)),
        "lumen_circle_radius_mm": repr(float(g.lumen_circle_radius)),
        "thermal_coefficient_per_k": repr(float(g.k_t)),
    }
    for k in (0, 1):
        sensor[f"r_mm_fiber{k + 1}"] = _fmt(g.r[k])
        sensor[f"theta_deg_fiber{k + 1}"] = _fmt(np.degrees(g.theta[k]))
        sensor[f"lambda0_nm_fiber{k + 1}"] = _fmt(g.lambda0[k])
    cp["sensor"] = sensor
    cp["calibration"] = {
        "c_pos": _fmt(cal.c_pos),
        "c_neg": _fmt(cal.c_neg),
        "phi_twist_deg": _fmt(np.degrees(cal.phi_twist)),
    }
    for m in cfg.materials:
        cp[f"material.{m.role}"] = {
            "youngs_modulus_gpa": repr(float(m.youngs_modulus)),
            "diameter_mm": repr(float(m.diameter)),
            "count": str(int(m.count)),
        }
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def default_config_text() -> str:
    return resources.files("fbgshape").joinpath("data/default.ini").read_text()


def load_config(path: str | os.PathLike | None = None) -> Config:
    """Load and validate a config file.

    With ``path=None`` the ``FBGSHAPE_CONFIG`` environment variable is
    consulted, then the shipped default.
    """
    if path is None:
        path = os.environ.get(CONFIG_ENV_VAR)
    if path is None:
        return parse_config(default_config_text(), source="default.ini")
    p = Path(path)
    if not p.is_file():
        raise ParseError(f"config file not found: {p}")
    return parse_config(p.read_text(), source=str(p))


def save_config(cfg: Config, path: str | os.PathLike) -> None:
    Path(path).write_text(serialize_config(cfg))


def symmetric_geometry(geometry: SensorGeometry, fiber: int = 0) -> SensorGeometry:
    """Copy of ``geometry`` with both fibers set to the node parameters of ``fiber``."""
    r = np.vstack([geometry.r[fiber], geometry.r[fiber]])
    th = np.vstack([geometry.theta[fiber], geometry.theta[fiber]])
    return geometry.replace(r=r, theta=th)


def as_triple(values: Sequence[float], name: str) -> tuple:
    vals = tuple(float(v) for v in values)
    _check(len(vals) == N_AA, name, vals, f"exactly {N_AA} values")
    return vals
