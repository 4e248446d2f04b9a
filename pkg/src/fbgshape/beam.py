"""Neutral axis of the composite sensor cross-section.

Frame: origin at the NiTi rod centre, z towards the tube centre. The three
lumens sit 120 degrees apart on a circle of radius ``r`` around the tube
centre; the rod fills the lumen at z = 0 and the two fibers fill the lumens at
z = 1.5 r.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .core import InvariantError, MaterialComponent, NumericalError


@dataclass(frozen=True)
class PlacedComponent:
    material: MaterialComponent
    z: float  # mm
    y: float = 0.0  # mm


@dataclass(frozen=True)
class CrossSection:
    components: tuple
    lumen_circle_radius: float

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        if self.lumen_circle_radius < 0:
            raise InvariantError("lumen_circle_radius", self.lumen_circle_radius, ">= 0 mm")
        # every off-axis component needs a mirror partner in y
        unmatched = [c for c in self.components if abs(c.y) > 1e-12 and not any(
            o.material == c.material and abs(o.z - c.z) < 1e-12 and abs(o.y + c.y) < 1e-12
            for o in self.components)]
        if unmatched:
            raise InvariantError("components", [c.material.role for c in unmatched], "mirror-symmetric about z")
        solid = sum(c.material.area for c in self.components if c.material.role == "tube")
        holes = sum(c.material.area for c in self.components if c.material.role == "lumen")
        if solid - holes <= 0:
            raise InvariantError("total_area", solid - holes, "> 0 mm^2")

    def material(self, role: str) -> MaterialComponent:
        for c in self.components:
            if c.material.role == role:
                return c.material
        raise InvariantError("components", role, "present in cross-section")


def sensor_cross_section(materials, r: float) -> CrossSection:
    """Place tube, rod, two fibers and three lumens for lumen-circle radius ``r``."""
    by_role = {m.role: m for m in materials}
    missing = {"tube", "niti-rod", "fiber", "lumen"} - set(by_role)
    if missing:
        raise InvariantError("materials", sorted(missing), "all four roles present")
    tube, rod, fiber, lumen = (by_role[k] for k in ("tube", "niti-rod", "fiber", "lumen"))
    zf, yf = 1.5 * r, math.sqrt(3) / 2 * r
    comps = [
        PlacedComponent(tube, r),
        PlacedComponent(lumen, 0.0),
        PlacedComponent(lumen, zf, yf),
        PlacedComponent(lumen, zf, -yf),
        PlacedComponent(rod, 0.0),
        PlacedComponent(fiber, zf, yf),
        PlacedComponent(fiber, zf, -yf),
    ]
    return CrossSection(tuple(comps), r)


def neutral_axis_offset(section: CrossSection) -> float:
    """Closed-form z_c (mm) of the modulus-weighted centroid.

    Lumens remove tube material; each is refilled by the fiber or rod it holds.
    """
    tube = section.material("tube")
    rod = section.material("niti-rod")
    fiber = section.material("fiber")
    lumen = section.material("lumen")
    Et, Dt = tube.youngs_modulus, tube.diameter
    Enw, Dnw = rod.youngs_modulus, rod.diameter
    Ef, Df = fiber.youngs_modulus, fiber.diameter
    Dl = lumen.diameter
    hollow_tube = Et * (Dt ** 2 - 3 * Dl ** 2)
    denom = Enw * Dnw ** 2 + 2 * Ef * Df ** 2 + hollow_tube
    if not denom > 0:
        raise NumericalError(f"degenerate cross-section: modulus-weighted area {denom!r} <= 0")
    return (3 * Ef * Df ** 2 + hollow_tube) * section.lumen_circle_radius / denom
