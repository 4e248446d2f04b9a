"""Request and response models for the HTTP service."""
from __future__ import annotations

from typing import List, Optional

from pydantic import BaseModel, Field, field_validator


class FrameIn(BaseModel):
    t: float = 0.0
    wavelengths: List[List[float]] = Field(..., description="nm, [fiber][aa], 2 x 3")

    @field_validator("wavelengths")
    @classmethod
    def _shape(cls, v):
        if len(v) != 2 or any(len(row) != 3 for row in v):
            raise ValueError("wavelengths must be 2 x 3 ([fiber][aa])")
        return v


class ReconstructRequest(BaseModel):
    frame: FrameIn
    step: float = Field(0.1, gt=0, le=5.0)
    tip_only: bool = False
    config_text: Optional[str] = Field(None, description="INI config overriding the server default")


class BatchRequest(BaseModel):
    frames: List[FrameIn]
    step: float = Field(0.1, gt=0, le=5.0)
    tip_only: bool = True
    config_text: Optional[str] = None


class AaOut(BaseModel):
    kappa: float
    phi: float
    deflection: str


class CenterlineOut(BaseModel):
    t: float
    tip: List[float]
    tip_theta_deg: float
    s: Optional[List[float]] = None
    x: Optional[List[float]] = None
    y: Optional[List[float]] = None
    active_areas: List[AaOut] = []


class BatchResponse(BaseModel):
    results: List[CenterlineOut]


class MaterialIn(BaseModel):
    role: str
    youngs_modulus: float = Field(..., ge=0, description="GPa")
    diameter: float = Field(..., gt=0, description="mm")
    count: int = Field(1, ge=1)


class NeutralAxisRequest(BaseModel):
    materials: Optional[List[MaterialIn]] = None
    lumen_circle_radius: Optional[float] = Field(None, gt=0, description="mm")


class NeutralAxisResponse(BaseModel):
    z_c: float
    unit: str = "mm"


class SimulateRequest(BaseModel):
    scenario: str = "jig"
    parameter: float = 90.0
    sign: int = 1
    noise_nm: float = Field(0.001, ge=0)
    # friction and twist default to the server config
    twist_deg: Optional[List[float]] = None
    c_pos: Optional[List[float]] = None
    c_neg: Optional[List[float]] = None
    n_frames: int = Field(1, ge=1, le=10000)
    seed: int = 0


class SimulateResponse(BaseModel):
    frames: List[FrameIn]
    truth_tip: List[float]
    truth_kappa: List[float] = Field(..., description="signed manipulator curvature at each AA, 1/mm")
    truth_kappa_sensor: List[float] = Field(..., description="signed sensor-path curvature at each AA, 1/mm")


class HealthResponse(BaseModel):
    status: str
    version: str


class ErrorResponse(BaseModel):
    error: str
    kind: str
    stage: Optional[str] = None
