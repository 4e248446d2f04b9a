"""FastAPI application wrapping the reconstruction, neutral-axis and
simulation functions."""
from __future__ import annotations

import math

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..beam import neutral_axis_offset, sensor_cross_section
from ..core import (
    Config,
    FbgShapeError,
    InvariantError,
    MaterialComponent,
    ParseError,
    WavelengthFrame,
    load_config,
    parse_config,
    serialize_config,
)
from ..reconstruct import PipelineError, reconstruct_detailed
from ..simulate import ScenarioSpec, synthesize_frames
from .schemas import (
    BatchRequest,
    BatchResponse,
    CenterlineOut,
    FrameIn,
    HealthResponse,
    NeutralAxisRequest,
    NeutralAxisResponse,
    ReconstructRequest,
    SimulateRequest,
    SimulateResponse,
)


def error_status(exc: FbgShapeError) -> int:
    if isinstance(exc, (ParseError, InvariantError)):
        return 422
    return 400


def create_app(config: Config | None = None) -> FastAPI:
    app = FastAPI(title="fbgshape", version=__version__)
    app.state.config = config or load_config()

    @app.exception_handler(FbgShapeError)
    async def _fbg_error(request: Request, exc: FbgShapeError):
        body = {"error": str(exc), "kind": type(exc).__name__}
        if isinstance(exc, PipelineError):
            body.update(stage=exc.stage, kind=type(exc.cause).__name__)
        return JSONResponse(status_code=error_status(exc), content=body)

    def config_for(text: str | None) -> Config:
        return parse_config(text, "<request>") if text else app.state.config

    def run(frame_in: FrameIn, cfg: Config, step: float, tip_only: bool) -> CenterlineOut:
        frame = WavelengthFrame(frame_in.t, np.array(frame_in.wavelengths))
        rec = reconstruct_detailed(frame, cfg.geometry, cfg.calibration, cfg.cdm, step)
        line = rec.centerline
        out = CenterlineOut(
            t=frame.timestamp,
            tip=[float(v) for v in line.tip],
            tip_theta_deg=math.degrees(float(line.theta[-1])),
            active_areas=[{"kappa": e.kappa, "phi": e.phi, "deflection": e.deflection.value}
                          for e in rec.estimates],
        )
        if not tip_only:
            out.s = line.s.tolist()
            out.x = line.points[:, 0].tolist()
            out.y = line.points[:, 1].tolist()
        return out

    @app.get("/health", response_model=HealthResponse)
    def health():
        return HealthResponse(status="ok", version=__version__)

    @app.get("/config")
    def get_config():
        return {"config_text": serialize_config(app.state.config)}

    @app.post("/neutral-axis", response_model=NeutralAxisResponse)
    def neutral_axis(req: NeutralAxisRequest):
        cfg = app.state.config
        materials = cfg.materials
        if req.materials:
            materials = tuple(MaterialComponent(m.role, m.youngs_modulus, m.diameter, m.count)
                              for m in req.materials)
        r = req.lumen_circle_radius or cfg.geometry.lumen_circle_radius
        return NeutralAxisResponse(z_c=neutral_axis_offset(sensor_cross_section(materials, r)))

    @app.post("/reconstruct", response_model=CenterlineOut, response_model_exclude_none=True)
    def reconstruct(req: ReconstructRequest):
        return run(req.frame, config_for(req.config_text), req.step, req.tip_only)

    @app.post("/reconstruct/batch", response_model=BatchResponse, response_model_exclude_none=True)
    def reconstruct_batch(req: BatchRequest):
        cfg = config_for(req.config_text)
        return BatchResponse(results=[run(f, cfg, req.step, req.tip_only) for f in req.frames])

    @app.post("/simulate", response_model=SimulateResponse)
    def simulate(req: SimulateRequest):
        cfg = app.state.config
        calib = cfg.calibration
        twist = calib.phi_twist if req.twist_deg is None else [math.radians(v) for v in req.twist_deg]
        spec = ScenarioSpec(kind=req.scenario, parameter=req.parameter, sign=req.sign,
                            noise_sigma=req.noise_nm, c_pos=req.c_pos or calib.c_pos,
                            c_neg=req.c_neg or calib.c_neg, twist=twist)
        data = synthesize_frames(spec, cfg.geometry, cfg.cdm, seed=req.seed, n_frames=req.n_frames)
        return SimulateResponse(
            frames=[FrameIn(t=f.timestamp, wavelengths=f.wavelengths.tolist()) for f in data.frames],
            truth_tip=[float(v) for v in data.polyline.tip],
            truth_kappa=[a.kappa_cm for a in data.aa],
            truth_kappa_sensor=[a.kappa_sensor for a in data.aa],
        )

    return app
