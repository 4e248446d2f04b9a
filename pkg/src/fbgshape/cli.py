"""Command-line interface.

Every subcommand runs in-process by default; ``reconstruct`` and
``neutral-axis`` accept ``--server URL`` to call a running service instead.
Exit codes: 0 ok, 2 parse/input error, 3 numeric or pipeline error,
4 invariant or precondition violation.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_NUMERIC = 3
EXIT_INVARIANT = 4

log = logging.getLogger("fbgshape")


def _config(args):
    from .core import load_config

    return load_config(args.config)


def _write_config(cfg, args):
    from .core import save_config

    target = args.out or args.config
    if target is None:
        from .core import serialize_config

        sys.stdout.write(serialize_config(cfg))
    else:
        save_config(cfg, target)
        print(f"wrote {target}")


# ----------------------------------------------------------------- commands

def cmd_neutral_axis(args) -> int:
    if args.server:
        import httpx

        resp = httpx.post(args.server.rstrip("/") + "/neutral-axis", json={}, timeout=30)
        if resp.status_code != 200:
            print(f"error: server returned {resp.status_code}: {resp.text}", file=sys.stderr)
            return EXIT_NUMERIC
        z_c = resp.json()["z_c"]
    else:
        from .beam import neutral_axis_offset, sensor_cross_section

        cfg = _config(args)
        z_c = neutral_axis_offset(sensor_cross_section(cfg.materials, cfg.geometry.lumen_circle_radius))
    print(f"z_c = {z_c:.3f} mm ({z_c:.9g} mm)")
    return EXIT_OK


def _reconstruct_remote(frames, args):
    import httpx

    import numpy as np

    from .reconstruct import CenterlinePolyline

    cfg_text = Path(args.config).read_text() if args.config else None
    body = {"frames": [{"t": f.timestamp, "wavelengths": f.wavelengths.tolist()} for f in frames],
            "step": args.step, "tip_only": False, "config_text": cfg_text}
    resp = httpx.post(args.server.rstrip("/") + "/reconstruct/batch", json=body, timeout=120)
    if resp.status_code != 200:
        detail = resp.json() if resp.headers.get("content-type", "").startswith("application/json") else resp.text
        print(f"error: server returned {resp.status_code}: {detail}", file=sys.stderr)
        return None
    lines = []
    for r in resp.json()["results"]:
        pts = np.column_stack([r["x"], r["y"]])
        s = np.array(r["s"])
        theta = np.full(len(s), math.radians(r["tip_theta_deg"]))
        lines.append(CenterlinePolyline("cdm-proximal", s, pts, theta, args.step, float(s[-1])))
    return lines


def cmd_reconstruct(args) -> int:
    from .formats import centerline_to_csv, read_frames, summary_header, summary_row
    from .reconstruct import reconstruct_cdm

    frames = read_frames(args.input)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.server:
        lines = _reconstruct_remote(frames, args)
        if lines is None:
            return EXIT_NUMERIC
    else:
        cfg = _config(args)
        lines = [reconstruct_cdm(f, cfg.geometry, cfg.calibration, cfg.cdm, args.step) for f in frames]
    summary = [summary_header()]
    for i, (frame, line) in enumerate(zip(frames, lines)):
        (out / f"frame_{i:05d}.csv").write_text(centerline_to_csv(line))
        summary.append(summary_row(i, frame, line))
    (out / "summary.csv").write_text("\n".join(summary) + "\n")
    print(f"reconstructed {len(frames)} frame(s) into {out}")
    return EXIT_OK


def cmd_stream(args) -> int:
    from .stream import run_stream

    cfg = _config(args)
    stats = run_stream(sys.stdin, sys.stdout, cfg.geometry, cfg.calibration, cfg.cdm,
                       tip_only=args.tip_only, step=args.step, depth=args.queue_depth)
    log.info("stream finished: %d frames, %d errors, %d dropped", stats.frames, stats.errors, stats.dropped)
    return EXIT_OK


def _scenario(args, cfg):
    from .simulate import ScenarioSpec

    # friction and twist default to the config so simulate and reconstruct agree
    calib = cfg.calibration
    twist = calib.phi_twist if args.twist_deg is None else [math.radians(v) for v in args.twist_deg]
    parameter = args.angle if args.scenario == "jig" else args.parameter
    return ScenarioSpec(
        kind=args.scenario, parameter=parameter, sign=args.sign, noise_sigma=args.noise_nm,
        c_pos=calib.c_pos if args.c_pos is None else args.c_pos,
        c_neg=calib.c_neg if args.c_neg is None else args.c_neg,
        twist=twist, delta_T=args.delta_t, sensor_only=args.sensor_only,
    )


def cmd_simulate(args) -> int:
    from .formats import centerline_to_csv, write_dataset, write_frames
    from .simulate import FIT_GROOVES, VALIDATION_GROOVES, jig_dataset, synthesize_frames

    cfg = _config(args)
    spec = _scenario(args, cfg)
    if args.sweep:
        angles = FIT_GROOVES if args.sweep == "fit" else VALIDATION_GROOVES
        ds = jig_dataset(angles, cfg.geometry, cfg.cdm, spec, seed=args.seed)
        write_dataset(ds, args.out)
        print(f"wrote {len(ds)} groove samples to {args.out}")
        return EXIT_OK
    data = synthesize_frames(spec, cfg.geometry, cfg.cdm, seed=args.seed, n_frames=args.frames)
    write_frames(data.frames, args.out)
    if args.truth and data.polyline is not None:
        Path(args.truth).write_text(centerline_to_csv(data.polyline))
    print(f"wrote {len(data.frames)} frame(s) to {args.out}")
    return EXIT_OK


def cmd_calibrate_geometry(args) -> int:
    import numpy as np

    from .calibrate import fit_node_geometry
    from .formats import read_dataset

    cfg = _config(args)
    ds = read_dataset(args.dataset)
    geom = fit_node_geometry(ds, cfg.geometry, shared_theta=args.shared_theta)
    mode = "shared-theta" if args.shared_theta else "per-fiber"
    print(f"geometry fit ({mode}, {len(ds)} samples)")
    for k in (0, 1):
        print(f"  fiber {k + 1}: r = {np.round(geom.r[k], 4).tolist()} mm, "
              f"theta = {np.round(np.degrees(geom.theta[k]), 3).tolist()} deg")
    _write_config(cfg.replace(geometry=geom), args)
    return EXIT_OK


def cmd_calibrate_friction(args) -> int:
    from .calibrate import fit_friction_coeffs
    from .core import CalibrationSet
    from .formats import read_dataset

    cfg = _config(args)
    ds = read_dataset(args.dataset)
    fit = fit_friction_coeffs(ds, cfg.geometry, require_both=args.require_both, fallback=cfg.calibration)
    calib = CalibrationSet(fit["c_pos"], fit["c_neg"], cfg.calibration.phi_twist)
    print("c_pos = " + ", ".join(f"{c:.4f}" for c in calib.c_pos))
    print("c_neg = " + ", ".join(f"{c:.4f}" for c in calib.c_neg))
    _write_config(cfg.replace(calibration=calib), args)
    return EXIT_OK


def cmd_calibrate_twist(args) -> int:
    from .calibrate import measure_twist
    from .core import CalibrationSet
    from .formats import read_frames
    from .simulate import JigSpec, jig_curvature

    cfg = _config(args)
    straight = read_frames(args.straight)[0]
    groove = read_frames(args.groove)[0]
    if args.groove_kappa is not None:
        kappa = args.groove_kappa
    else:
        jig = JigSpec(args.groove_angle)
        kappa = math.copysign(jig_curvature(jig), args.groove_angle)
    tw = measure_twist(straight, groove, kappa, cfg.geometry)
    print("phi_t = " + ", ".join(f"{math.degrees(p):.4f}" for p in tw.phi_twist) + " deg")
    calib = CalibrationSet(cfg.calibration.c_pos, cfg.calibration.c_neg, tw.phi_twist)
    _write_config(cfg.replace(geometry=cfg.geometry.replace(lambda0=tw.lambda0), calibration=calib), args)
    return EXIT_OK


def cmd_validate(args) -> int:
    from .calibrate import validate
    from .formats import read_dataset

    from .core import CalibrationSet

    cfg = _config(args)
    calib = cfg.calibration
    if args.no_friction:
        calib = CalibrationSet(phi_twist=calib.phi_twist)
    report = validate(read_dataset(args.dataset), cfg.geometry, calib)
    print(report.table())
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(_config(args)), host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


# ------------------------------------------------------------------- parser

def _triple(text: str) -> list:
    parts = [p for p in text.replace(",", " ").split() if p]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected 3 comma-separated values, got {text!r}")
    try:
        return [float(p) for p in parts]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not numeric: {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fbgshape", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", help="config file (default: $FBGSHAPE_CONFIG or the shipped default)")
        sp.set_defaults(func=func)
        return sp

    sp = add("neutral-axis", cmd_neutral_axis, "print the neutral-axis offset z_c")
    sp.add_argument("--server", help="service base URL")

    sp = add("reconstruct", cmd_reconstruct, "reconstruct centerlines from a frame CSV")
    sp.add_argument("input", help="frame CSV (t,l11,l12,l13,l21,l22,l23)")
    sp.add_argument("--out", required=True, help="output directory")
    sp.add_argument("--step", type=float, default=0.1, help="integration step, mm")
    sp.add_argument("--server", help="service base URL")

    sp = add("stream", cmd_stream, "JSON-lines frames on stdin, reconstructions on stdout")
    sp.add_argument("--tip-only", action="store_true")
    sp.add_argument("--step", type=float, default=0.1)
    sp.add_argument("--queue-depth", type=int, default=64)

    sp = add("simulate", cmd_simulate, "write synthetic frames or a groove dataset")
    sp.add_argument("--scenario", default="jig",
                    choices=["jig", "free-bend", "obstacle-proximal", "obstacle-middle", "obstacle-distal"])
    sp.add_argument("--angle", type=float, default=90.0, help="jig bend angle, deg")
    sp.add_argument("--parameter", type=float, default=5.0,
                    help="free-bend cable surrogate (0..5) or obstacle amplitude (1/mm)")
    sp.add_argument("--sign", type=int, choices=[-1, 1], default=1)
    sp.add_argument("--noise-nm", type=float, default=0.001)
    sp.add_argument("--twist-deg", type=_triple, help="per-AA twist, deg (default: config)")
    sp.add_argument("--c-pos", type=_triple, help="per-AA friction, positive side (default: config)")
    sp.add_argument("--c-neg", type=_triple, help="per-AA friction, negative side (default: config)")
    sp.add_argument("--delta-t", type=_triple, default=[0.0, 0.0, 0.0], help="per-AA temperature change, K")
    sp.add_argument("--sensor-only", action="store_true", help="bare sensor in the groove")
    sp.add_argument("--sweep", choices=["fit", "validation"], help="write a groove dataset instead of frames")
    sp.add_argument("--frames", type=int, default=1)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.add_argument("--truth", help="also write the reference centerline CSV")

    sp = add("calibrate-geometry", cmd_calibrate_geometry, "fit node radii and orientations")
    sp.add_argument("--dataset", required=True)
    sp.add_argument("--shared-theta", action="store_true")
    sp.add_argument("--out", help="config file to write (default: overwrite --config, or stdout)")

    sp = add("calibrate-friction", cmd_calibrate_friction, "fit friction coefficients")
    sp.add_argument("--dataset", required=True)
    sp.add_argument("--require-both", action="store_true")
    sp.add_argument("--out")

    sp = add("calibrate-twist", cmd_calibrate_twist, "measure twist offsets")
    sp.add_argument("--straight", required=True, help="frame CSV taken straight in the bending plane")
    sp.add_argument("--groove", required=True, help="frame CSV taken in the constant-curvature groove")
    g = sp.add_mutually_exclusive_group(required=True)
    g.add_argument("--groove-angle", type=float, help="groove bend angle over 35 mm, deg")
    g.add_argument("--groove-kappa", type=float, help="signed groove curvature, 1/mm")
    sp.add_argument("--out")

    sp = add("validate", cmd_validate, "curvature and direction error table on a held-out dataset")
    sp.add_argument("--dataset", required=True)
    sp.add_argument("--no-friction", action="store_true",
                    help="ignore friction coefficients (bare-sensor groove datasets)")

    sp = add("serve", cmd_serve, "run the HTTP service")
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--port", type=int, default=8000)
    return p


def exit_code(exc: BaseException) -> int:
    from .calibrate import InsufficientDataError
    from .core import FbgShapeError, InvariantError, ParseError

    if isinstance(exc, (ParseError, FileNotFoundError, IsADirectoryError)):
        return EXIT_PARSE
    if isinstance(exc, (InvariantError, InsufficientDataError)):
        return EXIT_INVARIANT
    if isinstance(exc, FbgShapeError):
        return EXIT_NUMERIC
    raise exc


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except Exception as exc:  # mapped to exit codes below; anything else re-raises
        code = exit_code(exc)
        print(f"error: {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
