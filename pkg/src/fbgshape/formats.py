"""File and wire formats: frame CSV, calibration dataset CSV, JSON-lines
frame records, centerline and summary CSVs."""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from .calibrate import CalibrationDataset, CalibrationSample
from .core import FbgShapeError, N_AA, ParseError, WavelengthFrame
from .reconstruct import CenterlinePolyline

NODE_COLUMNS = tuple(f"l{k}{j}" for k in (1, 2) for j in (1, 2, 3))
FRAME_HEADER = ("t",) + NODE_COLUMNS
DATASET_HEADER = FRAME_HEADER + ("k1", "k2", "k3", "phi1_deg", "phi2_deg", "phi3_deg", "sign")
CENTERLINE_HEADER = ("s_mm", "x_mm", "y_mm")
SUMMARY_HEADER = ("frame", "t", "tip_x_mm", "tip_y_mm", "tip_theta_deg")


def fmt(v: float) -> str:
    return format(float(v), ".9g")


def _number(text: str, column: str, line: int) -> float:
    try:
        v = float(text)
    except (TypeError, ValueError):
        raise ParseError(f"column {column!r}: {text!r} is not a number", line) from None
    if not math.isfinite(v):
        raise ParseError(f"column {column!r}: non-finite value {text!r}", line)
    return v


def _frame(values: dict, line: int) -> WavelengthFrame:
    lam = np.array([_number(values.get(c), c, line) for c in NODE_COLUMNS]).reshape(2, N_AA)
    try:
        return WavelengthFrame(_number(values.get("t"), "t", line), lam)
    except FbgShapeError as exc:
        raise ParseError(str(exc), line) from exc


def _rows(text: str, header: tuple):
    reader = csv.reader(io.StringIO(text))
    try:
        head = [h.strip() for h in next(reader)]
    except StopIteration:
        raise ParseError("empty file; a header row is required", 1) from None
    missing = [c for c in header if c not in head]
    if missing:
        raise ParseError(f"header is missing columns {missing}", 1)
    for row in reader:
        line = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(head):
            raise ParseError(f"expected {len(head)} fields, got {len(row)}", line)
        yield line, dict(zip(head, (c.strip() for c in row)))


def _text(source) -> str:
    if isinstance(source, (str, Path)) and Path(source).exists():
        return Path(source).read_text()
    if hasattr(source, "read"):
        return source.read()
    raise FileNotFoundError(source)


# ------------------------------------------------------------------ frames

def parse_frames(text: str) -> list:
    return [_frame(row, line) for line, row in _rows(text, FRAME_HEADER)]


def read_frames(source) -> list:
    return parse_frames(_text(source))


def frame_row(frame: WavelengthFrame) -> list:
    return [fmt(frame.timestamp)] + [fmt(v) for v in frame.wavelengths.ravel()]


def frames_to_csv(frames) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(FRAME_HEADER)
    for f in frames:
        w.writerow(frame_row(f))
    return buf.getvalue()


def write_frames(frames, path) -> None:
    Path(path).write_text(frames_to_csv(frames))


# ----------------------------------------------------------------- dataset

def parse_dataset(text: str) -> CalibrationDataset:
    samples = []
    for line, row in _rows(text, DATASET_HEADER):
        frame = _frame(row, line)
        kappa = [_number(row[f"k{j}"], f"k{j}", line) for j in (1, 2, 3)]
        phi = [math.radians(_number(row[f"phi{j}_deg"], f"phi{j}_deg", line)) for j in (1, 2, 3)]
        sign = _number(row["sign"], "sign", line)
        try:
            samples.append(CalibrationSample(frame, kappa, phi, int(sign)))
        except FbgShapeError as exc:
            raise ParseError(str(exc), line) from exc
    return CalibrationDataset(samples)


def read_dataset(source) -> CalibrationDataset:
    return parse_dataset(_text(source))


def dataset_to_csv(dataset: CalibrationDataset) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(DATASET_HEADER)
    for s in dataset.samples:
        w.writerow(frame_row(s.frame) + [fmt(k) for k in s.kappa]
                   + [fmt(math.degrees(p)) for p in s.phi] + [str(s.sign)])
    return buf.getvalue()


def write_dataset(dataset: CalibrationDataset, path) -> None:
    Path(path).write_text(dataset_to_csv(dataset))


# ------------------------------------------------------------- JSON lines

def parse_frame_record(line: str, line_no: int | None = None) -> WavelengthFrame:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", line_no) from None
    if not isinstance(obj, dict):
        raise ParseError("frame record must be a JSON object", line_no)
    return _frame({k: (str(v) if v is not None else None) for k, v in obj.items()}, line_no)


def frame_record(frame: WavelengthFrame) -> str:
    obj = {"t": frame.timestamp}
    obj.update({c: float(v) for c, v in zip(NODE_COLUMNS, frame.wavelengths.ravel())})
    return json.dumps(obj)


# ------------------------------------------------------ centerline outputs

def centerline_to_csv(line: CenterlinePolyline) -> str:
    rows = [",".join(CENTERLINE_HEADER)]
    rows += [f"{fmt(s)},{fmt(x)},{fmt(y)}" for s, (x, y) in zip(line.s, line.points)]
    return "\n".join(rows) + "\n"


def summary_row(index: int, frame: WavelengthFrame, line: CenterlinePolyline) -> str:
    x, y = line.tip
    return ",".join([str(index), fmt(frame.timestamp), fmt(x), fmt(y), fmt(math.degrees(line.theta[-1]))])


def summary_header() -> str:
    return ",".join(SUMMARY_HEADER)
