"""Real-time stream: JSON-lines frames in, one reconstruction record out per
frame. Reader, worker and writer threads hand off through bounded queues;
when the input outpaces the worker the newest frame is dropped and a drop
counter record is emitted."""
from __future__ import annotations

import gc
import json
import math
import queue
import threading
import time
from dataclasses import dataclass

from .core import CalibrationSet, CdmConfig, FbgShapeError, SensorGeometry
from .formats import parse_frame_record
from .reconstruct import DEFAULT_STEP, reconstruct_cdm

QUEUE_DEPTH = 64
_DONE = object()


@dataclass
class StreamStats:
    frames: int = 0
    errors: int = 0
    dropped: int = 0


def _result_record(idx, frame, line, tip_only, latency, cpu):
    x, y = line.tip
    rec = {"id": idx, "t": frame.timestamp, "tip": [round(float(x), 9), round(float(y), 9)],
           "tip_theta_deg": round(math.degrees(float(line.theta[-1])), 9),
           "latency_ms": round(latency * 1e3, 4), "cpu_ms": round(cpu * 1e3, 4)}
    if not tip_only:
        rec["s"] = [round(float(v), 9) for v in line.s]
        rec["x"] = [round(float(v), 9) for v in line.points[:, 0]]
        rec["y"] = [round(float(v), 9) for v in line.points[:, 1]]
    return rec


def run_stream(infile, outfile, geometry: SensorGeometry, calib: CalibrationSet, cdm: CdmConfig,
               tip_only: bool = False, step: float = DEFAULT_STEP,
               depth: int = QUEUE_DEPTH) -> StreamStats:
    """Process ``infile`` until EOF; returns counters. Output ids follow
    input order and are strictly increasing."""
    work: queue.Queue = queue.Queue(maxsize=depth)
    out: queue.Queue = queue.Queue(maxsize=depth)
    stats = StreamStats()
    lock = threading.Lock()

    def reader():
        idx = 0
        for line_no, line in enumerate(infile, start=1):
            if not line.strip():
                continue
            item = (idx, line_no, line)
            idx += 1
            try:
                work.put_nowait(item)
            except queue.Full:
                with lock:
                    stats.dropped += 1
                    dropped = stats.dropped
                out.put({"id": item[0], "dropped": dropped})
        work.put(_DONE)

    def worker():
        while (item := work.get()) is not _DONE:
            idx, line_no, line = item
            try:
                frame = parse_frame_record(line, line_no)
                # wall time includes preemption; thread time is the work itself
                t0, c0 = time.perf_counter(), time.thread_time()
                result = reconstruct_cdm(frame, geometry, calib, cdm, step)
                rec = _result_record(idx, frame, result, tip_only, time.perf_counter() - t0,
                                     time.thread_time() - c0)
            except FbgShapeError as exc:
                rec = {"id": idx, "line": line_no, "error": str(exc)}
            out.put(rec)
        out.put(_DONE)

    # keep long-lived objects out of collector passes during the run
    gc.freeze()
    threads = [threading.Thread(target=reader, daemon=True), threading.Thread(target=worker, daemon=True)]
    for t in threads:
        t.start()
    # writer runs here; drop records may arrive before earlier results, so
    # hold them until every lower id has been written
    pending: dict = {}
    next_id = 0
    while (rec := out.get()) is not _DONE:
        pending.setdefault(rec["id"], []).append(rec)
        while next_id in pending:
            for r in pending.pop(next_id):
                if "error" in r:
                    stats.errors += 1
                elif "dropped" not in r:
                    stats.frames += 1
                outfile.write(json.dumps(r) + "\n")
            outfile.flush()
            next_id += 1
    for t in threads:
        t.join()
    return stats
