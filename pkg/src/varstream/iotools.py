"""CSV ingestion and line-delimited record serialization.

Input is header-first CSV (UTF-8, '.' decimal): the header names the P
channels, every following line holds P numeric fields.  Output records are
one JSON object per line with kind in {params, connectivity, network,
timing, mse}; every matrix is framed explicitly as rows/cols plus row-major
data so records are self-describing.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterator, TextIO, Union

import numpy as np

from .bench import MseRow, TimingRefusal, TimingRow
from .errors import InputDataError
from .model import Sample
from .network import NetworkDelta
from .spectral import ConnectivityFrame

Source = Union[str, Path, TextIO]


def _open_text(source: Source, mode: str = "r"):
    if isinstance(source, (str, Path)):
        return open(source, mode, encoding="utf-8", newline=""), True
    return source, False


def _parse_row(row: list[str], n_channels: int, line_no: int) -> np.ndarray:
    if len(row) != n_channels:
        raise InputDataError(
            f"line {line_no}: expected {n_channels} fields, got {len(row)}"
        )
    try:
        return np.array([float(v) for v in row])
    except ValueError as exc:
        raise InputDataError(f"line {line_no}: non-numeric field ({exc})") from exc


def iter_csv_samples(source: Source) -> Iterator[Union[list[str], Sample]]:
    """Stream a CSV: yields the header (list of channel names) first, then
    one :class:`Sample` per data row.  Errors carry 1-based line numbers."""
    handle, owned = _open_text(source)
    try:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None:
            raise InputDataError("empty CSV: missing header")
        channels = [name.strip() for name in header]
        if not channels or any(not c for c in channels):
            raise InputDataError("line 1: header must name every channel")
        yield channels
        t = 0
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            yield Sample(t=t, values=_parse_row(row, len(channels), line_no))
            t += 1
    finally:
        if owned:
            handle.close()


def ingest_csv(source: Source) -> tuple[list[str], np.ndarray]:
    """Read a whole CSV into (channel names, (T, P) float array)."""
    stream = iter_csv_samples(source)
    channels = next(stream)
    rows = [s.values for s in stream]
    if not rows:
        raise InputDataError("CSV has a header but no data rows")
    return channels, np.vstack(rows)


def write_csv(dest: Source, channels: list[str], values: np.ndarray) -> None:
    """Emit header + rows; floats use repr so a round-trip is bit-exact."""
    values = np.asarray(values, dtype=float)
    handle, owned = _open_text(dest, "w")
    try:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(channels)
        for row in values:
            writer.writerow([repr(float(v)) for v in row])
    finally:
        if owned:
            handle.close()


def matrix_payload(mat: np.ndarray) -> dict:
    """Explicit (rows, cols, row-major data) framing for one matrix."""
    mat = np.asarray(mat)
    if mat.ndim != 2:
        raise InputDataError(f"matrix payload requires 2-D input, got shape {mat.shape}")
    return {"rows": int(mat.shape[0]), "cols": int(mat.shape[1]), "data": mat.ravel().tolist()}


def matrix_from_payload(payload: dict) -> np.ndarray:
    data = np.asarray(payload["data"], dtype=float)
    rows, cols = int(payload["rows"]), int(payload["cols"])
    if data.size != rows * cols:
        raise InputDataError(f"payload length {data.size} != rows*cols = {rows * cols}")
    return data.reshape(rows, cols)


def params_record(t: int, phi: np.ndarray, method: str, flags: dict | None = None) -> dict:
    return {
        "kind": "params",
        "t": int(t),
        "method": method,
        **matrix_payload(phi),
        "flags": flags or {},
    }


def connectivity_record(frame: ConnectivityFrame) -> dict:
    return {
        "kind": "connectivity",
        "t": int(frame.t),
        "band": frame.band.name,
        "band_lo": frame.band.lo,
        "band_hi": frame.band.hi,
        "measures": {
            "coherence": matrix_payload(frame.coherence),
            "partial_coherence": matrix_payload(frame.partial_coherence),
            "pdc": matrix_payload(frame.pdc),
        },
        "flags": {"unstable_frame": bool(frame.unstable)},
    }


def network_record(delta: NetworkDelta) -> dict:
    return {
        "kind": "network",
        "event": delta.event,
        "event_time": int(delta.event_time),
        "quantile": delta.threshold_quantile,
        "quantile_mode": delta.quantile_mode,
        "measure": delta.measure,
        "band": delta.band,
        "directed": delta.directed,
        "rows": int(delta.classes.shape[0]),
        "cols": int(delta.classes.shape[1]),
        "classes": delta.classes.ravel().tolist(),
        "counts": delta.counts(),
        "flags": {
            "before_truncated": delta.before_truncated,
            "after_truncated": delta.after_truncated,
        },
    }


def timing_record(row: Union[TimingRow, TimingRefusal]) -> dict:
    if isinstance(row, TimingRefusal):
        return {
            "kind": "timing",
            "method": row.method,
            "p": row.p,
            "k": row.k,
            "refused": True,
            "required_bytes": row.required_bytes,
            "budget_bytes": row.budget_bytes,
            "reason": row.reason,
        }
    return {
        "kind": "timing",
        "method": row.method,
        "p": row.p,
        "k": row.k,
        "refused": False,
        "mean_ms": row.mean_ms,
        "p50_ms": row.p50_ms,
        "p95_ms": row.p95_ms,
        "iterations": row.iterations,
        "warmup_iterations": row.warmup_iterations,
    }


def mse_record(row: MseRow) -> dict:
    return {
        "kind": "mse",
        "method": row.method,
        "hyper": row.hyper,
        "per_param_mse": row.per_param_mse,
        "replicates": row.replicates,
        "sim_digest": row.sim_digest,
    }


def dump_record(record: dict) -> str:
    """Compact single-line JSON encoding of one record."""
    return json.dumps(record, separators=(",", ":"), sort_keys=False)


def read_records(source: Source) -> list[dict]:
    """Parse a line-delimited record stream, skipping blank lines."""
    handle, owned = _open_text(source)
    try:
        records = []
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise InputDataError(f"line {line_no}: invalid record ({exc})") from exc
        return records
    finally:
        if owned:
            handle.close()
