"""Plain-text artifact writers and readers.

Every file starts with two comment lines: a config echo (package version,
seed and the run configuration as canonical JSON) and a timestamp. The
timestamp line is the only part that differs between identical runs.

* traces: JSON Lines, one record per solver iteration;
* grids: CSV with header ``param1,param2,f``;
* summaries and certificates: canonical JSON documents (no timestamp).
"""
from __future__ import annotations

import datetime as _dt
import json
import math
from pathlib import Path

import numpy as np

from . import __version__
from .landscape import LandscapeGrid

TRACE_FIELDS = ("iter", "f", "grad_norm", "lambda_min", "delta", "rho", "step_norm", "accepted")
GRID_HEADER = "param1,param2,f"
TIMESTAMP_PREFIX = "# timestamp: "


def _clean(value):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, np.ndarray):
        return _clean(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return v if math.isfinite(v) else None
    return value


def dumps(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, separators=(",", ":"), allow_nan=False)


def _header_lines(header: dict) -> list[str]:
    echo = {"version": __version__, **header}
    stamp = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    return [f"# ridable {dumps(echo)}", f"{TIMESTAMP_PREFIX}{stamp}"]


def _split_header(lines: list[str]) -> tuple[dict, list[str]]:
    header: dict = {}
    body = []
    for line in lines:
        if line.startswith(TIMESTAMP_PREFIX):
            header["timestamp"] = line[len(TIMESTAMP_PREFIX):]
        elif line.startswith("# ridable "):
            header.update(json.loads(line[len("# ridable "):]))
        elif line.startswith("#") or not line.strip():
            continue
        else:
            body.append(line)
    return header, body


def emit_trace(path, records, header: dict) -> Path:
    """Write solver records (``TRRecord`` or dicts with the trace fields)."""
    path = Path(path)
    lines = _header_lines(header)
    for r in records:
        d = r.as_dict() if hasattr(r, "as_dict") else r
        lines.append(dumps({k: d[k] for k in TRACE_FIELDS}))
    path.write_text("\n".join(lines) + "\n")
    return path


def read_trace(path) -> tuple[dict, list[dict]]:
    header, body = _split_header(Path(path).read_text().splitlines())
    return header, [json.loads(line) for line in body]


def emit_grid(path, grid: LandscapeGrid, header: dict) -> Path:
    path = Path(path)
    lines = _header_lines({**header, "chart": grid.chart, "resolution": list(grid.resolution)})
    lines.append(GRID_HEADER)
    for i, p2 in enumerate(grid.param2):
        for j, p1 in enumerate(grid.param1):
            lines.append(f"{float(p1)!r},{float(p2)!r},{float(grid.values[i, j])!r}")
    path.write_text("\n".join(lines) + "\n")
    return path


def read_grid(path) -> tuple[dict, LandscapeGrid]:
    header, body = _split_header(Path(path).read_text().splitlines())
    if not body or body[0] != GRID_HEADER:
        raise ValueError(f"{path}: missing grid header {GRID_HEADER!r}")
    data = np.array([[float(v) for v in line.split(",")] for line in body[1:]]).reshape(-1, 3)
    n1, n2 = header["resolution"]
    param1 = data[:n1, 0]
    param2 = data[::n1, 1]
    values = data[:, 2].reshape(n2, n1)
    return header, LandscapeGrid(header["chart"], param1, param2, values)


def emit_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_clean(obj), sort_keys=True, indent=2, allow_nan=False) + "\n")
    return path


def strip_timestamp(text: str) -> str:
    """File contents without the timestamp line, for reproducibility comparisons."""
    return "\n".join(line for line in text.splitlines() if not line.startswith(TIMESTAMP_PREFIX))
