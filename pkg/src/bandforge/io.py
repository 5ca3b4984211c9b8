"""CSV ingestion, band serialisation and run manifests."""

from __future__ import annotations

import csv
import json
import math
import platform
import sys
from pathlib import Path

import numpy as np

MANIFEST_SCHEMA = "bandforge.manifest/1"
RESULTS_SCHEMA = "bandforge.results/1"


class MalformedInput(ValueError):
    pass


def fmt(v: float) -> str:
    """17 significant digits: round-trips every double exactly."""
    return format(float(v), ".17g")


def read_columns(path, columns: tuple[str, ...], min_rows: int = 3) -> dict[str, np.ndarray]:
    """Read a headed CSV whose header is exactly ``columns``; every cell must be a finite number."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise MalformedInput(f"cannot read {path}: {exc.strerror}") from exc
    rows = [r for r in rows if r and any(c.strip() for c in r)]
    if not rows:
        raise MalformedInput("empty file")
    header = [c.strip() for c in rows[0]]
    if len(set(header)) != len(header):
        raise MalformedInput(f"duplicate column in header {header}")
    if tuple(header) != columns:
        raise MalformedInput(f"header must be {','.join(columns)}, got {','.join(header)}")
    body = rows[1:]
    if len(body) < min_rows:
        raise MalformedInput(f"need at least {min_rows} data rows, got {len(body)}")
    out = np.empty((len(body), len(columns)))
    for i, r in enumerate(body, start=2):
        if len(r) != len(columns):
            raise MalformedInput(f"line {i}: expected {len(columns)} fields, got {len(r)}")
        for j, cell in enumerate(r):
            try:
                v = float(cell)
            except ValueError:
                raise MalformedInput(f"line {i}: non-numeric value {cell.strip()!r}") from None
            if not math.isfinite(v):
                raise MalformedInput(f"line {i}: non-finite value {cell.strip()!r}")
            out[i - 2, j] = v
    return {c: out[:, j] for j, c in enumerate(columns)}


def write_table(path, header: list[str], columns: list) -> None:
    """Write numeric columns with 17-digit floats; ``path='-'`` writes to stdout."""
    cols = [np.asarray(c) for c in columns]
    lines = [",".join(header)]
    for row in zip(*cols):
        lines.append(",".join(fmt(v) for v in row))
    text = "\n".join(lines) + "\n"
    if str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def write_json(path, payload: dict) -> None:
    Path(path).write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n")


def manifest(command: str, config: dict, seed, wall_time: float, timings: dict, **extra) -> dict:
    from . import __version__

    return {
        "schema": MANIFEST_SCHEMA,
        "command": command,
        "config": config,
        "seed": seed,
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "wall_time_s": wall_time,
        "timings_s": timings,
        **extra,
    }
