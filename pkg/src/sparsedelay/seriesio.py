"""Reading and writing the CLI's file formats.

Series files are CSV with a header and columns day (1-based integer), one
value column per series, and an optional id column for multi-pixel batches.
Lines starting with '#' are comments and are skipped (the simulator records
its parameters that way). Days must increase strictly within each id and no
cell may be empty.

Every file-producing command also writes a JSON manifest next to its output
recording the command, parameters, seeds, package version, and timestamps.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .errors import SeriesFormatError


@dataclass(frozen=True)
class SeriesRecord:
    """One series (or pixel) from a file: days plus one or two value columns."""

    id: object
    day: np.ndarray
    x: np.ndarray
    y: np.ndarray | None


def _fail(path, line, message):
    raise SeriesFormatError(f"{path}:{line}: {message}")


def read_series(path, x_col="x", y_col="y", id_col="id"):
    """Parse a series file into records in first-appearance id order.

    y_col=None reads files that carry only the day and x columns (parameter
    fitting needs just precipitation). The id column is used when present;
    without it the file is a single anonymous series.
    """
    path = Path(path)
    with open(path, newline="") as handle:
        numbered = [
            (line_no, line)
            for line_no, line in enumerate(handle, start=1)
            if line.strip() and not line.lstrip().startswith("#")
        ]
    if not numbered:
        raise SeriesFormatError(f"{path}: no data lines")
    rows = list(csv.reader(line for _, line in numbered))
    header = [h.strip() for h in rows[0]]
    header_line = numbered[0][0]

    def column(name, required):
        if name in header:
            return header.index(name)
        if required:
            _fail(path, header_line, f"missing column {name!r}")
        return None

    i_day = column("day", True)
    i_x = column(x_col, True)
    i_y = column(y_col, True) if y_col is not None else None
    i_id = column(id_col, False) if id_col is not None else None

    order = []
    groups: dict = {}
    for (line_no, _), row in zip(numbered[1:], rows[1:]):
        if len(row) != len(header):
            _fail(path, line_no, f"expected {len(header)} cells, got {len(row)}")
        sid = row[i_id].strip() if i_id is not None else None
        cells = {}
        for label, idx in (("day", i_day), (x_col, i_x), (y_col, i_y)):
            if idx is None:
                continue
            text = row[idx].strip()
            if not text:
                _fail(path, line_no, f"empty {label!r} cell")
            cells[label] = text
        try:
            day = int(cells["day"])
        except ValueError:
            _fail(path, line_no, f"day {cells['day']!r} is not an integer")
        values = {}
        for label in (x_col, y_col):
            if label is None:
                continue
            try:
                values[label] = float(cells[label])
            except ValueError:
                _fail(path, line_no, f"{label} {cells[label]!r} is not a number")
        if sid not in groups:
            groups[sid] = {"day": [], "x": [], "y": [], "last": None, "line": line_no}
            order.append(sid)
        group = groups[sid]
        if group["last"] is not None and day <= group["last"]:
            _fail(
                path,
                line_no,
                f"day {day} does not increase (previous {group['last']})"
                + (f" for id {sid!r}" if sid is not None else ""),
            )
        group["last"] = day
        group["day"].append(day)
        group["x"].append(values[x_col])
        if y_col is not None:
            group["y"].append(values[y_col])

    records = []
    for sid in order:
        group = groups[sid]
        records.append(
            SeriesRecord(
                sid,
                np.array(group["day"], dtype=np.int64),
                np.array(group["x"], dtype=float),
                np.array(group["y"], dtype=float) if y_col is not None else None,
            )
        )
    return records


def series_text(day, x, y, comments=()) -> str:
    """Render one day/x/y series as CSV text, full float precision."""
    day = np.asarray(day)
    x = np.asarray(x)
    y = np.asarray(y)
    if not (day.size == x.size == y.size):
        raise ValueError("day, x, y lengths differ")
    buffer = io.StringIO()
    for comment in comments:
        buffer.write(f"# {comment}\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["day", "x", "y"])
    for d, xv, yv in zip(day, x, y):
        writer.writerow([int(d), repr(float(xv)), repr(float(yv))])
    return buffer.getvalue()


def write_series(path, day, x, y, comments=()) -> None:
    """Write one day/x/y series; comment lines go above the header."""
    with open(path, "w", newline="") as handle:
        handle.write(series_text(day, x, y, comments))


def manifest_path(output_path) -> Path:
    return Path(str(output_path) + ".manifest.json")


def write_manifest(output_path, command, parameters, seeds=(), outputs=None, started=None):
    """Drop a JSON manifest next to an output file; returns its path."""
    now = datetime.now(timezone.utc).isoformat(timespec="seconds")
    payload = {
        "command": command,
        "parameters": parameters,
        "seeds": list(seeds),
        "version": __version__,
        "started": started if started is not None else now,
        "finished": now,
        "outputs": [str(o) for o in (outputs if outputs is not None else [output_path])],
    }
    target = manifest_path(output_path)
    with open(target, "w") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")
    return target
