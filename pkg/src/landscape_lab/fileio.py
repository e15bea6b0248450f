"""Deterministic JSON/CSV/PGM readers and writers for fields, potentials and tables.

JSON is written with sorted keys and ``repr`` floats, so the same data always
produces the same bytes. CSV numbers carry 12 significant digits.
"""

from __future__ import annotations

import csv
import io
import json
import math
import re
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .core import ScalarField, make_grid
from .potential import Potential

PGM_MAX = 65535
_PGM_TOKEN = re.compile(rb"\s*(#[^\n]*\n|\S+)")


def dump_json(obj: Any, path) -> None:
    text = json.dumps(obj, sort_keys=True, indent=1, allow_nan=False)
    Path(path).write_text(text + "\n")


def load_json(path) -> Any:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: not valid JSON ({exc.msg} at line {exc.lineno})") from None


def field_to_dict(f: ScalarField) -> dict:
    g = f.grid
    return {
        "dim": g.dim,
        "units": list(g.units),
        "points_per_unit": g.points_per_unit,
        "values": [float(v) for v in f.flat],
    }


def field_from_dict(d: dict) -> ScalarField:
    missing = {"dim", "units", "points_per_unit", "values"} - set(d)
    if missing:
        raise ValueError(f"field JSON lacks keys {sorted(missing)}")
    grid = make_grid(int(d["dim"]), [int(n) for n in d["units"]], int(d["points_per_unit"]))
    return ScalarField(grid, np.asarray(d["values"], dtype=float))


def save_field(f: ScalarField, path) -> None:
    dump_json(field_to_dict(f), path)


def load_field(path) -> ScalarField:
    return field_from_dict(load_json(path))


def save_potential(p: Potential, path) -> None:
    dump_json(p.to_dict(), path)


def load_potential(path) -> Potential:
    return Potential.from_dict(load_json(path))


def write_pgm(values: np.ndarray, path, lo: float | None = None, hi: float | None = None) -> None:
    """16-bit binary PGM (P5, big-endian). ``[lo, hi]`` maps affinely onto ``[0, 65535]``.

    Rows of the image are the first array axis. The bounds are written in a
    comment line so the raster can be mapped back to field values.
    """
    a = np.asarray(values, dtype=float)
    if a.ndim != 2:
        raise ValueError("PGM export needs a 2D array")
    lo = float(a.min()) if lo is None else float(lo)
    hi = float(a.max()) if hi is None else float(hi)
    span = hi - lo
    scaled = np.zeros_like(a) if span <= 0 else (np.clip(a, lo, hi) - lo) / span * PGM_MAX
    pixels = np.rint(scaled).astype(">u2")
    rows, cols = a.shape
    header = f"P5\n# rescale {lo!r} {hi!r}\n{cols} {rows}\n{PGM_MAX}\n".encode("ascii")
    Path(path).write_bytes(header + pixels.tobytes())


def read_pgm(path) -> tuple[np.ndarray, float, float]:
    """Inverse of ``write_pgm``: returns ``(values, lo, hi)`` with values mapped back to ``[lo, hi]``."""
    data = Path(path).read_bytes()
    tokens: list[bytes] = []
    comment = None
    pos = 0
    while len(tokens) < 4:
        m = _PGM_TOKEN.match(data, pos)
        if m is None:
            raise ValueError(f"{path}: truncated PGM header")
        tok = m.group(1)
        pos = m.end()
        if tok.startswith(b"#"):
            comment = tok.decode("ascii").strip()
        else:
            tokens.append(tok)
    pos += 1  # single whitespace byte before the raster
    if tokens[0] != b"P5" or int(tokens[3]) != PGM_MAX:
        raise ValueError(f"{path}: expected a 16-bit P5 PGM")
    cols, rows = int(tokens[1]), int(tokens[2])
    pixels = np.frombuffer(data, dtype=">u2", count=rows * cols, offset=pos).reshape(rows, cols)
    lo, hi = 0.0, float(PGM_MAX)
    if comment and comment.startswith("# rescale"):
        lo, hi = (float(x) for x in comment.split()[2:4])
    return lo + pixels.astype(float) / PGM_MAX * (hi - lo), lo, hi


def fmt(x) -> str:
    """Number formatting shared by every CSV table."""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return f"{x:.12g}"
    return str(x)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(x) for x in row])
    Path(path).write_text(buf.getvalue())


def read_csv(path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
