"""Artifact writers: CSV tables, JSON reports and SVG heatmaps.

Everything here is byte-deterministic for identical inputs: floats are
printed with a fixed format, JSON keys are sorted, and the heatmap raster is
a PNG built with a fixed zlib level.
"""
from __future__ import annotations

import base64
import csv
import dataclasses
import hashlib
import json
import struct
import zlib
from pathlib import Path

import numpy as np

FLOAT_FMT = ".12g"

# viridis anchors, evenly spaced on [0, 1]
_CMAP = np.array([
    [68, 1, 84], [72, 40, 120], [62, 74, 137], [49, 104, 142], [38, 130, 142],
    [31, 158, 137], [53, 183, 121], [109, 205, 89], [180, 222, 44], [253, 231, 37],
], dtype=float)


def fmt(v) -> str:
    return format(float(v), FLOAT_FMT)


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return dataclasses.asdict(obj)
    if callable(obj):
        return getattr(obj, "__name__", "callable")
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def to_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, default=_jsonable) + "\n"


def write_json(path: Path, obj) -> Path:
    path = Path(path)
    path.write_text(to_json(obj))
    return path


def sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# ---------------------------------------------------------------------------
# CSV

def write_long(path: Path, times, coords, values, species: str, coord_name: str = "y") -> Path:
    """Long form ``t,<coord>,species,value``.

    ``coords`` is either one node vector shared by all snapshots or one row
    per snapshot (the physical frame moves with ``rho(t)``).
    """
    times = np.asarray(times)
    coords = np.asarray(coords)
    values = np.asarray(values)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", coord_name, "species", "value"])
        for k, t in enumerate(times):
            row_c = coords[k] if coords.ndim == 2 else coords
            ts = fmt(t)
            for c, v in zip(row_c, values[k]):
                w.writerow([ts, fmt(c), species, fmt(v)])
    return Path(path)


def write_wide(path: Path, times, values) -> Path:
    """Wide form: one row per snapshot, ``t,y_1..y_n``."""
    values = np.asarray(values)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [f"y_{j + 1}" for j in range(values.shape[1])])
        for t, row in zip(times, values):
            w.writerow([fmt(t)] + [fmt(v) for v in row])
    return Path(path)


# ---------------------------------------------------------------------------
# heatmap

def colorize(field: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Map values to RGB bytes with a linear scale on ``[lo, hi]``."""
    span = hi - lo
    s = np.zeros_like(field, dtype=float) if span <= 0 else np.clip((field - lo) / span, 0.0, 1.0)
    pos = s * (len(_CMAP) - 1)
    i = np.minimum(pos.astype(int), len(_CMAP) - 2)
    frac = (pos - i)[..., None]
    rgb = _CMAP[i] * (1.0 - frac) + _CMAP[i + 1] * frac
    return np.round(rgb).astype(np.uint8)


def png_bytes(rgb: np.ndarray) -> bytes:
    """Minimal truecolor PNG encoder."""
    h, w, _ = rgb.shape
    raw = b"".join(b"\x00" + rgb[r].tobytes() for r in range(h))

    def chunk(tag, data):
        body = tag + data
        return struct.pack(">I", len(data)) + body + struct.pack(">I", zlib.crc32(body) & 0xFFFFFFFF)

    header = struct.pack(">IIBBBBB", w, h, 8, 2, 0, 0, 0)
    return (b"\x89PNG\r\n\x1a\n" + chunk(b"IHDR", header)
            + chunk(b"IDAT", zlib.compress(raw, 9)) + chunk(b"IEND", b""))


def _downsample(n: int, limit: int) -> np.ndarray:
    if n <= limit:
        return np.arange(n)
    return np.unique(np.round(np.linspace(0, n - 1, limit)).astype(int))


def render_heatmap(times, nodes, values, species: str, path: Path,
                   max_cols: int = 400, max_rows: int = 200) -> Path:
    """Space-time heatmap: time left to right, ``y`` bottom to top.

    ``values`` has shape ``(snapshots, n)``. The colour scale is linear between
    the field's min and max, both printed on the figure.
    """
    values = np.asarray(values, dtype=float)
    if values.ndim != 2 or values.shape[0] == 0:
        raise ValueError("heatmap needs a nonempty (snapshots, n) array")
    times = np.asarray(times, dtype=float)
    ti = _downsample(values.shape[0], max_cols)
    yi = _downsample(values.shape[1], max_rows)
    sub = values[np.ix_(ti, yi)].T[::-1]          # rows: y descending
    lo, hi = float(values.min()), float(values.max())
    img = base64.b64encode(png_bytes(colorize(sub, lo, hi))).decode("ascii")

    W, H, L, B, T = 640, 320, 60, 40, 30
    legend = "".join(
        f'<rect x="{L + W + 20}" y="{T + H - (k + 1) * H / 10:.1f}" width="14" height="{H / 10:.1f}" '
        f'fill="rgb({c[0]:.0f},{c[1]:.0f},{c[2]:.0f})"/>'
        for k, c in enumerate(_CMAP))
    svg = f"""<svg xmlns="http://www.w3.org/2000/svg" width="{L + W + 120}" height="{T + H + B}" font-family="sans-serif" font-size="12">
<text x="{L}" y="18">{species}: min={fmt(lo)} max={fmt(hi)}</text>
<image x="{L}" y="{T}" width="{W}" height="{H}" preserveAspectRatio="none" style="image-rendering:pixelated" href="data:image/png;base64,{img}"/>
<rect x="{L}" y="{T}" width="{W}" height="{H}" fill="none" stroke="black"/>
<text x="{L}" y="{T + H + 16}">{fmt(times[0])}</text>
<text x="{L + W}" y="{T + H + 16}" text-anchor="end">{fmt(times[-1])}</text>
<text x="{L + W / 2}" y="{T + H + 32}" text-anchor="middle">t</text>
<text x="{L - 6}" y="{T + H}" text-anchor="end">{fmt(nodes[0])}</text>
<text x="{L - 6}" y="{T + 10}" text-anchor="end">{fmt(nodes[-1])}</text>
<text x="{L - 30}" y="{T + H / 2}" text-anchor="middle">y</text>
{legend}
<text x="{L + W + 40}" y="{T + 10}">{fmt(hi)}</text>
<text x="{L + W + 40}" y="{T + H}">{fmt(lo)}</text>
</svg>
"""
    Path(path).write_text(svg)
    return Path(path)
