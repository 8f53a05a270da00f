"""File formats: images (PNG, PPM, PGM), the saliency prior, CSV exports.

The prior file is a single header line ``FOVEA-SD v1 <rows> <cols>``
followed by rows*cols little-endian 64-bit floats in row-major order;
it stores a normalized grid and the reader validates that the sum is 1.
Magnification heatmaps export as 16-bit PGM with value round(mag * 4096)
(binary PGM is big-endian by the netpbm convention).
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from .geometry import ImageBuffer
from .saliency import SaliencyGrid2D
from .warp import MagnificationMap, SeparableWarp

PRIOR_MAGIC = "FOVEA-SD"
PRIOR_VERSION = "v1"
_PGM16_SCALE = 4096.0

_PIL_MODES = {1: "L", 2: "LA", 3: "RGB", 4: "RGBA"}


def _read_pnm(path: Path) -> ImageBuffer:
    data = path.read_bytes()
    # netpbm header: magic, then whitespace-separated dims and maxval,
    # with '#' comments allowed between tokens
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValueError(f"{path}: truncated netpbm header")
        tokens.append(data[start:pos])
    pos += 1  # single whitespace byte after maxval
    magic, w, h, maxval = tokens[0], int(tokens[1]), int(tokens[2]), int(tokens[3])
    if magic not in (b"P5", b"P6"):
        raise ValueError(f"{path}: unsupported netpbm magic {magic!r}")
    if maxval != 255:
        raise ValueError(f"{path}: only maxval 255 supported, got {maxval}")
    channels = 3 if magic == b"P6" else 1
    raw = data[pos : pos + w * h * channels]
    if len(raw) != w * h * channels:
        raise ValueError(f"{path}: truncated pixel data")
    arr = np.frombuffer(raw, dtype=np.uint8).reshape(h, w, channels)
    return ImageBuffer.from_uint8(arr)


def read_image(path: str | Path) -> ImageBuffer:
    """Read a PNG, PPM, or PGM image into a float buffer."""
    path = Path(path)
    if path.suffix.lower() in (".ppm", ".pgm", ".pnm"):
        return _read_pnm(path)
    with Image.open(path) as im:
        if im.mode not in _PIL_MODES.values():
            im = im.convert("RGB")
        arr = np.asarray(im, dtype=np.uint8)
    return ImageBuffer.from_uint8(arr)


def write_image(path: str | Path, img: ImageBuffer) -> None:
    """Write PNG, PPM (color), or PGM (grayscale) depending on the suffix."""
    path = Path(path)
    arr = img.to_uint8()
    suffix = path.suffix.lower()
    if suffix == ".ppm":
        if img.channels == 1:
            arr = np.repeat(arr, 3, axis=2)
        elif img.channels != 3:
            raise ValueError(f"PPM output needs 1 or 3 channels, got {img.channels}")
        path.write_bytes(b"P6\n%d %d\n255\n" % (img.width, img.height) + arr.tobytes())
        return
    if suffix == ".pgm":
        if img.channels != 1:
            raise ValueError(f"PGM output needs a single channel, got {img.channels}")
        path.write_bytes(b"P5\n%d %d\n255\n" % (img.width, img.height) + arr.tobytes())
        return
    Image.fromarray(arr.squeeze(axis=2) if img.channels == 1 else arr).save(path, format="PNG")


def write_magnification_pgm(path: str | Path, mag: MagnificationMap) -> None:
    """16-bit PGM heatmap: value = round(mag * 4096), clipped to the range."""
    values = np.floor(mag.values * _PGM16_SCALE + 0.5)
    values = np.clip(values, 0, 65535).astype(">u2")  # binary PGM is big-endian
    h, w = values.shape
    Path(path).write_bytes(b"P5\n%d %d\n65535\n" % (w, h) + values.tobytes())


def write_magnification_csv(path: str | Path, mag: MagnificationMap) -> None:
    """Matrix CSV: one line per output row."""
    with open(path, "w", newline="") as f:
        for row in mag.values:
            f.write(",".join(repr(float(v)) for v in row) + "\n")


def write_warp_csv(path: str | Path, warp: SeparableWarp) -> None:
    """Axis-map export as ``axis,index,value`` rows (x block then y block).

    Indexes follow the stored arrays: entry 0 and the last entry are the
    canvas-edge anchors, the rest are output pixel centers.
    """
    with open(path, "w", newline="") as f:
        f.write("axis,index,value\n")
        for axis, arr in (("x", warp.tinv_x), ("y", warp.tinv_y)):
            for i, v in enumerate(arr):
                f.write(f"{axis},{i},{float(v)!r}\n")


def write_prior(path: str | Path, grid: SaliencyGrid2D) -> None:
    """Serialize a normalized saliency grid."""
    total = float(grid.values.sum())
    if abs(total - 1.0) > 1e-6:
        raise ValueError(f"prior grid must be normalized, sums to {total}")
    header = f"{PRIOR_MAGIC} {PRIOR_VERSION} {grid.rows} {grid.cols}\n".encode("ascii")
    payload = grid.values.astype("<f8").tobytes()
    Path(path).write_bytes(header + payload)


def read_prior(path: str | Path) -> SaliencyGrid2D:
    """Read and validate a serialized prior grid."""
    path = Path(path)
    data = path.read_bytes()
    newline = data.find(b"\n")
    if newline < 0:
        raise ValueError(f"{path}: missing prior header")
    parts = data[:newline].decode("ascii", errors="replace").split()
    if len(parts) != 4 or parts[0] != PRIOR_MAGIC or parts[1] != PRIOR_VERSION:
        raise ValueError(f"{path}: bad prior header {data[:newline]!r}")
    rows, cols = int(parts[2]), int(parts[3])
    payload = data[newline + 1 :]
    expected = rows * cols * 8
    if len(payload) != expected:
        raise ValueError(f"{path}: expected {expected} payload bytes, got {len(payload)}")
    values = np.frombuffer(payload, dtype="<f8").reshape(rows, cols)
    grid = SaliencyGrid2D(values)
    total = float(grid.values.sum())
    if abs(total - 1.0) > 1e-6:
        raise ValueError(f"{path}: prior grid sums to {total}, expected 1")
    return grid
