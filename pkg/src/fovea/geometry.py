"""Raster and box primitives shared by the warping pipeline.

Coordinates are normalized to [0, 1] on both axes, with the center of
pixel ``i`` of an ``n``-pixel axis at ``(i + 0.5) / n``.  Sampling outside
the unit square clamps to the nearest edge pixel center, so the samplers
are total functions on finite inputs.

All types are immutable after construction (backing arrays are marked
read-only) and all operations are pure, so everything here is safe to
call concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ORIGINAL = "original"
WARPED = "warped"

# Continuous pixel coordinates this close to an exact pixel center snap
# onto it, so backward maps that are identities up to float noise sample
# the source grid exactly (weights 1 and 0, no interpolation residue).
_CENTER_SNAP = 1e-9

# Float inputs may exceed [0, 1] by rounding dust from interpolation;
# anything past this is treated as caller error rather than clipped.
_RANGE_SLACK = 1e-5


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class ImageBuffer:
    """Dense raster of float channels in [0, 1], row-major (H, W, C)."""

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float32)
        if data.ndim == 2:
            data = data[:, :, np.newaxis]
        if data.ndim != 3:
            raise ValueError(f"image data must be (H, W) or (H, W, C), got shape {data.shape}")
        h, w, c = data.shape
        if h < 1 or w < 1:
            raise ValueError(f"image dimensions must be positive, got {w}x{h}")
        if not 1 <= c <= 4:
            raise ValueError(f"channel count must be in 1..4, got {c}")
        if not np.all(np.isfinite(data)):
            raise ValueError("image data contains non-finite values")
        lo, hi = float(data.min()), float(data.max())
        if lo < -_RANGE_SLACK or hi > 1.0 + _RANGE_SLACK:
            raise ValueError(f"image values outside [0, 1]: min={lo}, max={hi}")
        data = np.clip(data, 0.0, 1.0)
        object.__setattr__(self, "data", _freeze(np.ascontiguousarray(data)))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @classmethod
    def from_uint8(cls, data: np.ndarray) -> "ImageBuffer":
        data = np.asarray(data)
        if data.dtype != np.uint8:
            raise ValueError(f"expected uint8 data, got {data.dtype}")
        return cls(data.astype(np.float32) / 255.0)

    def to_uint8(self) -> np.ndarray:
        # round half away from zero; values are nonnegative here
        return np.floor(self.data * 255.0 + 0.5).astype(np.uint8)


@dataclass(frozen=True)
class Point:
    """Continuous normalized coordinates; (0, 0) is the top-left corner."""

    x: float
    y: float

    def __post_init__(self):
        if not (np.isfinite(self.x) and np.isfinite(self.y)):
            raise ValueError(f"point coordinates must be finite, got ({self.x}, {self.y})")


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box in normalized coordinates, tagged with its space.

    ``space`` records whether the coordinates refer to the original or the
    warped canvas; mixing spaces in geometric operations is an error.
    Coordinates are not restricted to [0, 1]: jittered boxes may leave the
    frame and remain valid inputs downstream.
    """

    x1: float
    y1: float
    x2: float
    y2: float
    space: str = ORIGINAL

    def __post_init__(self):
        coords = (self.x1, self.y1, self.x2, self.y2)
        if not all(np.isfinite(c) for c in coords):
            raise ValueError(f"box coordinates must be finite, got {coords}")
        if not (self.x1 < self.x2 and self.y1 < self.y2):
            raise ValueError(f"degenerate box: ({self.x1}, {self.y1}, {self.x2}, {self.y2})")
        if self.space not in (ORIGINAL, WARPED):
            raise ValueError(f"unknown box space {self.space!r}")

    @property
    def center(self) -> tuple[float, float]:
        return (0.5 * (self.x1 + self.x2), 0.5 * (self.y1 + self.y2))

    @property
    def w(self) -> float:
        return self.x2 - self.x1

    @property
    def h(self) -> float:
        return self.y2 - self.y1

    @property
    def area(self) -> float:
        return self.w * self.h


@dataclass(frozen=True)
class DetectionSet:
    """Parallel lists of boxes, confidence scores, and class ids.

    Scores default to 1.0 and class ids to -1 when not supplied; all boxes
    must share one space tag.
    """

    boxes: tuple[BBox, ...]
    scores: tuple[float, ...] = field(default=())
    class_ids: tuple[int, ...] = field(default=())

    def __post_init__(self):
        boxes = tuple(self.boxes)
        scores = tuple(self.scores) if self.scores else tuple(1.0 for _ in boxes)
        class_ids = tuple(self.class_ids) if self.class_ids else tuple(-1 for _ in boxes)
        if len(scores) != len(boxes) or len(class_ids) != len(boxes):
            raise ValueError(
                f"parallel lists disagree: {len(boxes)} boxes, "
                f"{len(scores)} scores, {len(class_ids)} class ids"
            )
        for i, s in enumerate(scores):
            if not (np.isfinite(s) and 0.0 <= s <= 1.0):
                raise ValueError(f"score {s} at index {i} outside [0, 1]")
        spaces = {b.space for b in boxes}
        if len(spaces) > 1:
            raise ValueError(f"boxes mix spaces: {sorted(spaces)}")
        object.__setattr__(self, "boxes", boxes)
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "class_ids", class_ids)

    def __len__(self) -> int:
        return len(self.boxes)

    @property
    def space(self) -> str:
        return self.boxes[0].space if self.boxes else ORIGINAL


def _pixel_coords(norm, size: int) -> np.ndarray:
    """Normalized [0, 1] coordinates to continuous pixel coordinates.

    Out-of-range inputs clamp to the canvas, then to the edge pixel
    centers, so every result indexes validly into a ``size``-pixel axis.
    """
    px = np.clip(np.asarray(norm, dtype=np.float64), 0.0, 1.0) * size - 0.5
    snapped = np.rint(px)
    px = np.where(np.abs(px - snapped) <= _CENTER_SNAP, snapped, px)
    return np.clip(px, 0.0, float(size - 1))


def _axis_taps(px: np.ndarray, size: int):
    lo = np.floor(px).astype(np.intp)
    frac = (px - lo).astype(np.float32)
    hi = np.minimum(lo + 1, size - 1)
    return lo, hi, frac


def resample_separable(img: ImageBuffer, x_norm: np.ndarray, y_norm: np.ndarray) -> ImageBuffer:
    """Bilinear resample on a separable grid of source coordinates.

    ``x_norm`` gives one normalized source x per output column and
    ``y_norm`` one source y per output row.  Interpolates rows first, then
    columns, which matches the scalar sampler bit for bit.
    """
    data = img.data
    py = _pixel_coords(y_norm, img.height)
    px = _pixel_coords(x_norm, img.width)
    y_lo, y_hi, fy = _axis_taps(py, img.height)
    x_lo, x_hi, fx = _axis_taps(px, img.width)
    fy = fy[:, np.newaxis, np.newaxis]
    rows = np.take(data, y_lo, axis=0)
    rows *= 1.0 - fy
    rows += np.take(data, y_hi, axis=0) * fy
    fx = fx[np.newaxis, :, np.newaxis]
    out = np.take(rows, x_lo, axis=1)
    out *= 1.0 - fx
    out += np.take(rows, x_hi, axis=1) * fx
    return ImageBuffer(out)


def resample_points(img: ImageBuffer, x_norm: np.ndarray, y_norm: np.ndarray) -> ImageBuffer:
    """Bilinear resample at a dense per-pixel grid of source coordinates.

    ``x_norm`` and ``y_norm`` are (H_out, W_out) arrays of normalized
    source coordinates.
    """
    if x_norm.shape != y_norm.shape:
        raise ValueError(f"coordinate grids disagree: {x_norm.shape} vs {y_norm.shape}")
    data = img.data
    py = _pixel_coords(y_norm, img.height)
    px = _pixel_coords(x_norm, img.width)
    y_lo, y_hi, fy = _axis_taps(py, img.height)
    x_lo, x_hi, fx = _axis_taps(px, img.width)
    fy = fy[..., np.newaxis]
    fx = fx[..., np.newaxis]
    left = data[y_lo, x_lo] * (1.0 - fy) + data[y_hi, x_lo] * fy
    right = data[y_lo, x_hi] * (1.0 - fy) + data[y_hi, x_hi] * fy
    return ImageBuffer(left * (1.0 - fx) + right * fx)


def sample_bilinear(img: ImageBuffer, p: Point) -> np.ndarray:
    """Bilinear interpolation of the four pixel centers surrounding ``p``.

    Returns one float per channel.  Coordinates outside [0, 1] clamp to
    the nearest edge pixel center before interpolation.
    """
    data = img.data
    py = _pixel_coords(p.y, img.height)
    px = _pixel_coords(p.x, img.width)
    y_lo, y_hi, fy = _axis_taps(py, img.height)
    x_lo, x_hi, fx = _axis_taps(px, img.width)
    left = data[y_lo, x_lo] * (1.0 - fy) + data[y_hi, x_lo] * fy
    right = data[y_lo, x_hi] * (1.0 - fy) + data[y_hi, x_hi] * fy
    return np.asarray(left * (1.0 - fx) + right * fx)


def pixel_centers(size: int) -> np.ndarray:
    """Normalized coordinates of the pixel centers of a ``size``-pixel axis."""
    return (np.arange(size, dtype=np.float64) + 0.5) / size


def uniform_downsample(img: ImageBuffer, out_w: int, out_h: int) -> ImageBuffer:
    """Plain bilinear resample to ``out_w`` x ``out_h``.

    Output pixel (i, j) samples the source at ((i+0.5)/out_w,
    (j+0.5)/out_h); equals applying an identity warp at the same output
    size.
    """
    if out_w < 1 or out_h < 1:
        raise ValueError(f"output dimensions must be positive, got {out_w}x{out_h}")
    return resample_separable(img, pixel_centers(out_w), pixel_centers(out_h))
