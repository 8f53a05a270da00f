"""Bounding-box saliency generation.

Saliency is a low-resolution nonnegative grid saying where magnification
is wanted.  The generator places one bivariate normal density per box,
centered on the box center with per-axis variance proportional to the box
side length, on top of a small uniform floor that keeps the downstream
warp bounded.  Densities are proper (they integrate to 1), so large boxes
contribute wide, low bumps and small boxes sharp ones.

Everything works in pixel coordinates of the original image; grids are
evaluated at cell centers.  All functions are pure; jittering takes an
explicit seed so parallel runs stay deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import ORIGINAL, BBox, DetectionSet, _freeze

DEFAULT_GRID_ROWS = 31
DEFAULT_GRID_COLS = 51

# Chunk size for accumulating dataset-scale box collections.
_KDE_CHUNK = 1024


@dataclass(frozen=True)
class KdeParams:
    """Knobs of the box-to-saliency generator.

    ``kernel_size`` is the support (in cells) of the attraction kernel the
    warp stage will use; its inverse square is the uniform floor added to
    every cell, which prevents extreme warps when boxes are few or absent.
    """

    amplitude: float = 1.0
    bandwidth: float = 64.0
    alpha: float = 0.5
    kernel_size: int = 35

    def __post_init__(self):
        if not self.amplitude > 0:
            raise ValueError(f"amplitude must be positive, got {self.amplitude}")
        if not self.bandwidth > 0:
            raise ValueError(f"bandwidth must be positive, got {self.bandwidth}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.kernel_size < 1:
            raise ValueError(f"kernel_size must be >= 1, got {self.kernel_size}")

    @property
    def floor(self) -> float:
        return 1.0 / (self.kernel_size * self.kernel_size)


@dataclass(frozen=True)
class SaliencyGrid2D:
    """Row-major nonnegative grid; sums to 1 after :meth:`normalized`."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.size == 0:
            raise ValueError(f"saliency grid must be 2D and non-empty, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("saliency grid contains non-finite values")
        if values.min() < 0:
            raise ValueError("saliency grid contains negative values")
        object.__setattr__(self, "values", _freeze(np.ascontiguousarray(values)))

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    def normalized(self) -> "SaliencyGrid2D":
        total = float(self.values.sum())
        if total <= 0.0:
            raise ValueError("cannot normalize an all-zero saliency grid")
        return SaliencyGrid2D(self.values / total)


@dataclass(frozen=True)
class SaliencyProfile1D:
    """One-axis marginal of a saliency grid."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1 or values.size == 0:
            raise ValueError(f"saliency profile must be 1D and non-empty, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("saliency profile contains non-finite values")
        if values.min() < 0:
            raise ValueError("saliency profile contains negative values")
        object.__setattr__(self, "values", _freeze(np.ascontiguousarray(values)))

    def __len__(self) -> int:
        return self.values.shape[0]

    def normalized(self) -> "SaliencyProfile1D":
        total = float(self.values.sum())
        if total <= 0.0:
            raise ValueError("cannot normalize an all-zero saliency profile")
        return SaliencyProfile1D(self.values / total)


def grid_cell_centers_px(rows: int, cols: int, image_w: float, image_h: float):
    """Pixel coordinates of grid cell centers: (x per column, y per row)."""
    gx = (np.arange(cols, dtype=np.float64) + 0.5) / cols * image_w
    gy = (np.arange(rows, dtype=np.float64) + 0.5) / rows * image_h
    return gx, gy


def _boxes_px(boxes: DetectionSet, image_w: float, image_h: float):
    n = len(boxes)
    cx = np.empty(n)
    cy = np.empty(n)
    w = np.empty(n)
    h = np.empty(n)
    for i, b in enumerate(boxes.boxes):
        cx[i] = 0.5 * (b.x1 + b.x2) * image_w
        cy[i] = 0.5 * (b.y1 + b.y2) * image_h
        w[i] = (b.x2 - b.x1) * image_w
        h[i] = (b.y2 - b.y1) * image_h
    if n and (w.min() <= 0 or h.min() <= 0):
        bad = int(np.argmin(np.minimum(w, h)))
        raise ValueError(f"box {bad} has nonpositive pixel size {w[bad]}x{h[bad]}")
    return cx, cy, w, h


def kde_saliency(
    boxes: DetectionSet,
    params: KdeParams,
    rows: int = DEFAULT_GRID_ROWS,
    cols: int = DEFAULT_GRID_COLS,
    image_w: float = 1920.0,
    image_h: float = 1200.0,
    weight_by_score: bool = False,
) -> SaliencyGrid2D:
    """Sum of per-box normal densities over grid cell centers, plus floor.

    Cell value = floor + amplitude * sum_i N(cell; center_i, Cov_i) with
    Cov_i = bandwidth * diag(w_i, h_i) in squared pixels.  The result is
    not normalized.  ``weight_by_score`` additionally scales each box term
    by its detection confidence (off by default).
    """
    if image_w <= 0 or image_h <= 0:
        raise ValueError(f"image dimensions must be positive, got {image_w}x{image_h}")
    if boxes.boxes and boxes.space != ORIGINAL:
        raise ValueError("kde_saliency expects boxes in original space")
    gx, gy = grid_cell_centers_px(rows, cols, image_w, image_h)
    values = np.full((rows, cols), params.floor, dtype=np.float64)
    cx, cy, w, h = _boxes_px(boxes, image_w, image_h)
    weights = np.asarray(boxes.scores, dtype=np.float64) if weight_by_score else np.ones(len(boxes))
    b = params.bandwidth
    for start in range(0, len(boxes), _KDE_CHUNK):
        sl = slice(start, start + _KDE_CHUNK)
        var_x = b * w[sl]
        var_y = b * h[sl]
        # (n, rows, cols) quadratic form of the diagonal Gaussian
        dx2 = (gx[np.newaxis, np.newaxis, :] - cx[sl, np.newaxis, np.newaxis]) ** 2
        dy2 = (gy[np.newaxis, :, np.newaxis] - cy[sl, np.newaxis, np.newaxis]) ** 2
        quad = dx2 / var_x[:, np.newaxis, np.newaxis] + dy2 / var_y[:, np.newaxis, np.newaxis]
        norm = weights[sl] / (2.0 * math.pi * np.sqrt(var_x * var_y))
        values += params.amplitude * np.einsum("n,nrc->rc", norm, np.exp(-0.5 * quad))
    return SaliencyGrid2D(values)


def dataset_prior(
    all_boxes: DetectionSet,
    params: KdeParams,
    rows: int = DEFAULT_GRID_ROWS,
    cols: int = DEFAULT_GRID_COLS,
    image_w: float = 1920.0,
    image_h: float = 1200.0,
) -> SaliencyGrid2D:
    """Saliency of the union of a whole training set's boxes.

    Same computation as :func:`kde_saliency`; intended to be computed once
    offline and serialized (see the pipeline's prior-file format).
    """
    return kde_saliency(all_boxes, params, rows, cols, image_w, image_h)


def temporal_prior(
    prev: DetectionSet | None,
    params: KdeParams,
    rows: int = DEFAULT_GRID_ROWS,
    cols: int = DEFAULT_GRID_COLS,
    image_w: float = 1920.0,
    image_h: float = 1200.0,
) -> SaliencyGrid2D:
    """Saliency from the previous frame's detections.

    With no previous frame (or no detections in it) this is the constant
    floor grid, which normalizes to uniform and induces an identity warp.
    """
    if prev is None or len(prev) == 0:
        return SaliencyGrid2D(np.full((rows, cols), params.floor, dtype=np.float64))
    return kde_saliency(prev, params, rows, cols, image_w, image_h)


def combine_saliency(s_i: SaliencyGrid2D, s_d: SaliencyGrid2D, alpha: float) -> SaliencyGrid2D:
    """Blend a temporal grid with a dataset grid: alpha*s_i + (1-alpha)*s_d.

    Both inputs must already be normalized; the blend then sums to 1.
    The endpoints return the corresponding input unchanged.
    """
    if s_i.values.shape != s_d.values.shape:
        raise ValueError(
            f"saliency grids disagree: {s_i.values.shape} vs {s_d.values.shape}"
        )
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    if alpha == 1.0:
        return SaliencyGrid2D(s_i.values.copy())
    if alpha == 0.0:
        return SaliencyGrid2D(s_d.values.copy())
    return SaliencyGrid2D(alpha * s_i.values + (1.0 - alpha) * s_d.values)


def normalize_and_marginalize(grid: SaliencyGrid2D) -> tuple[SaliencyProfile1D, SaliencyProfile1D]:
    """Scale the grid to sum 1 and return its (x, y) marginals.

    The x profile has one entry per column, the y profile one per row;
    each sums to 1.  An all-zero grid is degenerate and raises.
    """
    normalized = grid.normalized()
    profile_x = SaliencyProfile1D(normalized.values.sum(axis=0))
    profile_y = SaliencyProfile1D(normalized.values.sum(axis=1))
    return profile_x, profile_y


def jitter_boxes(
    boxes: DetectionSet,
    jitter_px: float,
    rng_seed: int,
    image_w: float = 1920.0,
    image_h: float = 1200.0,
) -> DetectionSet:
    """Translate each box independently by uniform offsets in [-j, j] pixels.

    Offsets are drawn per box and axis; pixel units refer to the original
    image size (1920x1200 by default).  Boxes are not clipped to the
    frame: clipping would bias how saliency degrades with motion, and the
    generator tolerates out-of-frame centers.
    """
    if jitter_px < 0:
        raise ValueError(f"jitter must be nonnegative, got {jitter_px}")
    rng = np.random.default_rng(rng_seed)
    offsets = rng.uniform(-jitter_px, jitter_px, size=(len(boxes), 2))
    moved = []
    for b, (dx_px, dy_px) in zip(boxes.boxes, offsets):
        dx = dx_px / image_w
        dy = dy_px / image_h
        moved.append(BBox(b.x1 + dx, b.y1 + dy, b.x2 + dx, b.y2 + dy, space=b.space))
    return DetectionSet(tuple(moved), boxes.scores, boxes.class_ids)
