"""Input validation helpers for the estimator-facing API.

These convert the loosely typed arrays users hand to the estimator into
the validated core types, with error messages that name the offending
row.
"""

from __future__ import annotations

import numpy as np

from .geometry import ORIGINAL, BBox, DetectionSet, ImageBuffer


def check_image(X) -> ImageBuffer:
    """Accept an ImageBuffer or an (H, W[, C]) array in [0, 1] or uint8."""
    if isinstance(X, ImageBuffer):
        return X
    arr = np.asarray(X)
    if arr.ndim not in (2, 3):
        raise ValueError(f"expected an (H, W) or (H, W, C) image, got shape {arr.shape}")
    if arr.dtype == np.uint8:
        return ImageBuffer.from_uint8(arr)
    return ImageBuffer(arr.astype(np.float32))


def check_boxes_px(X, image_w: float, image_h: float, space: str = ORIGINAL) -> DetectionSet:
    """Accept a DetectionSet or an (n, 4) array of pixel [x1, y1, x2, y2] boxes."""
    if X is None:
        return DetectionSet(())
    if isinstance(X, DetectionSet):
        return X
    arr = np.asarray(X, dtype=np.float64)
    if arr.size == 0:
        return DetectionSet(())
    if arr.ndim != 2 or arr.shape[1] != 4:
        raise ValueError(f"expected an (n, 4) box array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        bad = int(np.nonzero(~np.isfinite(arr).all(axis=1))[0][0])
        raise ValueError(f"box {bad} contains non-finite coordinates")
    boxes = []
    for i, (x1, y1, x2, y2) in enumerate(arr):
        if not (x1 < x2 and y1 < y2):
            raise ValueError(f"box {i} is degenerate: ({x1}, {y1}, {x2}, {y2})")
        boxes.append(BBox(x1 / image_w, y1 / image_h, x2 / image_w, y2 / image_h, space=space))
    return DetectionSet(tuple(boxes))


def boxes_to_px(detections: DetectionSet, image_w: float, image_h: float) -> np.ndarray:
    """DetectionSet back to an (n, 4) pixel [x1, y1, x2, y2] array."""
    out = np.empty((len(detections), 4))
    for i, b in enumerate(detections.boxes):
        out[i] = (b.x1 * image_w, b.y1 * image_h, b.x2 * image_w, b.y2 * image_h)
    return out
