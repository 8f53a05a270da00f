"""Box mapping between warped and original spaces, plus IoU geometry.

Because the warp is separable, a box maps by mapping its x and y
intervals independently: edges go through the sampled backward map
directly (warped -> original), or through its numeric inverse
(original -> warped).  The inverse is exact for the piecewise-linear
sampled map: binary search for the bracketing segment, then local linear
interpolation.  Nonseparable warps deliberately have no box mapping;
they would not keep boxes axis-aligned.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import ORIGINAL, WARPED, BBox, _freeze
from .warp import SeparableWarp


class FoldoverError(ValueError):
    """Backward map is not strictly increasing; box mapping is undefined."""


@dataclass(frozen=True)
class AxisMapView:
    """One strictly increasing sampled axis map, ready for evaluation.

    ``positions`` are the output-space domain samples (canvas edges plus
    pixel centers), ``values`` the corresponding source coordinates.
    Construction fails if the samples ever decrease or tie.
    """

    positions: np.ndarray
    values: np.ndarray
    axis: str

    def __post_init__(self):
        deltas = np.diff(self.values)
        if np.any(deltas <= 0.0):
            bad = int(np.argmax(deltas <= 0.0))
            raise FoldoverError(
                f"backward map along {self.axis} is not strictly increasing at "
                f"index {bad} (delta {deltas[bad]:.3e})"
            )
        object.__setattr__(self, "positions", _freeze(np.asarray(self.positions, dtype=np.float64)))
        object.__setattr__(self, "values", _freeze(np.asarray(self.values, dtype=np.float64)))

    @classmethod
    def from_warp(cls, warp: SeparableWarp, axis: str) -> "AxisMapView":
        if axis == "x":
            return cls(warp.x_positions, warp.tinv_x, "x")
        if axis == "y":
            return cls(warp.y_positions, warp.tinv_y, "y")
        raise ValueError(f"axis must be 'x' or 'y', got {axis!r}")

    def evaluate(self, coord: float) -> float:
        """Source coordinate of an output-space coordinate."""
        return float(np.interp(coord, self.positions, self.values))

    def invert(self, coord: float) -> float:
        """Output-space coordinate whose backward image is ``coord``.

        Valid only for targets within the map's range, which anti-crop
        guarantees for any in-canvas coordinate.
        """
        if coord < self.values[0] or coord > self.values[-1]:
            raise ValueError(
                f"{coord} outside backward-map range "
                f"[{self.values[0]}, {self.values[-1]}] on axis {self.axis}"
            )
        return float(np.interp(coord, self.values, self.positions))


def unwarp_box(box: BBox, warp: SeparableWarp) -> BBox:
    """Map a warped-space box to original space through the backward map."""
    if box.space != WARPED:
        raise ValueError(f"unwarp_box expects a warped-space box, got {box.space!r}")
    map_x = AxisMapView.from_warp(warp, "x")
    map_y = AxisMapView.from_warp(warp, "y")
    return BBox(
        map_x.evaluate(box.x1),
        map_y.evaluate(box.y1),
        map_x.evaluate(box.x2),
        map_y.evaluate(box.y2),
        space=ORIGINAL,
    )


def warp_box_forward(box: BBox, warp: SeparableWarp) -> BBox:
    """Map an original-space box into warped space by inverting the map."""
    if box.space != ORIGINAL:
        raise ValueError(f"warp_box_forward expects an original-space box, got {box.space!r}")
    map_x = AxisMapView.from_warp(warp, "x")
    map_y = AxisMapView.from_warp(warp, "y")
    return BBox(
        map_x.invert(box.x1),
        map_y.invert(box.y1),
        map_x.invert(box.x2),
        map_y.invert(box.y2),
        space=WARPED,
    )


def _check_same_space(a: BBox, b: BBox) -> None:
    if a.space != b.space:
        raise ValueError(f"boxes live in different spaces: {a.space!r} vs {b.space!r}")


def _intersection_area(a: BBox, b: BBox) -> float:
    w = min(a.x2, b.x2) - max(a.x1, b.x1)
    h = min(a.y2, b.y2) - max(a.y1, b.y1)
    return max(w, 0.0) * max(h, 0.0)


def iou(a: BBox, b: BBox) -> float:
    """Intersection over union; 0 for disjoint boxes."""
    _check_same_space(a, b)
    inter = _intersection_area(a, b)
    union = a.area + b.area - inter
    return inter / union


def giou(a: BBox, b: BBox) -> float:
    """Generalized IoU: IoU minus the enclosing-box area not covered by the union.

    Ranges over (-1, 1]; equals IoU exactly when the tightest enclosing
    box is fully covered by the union, and tends to -1 as disjoint boxes
    separate.
    """
    _check_same_space(a, b)
    inter = _intersection_area(a, b)
    union = a.area + b.area - inter
    hull_w = max(a.x2, b.x2) - min(a.x1, b.x1)
    hull_h = max(a.y2, b.y2) - min(a.y1, b.y1)
    hull = hull_w * hull_h
    return inter / union - (hull - union) / hull
