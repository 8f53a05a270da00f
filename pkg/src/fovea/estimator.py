"""Scikit-learn style estimator wrapping the warping pipeline.

``FoveatedWarper`` is a transformer: ``fit`` turns a set of bounding
boxes into a saliency map and a separable backward warp, ``transform``
renders images through that warp, and ``inverse_transform`` maps boxes
detected on the warped image back to the original frame.  Parameters
follow the sklearn convention (stored verbatim, introspectable through
``get_params``), so the warper composes with pipelines and parameter
search.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .geometry import WARPED, DetectionSet
from .saliency import KdeParams, kde_saliency, normalize_and_marginalize, temporal_prior
from .validation import boxes_to_px, check_boxes_px, check_image
from .warp import (
    AttractionKernel,
    SeparableWarp,
    build_separable_backward_map,
    compute_magnification_map,
    warp_image,
)
from .boxes import unwarp_box, warp_box_forward


class FoveatedWarper(TransformerMixin, BaseEstimator):
    """Saliency-guided image magnifier with exact box unwarping.

    Parameters
    ----------
    scale : output/input resolution ratio.
    amplitude, bandwidth : box-to-saliency generator knobs; bandwidth is
        in pixels of the original image.
    rows, cols : saliency grid resolution (vertical, horizontal).
    sigma : attraction kernel standard deviation in grid-cell units.
    anti_crop : mirror saliency at the canvas edges so nothing is cropped.
    image_width, image_height : source frame size in pixels.
    """

    def __init__(
        self,
        scale: float = 0.5,
        amplitude: float = 1.0,
        bandwidth: float = 64.0,
        rows: int = 31,
        cols: int = 51,
        sigma: float = 5.5,
        anti_crop: bool = True,
        image_width: int = 1920,
        image_height: int = 1200,
    ):
        self.scale = scale
        self.amplitude = amplitude
        self.bandwidth = bandwidth
        self.rows = rows
        self.cols = cols
        self.sigma = sigma
        self.anti_crop = anti_crop
        self.image_width = image_width
        self.image_height = image_height

    def fit(self, X, y=None):
        """Build the warp from boxes.

        ``X`` is an (n, 4) array of pixel [x1, y1, x2, y2] boxes in the
        original frame (or a DetectionSet, or None for a uniform warp).
        """
        if not 0.0 < self.scale <= 1.0:
            raise ValueError(f"scale must be in (0, 1], got {self.scale}")
        kernel = AttractionKernel(sigma=self.sigma)
        params = KdeParams(
            amplitude=self.amplitude, bandwidth=self.bandwidth, kernel_size=kernel.support
        )
        detections = check_boxes_px(X, self.image_width, self.image_height)
        if len(detections) == 0:
            grid = temporal_prior(
                None, params, self.rows, self.cols, self.image_width, self.image_height
            )
        else:
            grid = kde_saliency(
                detections, params, self.rows, self.cols, self.image_width, self.image_height
            )
        profile_x, profile_y = normalize_and_marginalize(grid)
        out_w = max(1, round(self.image_width * self.scale))
        out_h = max(1, round(self.image_height * self.scale))
        self.saliency_grid_ = grid.normalized()
        self.warp_ = build_separable_backward_map(
            profile_x,
            profile_y,
            kernel,
            out_w,
            out_h,
            self.image_width,
            self.image_height,
            anti_crop=self.anti_crop,
        )
        self.out_size_ = (out_w, out_h)
        return self

    def _fitted_warp(self) -> SeparableWarp:
        warp = getattr(self, "warp_", None)
        if warp is None:
            raise NotFittedError("FoveatedWarper must be fitted on boxes before use")
        return warp

    def transform(self, X):
        """Warp one image or a list of images; returns float arrays in [0, 1]."""
        warp = self._fitted_warp()
        if isinstance(X, (list, tuple)):
            return [warp_image(check_image(item), warp).data for item in X]
        return warp_image(check_image(X), warp).data

    def inverse_transform(self, X):
        """Map (n, 4) pixel boxes from the warped canvas back to the original."""
        warp = self._fitted_warp()
        out_w, out_h = self.out_size_
        detections = check_boxes_px(X, out_w, out_h, space=WARPED)
        unwarped = [unwarp_box(b, warp) for b in detections.boxes]
        return boxes_to_px(DetectionSet(tuple(unwarped)), self.image_width, self.image_height)

    def transform_boxes(self, X):
        """Map (n, 4) pixel boxes from the original frame into the warped canvas."""
        warp = self._fitted_warp()
        detections = check_boxes_px(X, self.image_width, self.image_height)
        out_w, out_h = self.out_size_
        forwarded = [warp_box_forward(b, warp) for b in detections.boxes]
        return boxes_to_px(DetectionSet(tuple(forwarded)), out_w, out_h)

    def magnification(self):
        """Magnification map of the fitted warp (output px per source px)."""
        return compute_magnification_map(self._fitted_warp()).values
