import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fovea.geometry import BBox, DetectionSet
from fovea.saliency import KdeParams, kde_saliency, normalize_and_marginalize
from fovea.warp import AttractionKernel, build_separable_backward_map

IMAGE_W, IMAGE_H = 1920, 1200
OUT_W, OUT_H = 960, 600


def random_detections(rng, n_boxes, margin=200.0, size_range=(30.0, 400.0)):
    boxes = []
    for _ in range(n_boxes):
        cx = rng.uniform(margin, IMAGE_W - margin)
        cy = rng.uniform(margin, IMAGE_H - margin)
        w = rng.uniform(*size_range)
        h = rng.uniform(*size_range)
        boxes.append(
            BBox(
                (cx - w / 2) / IMAGE_W,
                (cy - h / 2) / IMAGE_H,
                (cx + w / 2) / IMAGE_W,
                (cy + h / 2) / IMAGE_H,
            )
        )
    return DetectionSet(tuple(boxes))


def kde_warp(seed, n_boxes=8):
    """A box-driven warp at the default settings, plus its saliency grid."""
    rng = np.random.default_rng(seed)
    detections = random_detections(rng, n_boxes)
    params = KdeParams()
    grid = kde_saliency(detections, params, image_w=IMAGE_W, image_h=IMAGE_H)
    profile_x, profile_y = normalize_and_marginalize(grid)
    warp = build_separable_backward_map(
        profile_x, profile_y, AttractionKernel(sigma=5.5), OUT_W, OUT_H, IMAGE_W, IMAGE_H
    )
    return warp, grid


@pytest.fixture
def kde_warp_factory():
    return kde_warp


@pytest.fixture
def detections_factory():
    return random_detections
