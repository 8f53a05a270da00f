"""Saliency-guided foveated image magnification.

Boxes become a saliency map (a sum of normal densities over a coarse
grid), saliency becomes a separable backward warp that magnifies salient
regions without cropping, and boxes detected on the warped image map
exactly back to the original frame.
"""

from .geometry import (
    ORIGINAL,
    WARPED,
    BBox,
    DetectionSet,
    ImageBuffer,
    Point,
    sample_bilinear,
    uniform_downsample,
)
from .saliency import (
    KdeParams,
    SaliencyGrid2D,
    SaliencyProfile1D,
    combine_saliency,
    dataset_prior,
    jitter_boxes,
    kde_saliency,
    normalize_and_marginalize,
    temporal_prior,
)
from .warp import (
    AttractionKernel,
    FoldoverReport,
    MagnificationMap,
    NonseparableWarp,
    SeparableWarp,
    build_nonseparable_backward_map,
    build_separable_backward_map,
    check_foldover,
    compute_magnification_map,
    reflect_pad_profile,
    warp_image,
)
from .boxes import AxisMapView, FoldoverError, giou, iou, unwarp_box, warp_box_forward
from .estimator import FoveatedWarper
from .pipeline import (
    PipelineConfig,
    SequenceState,
    bench,
    ingest_detections,
    process_frame,
    synth_eval,
    update_state,
)

__version__ = "0.1.0"

__all__ = [
    "ORIGINAL",
    "WARPED",
    "BBox",
    "DetectionSet",
    "ImageBuffer",
    "Point",
    "sample_bilinear",
    "uniform_downsample",
    "KdeParams",
    "SaliencyGrid2D",
    "SaliencyProfile1D",
    "combine_saliency",
    "dataset_prior",
    "jitter_boxes",
    "kde_saliency",
    "normalize_and_marginalize",
    "temporal_prior",
    "AttractionKernel",
    "FoldoverReport",
    "MagnificationMap",
    "NonseparableWarp",
    "SeparableWarp",
    "build_nonseparable_backward_map",
    "build_separable_backward_map",
    "check_foldover",
    "compute_magnification_map",
    "reflect_pad_profile",
    "warp_image",
    "AxisMapView",
    "FoldoverError",
    "giou",
    "iou",
    "unwarp_box",
    "warp_box_forward",
    "FoveatedWarper",
    "PipelineConfig",
    "SequenceState",
    "bench",
    "ingest_detections",
    "process_frame",
    "synth_eval",
    "update_state",
    "__version__",
]
