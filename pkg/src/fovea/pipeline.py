"""Frame pipeline: configuration, detection ingestion, per-sequence state,
the synthetic-scene evaluation harness, and the benchmark timer.

Detections arrive from JSON files rather than an embedded detector, which
keeps the pipeline detector-agnostic and testable at desk scale.  Frames
within one sequence are processed strictly in order (the temporal prior
feeds on the previous frame's detections); independent sequences may run
concurrently.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .geometry import (
    ORIGINAL,
    BBox,
    DetectionSet,
    ImageBuffer,
    uniform_downsample,
)
from .saliency import (
    DEFAULT_GRID_COLS,
    DEFAULT_GRID_ROWS,
    KdeParams,
    SaliencyGrid2D,
    combine_saliency,
    jitter_boxes,
    kde_saliency,
    normalize_and_marginalize,
    temporal_prior,
)
from .warp import (
    DEFAULT_KERNEL_SIGMA,
    AttractionKernel,
    MagnificationMap,
    SeparableWarp,
    build_separable_backward_map,
    compute_magnification_map,
    warp_image,
)
from .boxes import unwarp_box, warp_box_forward

MODES = ("uniform", "sd", "si", "sc")

_TRUE_WORDS = {"1", "true", "yes", "on"}
_FALSE_WORDS = {"0", "false", "no", "off"}


class DetectionFileError(ValueError):
    """A detection JSON file is malformed; names the file and record."""


@dataclass(frozen=True)
class PipelineConfig:
    """Flat pipeline configuration; every key has a CLI override.

    ``mode`` selects the saliency source: uniform resampling, the
    serialized dataset prior (sd), the previous frame's detections (si),
    or their alpha-blend (sc, which needs the prior too).
    """

    mode: str = "uniform"
    scale: float = 0.5
    rows: int = DEFAULT_GRID_ROWS
    cols: int = DEFAULT_GRID_COLS
    sigma: float = DEFAULT_KERNEL_SIGMA
    alpha: float = 0.5
    amplitude: float = 1.0
    bandwidth: float = 64.0
    anti_crop: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not 0.0 < self.scale <= 1.0:
            raise ValueError(f"scale must be in (0, 1], got {self.scale}")
        if self.rows < 1 or self.cols < 1:
            raise ValueError(f"grid must be at least 1x1, got {self.rows}x{self.cols}")

    def kernel(self) -> AttractionKernel:
        return AttractionKernel(sigma=self.sigma)

    def kde_params(self) -> KdeParams:
        return KdeParams(
            amplitude=self.amplitude,
            bandwidth=self.bandwidth,
            alpha=self.alpha,
            kernel_size=self.kernel().support,
        )

    def out_size(self, src_w: int, src_h: int) -> tuple[int, int]:
        return max(1, round(src_w * self.scale)), max(1, round(src_h * self.scale))


_CONFIG_PARSERS = {
    "mode": str,
    "scale": float,
    "rows": int,
    "cols": int,
    "sigma": float,
    "alpha": float,
    "amplitude": float,
    "bandwidth": float,
    "anti_crop": None,  # boolean words
    "seed": int,
}


def _parse_bool(word: str) -> bool:
    lowered = word.strip().lower()
    if lowered in _TRUE_WORDS:
        return True
    if lowered in _FALSE_WORDS:
        return False
    raise ValueError(f"expected a boolean word, got {word!r}")


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Parse ``key=value`` lines with ``#`` comments into typed values."""
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{source}:{lineno}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _CONFIG_PARSERS:
            raise ValueError(f"{source}:{lineno}: unknown config key {key!r}")
        parser = _CONFIG_PARSERS[key]
        try:
            values[key] = _parse_bool(value) if parser is None else parser(value)
        except ValueError as exc:
            raise ValueError(f"{source}:{lineno}: bad value for {key}: {exc}") from exc
    return values


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> PipelineConfig:
    """Config from an optional file, with overrides applied on top."""
    values: dict = {}
    if path is not None:
        path = Path(path)
        values.update(parse_config_text(path.read_text(), source=str(path)))
    if overrides:
        values.update({k: v for k, v in overrides.items() if v is not None})
    return PipelineConfig(**values)


@dataclass(frozen=True)
class SequenceState:
    """Temporal chain: detections seen on the previous frame."""

    previous: DetectionSet | None = None
    frame_index: int = 0


def update_state(state: SequenceState, detections: DetectionSet) -> SequenceState:
    """Advance the chain with this frame's (original-space) detections."""
    if detections.boxes and detections.space != ORIGINAL:
        raise ValueError("sequence state takes original-space detections; unwarp them first")
    return SequenceState(previous=detections, frame_index=state.frame_index + 1)


def ingest_detections(path: str | Path, image_w: float, image_h: float) -> DetectionSet:
    """Parse a detection JSON file into a normalized DetectionSet.

    The format is an array of objects with a pixel ``bbox`` [x, y, w, h]
    and optional ``score`` and ``category_id``.
    """
    path = Path(path)
    try:
        records = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DetectionFileError(f"{path}: malformed JSON: {exc}") from exc
    if not isinstance(records, list):
        raise DetectionFileError(f"{path}: expected a JSON array of detections")
    boxes: list[BBox] = []
    scores: list[float] = []
    class_ids: list[int] = []
    for i, rec in enumerate(records):
        if not isinstance(rec, dict) or "bbox" not in rec:
            raise DetectionFileError(f"{path}: record {i}: missing required key 'bbox'")
        bbox = rec["bbox"]
        if not (isinstance(bbox, list) and len(bbox) == 4):
            raise DetectionFileError(f"{path}: record {i}: bbox must be [x, y, w, h]")
        x, y, w, h = (float(v) for v in bbox)
        if not (w > 0 and h > 0):
            raise DetectionFileError(f"{path}: record {i}: nonpositive box size {w}x{h}")
        boxes.append(BBox(x / image_w, y / image_h, (x + w) / image_w, (y + h) / image_h))
        score = float(rec.get("score", 1.0))
        if not 0.0 <= score <= 1.0:
            raise DetectionFileError(f"{path}: record {i}: score {score} outside [0, 1]")
        scores.append(score)
        class_ids.append(int(rec.get("category_id", -1)))
    return DetectionSet(tuple(boxes), tuple(scores), tuple(class_ids))


@dataclass(frozen=True)
class FrameResult:
    warped: ImageBuffer
    warp: SeparableWarp
    saliency: SaliencyGrid2D
    magnification: MagnificationMap


def _mode_saliency(
    state: SequenceState,
    config: PipelineConfig,
    prior: SaliencyGrid2D | None,
    image_w: int,
    image_h: int,
) -> SaliencyGrid2D:
    """Normalized saliency grid for the configured mode.

    Every branch normalizes before returning so the blended mode is
    bit-identical to its endpoints at alpha 0 and 1.
    """
    params = config.kde_params()
    dims = (config.rows, config.cols, image_w, image_h)
    if config.mode == "uniform":
        return temporal_prior(None, params, *dims).normalized()
    if config.mode == "si":
        return temporal_prior(state.previous, params, *dims).normalized()
    if prior is None:
        raise ValueError(f"mode {config.mode!r} requires a dataset-prior grid")
    if prior.values.shape != (config.rows, config.cols):
        raise ValueError(
            f"prior grid is {prior.values.shape}, config wants {(config.rows, config.cols)}"
        )
    prior_norm = prior.normalized()
    if config.mode == "sd":
        return prior_norm
    temporal = temporal_prior(state.previous, params, *dims).normalized()
    return combine_saliency(temporal, prior_norm, config.alpha)


def process_frame(
    img: ImageBuffer,
    state: SequenceState,
    config: PipelineConfig,
    prior: SaliencyGrid2D | None = None,
) -> FrameResult:
    """Warp one frame according to the configured saliency mode.

    The state is not advanced here; callers do that with
    :func:`update_state` once this frame's detections exist, so a frame's
    warp can only depend on strictly earlier frames.
    """
    grid = _mode_saliency(state, config, prior, img.width, img.height)
    profile_x, profile_y = normalize_and_marginalize(grid)
    out_w, out_h = config.out_size(img.width, img.height)
    warp = build_separable_backward_map(
        profile_x,
        profile_y,
        config.kernel(),
        out_w,
        out_h,
        img.width,
        img.height,
        anti_crop=config.anti_crop,
    )
    return FrameResult(
        warped=warp_image(img, warp),
        warp=warp,
        saliency=grid,
        magnification=compute_magnification_map(warp),
    )


# --- synthetic-scene evaluation -------------------------------------------

_SYNTH_W = 1920
_SYNTH_H = 1200
_SYNTH_MARGIN = 420  # keep boxes away from edges so their saliency stays in-frame
_JITTER_SEED_OFFSET = 1_000_003  # scene and jitter draws come from distinct streams

DEFAULT_JITTER_SWEEP = (0.0, 10.0, 25.0, 50.0, 100.0, 200.0)
SYNTH_CSV_HEADER = (
    "scenario_seed,jitter_px,box_id,box_w_px,box_h_px,mean_magnification,roundtrip_err_px"
)


@dataclass(frozen=True)
class SynthRow:
    scenario_seed: int
    jitter_px: float
    box_id: int
    box_w_px: float
    box_h_px: float
    mean_magnification: float
    roundtrip_err_px: float

    def csv(self) -> str:
        return (
            f"{self.scenario_seed},{self.jitter_px!r},{self.box_id},"
            f"{self.box_w_px!r},{self.box_h_px!r},"
            f"{self.mean_magnification!r},{self.roundtrip_err_px!r}"
        )


@dataclass(frozen=True)
class SynthScene:
    image: ImageBuffer
    boxes: DetectionSet


def make_synth_scene(
    scenario_seed: int, box_sizes_px: tuple[float, ...] = (40.0, 400.0)
) -> SynthScene:
    """Gray canvas with one colored rectangle per requested size."""
    rng = np.random.default_rng(scenario_seed)
    data = np.full((_SYNTH_H, _SYNTH_W, 3), 0.5, dtype=np.float32)
    boxes: list[BBox] = []
    for size in box_sizes_px:
        cx = rng.uniform(_SYNTH_MARGIN, _SYNTH_W - _SYNTH_MARGIN)
        cy = rng.uniform(_SYNTH_MARGIN, _SYNTH_H - _SYNTH_MARGIN)
        color = rng.uniform(0.1, 0.9, size=3).astype(np.float32)
        x1, x2 = cx - size / 2, cx + size / 2
        y1, y2 = cy - size / 2, cy + size / 2
        data[int(y1) : int(y2), int(x1) : int(x2)] = color
        boxes.append(BBox(x1 / _SYNTH_W, y1 / _SYNTH_H, x2 / _SYNTH_W, y2 / _SYNTH_H))
    return SynthScene(ImageBuffer(data), DetectionSet(tuple(boxes)))


def _box_mean_magnification(box: BBox, warp: SeparableWarp, mag: MagnificationMap) -> float:
    """Mean magnification over the output pixels whose backward image is in the box."""
    cols = np.nonzero((warp.pixel_tinv_x >= box.x1) & (warp.pixel_tinv_x <= box.x2))[0]
    rows = np.nonzero((warp.pixel_tinv_y >= box.y1) & (warp.pixel_tinv_y <= box.y2))[0]
    if cols.size == 0 or rows.size == 0:
        # box thinner than one output pixel: fall back to the nearest pixel
        cx, cy = box.center
        cols = np.array([int(np.argmin(np.abs(warp.pixel_tinv_x - cx)))])
        rows = np.array([int(np.argmin(np.abs(warp.pixel_tinv_y - cy)))])
    return float(mag.values[np.ix_(rows, cols)].mean())


def _roundtrip_err_px(box: BBox, warp: SeparableWarp) -> float:
    back = unwarp_box(warp_box_forward(box, warp), warp)
    return max(
        abs(back.x1 - box.x1) * _SYNTH_W,
        abs(back.x2 - box.x2) * _SYNTH_W,
        abs(back.y1 - box.y1) * _SYNTH_H,
        abs(back.y2 - box.y2) * _SYNTH_H,
    )


def synth_eval(
    scenario_seed: int,
    config: PipelineConfig,
    jitter_values: tuple[float, ...] = DEFAULT_JITTER_SWEEP,
    box_sizes_px: tuple[float, ...] = (40.0, 400.0),
) -> list[SynthRow]:
    """Evaluate warp quality on one synthetic scene across jitter levels.

    For each jitter j, the scene's true boxes are translated by uniform
    offsets in [-j, j] pixels and fed to the temporal mode as "previous
    detections"; the report row carries the mean magnification over each
    true box and the forward/backward round-trip error.  The jitter seed
    is shared across j values, so offsets scale continuously with j and
    sweeps are comparable.
    """
    scene = make_synth_scene(scenario_seed, box_sizes_px)
    config = replace(config, mode="si" if scene.boxes.boxes else "uniform")
    jitter_seed = scenario_seed + _JITTER_SEED_OFFSET
    rows: list[SynthRow] = []
    for j in jitter_values:
        prev = jitter_boxes(scene.boxes, j, jitter_seed, _SYNTH_W, _SYNTH_H)
        state = SequenceState(previous=prev, frame_index=1)
        result = process_frame(scene.image, state, config)
        for box_id, box in enumerate(scene.boxes.boxes):
            rows.append(
                SynthRow(
                    scenario_seed=scenario_seed,
                    jitter_px=float(j),
                    box_id=box_id,
                    box_w_px=box.w * _SYNTH_W,
                    box_h_px=box.h * _SYNTH_H,
                    mean_magnification=_box_mean_magnification(box, result.warp, result.magnification),
                    roundtrip_err_px=_roundtrip_err_px(box, result.warp),
                )
            )
    return rows


def write_synth_csv(path: str | Path, rows: list[SynthRow]) -> None:
    with open(path, "w", newline="") as f:
        f.write(SYNTH_CSV_HEADER + "\n")
        for row in rows:
            f.write(row.csv() + "\n")


# --- benchmark -------------------------------------------------------------

BENCH_CSV_HEADER = "component,iterations,median_ms,p95_ms"


@dataclass(frozen=True)
class BenchRow:
    component: str
    iterations: int
    median_ms: float
    p95_ms: float

    def csv(self) -> str:
        return f"{self.component},{self.iterations},{self.median_ms:.4f},{self.p95_ms:.4f}"


def _time_component(fn, iterations: int, warmup: int = 1) -> tuple[float, float]:
    for _ in range(warmup):
        fn()
    samples = np.empty(iterations)
    for i in range(iterations):
        start = time.perf_counter()
        fn()
        samples[i] = (time.perf_counter() - start) * 1000.0
    return float(np.median(samples)), float(np.percentile(samples, 95))


def bench(config: PipelineConfig, iterations: int) -> list[BenchRow]:
    """Time the pipeline stages at the standard 1920x1200 -> 0.5x setting.

    Components: saliency build, warp-map build, image warp under the
    box-driven map and under the uniform map, and box unwarping per 100
    boxes.  Warm-up runs are excluded.
    """
    if iterations < 1:
        raise ValueError(f"iterations must be >= 1, got {iterations}")
    rng = np.random.default_rng(config.seed)
    img = ImageBuffer(rng.random((_SYNTH_H, _SYNTH_W, 3), dtype=np.float32))
    boxes = []
    for _ in range(10):
        cx, cy = rng.uniform(300, 1620), rng.uniform(300, 900)
        w, h = rng.uniform(40, 300), rng.uniform(40, 300)
        boxes.append(
            BBox(
                (cx - w / 2) / _SYNTH_W,
                (cy - h / 2) / _SYNTH_H,
                (cx + w / 2) / _SYNTH_W,
                (cy + h / 2) / _SYNTH_H,
            )
        )
    detections = DetectionSet(tuple(boxes))
    params = config.kde_params()
    kernel = config.kernel()
    out_w, out_h = config.out_size(_SYNTH_W, _SYNTH_H)

    grid = kde_saliency(detections, params, config.rows, config.cols, _SYNTH_W, _SYNTH_H)
    profile_x, profile_y = normalize_and_marginalize(grid)
    warp = build_separable_backward_map(
        profile_x, profile_y, kernel, out_w, out_h, _SYNTH_W, _SYNTH_H, config.anti_crop
    )
    uniform_grid = temporal_prior(None, params, config.rows, config.cols, _SYNTH_W, _SYNTH_H)
    ux, uy = normalize_and_marginalize(uniform_grid)
    uniform_warp = build_separable_backward_map(
        ux, uy, kernel, out_w, out_h, _SYNTH_W, _SYNTH_H, config.anti_crop
    )
    unwarp_targets = [
        warp_box_forward(b, warp) for b in (boxes * math.ceil(100 / len(boxes)))[:100]
    ]

    components = [
        (
            "saliency_build",
            lambda: kde_saliency(detections, params, config.rows, config.cols, _SYNTH_W, _SYNTH_H),
        ),
        (
            "warp_map_build",
            lambda: build_separable_backward_map(
                profile_x, profile_y, kernel, out_w, out_h, _SYNTH_W, _SYNTH_H, config.anti_crop
            ),
        ),
        ("image_warp", lambda: warp_image(img, warp)),
        ("image_warp_uniform", lambda: warp_image(img, uniform_warp)),
        ("box_unwarp_100", lambda: [unwarp_box(b, warp) for b in unwarp_targets]),
    ]
    report = []
    for name, fn in components:
        median, p95 = _time_component(fn, iterations)
        report.append(BenchRow(name, iterations, median, p95))
    return report


def write_bench_csv(path: str | Path, rows: list[BenchRow]) -> None:
    with open(path, "w", newline="") as f:
        f.write(BENCH_CSV_HEADER + "\n")
        for row in rows:
            f.write(row.csv() + "\n")


def uniform_reference(img: ImageBuffer, config: PipelineConfig) -> ImageBuffer:
    """Plain downsample at the configured scale (the no-warp baseline)."""
    out_w, out_h = config.out_size(img.width, img.height)
    return uniform_downsample(img, out_w, out_h)
