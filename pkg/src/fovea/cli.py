"""Command-line interface.

Subcommands: warp-image, sequence, synth-eval, bench, build-prior.
Every config-file key has an override flag of the same name.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import fileio, pipeline
from .geometry import DetectionSet
from .saliency import dataset_prior


def _add_config_overrides(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, default=None, help="key=value config file")
    parser.add_argument("--mode", choices=pipeline.MODES, default=None)
    parser.add_argument("--scale", type=float, default=None)
    parser.add_argument("--rows", type=int, default=None)
    parser.add_argument("--cols", type=int, default=None)
    parser.add_argument("--sigma", type=float, default=None)
    parser.add_argument("--alpha", type=float, default=None)
    parser.add_argument("--amplitude", type=float, default=None)
    parser.add_argument("--bandwidth", type=float, default=None)
    parser.add_argument("--anti-crop", dest="anti_crop", choices=["true", "false"], default=None)
    parser.add_argument("--seed", type=int, default=None)


def _config_from_args(args: argparse.Namespace) -> pipeline.PipelineConfig:
    overrides = {
        key: getattr(args, key, None)
        for key in (
            "mode",
            "scale",
            "rows",
            "cols",
            "sigma",
            "alpha",
            "amplitude",
            "bandwidth",
            "seed",
        )
    }
    if getattr(args, "anti_crop", None) is not None:
        overrides["anti_crop"] = args.anti_crop == "true"
    return pipeline.load_config(args.config, overrides)


def _load_prior(args: argparse.Namespace, config: pipeline.PipelineConfig):
    if args.prior is None:
        if config.mode in ("sd", "sc"):
            raise SystemExit(f"mode {config.mode!r} requires --prior <file>")
        return None
    return fileio.read_prior(args.prior)


def _cmd_warp_image(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    prior = _load_prior(args, config)
    img = fileio.read_image(args.image)
    state = pipeline.SequenceState()
    if args.boxes is not None:
        detections = pipeline.ingest_detections(args.boxes, img.width, img.height)
        state = pipeline.update_state(state, detections)
    result = pipeline.process_frame(img, state, config, prior)
    fileio.write_image(args.out, result.warped)
    if args.emit_heatmap is not None:
        fileio.write_magnification_pgm(args.emit_heatmap, result.magnification)
    if args.emit_mag_csv is not None:
        fileio.write_magnification_csv(args.emit_mag_csv, result.magnification)
    if args.emit_warp is not None:
        fileio.write_warp_csv(args.emit_warp, result.warp)
    return 0


def _cmd_sequence(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    prior = _load_prior(args, config)
    frames = sorted(
        p for p in Path(args.frames).iterdir() if p.suffix.lower() in (".png", ".ppm", ".pgm")
    )
    if not frames:
        raise SystemExit(f"no frames found in {args.frames}")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    detections_dir = Path(args.detections)
    state = pipeline.SequenceState()
    for frame_path in frames:
        img = fileio.read_image(frame_path)
        result = pipeline.process_frame(img, state, config, prior)
        fileio.write_image(out_dir / (frame_path.stem + ".png"), result.warped)
        det_path = detections_dir / (frame_path.stem + ".json")
        if det_path.exists():
            detections = pipeline.ingest_detections(det_path, img.width, img.height)
        else:
            detections = DetectionSet(())
        state = pipeline.update_state(state, detections)
    print(f"processed {len(frames)} frames into {out_dir}")
    return 0


def _cmd_synth_eval(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    jitter_values = tuple(float(v) for v in args.jitter_sweep.split(","))
    rows: list[pipeline.SynthRow] = []
    for scenario in range(args.num_seeds):
        rows.extend(pipeline.synth_eval(config.seed + scenario, config, jitter_values))
    pipeline.write_synth_csv(args.out, rows)
    print(f"wrote {len(rows)} rows to {args.out}")
    return 0


def _cmd_bench(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    report = pipeline.bench(config, args.iters)
    pipeline.write_bench_csv(args.out, report)
    by_name = {row.component: row for row in report}
    ratio = by_name["image_warp"].median_ms / by_name["image_warp_uniform"].median_ms
    for row in report:
        print(f"{row.component}: median {row.median_ms:.3f} ms, p95 {row.p95_ms:.3f} ms")
    print(f"image warp si/uniform timing ratio: {ratio:.3f}")
    return 0


def _cmd_build_prior(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    boxes = pipeline.ingest_detections(args.annotations, args.width, args.height)
    grid = dataset_prior(
        boxes, config.kde_params(), config.rows, config.cols, args.width, args.height
    )
    fileio.write_prior(args.out, grid.normalized())
    print(f"wrote {config.rows}x{config.cols} prior from {len(boxes)} boxes to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fovea", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("warp-image", help="warp a single image")
    p.add_argument("--image", type=Path, required=True)
    p.add_argument("--boxes", type=Path, default=None, help="detection JSON for the temporal mode")
    p.add_argument("--prior", type=Path, default=None, help="serialized dataset prior")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--emit-heatmap", type=Path, default=None, help="magnification PGM (16-bit)")
    p.add_argument("--emit-mag-csv", type=Path, default=None, help="magnification CSV")
    p.add_argument("--emit-warp", type=Path, default=None, help="axis-map CSV")
    _add_config_overrides(p)
    p.set_defaults(fn=_cmd_warp_image)

    p = sub.add_parser("sequence", help="warp a frame directory with temporal state")
    p.add_argument("--frames", type=Path, required=True)
    p.add_argument("--detections", type=Path, required=True)
    p.add_argument("--prior", type=Path, default=None)
    p.add_argument("--out", type=Path, required=True)
    _add_config_overrides(p)
    p.set_defaults(fn=_cmd_sequence)

    p = sub.add_parser("synth-eval", help="synthetic-scene jitter sweep")
    p.add_argument("--jitter-sweep", default="0,10,25,50,100,200")
    p.add_argument("--num-seeds", type=int, default=1)
    p.add_argument("--out", type=Path, required=True)
    _add_config_overrides(p)
    p.set_defaults(fn=_cmd_synth_eval)

    p = sub.add_parser("bench", help="time the pipeline stages")
    p.add_argument("--iters", type=int, required=True)
    p.add_argument("--out", type=Path, required=True)
    _add_config_overrides(p)
    p.set_defaults(fn=_cmd_bench)

    p = sub.add_parser("build-prior", help="build and serialize a dataset prior")
    p.add_argument("--annotations", type=Path, required=True, help="detection JSON of all boxes")
    p.add_argument("--width", type=float, default=1920.0)
    p.add_argument("--height", type=float, default=1200.0)
    p.add_argument("--out", type=Path, required=True)
    _add_config_overrides(p)
    p.set_defaults(fn=_cmd_build_prior)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
