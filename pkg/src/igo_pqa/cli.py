"""Command-line entry point: synth, generate, bin, train, eval, report.

Exit codes: 0 success, 2 usage error (argparse), 3 data error
(missing/malformed inputs), 4 numeric error (degenerate statistics or
diverging training).  The default pipeline config can also be supplied
via the IGOPQA_CONFIG environment variable.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
from PIL import Image

from . import __version__
from .checkpoint import load_checkpoint, save_checkpoint
from .config import PipelineConfig, load_pipeline_config
from .errors import (
    DataError,
    DegenerateRange,
    EmptyDataset,
    MissingFile,
    NumericError,
    SchemaMismatch,
)
from .frames import (
    DatasetManifest,
    discover_frames,
    load_frame,
    load_manifest,
    save_frame,
    save_manifest,
)
from .metrics import metric_report
from .model import ModelConfig, ScoreRegressor
from .point_saliency import camera_point_saliency
from .pooling import pooled_canvas
from .reporting import (
    bin_counts,
    format_metric_table,
    histogram_svg,
    read_scores_csv,
    score_histogram,
    write_histogram_csv,
    write_loss_csv,
    write_metrics_json,
    write_scores_csv,
)
from .scoring import (
    QualityRecord,
    bin_score,
    fit_d_max,
    frame_saliency_maps,
    normalize_score,
    score_frame_raw,
)
from .synthetic import generate_dataset
from .training import TrainConfig, predict_many, train

ENV_CONFIG = "IGOPQA_CONFIG"


def _load_config(args) -> PipelineConfig:
    path = args.config or os.environ.get(ENV_CONFIG)
    if path:
        return load_pipeline_config(path)
    return PipelineConfig()


def _score_worker(payload):
    descriptor, d_max, config_dict = payload
    frame = load_frame(descriptor)
    config = PipelineConfig.from_dict(config_dict)
    return score_frame_raw(frame, d_max, config)


def cmd_synth(args) -> int:
    out = Path(args.out)
    frames, _ = generate_dataset(
        args.n, seed=args.seed, n_cameras=args.cameras,
        image_width=args.width, image_height=args.height)
    for k, frame in enumerate(frames):
        save_frame(frame, out / f"frame_{k:04d}")
    print(f"wrote {len(frames)} frames to {out}")
    return 0


def _dump_frame_artifacts(frame, maps, d_max, config, args):
    base = Path(args.out) / "dump" / frame.frame_id
    base.mkdir(parents=True, exist_ok=True)
    for index, camera in enumerate(frame.cameras):
        cid = camera.calibration.camera_id
        smap = maps[index]
        if args.dump_saliency:
            img = np.round(smap * 255.0).astype(np.uint8)
            Image.fromarray(img).save(base / f"saliency_{cid}.png")
        batch = camera_point_saliency(frame, index, smap, d_max)
        if args.dump_canvas:
            canvas = pooled_canvas(batch, camera.calibration.width,
                                   camera.calibration.height, config)
            peak = canvas.max()
            scaled = canvas / peak if peak > 0 else canvas
            img16 = (scaled * 65535.0).astype(np.uint16)
            Image.fromarray(img16).save(base / f"canvas_{cid}.png")
        if args.dump_point_saliency:
            with open(base / f"points_{cid}.csv", "w") as fh:
                fh.write("camera_id,u,v,s\n")
                for u, v, s in zip(batch.u, batch.v, batch.s):
                    fh.write(f"{cid},{u:.6f},{v:.6f},{s:.9f}\n")


def cmd_generate(args) -> int:
    config = _load_config(args)
    paths = discover_frames(args.data)
    if not paths:
        raise EmptyDataset(f"no frame descriptors under {args.data}")
    frames = [load_frame(p) for p in paths]
    if args.manifest:
        manifest = load_manifest(args.manifest)
        d_max = manifest.d_max
    else:
        d_max = fit_d_max(frames)
    if args.jobs > 1:
        payload = [(str(p), d_max, config.to_dict()) for p in paths]
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            raws = list(pool.map(_score_worker, payload))
    else:
        raws = [score_frame_raw(frame, d_max, config) for frame in frames]
    if not args.manifest:
        raw_min, raw_max = min(raws), max(raws)
        if raw_max == raw_min:
            raise DegenerateRange("all frames share one raw score")
        manifest = DatasetManifest(
            d_max=d_max, raw_min=raw_min, raw_max=raw_max,
            frame_count=len(frames), pipeline_config_hash=config.hash())
    records = []
    for frame, raw in zip(frames, raws):
        igo = normalize_score(raw, manifest)
        records.append(QualityRecord(
            frame_id=frame.frame_id, raw_score=raw, igo_pqa=igo,
            bin=bin_score(igo, config.bin_edges)))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_scores_csv(records, out / "scores.csv")
    save_manifest(manifest, out / "manifest.json")
    if args.dump_saliency or args.dump_canvas or args.dump_point_saliency:
        for frame in frames:
            maps = frame_saliency_maps(frame, config)
            _dump_frame_artifacts(frame, maps, d_max, config, args)
    print(f"scored {len(records)} frames -> {out / 'scores.csv'}")
    return 0


def cmd_bin(args) -> int:
    records = read_scores_csv(args.scores)
    counts = bin_counts(records)
    for name, count in counts.items():
        print(f"{name:>6}: {count}")
    return 0


def cmd_report(args) -> int:
    records = read_scores_csv(args.scores)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    scores = [rec.igo_pqa for rec in records]
    counts, edges = score_histogram(scores, n_bins=args.bins)
    write_histogram_csv(counts, edges, out / "histogram.csv")
    (out / "histogram.svg").write_text(histogram_svg(counts, edges))
    summary = bin_counts(records)
    for name, count in summary.items():
        print(f"{name:>6}: {count}")
    print(f"histogram -> {out / 'histogram.svg'}")
    return 0


def _load_train_file(path):
    if not path:
        return ModelConfig(), TrainConfig()
    try:
        with open(path) as fh:
            payload = json.load(fh)
    except FileNotFoundError as exc:
        raise MissingFile(f"train config not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaMismatch(f"{path}: invalid JSON: {exc}") from exc
    try:
        model_cfg = ModelConfig.from_dict(payload.get("model", {}))
        train_cfg = TrainConfig.from_dict(payload.get("train", {}))
    except (TypeError, ValueError) as exc:
        raise SchemaMismatch(f"{path}: {exc}") from exc
    return model_cfg, train_cfg


def _frames_with_targets(data_dir, scores_path):
    paths = discover_frames(data_dir)
    if not paths:
        raise EmptyDataset(f"no frame descriptors under {data_dir}")
    frames = [load_frame(p) for p in paths]
    records = {rec.frame_id: rec for rec in read_scores_csv(scores_path)}
    clouds, targets = [], []
    for frame in frames:
        if frame.frame_id not in records:
            raise SchemaMismatch(
                f"frame {frame.frame_id!r} has no row in {scores_path}")
        clouds.append(frame.points)
        targets.append(records[frame.frame_id].igo_pqa)
    return frames, clouds, np.array(targets)


def cmd_train(args) -> int:
    model_cfg, train_cfg = _load_train_file(args.train_config)
    scores_path = args.scores or Path(args.data) / "scores.csv"
    _, clouds, targets = _frames_with_targets(args.data, scores_path)
    model = ScoreRegressor(model_cfg, seed=train_cfg.seed)
    started = time.monotonic()
    result = train(model, clouds, targets, train_cfg,
                   on_epoch=lambda e, l: print(f"epoch {e:3d}  loss {l:.4f}"))
    elapsed = time.monotonic() - started
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_checkpoint(model.state_dict(), out / "checkpoint.bin",
                    extra={"model": model_cfg.to_dict(),
                           "train": train_cfg.to_dict()})
    write_loss_csv(result.loss_curve, out / "loss.csv")
    with open(out / "train_report.json", "w") as fh:
        json.dump({
            "epochs": train_cfg.epochs,
            "steps": result.steps,
            "final_loss": result.final_loss,
            "seconds": elapsed,
            "seed": train_cfg.seed,
        }, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"final loss {result.final_loss:.4f} after {result.steps} steps "
          f"({elapsed:.1f}s) -> {out / 'checkpoint.bin'}")
    return 0


def cmd_eval(args) -> int:
    state, extra = load_checkpoint(args.checkpoint, with_extra=True)
    model_cfg = ModelConfig.from_dict(extra.get("model", {}))
    model = ScoreRegressor(model_cfg)
    model.load_state(state)
    scores_path = args.scores or Path(args.data) / "scores.csv"
    _, clouds, targets = _frames_with_targets(args.data, scores_path)
    preds = predict_many(model, clouds)
    report = metric_report(preds, targets)
    print(format_metric_table(report))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_metrics_json(report, out / "metrics.json")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="igopqa",
        description="image-guided outdoor point-cloud quality assessment",
    )
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--config", help="pipeline config JSON "
                        f"(default: ${ENV_CONFIG} or built-in defaults)")
    parser.add_argument("--config-hash", action="store_true",
                        help="print the canonical hash of the effective "
                        "pipeline config and exit")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cameras", type=int, default=6)
    p.add_argument("--width", type=int, default=320)
    p.add_argument("--height", type=int, default=192)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("generate", help="fit + score frames into scores.csv")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--manifest", help="reuse a fitted manifest instead of fitting")
    p.add_argument("--jobs", type=int, default=1,
                   help="frame-level parallelism; 1 = bit-exact reference")
    p.add_argument("--dump-saliency", action="store_true")
    p.add_argument("--dump-canvas", action="store_true")
    p.add_argument("--dump-point-saliency", action="store_true")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("bin", help="per-bin counts of a scores.csv")
    p.add_argument("--scores", required=True)
    p.set_defaults(func=cmd_bin)

    p = sub.add_parser("train", help="train the score regressor")
    p.add_argument("--train-config", dest="train_config",
                   help="JSON with optional 'model' and 'train' sections")
    p.add_argument("--data", required=True)
    p.add_argument("--scores", help="scores.csv with targets "
                   "(default: <data>/scores.csv)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--scores")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="histogram + bin summary of scores")
    p.add_argument("--scores", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--bins", type=int, default=20)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.config_hash:
            print(_load_config(args).hash())
            return 0
        if not getattr(args, "func", None):
            parser.print_usage(sys.stderr)
            return 2
        return args.func(args)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
