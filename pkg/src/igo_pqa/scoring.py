"""Dataset fitting, score normalization, and quality binning.

Scoring a dataset is a two-pass affair.  Pass one finds d_max, the
largest point distance over every frame of the fitted split.  Pass two
computes each frame's raw score with that d_max and records the raw
min/max.  Raw scores are then rescaled to the 0-100 quality index;
held-out frames reuse the frozen manifest and clamp at the ends.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import PipelineConfig
from .errors import DegenerateRange, EmptyDataset, NonPositiveDMax
from .frames import DatasetManifest, Frame
from .pooling import frame_raw_score
from .projection import project_box
from .saliency import enhance_objects, fine_grained_saliency

BIN_LOW = "Low"
BIN_MEDIUM = "Medium"
BIN_HIGH = "High"
BINS = (BIN_LOW, BIN_MEDIUM, BIN_HIGH)


@dataclass(frozen=True)
class QualityRecord:
    frame_id: str
    raw_score: float
    igo_pqa: float
    bin: str


def frame_saliency_maps(frame: Frame, config: PipelineConfig) -> list:
    """Object-enhanced saliency map for every camera of a frame."""
    maps = []
    for camera in frame.cameras:
        smap = fine_grained_saliency(
            camera.load_image(),
            center_radii=config.center_radii,
            surround_radii=config.surround_radii,
        )
        boxes2d = [project_box(box, camera.calibration) for box in frame.boxes]
        maps.append(enhance_objects(smap, boxes2d, config.object_gain))
    return maps


def score_frame_raw(frame: Frame, d_max: float, config: PipelineConfig) -> float:
    return frame_raw_score(frame, frame_saliency_maps(frame, config), d_max, config)


def fit_d_max(frames) -> float:
    d_max = 0.0
    for frame in frames:
        d_max = max(d_max, frame.max_point_distance())
    if not d_max > 0:
        raise NonPositiveDMax("no frame contributes a positive point distance")
    return d_max


def fit_dataset(frames, config: PipelineConfig = PipelineConfig()) -> DatasetManifest:
    """Fit normalization statistics over a split; see module docstring."""
    frames = list(frames)
    if not frames:
        raise EmptyDataset("cannot fit on zero frames")
    d_max = fit_d_max(frames)
    raws = [score_frame_raw(frame, d_max, config) for frame in frames]
    raw_min, raw_max = min(raws), max(raws)
    if raw_max == raw_min:
        raise DegenerateRange(
            f"all {len(frames)} frames share raw score {raw_min}; "
            "cannot normalize"
        )
    return DatasetManifest(
        d_max=d_max,
        raw_min=raw_min,
        raw_max=raw_max,
        frame_count=len(frames),
        pipeline_config_hash=config.hash(),
    )


def normalize_score(raw: float, manifest: DatasetManifest) -> float:
    """Map a raw score onto [0, 100] with the fitted split's bounds."""
    span = manifest.raw_max - manifest.raw_min
    if span == 0:
        raise DegenerateRange("manifest has raw_max == raw_min")
    value = 100.0 * (raw - manifest.raw_min) / span
    return float(np.clip(value, 0.0, 100.0))


def bin_score(igo_pqa: float, edges=(34.0, 67.0)) -> str:
    """Quality bin by half-open intervals [0, lo), [lo, hi), [hi, 100]."""
    lo, hi = edges
    if igo_pqa < lo:
        return BIN_LOW
    if igo_pqa < hi:
        return BIN_MEDIUM
    return BIN_HIGH


def score_frames(frames, manifest: DatasetManifest,
                 config: PipelineConfig = PipelineConfig()) -> list:
    """Quality records for frames under a fitted (possibly reused) manifest."""
    records = []
    for frame in frames:
        raw = score_frame_raw(frame, manifest.d_max, config)
        igo = normalize_score(raw, manifest)
        records.append(QualityRecord(
            frame_id=frame.frame_id,
            raw_score=raw,
            igo_pqa=igo,
            bin=bin_score(igo, config.bin_edges),
        ))
    return records
