"""Export orchestration: jobs, atomic frame writes, summaries, checks.

Each exported frame becomes ``<out>/<frame_id>/frame.json`` plus its
point file and PNGs, written to a hidden sibling directory first and
renamed into place so readers never observe a half-written frame.
Per-frame conversion errors are collected into the summary rather than
aborting the run; errors raised before any frame is attempted (missing
root, missing table, unsupported split, absent toolkit) propagate.
"""

from __future__ import annotations

import json
import os
import shutil
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import islice
from pathlib import Path
from typing import Optional

from igo_pqa import DataError, Frame, load_frame, save_frame

from . import nuscenes, waymo
from .errors import ExporterError, SourceUnavailable

DATASETS = ("nuscenes", "waymo")

CAMERAS_PER_FRAME = {"nuscenes": 6, "waymo": 5}


@dataclass(frozen=True)
class ExportJob:
    """One export request: which dataset, from where, how much, to where."""

    dataset: str
    root: Path
    out: Path
    split: str = "all"
    limit: Optional[int] = None

    def __post_init__(self):
        if self.dataset not in DATASETS:
            raise ValueError(
                f"dataset must be one of {DATASETS}, got {self.dataset!r}"
            )
        if self.limit is not None and self.limit < 1:
            raise ValueError(f"limit must be >= 1, got {self.limit}")
        object.__setattr__(self, "root", Path(self.root))
        object.__setattr__(self, "out", Path(self.out))


@dataclass
class ExportSummary:
    """Outcome of one run: counts plus per-frame failure records."""

    dataset: str
    frames_exported: int
    cameras_per_frame: int
    failures: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "frames_exported": self.frames_exported,
            "cameras_per_frame": self.cameras_per_frame,
            "failures": self.failures,
        }

    def write(self, path) -> None:
        Path(path).write_text(
            json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"
        )


def atomic_save_frame(frame: Frame, out_dir) -> Path:
    """Write a frame under ``out_dir/frame_id`` via temp dir + rename."""
    out_dir = Path(out_dir)
    final = out_dir / frame.frame_id
    tmp = out_dir / f".tmp-{frame.frame_id}"
    if tmp.exists():
        shutil.rmtree(tmp)
    try:
        save_frame(frame, tmp)
        if final.exists():
            shutil.rmtree(final)
        os.replace(tmp, final)
    finally:
        shutil.rmtree(tmp, ignore_errors=True)
    return final / "frame.json"


def _nuscenes_work(job: ExportJob):
    tables = nuscenes.load_tables(job.root)
    tokens = nuscenes.sample_tokens(tables, job.split)

    def convert(token: str) -> Frame:
        return nuscenes.convert_sample(tables, token)

    return tokens, convert


def _waymo_work(job: ExportJob):
    if job.split != "all":
        raise SourceUnavailable(
            f"split {job.split!r} is directory-level for Waymo; point --root at "
            "the split directory and use --split all"
        )
    segments = sorted(Path(job.root).glob("*.tfrecord*"))
    if not segments:
        raise SourceUnavailable(f"no .tfrecord segments under {job.root}")

    def units():
        for segment in segments:
            yield from waymo.open_segment(segment)

    def convert(proto) -> Frame:
        return waymo.convert_waymo_frame(proto, waymo.toolkit_points(proto))

    return units(), convert


def run_export(job: ExportJob, jobs: int = 1) -> ExportSummary:
    """Convert and write frames per the job; returns the run summary.

    ``jobs`` > 1 converts frames in threaded batches.  A frame limit
    counts successfully written frames, so early failures do not eat
    into it.
    """
    if not Path(job.root).exists():
        raise SourceUnavailable(f"dataset root not found: {job.root}")
    units, convert = (
        _nuscenes_work(job) if job.dataset == "nuscenes" else _waymo_work(job)
    )
    out = Path(job.out)
    out.mkdir(parents=True, exist_ok=True)

    summary = ExportSummary(
        dataset=job.dataset,
        frames_exported=0,
        cameras_per_frame=CAMERAS_PER_FRAME[job.dataset],
    )

    def attempt(unit):
        frame = convert(unit)
        atomic_save_frame(frame, out)
        return frame.frame_id

    pending = iter(units)
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        while True:
            remaining = (
                None if job.limit is None else job.limit - summary.frames_exported
            )
            if remaining == 0:
                break
            # Batches never exceed the remaining quota, so a limit is hit
            # exactly even when converting in parallel.
            width = max(1, jobs) if remaining is None else min(max(1, jobs), remaining)
            batch = list(islice(pending, width))
            if not batch:
                break
            futures = [pool.submit(attempt, unit) for unit in batch]
            for unit, future in zip(batch, futures):
                try:
                    future.result()
                    summary.frames_exported += 1
                except (ExporterError, DataError) as exc:
                    # DataError covers source records the core model
                    # rejects (skewed rotations, non-finite points).
                    summary.failures.append(
                        {"frame": _unit_name(unit), "error": str(exc)}
                    )
    return summary


def _unit_name(unit) -> str:
    if isinstance(unit, str):
        return unit
    context = getattr(unit, "context", None)
    return str(getattr(context, "name", unit))


def check_export(data_dir) -> dict:
    """Validate an exported directory by loading every frame back.

    Returns ``{"frames", "cameras_per_frame", "errors"}`` where errors
    are per-frame records, including image dimensions that disagree
    with their calibration.
    """
    data_dir = Path(data_dir)
    descriptors = sorted(data_dir.glob("*/frame.json"))
    if not descriptors:
        raise SourceUnavailable(f"no frame descriptors under {data_dir}")
    camera_counts: set[int] = set()
    errors: list[dict] = []
    n_ok = 0
    for path in descriptors:
        try:
            frame = load_frame(path)
            for cam in frame.cameras:
                image = cam.load_image()
                if image.shape[:2] != (cam.calibration.height, cam.calibration.width):
                    raise DataError(
                        f"camera {cam.calibration.camera_id}: image is "
                        f"{image.shape[1]}x{image.shape[0]}, calibration says "
                        f"{cam.calibration.width}x{cam.calibration.height}"
                    )
            camera_counts.add(len(frame.cameras))
            n_ok += 1
        except DataError as exc:
            errors.append({"frame": path.parent.name, "error": str(exc)})
    return {
        "frames": n_ok,
        "cameras_per_frame": sorted(camera_counts),
        "errors": errors,
    }
