"""Per-point image-guided saliency scores.

Each point that projects into a camera gets the score

    s = min(1, dist / d_max) * I

where dist is the point's Euclidean distance in the LiDAR frame, d_max
the largest point distance over the fitted dataset split, and I the
image saliency sampled at the projected pixel.  Per-camera score lists
are concatenated across the surround rig without deduplication, so a
point visible in two cameras contributes twice.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NonPositiveDMax
from .frames import Frame
from .projection import project_points


@dataclass
class PointSaliencyBatch:
    """Saliency scores for one camera's visible points (columnar)."""

    camera_id: str
    point_index: np.ndarray
    u: np.ndarray
    v: np.ndarray
    s: np.ndarray

    def __len__(self) -> int:
        return self.s.shape[0]


def point_saliency(point, d_max: float, intensity: float) -> float:
    """Score a single (x, y, z) point; clamps the distance ratio at 1."""
    if not d_max > 0:
        raise NonPositiveDMax(f"d_max must be positive, got {d_max}")
    x, y, z = (float(c) for c in point[:3])
    ratio = min(1.0, np.sqrt(x * x + y * y + z * z) / d_max)
    return ratio * float(intensity)


def point_saliency_batch(points: np.ndarray, d_max: float, intensity: np.ndarray) -> np.ndarray:
    if not d_max > 0:
        raise NonPositiveDMax(f"d_max must be positive, got {d_max}")
    pts = np.asarray(points, dtype=np.float64)
    dist = np.sqrt((pts[:, :3] ** 2).sum(axis=1))
    return np.minimum(1.0, dist / d_max) * np.asarray(intensity, dtype=np.float64)


def camera_point_saliency(frame: Frame, camera_index: int,
                          saliency_map: np.ndarray, d_max: float) -> PointSaliencyBatch:
    """Score every frame point visible in one camera.

    The saliency map is sampled at (floor(u), floor(v)), no
    interpolation.  Raises DimensionMismatch when the map does not match
    the camera resolution.
    """
    camera = frame.cameras[camera_index]
    calib = camera.calibration
    smap = np.asarray(saliency_map, dtype=np.float64)
    if smap.shape != (calib.height, calib.width):
        raise DimensionMismatch(
            f"saliency map {smap.shape} does not match camera "
            f"{calib.camera_id!r} dims ({calib.height}, {calib.width})"
        )
    hits = project_points(frame.points, calib)
    cols = np.floor(hits.u).astype(np.int64)
    rows = np.floor(hits.v).astype(np.int64)
    intensity = smap[rows, cols] if len(hits) else np.zeros(0)
    s = point_saliency_batch(frame.points[hits.point_index], d_max, intensity)
    return PointSaliencyBatch(
        camera_id=calib.camera_id,
        point_index=hits.point_index,
        u=hits.u,
        v=hits.v,
        s=s,
    )


def aggregate_cameras(batches) -> PointSaliencyBatch:
    """Concatenate per-camera batches in camera order.

    No deduplication; the combined batch keeps one entry per (camera,
    visible point) pair and carries a per-entry camera id array.
    """
    batches = list(batches)
    camera_ids = np.concatenate([
        np.full(len(b), b.camera_id, dtype=object) for b in batches
    ]) if batches else np.zeros(0, dtype=object)
    cat = lambda key: (np.concatenate([getattr(b, key) for b in batches])
                       if batches else np.zeros(0))
    return PointSaliencyBatch(
        camera_id=camera_ids,
        point_index=cat("point_index"),
        u=cat("u"),
        v=cat("v"),
        s=cat("s"),
    )
