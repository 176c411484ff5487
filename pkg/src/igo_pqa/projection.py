"""Rigid transforms and pinhole projection into camera pixels.

Points live in the LiDAR sensor frame; the calibration extrinsic maps
them into the camera frame (z forward), and the intrinsic matrix maps
camera rays to pixels.  Everything here is pure and vectorized.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .frames import Box3D, CameraCalibration

DEPTH_EPSILON = 1e-6


@dataclass
class PixelHits:
    """Projected points that landed inside one camera's image.

    Columnar: row k describes the point ``point_index[k]`` of the input
    cloud at continuous pixel (u[k], v[k]) with camera-frame depth[k].
    Rows are ordered by point_index.
    """

    point_index: np.ndarray
    u: np.ndarray
    v: np.ndarray
    depth: np.ndarray

    def __len__(self) -> int:
        return self.point_index.shape[0]


def transform_points(points: np.ndarray, transform: np.ndarray) -> np.ndarray:
    """Apply a 4x4 rigid transform to (N, 3) points."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    rot = np.asarray(transform, dtype=np.float64)[:3, :3]
    t = np.asarray(transform, dtype=np.float64)[:3, 3]
    return pts @ rot.T + t


def project_points(points: np.ndarray, calib: CameraCalibration) -> PixelHits:
    """Project (N, >=3) LiDAR points into one camera.

    Keeps points with camera-frame depth above DEPTH_EPSILON whose pixel
    falls inside [0, width) x [0, height); everything else is dropped.
    """
    pts = np.asarray(points, dtype=np.float64)
    cam = transform_points(pts[:, :3], calib.extrinsic)
    depth = cam[:, 2]
    in_front = depth > DEPTH_EPSILON
    idx = np.nonzero(in_front)[0]
    cam = cam[in_front]
    pix = cam @ calib.intrinsic.T
    u = pix[:, 0] / pix[:, 2]
    v = pix[:, 1] / pix[:, 2]
    inside = (u >= 0) & (u < calib.width) & (v >= 0) & (v < calib.height)
    return PixelHits(
        point_index=idx[inside],
        u=u[inside],
        v=v[inside],
        depth=depth[in_front][inside],
    )


def project_box(box: Box3D, calib: CameraCalibration) -> Optional[tuple]:
    """Axis-aligned pixel bbox (u0, v0, u1, v1) of a 3D box, or None.

    Projects the eight corners; corners behind the camera are ignored.
    The hull of the remaining corners is clipped to the image rectangle;
    None means no corner is in front or the clipped hull has no area.
    """
    cam = transform_points(box.corners(), calib.extrinsic)
    in_front = cam[:, 2] > DEPTH_EPSILON
    if not in_front.any():
        return None
    cam = cam[in_front]
    pix = cam @ calib.intrinsic.T
    u = pix[:, 0] / pix[:, 2]
    v = pix[:, 1] / pix[:, 2]
    u0 = max(float(u.min()), 0.0)
    v0 = max(float(v.min()), 0.0)
    u1 = min(float(u.max()), float(calib.width))
    v1 = min(float(v.max()), float(calib.height))
    if u0 >= u1 or v0 >= v1:
        return None
    return (u0, v0, u1, v1)
