"""Gaussian saliency pooling onto per-camera canvases.

Every point saliency is splatted as a truncated Gaussian disc: each
canvas cell within radius R of the splat center accumulates
s * exp(-d^2 / (2 sigma^2)).  The kernel is deliberately unnormalized
(peak weight = s) so that overlapping neighbors reinforce each other.
A camera's raw score is the sum of its canvas; a frame's raw score is
the sum over cameras.

Splats are applied in a canonical order (sorted by (u, v, s)) so the
result is bit-for-bit invariant to the ordering of the input points.
"""

from __future__ import annotations

import math

import numpy as np

from .config import PipelineConfig
from .point_saliency import PointSaliencyBatch, camera_point_saliency


def splat(canvas: np.ndarray, u: float, v: float, s: float,
          sigma: float, radius: float) -> None:
    """Accumulate one truncated-Gaussian splat into the canvas (in place).

    Cells sit at integer coordinates (column ix, row iy); a cell is
    covered when its Euclidean distance to (u, v) is <= radius.
    """
    h, w = canvas.shape
    x0 = max(int(math.ceil(u - radius)), 0)
    x1 = min(int(math.floor(u + radius)), w - 1)
    y0 = max(int(math.ceil(v - radius)), 0)
    y1 = min(int(math.floor(v + radius)), h - 1)
    if x0 > x1 or y0 > y1:
        return
    xs = np.arange(x0, x1 + 1, dtype=np.float64)
    ys = np.arange(y0, y1 + 1, dtype=np.float64)
    d2 = (ys[:, None] - v) ** 2 + (xs[None, :] - u) ** 2
    mask = d2 <= radius * radius
    patch = np.where(mask, s * np.exp(-d2 / (2.0 * sigma * sigma)), 0.0)
    canvas[y0:y1 + 1, x0:x1 + 1] += patch


def canvas_shape(width: int, height: int, downsample: int) -> tuple:
    return (-(-height // downsample), -(-width // downsample))


def pooled_canvas(batch: PointSaliencyBatch, width: int, height: int,
                  config: PipelineConfig) -> np.ndarray:
    """Splat one camera's point saliencies onto a fresh canvas.

    Equivalent to calling ``splat`` once per point but vectorized over
    splats: for each integer offset of the kernel stencil, all covered
    cells are accumulated in one scatter-add.  Splats are first brought
    into a canonical order so the accumulation sequence per cell, and
    hence every output bit, is invariant to the input point order.
    """
    k = config.downsample
    canvas = np.zeros(canvas_shape(width, height, k), dtype=np.float64)
    if len(batch) == 0:
        return canvas
    order = np.lexsort((batch.s, batch.v, batch.u))
    u = batch.u[order] / k
    v = batch.v[order] / k
    s = batch.s[order]
    h, w = canvas.shape
    radius = config.splat_radius
    sigma = config.splat_sigma
    r2 = radius * radius
    base_x = np.floor(u).astype(np.int64)
    base_y = np.floor(v).astype(np.int64)
    reach = int(math.ceil(radius))
    for dy in range(-reach, reach + 2):
        iy = base_y + dy
        dy2 = (iy - v) ** 2
        for dx in range(-reach, reach + 2):
            ix = base_x + dx
            d2 = dy2 + (ix - u) ** 2
            mask = (d2 <= r2) & (ix >= 0) & (ix < w) & (iy >= 0) & (iy < h)
            if not mask.any():
                continue
            weight = s[mask] * np.exp(-d2[mask] / (2.0 * sigma * sigma))
            np.add.at(canvas, (iy[mask], ix[mask]), weight)
    return canvas


def camera_raw_score(batch: PointSaliencyBatch, width: int, height: int,
                     config: PipelineConfig) -> float:
    return float(pooled_canvas(batch, width, height, config).sum())


def frame_raw_score(frame, saliency_maps, d_max: float,
                    config: PipelineConfig) -> float:
    """Raw quality score of one frame: sum of camera scores.

    ``saliency_maps`` is one map per camera, in camera order.
    """
    total = 0.0
    for index, camera in enumerate(frame.cameras):
        batch = camera_point_saliency(frame, index, saliency_maps[index], d_max)
        calib = camera.calibration
        total += camera_raw_score(batch, calib.width, calib.height, config)
    return total
