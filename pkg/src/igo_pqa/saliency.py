"""Object-enhanced image saliency maps.

Fine-grained saliency is a center-surround contrast measure computed
with integral images: at each of several paired scales, the absolute
difference between a small box mean (center) and a larger one
(surround) is taken, the per-scale responses are averaged, and the
result is normalized so its maximum is 1.  Annotated object regions are
then brightened multiplicatively with a clamp at 1.
"""

from __future__ import annotations

import math

import numpy as np

LUMA_WEIGHTS = (0.299, 0.587, 0.114)


def to_luma(image: np.ndarray) -> np.ndarray:
    """Collapse an (H, W) or (H, W, 3) uint8 image to float64 luma."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim == 2:
        return img
    if img.ndim == 3 and img.shape[2] == 3:
        r, g, b = LUMA_WEIGHTS
        return r * img[:, :, 0] + g * img[:, :, 1] + b * img[:, :, 2]
    raise ValueError(f"expected HxW or HxWx3 image, got shape {img.shape}")


def _integral(img: np.ndarray) -> np.ndarray:
    ii = np.zeros((img.shape[0] + 1, img.shape[1] + 1), dtype=np.float64)
    ii[1:, 1:] = img.cumsum(axis=0).cumsum(axis=1)
    return ii


def box_means(img: np.ndarray, radius: int) -> np.ndarray:
    """Mean over a (2r+1)-square window at every pixel.

    Windows are clipped at the image border and normalized by their
    clipped area, so border means stay unbiased.
    """
    h, w = img.shape
    ii = _integral(img)
    ys = np.arange(h)
    xs = np.arange(w)
    y0 = np.clip(ys - radius, 0, h)[:, None]
    y1 = np.clip(ys + radius + 1, 0, h)[:, None]
    x0 = np.clip(xs - radius, 0, w)[None, :]
    x1 = np.clip(xs + radius + 1, 0, w)[None, :]
    total = ii[y1, x1] - ii[y0, x1] - ii[y1, x0] + ii[y0, x0]
    area = (y1 - y0) * (x1 - x0)
    return total / area


def fine_grained_saliency(image: np.ndarray,
                          center_radii=(1, 2, 4, 8),
                          surround_radii=(2, 4, 8, 16)) -> np.ndarray:
    """Center-surround saliency map in [0, 1], max-normalized.

    A constant image has no contrast anywhere and maps to all zeros.
    """
    gray = to_luma(image)
    response = np.zeros_like(gray)
    for c, s in zip(center_radii, surround_radii):
        response += np.abs(box_means(gray, c) - box_means(gray, s))
    response /= len(center_radii)
    peak = response.max() if response.size else 0.0
    if peak <= 0.0:
        return np.zeros_like(gray)
    return response / peak


def box_pixel_slices(bbox, width, height):
    """Integer pixel rows/cols covered by a continuous bbox.

    A pixel with integer coordinates (ix, iy) is covered when
    floor(u0) <= ix < ceil(u1) and likewise for rows, clipped to the
    image.  Returns (row_slice, col_slice), possibly empty.
    """
    u0, v0, u1, v1 = bbox
    x0 = max(int(math.floor(u0)), 0)
    x1 = min(int(math.ceil(u1)), width)
    y0 = max(int(math.floor(v0)), 0)
    y1 = min(int(math.ceil(v1)), height)
    return slice(y0, max(y1, y0)), slice(x0, max(x1, x0))


def enhance_objects(saliency: np.ndarray, boxes2d, gain: float) -> np.ndarray:
    """Boost saliency inside 2D object boxes: v' = min(1, v * (1 + gain)).

    ``boxes2d`` holds (u0, v0, u1, v1) pixel rectangles; None entries are
    skipped.  Pixels outside every box are untouched.
    """
    if gain < 0:
        raise ValueError(f"gain must be >= 0, got {gain}")
    out = np.array(saliency, dtype=np.float64, copy=True)
    if gain == 0:
        return out
    h, w = out.shape
    mask = np.zeros(out.shape, dtype=bool)
    for bbox in boxes2d:
        if bbox is None:
            continue
        rows, cols = box_pixel_slices(bbox, w, h)
        mask[rows, cols] = True
    out[mask] = np.minimum(1.0, out[mask] * (1.0 + gain))
    return out
