"""Seeded synthetic scenes for tests and desk-scale experiments.

A scene is a ground annulus plus a handful of box "objects" sampled as
point clouds, observed by a ring of surround cameras.  Images are flat
gray with bright rectangles where objects project, so image saliency
genuinely concentrates on objects.  Everything is a pure function of
the seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .frames import Box3D, Camera, CameraCalibration, Frame
from .projection import project_box

SENSOR_HEIGHT = 1.6
GROUND_Z = -1.6
BACKGROUND_GRAY = 96
OBJECT_GRAY = 220


@dataclass(frozen=True)
class SceneSpec:
    """Generator knobs for one frame."""

    seed: int = 0
    n_cameras: int = 6
    density: float = 1.0  # points per square meter of ground
    max_range: float = 40.0
    n_objects: int = 4
    image_width: int = 320
    image_height: int = 192
    noise_level: float = 2.0
    max_points: int = 30000

    def __post_init__(self):
        if self.n_cameras < 1:
            raise ValueError("need at least one camera")
        if not (self.density > 0 and self.max_range > 0):
            raise ValueError("density and max_range must be positive")
        if self.n_objects < 0 or self.noise_level < 0:
            raise ValueError("n_objects and noise_level must be >= 0")


def ring_calibrations(n_cameras: int, width: int, height: int) -> list:
    """Evenly spaced outward-looking cameras around the sensor."""
    focal = 0.8 * width
    calibs = []
    for k in range(n_cameras):
        theta = 2.0 * math.pi * k / n_cameras
        c, s = math.cos(theta), math.sin(theta)
        # Rows: image x = leftward tangent, image y = down, z = outward.
        rot = np.array([
            [s, -c, 0.0],
            [0.0, 0.0, -1.0],
            [c, s, 0.0],
        ])
        position = np.array([c, s, 0.0]) + np.array([0.0, 0.0, SENSOR_HEIGHT])
        extrinsic = np.eye(4)
        extrinsic[:3, :3] = rot
        extrinsic[:3, 3] = -rot @ position
        intrinsic = np.array([
            [focal, 0.0, width / 2.0],
            [0.0, focal, height / 2.0],
            [0.0, 0.0, 1.0],
        ])
        calibs.append(CameraCalibration(
            camera_id=f"cam{k}",
            intrinsic=intrinsic,
            extrinsic=extrinsic,
            width=width,
            height=height,
        ))
    return calibs


def _sample_ground(rng, spec: SceneSpec) -> np.ndarray:
    inner = 2.0
    outer = spec.max_range
    area = math.pi * (outer * outer - inner * inner)
    count = min(int(spec.density * area), spec.max_points)
    r = np.sqrt(rng.uniform(inner * inner, outer * outer, size=count))
    theta = rng.uniform(0.0, 2.0 * math.pi, size=count)
    z = GROUND_Z + rng.normal(0.0, 0.02, size=count)
    intensity = rng.uniform(0.0, 1.0, size=count)
    return np.stack([r * np.cos(theta), r * np.sin(theta), z, intensity], axis=1)


def _sample_boxes(rng, spec: SceneSpec) -> list:
    """Object layouts only; point sampling happens separately so that
    layouts (and the rendered images) do not shift when density changes."""
    boxes = []
    hi = max(4.0, min(0.8 * spec.max_range, spec.max_range - 3.0))
    for _ in range(spec.n_objects):
        r = rng.uniform(4.0, hi)
        theta = rng.uniform(0.0, 2.0 * math.pi)
        w = rng.uniform(1.6, 2.2)
        l = rng.uniform(3.5, 5.0)
        h = rng.uniform(1.4, 1.8)
        yaw = rng.uniform(-math.pi, math.pi)
        center = (r * math.cos(theta), r * math.sin(theta), GROUND_Z + h / 2.0)
        boxes.append(Box3D(center=center, size=(w, l, h), yaw=yaw,
                           class_label="object"))
    return boxes


def _sample_box_cloud(rng, box: Box3D, density: float) -> np.ndarray:
    w, l, h = box.size
    count = max(12, int(density * w * l * 4))
    local = np.stack([
        rng.uniform(-l / 2.0, l / 2.0, size=count),
        rng.uniform(-w / 2.0, w / 2.0, size=count),
        rng.uniform(-h / 2.0, h / 2.0, size=count),
    ], axis=1)
    c, s = math.cos(box.yaw), math.sin(box.yaw)
    rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    world = local @ rot.T + np.asarray(box.center)
    intensity = rng.uniform(0.3, 1.0, size=count)
    return np.concatenate([world, intensity[:, None]], axis=1)


def _render_image(rng, calib: CameraCalibration, boxes, spec: SceneSpec) -> np.ndarray:
    img = np.full((calib.height, calib.width), float(BACKGROUND_GRAY))
    for box in boxes:
        bbox = project_box(box, calib)
        if bbox is None:
            continue
        u0, v0, u1, v1 = bbox
        x0, x1 = int(math.floor(u0)), int(math.ceil(u1))
        y0, y1 = int(math.floor(v0)), int(math.ceil(v1))
        img[y0:y1, x0:x1] = OBJECT_GRAY + rng.uniform(-15.0, 15.0)
    if spec.noise_level > 0:
        img += rng.normal(0.0, spec.noise_level, size=img.shape)
    return np.clip(np.round(img), 0, 255).astype(np.uint8)


def generate_scene(spec: SceneSpec, frame_id: str = None) -> Frame:
    """Build one fully in-memory frame from a spec (deterministic).

    Ground points, object layout/points, and image noise come from
    independent child streams of the seed, so two specs that differ
    only in density share the same object layout and pixel noise.
    """
    streams = np.random.SeedSequence(spec.seed).spawn(3)
    rng_ground = np.random.default_rng(streams[0])
    rng_obj = np.random.default_rng(streams[1])
    rng_img = np.random.default_rng(streams[2])
    ground = _sample_ground(rng_ground, spec)
    boxes = _sample_boxes(rng_obj, spec)
    object_clouds = [_sample_box_cloud(rng_obj, box, spec.density)
                     for box in boxes]
    points = np.concatenate([ground] + object_clouds, axis=0)
    calibs = ring_calibrations(spec.n_cameras, spec.image_width, spec.image_height)
    cameras = [
        Camera(calib, image=_render_image(rng_img, calib, boxes, spec))
        for calib in calibs
    ]
    return Frame(
        frame_id=frame_id or f"synth_{spec.seed:08d}",
        points=points,
        cameras=cameras,
        boxes=boxes,
    )


def generate_dataset(n_frames: int, seed: int = 0,
                     density_range=(0.3, 3.0),
                     range_range=(20.0, 60.0),
                     objects_range=(1, 8),
                     n_cameras: int = 6,
                     image_width: int = 320,
                     image_height: int = 192):
    """Sample a diverse set of frames; returns (frames, specs).

    Per-frame seeds derive from the master seed, so the whole set is
    reproducible as a unit.
    """
    if n_frames < 2:
        raise ValueError(f"need at least 2 frames, got {n_frames}")
    master = np.random.default_rng(seed)
    frames = []
    specs = []
    for k in range(n_frames):
        spec = SceneSpec(
            seed=int(master.integers(0, 2 ** 31 - 1)),
            n_cameras=n_cameras,
            density=float(master.uniform(*density_range)),
            max_range=float(master.uniform(*range_range)),
            n_objects=int(master.integers(objects_range[0], objects_range[1] + 1)),
            image_width=image_width,
            image_height=image_height,
        )
        specs.append(spec)
        frames.append(generate_scene(spec, frame_id=f"synth_{k:04d}"))
    return frames, specs
