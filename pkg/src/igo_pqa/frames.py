"""Frame containers and on-disk codecs.

A frame bundles one LiDAR sweep with its surround cameras and 3D box
annotations.  On disk a frame is a ``frame.json`` descriptor next to a
headerless little-endian float32 point file (x, y, z, intensity records)
and one PNG per camera.  Points are held as a float64 ``(N, 4)`` array in
memory; intensities are clamped to [0, 1] by the loader.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from PIL import Image

from .errors import (
    MalformedCalibration,
    MalformedPoints,
    MissingFile,
    SchemaMismatch,
)

POINT_RECORD_BYTES = 16  # 4 little-endian float32 per point

ROTATION_TOL = 1e-6


@dataclass(frozen=True)
class CameraCalibration:
    """Pinhole intrinsics plus the rigid LiDAR-to-camera transform."""

    camera_id: str
    intrinsic: np.ndarray  # (3, 3) row-major, pixels
    extrinsic: np.ndarray  # (4, 4) row-major, LiDAR frame -> camera frame
    width: int
    height: int

    def __post_init__(self):
        intrinsic = np.asarray(self.intrinsic, dtype=np.float64).reshape(3, 3)
        extrinsic = np.asarray(self.extrinsic, dtype=np.float64).reshape(4, 4)
        object.__setattr__(self, "intrinsic", intrinsic)
        object.__setattr__(self, "extrinsic", extrinsic)
        if not (intrinsic[0, 0] > 0 and intrinsic[1, 1] > 0):
            raise MalformedCalibration(
                f"camera {self.camera_id!r}: focal lengths must be positive"
            )
        if self.width < 1 or self.height < 1:
            raise MalformedCalibration(
                f"camera {self.camera_id!r}: image dims must be >= 1"
            )
        rot = extrinsic[:3, :3]
        if not np.allclose(rot @ rot.T, np.eye(3), atol=ROTATION_TOL):
            raise MalformedCalibration(
                f"camera {self.camera_id!r}: extrinsic rotation is not orthonormal"
            )
        if abs(np.linalg.det(rot) - 1.0) > ROTATION_TOL:
            raise MalformedCalibration(
                f"camera {self.camera_id!r}: extrinsic rotation determinant != +1"
            )


@dataclass(frozen=True)
class Box3D:
    """Annotated 3D box: geometric center, (w, l, h) extents, yaw about z.

    ``l`` runs along the box heading (x before yaw), ``w`` across it, ``h``
    vertically; yaw rotates the heading counter-clockwise about +z.
    """

    center: tuple[float, float, float]
    size: tuple[float, float, float]  # (w, l, h), meters
    yaw: float
    class_label: str = ""

    def __post_init__(self):
        w, l, h = self.size
        if not (w > 0 and l > 0 and h > 0):
            raise ValueError(f"box size must be positive, got {self.size}")
        if not -math.pi <= self.yaw <= math.pi:
            raise ValueError(f"yaw must lie in [-pi, pi], got {self.yaw}")

    def corners(self) -> np.ndarray:
        """Eight corners in the LiDAR frame, shape (8, 3)."""
        w, l, h = self.size
        signs = np.array(
            [(a, b, c) for a in (-1, 1) for b in (-1, 1) for c in (-1, 1)],
            dtype=np.float64,
        )
        local = signs * np.array([l / 2.0, w / 2.0, h / 2.0])
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
        return local @ rot.T + np.asarray(self.center, dtype=np.float64)


@dataclass
class Camera:
    """A calibrated camera plus its image, on disk or in memory."""

    calibration: CameraCalibration
    image_path: Optional[Path] = None
    image: Optional[np.ndarray] = None  # (H, W) or (H, W, 3) uint8

    def load_image(self) -> np.ndarray:
        if self.image is not None:
            return self.image
        if self.image_path is None:
            raise MissingFile(
                f"camera {self.calibration.camera_id!r} has no image"
            )
        if not Path(self.image_path).exists():
            raise MissingFile(f"image not found: {self.image_path}")
        return np.asarray(Image.open(self.image_path))


@dataclass
class Frame:
    """One synchronized sample: points, surround cameras, 3D annotations."""

    frame_id: str
    points: np.ndarray  # (N, 4) float64: x, y, z, intensity
    cameras: list[Camera] = field(default_factory=list)
    boxes: list[Box3D] = field(default_factory=list)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64).reshape(-1, 4)
        if pts.size and not np.isfinite(pts[:, :3]).all():
            raise MalformedPoints(
                f"frame {self.frame_id!r}: non-finite point coordinates"
            )
        self.points = pts
        if not self.cameras:
            raise ValueError(f"frame {self.frame_id!r} needs at least one camera")
        ids = [c.calibration.camera_id for c in self.cameras]
        if len(set(ids)) != len(ids):
            raise ValueError(f"frame {self.frame_id!r}: duplicate camera ids")

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    def max_point_distance(self) -> float:
        """Largest Euclidean point norm, 0.0 for an empty cloud."""
        if self.n_points == 0:
            return 0.0
        return float(np.sqrt((self.points[:, :3] ** 2).sum(axis=1)).max())


@dataclass(frozen=True)
class DatasetManifest:
    """Frozen normalization statistics from a fitted dataset split."""

    d_max: float
    raw_min: float
    raw_max: float
    frame_count: int
    pipeline_config_hash: str = ""

    def __post_init__(self):
        if not self.d_max > 0:
            raise ValueError(f"d_max must be positive, got {self.d_max}")
        if self.raw_max < self.raw_min:
            raise ValueError(
                f"raw_max ({self.raw_max}) < raw_min ({self.raw_min})"
            )
        if self.frame_count < 1:
            raise ValueError(f"frame_count must be >= 1, got {self.frame_count}")


# -- codecs -------------------------------------------------------------

def load_points(path) -> np.ndarray:
    """Read a headerless float32 point file into a clamped (N, 4) array."""
    path = Path(path)
    if not path.exists():
        raise MissingFile(f"point file not found: {path}")
    raw = path.read_bytes()
    if len(raw) % POINT_RECORD_BYTES != 0:
        raise MalformedPoints(
            f"{path}: {len(raw)} bytes is not a multiple of "
            f"{POINT_RECORD_BYTES}-byte records"
        )
    pts = np.frombuffer(raw, dtype="<f4").reshape(-1, 4).astype(np.float64)
    if pts.size and not np.isfinite(pts[:, :3]).all():
        raise MalformedPoints(f"{path}: non-finite point coordinates")
    # Sensor dumps occasionally carry out-of-range reflectances; clamp
    # rather than reject (intensity never enters the saliency score).
    pts[:, 3] = np.clip(np.nan_to_num(pts[:, 3], nan=0.0, posinf=1.0, neginf=0.0), 0.0, 1.0)
    return pts


def save_points(points: np.ndarray, path) -> None:
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 4)
    Path(path).write_bytes(pts.astype("<f4").tobytes(order="C"))


def _camera_from_dict(entry: dict, base: Path) -> Camera:
    try:
        calib = CameraCalibration(
            camera_id=entry["camera_id"],
            intrinsic=np.asarray(entry["intrinsic"], dtype=np.float64).reshape(3, 3),
            extrinsic=np.asarray(entry["extrinsic"], dtype=np.float64).reshape(4, 4),
            width=int(entry["width"]),
            height=int(entry["height"]),
        )
        image_path = entry.get("image_path")
    except (KeyError, TypeError) as exc:
        raise SchemaMismatch(f"bad camera entry: {exc}") from exc
    except ValueError as exc:
        raise MalformedCalibration(str(exc)) from exc
    return Camera(calib, image_path=base / image_path if image_path else None)


def _box_from_dict(entry: dict) -> Box3D:
    try:
        return Box3D(
            center=tuple(float(v) for v in entry["center"]),
            size=tuple(float(v) for v in entry["size"]),
            yaw=float(entry["yaw"]),
            class_label=entry.get("class_label", ""),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaMismatch(f"bad box entry: {exc}") from exc


def load_frame(descriptor_path) -> Frame:
    """Load a frame from its ``frame.json`` descriptor.

    Relative paths inside the descriptor resolve against the descriptor's
    directory.
    """
    descriptor_path = Path(descriptor_path)
    if not descriptor_path.exists():
        raise MissingFile(f"frame descriptor not found: {descriptor_path}")
    base = descriptor_path.parent
    try:
        desc = json.loads(descriptor_path.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaMismatch(f"{descriptor_path}: invalid JSON: {exc}") from exc
    try:
        frame_id = desc["frame_id"]
        points_path = base / desc["points_path"]
        camera_entries = desc["cameras"]
        box_entries = desc.get("boxes", [])
    except KeyError as exc:
        raise SchemaMismatch(f"{descriptor_path}: missing field {exc}") from exc
    return Frame(
        frame_id=frame_id,
        points=load_points(points_path),
        cameras=[_camera_from_dict(c, base) for c in camera_entries],
        boxes=[_box_from_dict(b) for b in box_entries],
    )


def save_frame(frame: Frame, out_dir, points_name="points.bin") -> Path:
    """Write a frame's descriptor, point file, and any in-memory images.

    Returns the descriptor path.  Cameras with only an ``image_path``
    keep that reference; in-memory images are written as PNGs next to the
    descriptor.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_points(frame.points, out_dir / points_name)
    cameras = []
    for cam in frame.cameras:
        calib = cam.calibration
        if cam.image is not None:
            image_name = f"{calib.camera_id}.png"
            Image.fromarray(cam.image).save(out_dir / image_name)
        elif cam.image_path is not None:
            image_name = str(cam.image_path)
        else:
            image_name = None
        cameras.append({
            "camera_id": calib.camera_id,
            "image_path": image_name,
            "intrinsic": [float(v) for v in calib.intrinsic.ravel()],
            "extrinsic": [float(v) for v in calib.extrinsic.ravel()],
            "width": calib.width,
            "height": calib.height,
        })
    desc = {
        "frame_id": frame.frame_id,
        "points_path": points_name,
        "cameras": cameras,
        "boxes": [
            {
                "center": list(b.center),
                "size": list(b.size),
                "yaw": b.yaw,
                "class_label": b.class_label,
            }
            for b in frame.boxes
        ],
    }
    path = out_dir / "frame.json"
    path.write_text(json.dumps(desc, indent=2, sort_keys=True) + "\n")
    return path


MANIFEST_FIELDS = ("d_max", "raw_min", "raw_max", "frame_count", "pipeline_config_hash")


def save_manifest(manifest: DatasetManifest, path) -> None:
    payload = {
        "d_max": manifest.d_max,
        "raw_min": manifest.raw_min,
        "raw_max": manifest.raw_max,
        "frame_count": manifest.frame_count,
        "pipeline_config_hash": manifest.pipeline_config_hash,
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def load_manifest(path) -> DatasetManifest:
    path = Path(path)
    if not path.exists():
        raise MissingFile(f"manifest not found: {path}")
    try:
        payload = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaMismatch(f"{path}: invalid JSON: {exc}") from exc
    missing = [f for f in MANIFEST_FIELDS if f not in payload]
    if missing:
        raise SchemaMismatch(f"{path}: missing manifest fields {missing}")
    return DatasetManifest(
        d_max=float(payload["d_max"]),
        raw_min=float(payload["raw_min"]),
        raw_max=float(payload["raw_max"]),
        frame_count=int(payload["frame_count"]),
        pipeline_config_hash=str(payload["pipeline_config_hash"]),
    )


def discover_frames(data_dir) -> list[Path]:
    """Find frame descriptors under ``data_dir``, sorted for determinism."""
    data_dir = Path(data_dir)
    if not data_dir.exists():
        raise MissingFile(f"data directory not found: {data_dir}")
    direct = data_dir / "frame.json"
    if direct.exists():
        return [direct]
    return sorted(data_dir.glob("*/frame.json"))


def load_frames(data_dir) -> list[Frame]:
    paths = discover_frames(data_dir)
    return [load_frame(p) for p in paths]
