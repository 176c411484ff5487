"""Self-contained nuScenes table reader.

Works straight off the released directory layout: a version directory
(``v1.0-mini``, ``v1.0-trainval``, ...) of relational JSON tables next
to ``samples/`` payload files.  Only keyframe rows are consumed; sweeps
are skipped.  No devkit is required.

Conventions translated here:

* table rotations are unit quaternions in ``[w, x, y, z]`` order;
* ``calibrated_sensor`` poses map sensor frame -> ego frame and
  ``ego_pose`` maps ego frame -> global frame, so the LiDAR-to-camera
  extrinsic is the chain  inv(ego_from_cam) @ inv(global_from_ego_cam)
  @ global_from_ego_lidar @ ego_from_lidar;
* ``.pcd.bin`` payloads are little-endian float32 records
  (x, y, z, intensity, ring) with intensity in [0, 255], rescaled here
  to [0, 1];
* annotation sizes are already (w, l, h) and centers/rotations are
  global, so boxes are pulled back into the LiDAR frame and reduced to
  a z-axis yaw.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from igo_pqa import Box3D, Camera, CameraCalibration, Frame

from .errors import CalibrationMissing, SourceUnavailable

CAMERA_CHANNELS = (
    "CAM_FRONT",
    "CAM_FRONT_RIGHT",
    "CAM_BACK_RIGHT",
    "CAM_BACK",
    "CAM_BACK_LEFT",
    "CAM_FRONT_LEFT",
)

LIDAR_CHANNEL = "LIDAR_TOP"

TABLE_NAMES = (
    "sensor",
    "calibrated_sensor",
    "ego_pose",
    "sample",
    "sample_data",
    "sample_annotation",
    "instance",
    "category",
)

POINT_FIELDS = 5  # x, y, z, intensity, ring index


def _quat_to_rot(q) -> np.ndarray:
    w, x, y, z = (float(v) for v in q)
    n = math.sqrt(w * w + x * x + y * y + z * z)
    if n == 0.0:
        raise CalibrationMissing("zero-norm quaternion in pose record")
    w, x, y, z = w / n, x / n, y / n, z / n
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def _pose_matrix(record: dict) -> np.ndarray:
    """4x4 child-to-parent transform from a translation+rotation row."""
    T = np.eye(4)
    T[:3, :3] = _quat_to_rot(record["rotation"])
    T[:3, 3] = np.asarray(record["translation"], dtype=np.float64)
    return T


def _inv_rigid(T: np.ndarray) -> np.ndarray:
    R, t = T[:3, :3], T[:3, 3]
    out = np.eye(4)
    out[:3, :3] = R.T
    out[:3, 3] = -R.T @ t
    return out


@dataclass
class Tables:
    """Token-indexed nuScenes tables plus derived keyframe indices."""

    root: Path
    version: str
    by_token: dict  # table name -> {token: row}
    samples: list  # sample rows, ordered by (timestamp, token)
    keyframes: dict  # sample token -> {channel: sample_data row}
    anns_by_sample: dict  # sample token -> [sample_annotation rows]


def find_version_dir(root) -> Path:
    root = Path(root)
    if not root.is_dir():
        raise SourceUnavailable(f"dataset root not found: {root}")
    candidates = sorted(
        p for p in root.iterdir() if p.is_dir() and (p / "sample.json").exists()
    )
    if not candidates:
        raise SourceUnavailable(
            f"no table directory with sample.json under {root}"
        )
    return candidates[0]


def load_tables(root) -> Tables:
    version_dir = find_version_dir(root)
    rows = {}
    for name in TABLE_NAMES:
        path = version_dir / f"{name}.json"
        if not path.exists():
            raise SourceUnavailable(f"table missing: {path}")
        try:
            rows[name] = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise SourceUnavailable(f"{path}: invalid JSON: {exc}") from exc

    by_token = {
        name: {row["token"]: row for row in table}
        for name, table in rows.items()
    }

    def channel_of(sd_row) -> str:
        cs = by_token["calibrated_sensor"][sd_row["calibrated_sensor_token"]]
        return by_token["sensor"][cs["sensor_token"]]["channel"]

    keyframes: dict = {}
    for sd in rows["sample_data"]:
        if not sd.get("is_key_frame"):
            continue
        keyframes.setdefault(sd["sample_token"], {})[channel_of(sd)] = sd

    anns_by_sample: dict = {}
    for ann in rows["sample_annotation"]:
        anns_by_sample.setdefault(ann["sample_token"], []).append(ann)

    samples = sorted(rows["sample"], key=lambda s: (s["timestamp"], s["token"]))
    return Tables(
        root=Path(root),
        version=version_dir.name,
        by_token=by_token,
        samples=samples,
        keyframes=keyframes,
        anns_by_sample=anns_by_sample,
    )


def sample_tokens(tables: Tables, split: str = "all") -> list[str]:
    """Ordered keyframe sample tokens for a split.

    Only ``all`` is supported: the official train/val assignments live
    in devkit split lists, not in the tables themselves.
    """
    if split != "all":
        raise SourceUnavailable(
            f"split {split!r} needs the official devkit scene lists; "
            "this exporter only handles --split all"
        )
    return [s["token"] for s in tables.samples]


def _load_points(path: Path) -> np.ndarray:
    if not path.exists():
        raise SourceUnavailable(f"point payload missing: {path}")
    raw = np.fromfile(path, dtype="<f4")
    if raw.size % POINT_FIELDS != 0:
        raise SourceUnavailable(
            f"{path}: {raw.size} floats is not a multiple of {POINT_FIELDS}"
        )
    cols = raw.reshape(-1, POINT_FIELDS).astype(np.float64)
    pts = cols[:, :4]
    pts[:, 3] = np.clip(pts[:, 3] / 255.0, 0.0, 1.0)
    return pts


def _load_image(path: Path) -> np.ndarray:
    if not path.exists():
        raise SourceUnavailable(f"image payload missing: {path}")
    return np.asarray(Image.open(path))


def convert_sample(tables: Tables, token: str) -> Frame:
    """Assemble one keyframe sample into an in-memory frame.

    Raises ``CalibrationMissing`` if any of the six camera channels or
    the LiDAR channel is absent, ``SourceUnavailable`` if a payload
    file is gone.
    """
    channels = tables.keyframes.get(token, {})
    lidar_sd = channels.get(LIDAR_CHANNEL)
    if lidar_sd is None:
        raise CalibrationMissing(f"sample {token}: no {LIDAR_CHANNEL} keyframe")

    def pose_pair(sd_row):
        cs = tables.by_token["calibrated_sensor"][sd_row["calibrated_sensor_token"]]
        ego = tables.by_token["ego_pose"][sd_row["ego_pose_token"]]
        return _pose_matrix(cs), _pose_matrix(ego)

    try:
        ego_from_lidar, global_from_ego_l = pose_pair(lidar_sd)
        cameras = []
        for channel in CAMERA_CHANNELS:
            sd = channels.get(channel)
            if sd is None:
                raise CalibrationMissing(
                    f"sample {token}: camera channel {channel} missing"
                )
            ego_from_cam, global_from_ego_c = pose_pair(sd)
            cam_from_lidar = (
                _inv_rigid(ego_from_cam)
                @ _inv_rigid(global_from_ego_c)
                @ global_from_ego_l
                @ ego_from_lidar
            )
            cs = tables.by_token["calibrated_sensor"][sd["calibrated_sensor_token"]]
            image = _load_image(tables.root / sd["filename"])
            cameras.append(
                Camera(
                    CameraCalibration(
                        camera_id=channel,
                        intrinsic=np.asarray(cs["camera_intrinsic"], dtype=np.float64),
                        extrinsic=cam_from_lidar,
                        width=image.shape[1],
                        height=image.shape[0],
                    ),
                    image=image,
                )
            )
    except KeyError as exc:
        raise CalibrationMissing(f"sample {token}: missing table row {exc}") from exc

    points = _load_points(tables.root / lidar_sd["filename"])

    lidar_from_global = _inv_rigid(global_from_ego_l @ ego_from_lidar)
    boxes = []
    for ann in tables.anns_by_sample.get(token, []):
        center = lidar_from_global @ np.append(
            np.asarray(ann["translation"], dtype=np.float64), 1.0
        )
        rot = lidar_from_global[:3, :3] @ _quat_to_rot(ann["rotation"])
        yaw = math.atan2(rot[1, 0], rot[0, 0])
        instance = tables.by_token["instance"].get(ann["instance_token"], {})
        category = tables.by_token["category"].get(
            instance.get("category_token", ""), {}
        )
        boxes.append(
            Box3D(
                center=tuple(center[:3]),
                size=tuple(float(v) for v in ann["size"]),
                yaw=yaw,
                class_label=category.get("name", ""),
            )
        )

    return Frame(frame_id=token, points=points, cameras=cameras, boxes=boxes)
