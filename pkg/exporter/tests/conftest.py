"""Fabricated nuScenes mini-root used across the exporter tests.

Builds the released directory layout (version dir of JSON tables next
to samples/ payloads) from exact quaternion algebra, so every expected
geometry below is known in closed form:

* LiDAR sits at LIDAR_T on the ego body, unrotated, so lidar coords are
  ego coords minus LIDAR_T;
* six cameras ring the ego at yaw steps of -60 deg starting from
  CAM_FRONT looking along +x;
* ego poses differ per sample (translation and yaw), so the exporter's
  global-frame round trips only cancel if every inverse is right.

``front_axis_point`` is a LiDAR-frame point placed 10 m down the
CAM_FRONT optical axis; it must land on the image center (32, 24).
"""

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from pqa_exporter.nuscenes import CAMERA_CHANNELS

FX = 60.0
IMAGE_W, IMAGE_H = 64, 48
LIDAR_T = np.array([0.9, 0.0, 1.8])
CAM_RADIUS = 1.5
CAM_HEIGHT = 1.55
CAM_YAW_STEP = -math.pi / 3

# Optical-from-body axes (right=-y, down=-z, forward=+x) as a quaternion.
Q_CAM_AXES = (0.5, -0.5, 0.5, -0.5)

# Local boxes are authored in the ego frame: (center, (w, l, h), yaw, name).
LOCAL_BOXES = (
    ((6.0, 1.0, 0.8), (1.9, 4.6, 1.7), 0.3, "vehicle.car"),
    ((-5.0, -2.0, 0.5), (0.6, 0.7, 1.8), -1.2, "human.pedestrian.adult"),
)


def qz(yaw):
    return (math.cos(yaw / 2.0), 0.0, 0.0, math.sin(yaw / 2.0))


def qmul(a, b):
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return (
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    )


def rotz(yaw) -> np.ndarray:
    c, s = math.cos(yaw), math.sin(yaw)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def ego_pose_of(i: int):
    return np.array([30.0 * i, 5.0 * i, 0.0]), 0.15 * i


@dataclass
class FabricatedNuScenes:
    root: Path
    tokens: list
    front_axis_point: np.ndarray  # lidar frame, projects to CAM_FRONT center
    expected_boxes: list  # (center, size, yaw, name) in the lidar frame


def _write_table(version_dir: Path, name: str, rows) -> None:
    (version_dir / f"{name}.json").write_text(json.dumps(rows, indent=1))


def _write_points(path: Path, rows: np.ndarray) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    np.asarray(rows).astype("<f4").tofile(path)


def _write_image(path: Path, rng) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    arr = rng.integers(0, 256, size=(IMAGE_H, IMAGE_W, 3), dtype=np.uint8)
    Image.fromarray(arr).save(path)


def build_nuscenes_root(root, n_samples=3, seed=0, drop=frozenset()) -> FabricatedNuScenes:
    """Write a complete mini-root under ``root``.

    ``drop`` is a set of (sample_index, channel) keyframe rows to omit,
    for exercising per-frame failures.
    """
    root = Path(root)
    version_dir = root / "v1.0-mini"
    version_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)

    sensors, calibrated = [], []
    for k, channel in enumerate(CAMERA_CHANNELS):
        yaw = CAM_YAW_STEP * k
        t = rotz(yaw) @ np.array([CAM_RADIUS, 0.0, 0.0]) + np.array([0, 0, CAM_HEIGHT])
        sensors.append(
            {"token": f"sens-{channel}", "channel": channel, "modality": "camera"}
        )
        calibrated.append(
            {
                "token": f"cs-{channel}",
                "sensor_token": f"sens-{channel}",
                "translation": list(t),
                "rotation": list(qmul(qz(yaw), Q_CAM_AXES)),
                "camera_intrinsic": [
                    [FX, 0.0, IMAGE_W / 2.0],
                    [0.0, FX, IMAGE_H / 2.0],
                    [0.0, 0.0, 1.0],
                ],
            }
        )
    sensors.append(
        {"token": "sens-LIDAR_TOP", "channel": "LIDAR_TOP", "modality": "lidar"}
    )
    calibrated.append(
        {
            "token": "cs-LIDAR_TOP",
            "sensor_token": "sens-LIDAR_TOP",
            "translation": list(LIDAR_T),
            "rotation": [1.0, 0.0, 0.0, 0.0],
            "camera_intrinsic": [],
        }
    )

    # 10 m down the CAM_FRONT axis: ego (11.5, 0, 1.55), minus the lidar mount.
    front_axis_point = np.array([CAM_RADIUS + 10.0, 0.0, CAM_HEIGHT]) - LIDAR_T

    ego_poses, samples, sample_data, annotations = [], [], [], []
    tokens = []
    for i in range(n_samples):
        token = f"smp{i:02d}"
        tokens.append(token)
        stamp = 1_000_000 * (i + 1)
        ego_t, ego_yaw = ego_pose_of(i)
        ego_poses.append(
            {
                "token": f"ego-{i}",
                "translation": list(ego_t),
                "rotation": list(qz(ego_yaw)),
                "timestamp": stamp,
            }
        )
        samples.append(
            {"token": token, "timestamp": stamp, "scene_token": "scene-0",
             "prev": "", "next": ""}
        )

        def sd_row(channel, filename, fileformat, keyframe=True):
            return {
                "token": f"sd-{channel}-{i}" + ("" if keyframe else "-sweep"),
                "sample_token": token,
                "ego_pose_token": f"ego-{i}",
                "calibrated_sensor_token": f"cs-{channel}",
                "filename": filename,
                "fileformat": fileformat,
                "is_key_frame": keyframe,
                "width": IMAGE_W if fileformat == "jpg" else 0,
                "height": IMAGE_H if fileformat == "jpg" else 0,
                "timestamp": stamp,
            }

        for channel in CAMERA_CHANNELS:
            if (i, channel) in drop:
                continue
            rel = f"samples/{channel}/{i:04d}.jpg"
            sample_data.append(sd_row(channel, rel, "jpg"))
            _write_image(root / rel, rng)
        rel = f"samples/LIDAR_TOP/{i:04d}.pcd.bin"
        sample_data.append(sd_row("LIDAR_TOP", rel, "pcd.bin"))
        # Sweep rows have no payload on disk; keyframe filtering must skip
        # them before anything tries to read one.
        sample_data.append(
            sd_row("LIDAR_TOP", f"sweeps/LIDAR_TOP/{i:04d}.pcd.bin", "pcd.bin",
                   keyframe=False)
        )

        cloud = np.column_stack(
            [
                rng.uniform(-30, 30, size=300),
                rng.uniform(-30, 30, size=300),
                rng.uniform(-2, 2, size=300),
                rng.uniform(0, 255, size=300),
                rng.integers(0, 32, size=300).astype(float),
            ]
        )
        cloud[0] = [*front_axis_point, 127.5, 3.0]
        _write_points(root / rel, cloud)

        for j, (local_center, size, local_yaw, name) in enumerate(LOCAL_BOXES):
            center_g = rotz(ego_yaw) @ np.asarray(local_center) + ego_t
            annotations.append(
                {
                    "token": f"ann-{i}-{j}",
                    "sample_token": token,
                    "instance_token": f"inst-{j}",
                    "translation": list(center_g),
                    "size": list(size),
                    "rotation": list(qz(ego_yaw + local_yaw)),
                }
            )

    instances = [
        {"token": f"inst-{j}", "category_token": f"cat-{j}"}
        for j in range(len(LOCAL_BOXES))
    ]
    categories = [
        {"token": f"cat-{j}", "name": name}
        for j, (_, _, _, name) in enumerate(LOCAL_BOXES)
    ]

    _write_table(version_dir, "sensor", sensors)
    _write_table(version_dir, "calibrated_sensor", calibrated)
    _write_table(version_dir, "ego_pose", ego_poses)
    _write_table(version_dir, "sample", samples)
    _write_table(version_dir, "sample_data", sample_data)
    _write_table(version_dir, "sample_annotation", annotations)
    _write_table(version_dir, "instance", instances)
    _write_table(version_dir, "category", categories)

    expected_boxes = [
        (np.asarray(center) - LIDAR_T, size, yaw, name)
        for center, size, yaw, name in LOCAL_BOXES
    ]
    return FabricatedNuScenes(
        root=root,
        tokens=tokens,
        front_axis_point=front_axis_point,
        expected_boxes=expected_boxes,
    )
