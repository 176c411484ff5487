"""Waymo Open Dataset frame conversion.

TFRecord segments only parse with the official ``waymo-open-dataset``
package (protobuf schema plus range-image decoding), so file-level
reads are gated behind a lazy import and degrade to
``SourceUnavailable`` when it is absent.  The conversion itself,
``convert_waymo_frame``, is duck-typed against the proto field layout
and works on any object graph with the same attributes, toolkit or
not.

Conventions translated here:

* camera extrinsics are 4x4 camera-to-vehicle transforms with the
  camera axes x-forward / y-left / z-up; the standard z-forward,
  y-down optical frame is recovered with a fixed axis permutation;
* ``intrinsic`` is the 9-vector [f_u, f_v, c_u, c_v, k1, k2, p1, p2,
  k3]; the distortion tail is dropped (pinhole model only);
* laser points live in the vehicle frame, which is also the box
  frame, so labels pass through with sizes reordered from
  (length, width, height) to (w, l, h).
"""

from __future__ import annotations

import io
import math

import numpy as np
from PIL import Image

from igo_pqa import Box3D, Camera, CameraCalibration, Frame

from .errors import CalibrationMissing, SourceUnavailable

CAMERA_NAMES = {
    1: "FRONT",
    2: "FRONT_LEFT",
    3: "FRONT_RIGHT",
    4: "SIDE_LEFT",
    5: "SIDE_RIGHT",
}

LABEL_NAMES = {0: "UNKNOWN", 1: "VEHICLE", 2: "PEDESTRIAN", 3: "SIGN", 4: "CYCLIST"}

# Rows are the optical axes written in vehicle-style camera coordinates:
# optical x (right) = -y, optical y (down) = -z, optical z (forward) = x.
AXIS_SWAP = np.array(
    [
        [0.0, -1.0, 0.0],
        [0.0, 0.0, -1.0],
        [1.0, 0.0, 0.0],
    ]
)


def _wrap_angle(a: float) -> float:
    return math.atan2(math.sin(a), math.cos(a))


def _intrinsic_matrix(vec) -> np.ndarray:
    f_u, f_v, c_u, c_v = (float(v) for v in vec[:4])
    return np.array([[f_u, 0.0, c_u], [0.0, f_v, c_v], [0.0, 0.0, 1.0]])


def _extrinsic_matrix(calib) -> np.ndarray:
    vehicle_from_cam = np.asarray(
        calib.extrinsic.transform, dtype=np.float64
    ).reshape(4, 4)
    R, t = vehicle_from_cam[:3, :3], vehicle_from_cam[:3, 3]
    cam_from_vehicle = np.eye(4)
    cam_from_vehicle[:3, :3] = AXIS_SWAP @ R.T
    cam_from_vehicle[:3, 3] = AXIS_SWAP @ (-R.T @ t)
    return cam_from_vehicle


def convert_waymo_frame(frame, points, frame_id=None) -> Frame:
    """Build an in-memory frame from a Waymo frame proto (or lookalike).

    ``points`` is the already-decoded (N, 3) or (N, 4) vehicle-frame
    cloud; the proto itself only stores range images.  Requires all
    five cameras with both calibration and image payload.
    """
    calibs = {c.name: c for c in frame.context.camera_calibrations}
    images = {im.name: im for im in frame.images}
    if frame_id is None:
        frame_id = f"{frame.context.name}-{frame.timestamp_micros}"

    cameras = []
    for name in sorted(CAMERA_NAMES):
        if name not in calibs:
            raise CalibrationMissing(
                f"frame {frame_id}: camera {CAMERA_NAMES[name]} has no calibration"
            )
        if name not in images:
            raise CalibrationMissing(
                f"frame {frame_id}: camera {CAMERA_NAMES[name]} has no image"
            )
        calib = calibs[name]
        image = np.asarray(Image.open(io.BytesIO(images[name].image)))
        cameras.append(
            Camera(
                CameraCalibration(
                    camera_id=CAMERA_NAMES[name],
                    intrinsic=_intrinsic_matrix(calib.intrinsic),
                    extrinsic=_extrinsic_matrix(calib),
                    width=int(calib.width),
                    height=int(calib.height),
                ),
                image=image,
            )
        )

    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] not in (3, 4):
        raise SourceUnavailable(
            f"frame {frame_id}: points must be (N, 3) or (N, 4), got {pts.shape}"
        )
    if pts.shape[1] == 3:
        pts = np.concatenate([pts, np.zeros((pts.shape[0], 1))], axis=1)
    else:
        pts = pts.copy()
        pts[:, 3] = np.clip(pts[:, 3], 0.0, 1.0)

    boxes = []
    for label in getattr(frame, "laser_labels", []):
        b = label.box
        boxes.append(
            Box3D(
                center=(float(b.center_x), float(b.center_y), float(b.center_z)),
                size=(float(b.width), float(b.length), float(b.height)),
                yaw=_wrap_angle(float(b.heading)),
                class_label=LABEL_NAMES.get(getattr(label, "type", 0), "UNKNOWN"),
            )
        )

    return Frame(frame_id=frame_id, points=pts, cameras=cameras, boxes=boxes)


def open_segment(path):
    """Iterate frame protos from one TFRecord segment via the toolkit."""
    try:
        from waymo_open_dataset import dataset_pb2
    except ImportError as exc:
        raise SourceUnavailable(
            "reading Waymo TFRecord segments requires the waymo-open-dataset "
            "package; with it absent, decode frames yourself and call "
            "convert_waymo_frame()"
        ) from exc
    import tensorflow as tf

    for record in tf.data.TFRecordDataset([str(path)], compression_type=""):
        frame = dataset_pb2.Frame()
        frame.ParseFromString(bytes(record.numpy()))
        yield frame


def toolkit_points(frame) -> np.ndarray:
    """Decode the first-return point cloud of a frame proto (toolkit only)."""
    try:
        from waymo_open_dataset.utils import frame_utils
    except ImportError as exc:
        raise SourceUnavailable(
            "decoding Waymo range images requires the waymo-open-dataset package"
        ) from exc
    # Toolkit versions differ on whether a segmentation slot is returned.
    range_images, camera_projections, *_, top_pose = (
        frame_utils.parse_range_image_and_camera_projection(frame)
    )
    points, _ = frame_utils.convert_range_image_to_point_cloud(
        frame, range_images, camera_projections, top_pose
    )
    return np.concatenate(points, axis=0)
