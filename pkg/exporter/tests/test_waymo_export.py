import io
import math
from types import SimpleNamespace

import numpy as np
import pytest
from PIL import Image

from igo_pqa import load_frame
from igo_pqa.projection import project_points
from pqa_exporter import (
    CalibrationMissing,
    ExportJob,
    SourceUnavailable,
    atomic_save_frame,
    convert_waymo_frame,
    run_export,
)
from pqa_exporter import waymo

# Fake rig: all cameras at the same mount, fanned out by yaw only.
CAM_YAWS = {1: 0.0, 2: math.pi / 4, 3: -math.pi / 4, 4: math.pi / 2, 5: -math.pi / 2}
CAM_MOUNT = (1.5, 0.0, 2.0)


def fake_calibration(name):
    yaw = CAM_YAWS[name]
    c, s = math.cos(yaw), math.sin(yaw)
    T = np.eye(4)
    T[:3, :3] = [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]
    T[:3, 3] = CAM_MOUNT
    return SimpleNamespace(
        name=name,
        intrinsic=[60.0, 60.0, 32.0, 24.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        extrinsic=SimpleNamespace(transform=[float(v) for v in T.ravel()]),
        width=64,
        height=48,
    )


def fake_image(name):
    rng = np.random.default_rng(100 + name)
    arr = rng.integers(0, 256, size=(48, 64, 3), dtype=np.uint8)
    buf = io.BytesIO()
    Image.fromarray(arr).save(buf, format="PNG")
    return SimpleNamespace(name=name, image=buf.getvalue())


def fake_label(center, length, width, height, heading, type_=1):
    return SimpleNamespace(
        box=SimpleNamespace(
            center_x=center[0],
            center_y=center[1],
            center_z=center[2],
            length=length,
            width=width,
            height=height,
            heading=heading,
        ),
        type=type_,
    )


def fake_frame(names=(1, 2, 3, 4, 5), labels=(), drop_image=None):
    return SimpleNamespace(
        context=SimpleNamespace(
            name="seg-0001", camera_calibrations=[fake_calibration(n) for n in names]
        ),
        timestamp_micros=17,
        images=[fake_image(n) for n in names if n != drop_image],
        laser_labels=list(labels),
    )


def fake_points(n=200):
    rng = np.random.default_rng(4)
    return np.column_stack(
        [
            rng.uniform(-40, 40, n),
            rng.uniform(-40, 40, n),
            rng.uniform(-1, 4, n),
            rng.uniform(0, 0.8, n),
        ]
    )


class TestConvertWaymoFrame:
    def test_five_cameras_front_first(self):
        frame = convert_waymo_frame(fake_frame(), fake_points())
        ids = [c.calibration.camera_id for c in frame.cameras]
        assert ids == ["FRONT", "FRONT_LEFT", "FRONT_RIGHT", "SIDE_LEFT", "SIDE_RIGHT"]
        assert frame.frame_id == "seg-0001-17"
        for cam in frame.cameras:
            rot = cam.calibration.extrinsic[:3, :3]
            np.testing.assert_allclose(rot @ rot.T, np.eye(3), atol=1e-12)

    def test_optical_axis_hits_image_center(self):
        # 10 m down the FRONT axis and 10 m down the SIDE_LEFT (+y) axis.
        pts = np.array([[11.5, 0.0, 2.0], [1.5, 10.0, 2.0]])
        frame = convert_waymo_frame(fake_frame(), pts)
        for cam_index, point_index in ((0, 0), (3, 1)):
            calib = frame.cameras[cam_index].calibration
            hits = project_points(frame.points, calib)
            rows = np.nonzero(hits.point_index == point_index)[0]
            assert rows.size == 1
            k = rows[0]
            assert hits.u[k] == pytest.approx(32.0, abs=1e-9)
            assert hits.v[k] == pytest.approx(24.0, abs=1e-9)
            assert hits.depth[k] == pytest.approx(10.0, abs=1e-9)

    def test_points_padded_and_clipped(self):
        bare = np.array([[1.0, 2.0, 0.5]])
        frame = convert_waymo_frame(fake_frame(), bare)
        np.testing.assert_allclose(frame.points, [[1.0, 2.0, 0.5, 0.0]])

        hot = np.array([[1.0, 2.0, 0.5, 3.7]])
        frame = convert_waymo_frame(fake_frame(), hot)
        assert frame.points[0, 3] == 1.0

        with pytest.raises(SourceUnavailable, match="points"):
            convert_waymo_frame(fake_frame(), np.zeros((4, 5)))

    def test_boxes_pass_through_with_reordered_size(self):
        labels = [
            fake_label((5.0, -2.0, 0.5), 4.6, 1.9, 1.7, heading=0.4, type_=1),
            fake_label((-3.0, 1.0, 0.9), 0.7, 0.6, 1.8, heading=7.0, type_=2),
        ]
        frame = convert_waymo_frame(fake_frame(labels=labels), fake_points())
        car, ped = frame.boxes
        assert car.center == (5.0, -2.0, 0.5)
        assert car.size == (1.9, 4.6, 1.7)
        assert car.yaw == pytest.approx(0.4)
        assert car.class_label == "VEHICLE"
        # Heading 7.0 wraps into [-pi, pi].
        assert ped.yaw == pytest.approx(7.0 - 2 * math.pi)
        assert ped.class_label == "PEDESTRIAN"

    def test_missing_calibration(self):
        with pytest.raises(CalibrationMissing, match="FRONT_RIGHT"):
            convert_waymo_frame(fake_frame(names=(1, 2, 4, 5)), fake_points())

    def test_missing_image(self):
        with pytest.raises(CalibrationMissing, match="SIDE_RIGHT"):
            convert_waymo_frame(fake_frame(drop_image=5), fake_points())

    def test_round_trip_through_frame_dir(self, tmp_path):
        src = fake_frame(labels=[fake_label((5.0, -2.0, 0.5), 4.6, 1.9, 1.7, 0.4)])
        frame = convert_waymo_frame(src, fake_points())
        atomic_save_frame(frame, tmp_path)
        loaded = load_frame(tmp_path / frame.frame_id / "frame.json")
        assert len(loaded.cameras) == 5
        assert len(loaded.boxes) == 1
        np.testing.assert_allclose(loaded.points, frame.points, atol=1e-7)
        original = np.asarray(Image.open(io.BytesIO(src.images[0].image)))
        np.testing.assert_array_equal(loaded.cameras[0].load_image(), original)


def _toolkit_installed() -> bool:
    try:
        import waymo_open_dataset  # noqa: F401
    except ImportError:
        return False
    return True


class TestWaymoFiles:
    def test_no_segments(self, tmp_path):
        with pytest.raises(SourceUnavailable, match="tfrecord"):
            run_export(ExportJob("waymo", tmp_path, tmp_path / "out"))

    @pytest.mark.skipif(_toolkit_installed(), reason="toolkit present")
    def test_open_segment_requires_toolkit(self, tmp_path):
        seg = tmp_path / "seg-0.tfrecord"
        seg.write_bytes(b"")
        with pytest.raises(SourceUnavailable, match="waymo-open-dataset"):
            next(waymo.open_segment(seg))

    @pytest.mark.skipif(_toolkit_installed(), reason="toolkit present")
    def test_run_export_requires_toolkit(self, tmp_path):
        (tmp_path / "seg-0.tfrecord").write_bytes(b"")
        with pytest.raises(SourceUnavailable, match="waymo-open-dataset"):
            run_export(ExportJob("waymo", tmp_path, tmp_path / "out"))

    def test_waymo_split_hint(self, tmp_path):
        with pytest.raises(SourceUnavailable, match="split"):
            run_export(ExportJob("waymo", tmp_path, tmp_path / "out", split="val"))
