"""Image-guided outdoor point-cloud quality assessment.

Two halves: a deterministic pipeline that turns (points, surround
images, calibration, boxes) into a 0-100 quality score, and a small
pillar-transformer regressor that learns to predict that score from
the point cloud alone.
"""

__version__ = "0.1.0"

from .config import PipelineConfig
from .errors import DataError, IgoPqaError, NumericError
from .estimator import PillarTransformerRegressor, SaliencyScoreGenerator
from .frames import (
    Box3D,
    Camera,
    CameraCalibration,
    DatasetManifest,
    Frame,
    load_frame,
    load_manifest,
    save_frame,
    save_manifest,
)
from .metrics import MetricReport, mean_l1, metric_report, plcc, srcc
from .model import ModelConfig, ScoreRegressor
from .point_saliency import aggregate_cameras, camera_point_saliency, point_saliency
from .pooling import frame_raw_score
from .saliency import enhance_objects, fine_grained_saliency
from .scoring import (
    QualityRecord,
    bin_score,
    fit_dataset,
    normalize_score,
    score_frames,
)
from .synthetic import SceneSpec, generate_dataset, generate_scene
from .training import TrainConfig, evaluate, train

__all__ = [
    "__version__",
    "Box3D",
    "Camera",
    "CameraCalibration",
    "DataError",
    "DatasetManifest",
    "Frame",
    "IgoPqaError",
    "MetricReport",
    "ModelConfig",
    "NumericError",
    "PillarTransformerRegressor",
    "PipelineConfig",
    "QualityRecord",
    "SaliencyScoreGenerator",
    "SceneSpec",
    "ScoreRegressor",
    "TrainConfig",
    "aggregate_cameras",
    "bin_score",
    "camera_point_saliency",
    "enhance_objects",
    "evaluate",
    "fine_grained_saliency",
    "fit_dataset",
    "frame_raw_score",
    "generate_dataset",
    "generate_scene",
    "load_frame",
    "load_manifest",
    "mean_l1",
    "metric_report",
    "normalize_score",
    "plcc",
    "point_saliency",
    "save_frame",
    "save_manifest",
    "score_frames",
    "srcc",
    "train",
]
