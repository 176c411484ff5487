"""Dataset exporter: nuScenes and Waymo samples into the igo-pqa layout.

Talks to the core package only through its public frame API, so any
directory this tool writes is directly consumable by ``igopqa
generate`` and friends.
"""

__version__ = "0.1.0"

from .errors import CalibrationMissing, ExporterError, SourceUnavailable
from .export import (
    ExportJob,
    ExportSummary,
    atomic_save_frame,
    check_export,
    run_export,
)
from .waymo import convert_waymo_frame

__all__ = [
    "__version__",
    "CalibrationMissing",
    "ExportJob",
    "ExportSummary",
    "ExporterError",
    "SourceUnavailable",
    "atomic_save_frame",
    "check_export",
    "convert_waymo_frame",
    "run_export",
]
