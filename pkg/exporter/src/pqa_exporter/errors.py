"""Exception taxonomy for the exporter.

Everything user-facing maps to CLI exit code 3.  ``SourceUnavailable``
covers whole-source problems (missing root, missing table, missing
toolkit); ``CalibrationMissing`` covers a single frame whose camera rig
cannot be assembled.  Both may also surface per frame during an export
run, in which case they become failure entries in the summary instead
of aborting the run.
"""


class ExporterError(Exception):
    """Base class for all exporter errors."""


class SourceUnavailable(ExporterError):
    """Dataset root, table, payload file, or required toolkit is absent."""


class CalibrationMissing(ExporterError):
    """A frame lacks the sensor rows needed to build its cameras."""
