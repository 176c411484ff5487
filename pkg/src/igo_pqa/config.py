"""Pipeline configuration and its canonical hash.

Every tunable of the score-generation pipeline lives here so that a
single hash pins the full configuration.  The hash is stored in each
DatasetManifest, which makes scores traceable to the exact settings
that produced them.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, fields

from .errors import MissingFile, SchemaMismatch


@dataclass(frozen=True)
class PipelineConfig:
    """Knobs for saliency, pooling, and binning.

    ``surround_radii`` and ``center_radii`` are paired elementwise into
    center-surround scale pairs.  ``downsample`` shrinks the pooling
    canvas relative to the camera image (1 keeps full resolution and is
    the bit-exact reference).
    """

    surround_radii: tuple = (2, 4, 8, 16)
    center_radii: tuple = (1, 2, 4, 8)
    object_gain: float = 1.0
    splat_radius: float = 5.0
    splat_sigma: float = 2.5
    downsample: int = 1
    bin_edges: tuple = (34.0, 67.0)

    def __post_init__(self):
        object.__setattr__(self, "surround_radii", tuple(int(r) for r in self.surround_radii))
        object.__setattr__(self, "center_radii", tuple(int(r) for r in self.center_radii))
        object.__setattr__(self, "bin_edges", tuple(float(e) for e in self.bin_edges))
        if len(self.surround_radii) != len(self.center_radii):
            raise ValueError("center/surround radius lists must pair up")
        if not self.surround_radii:
            raise ValueError("need at least one center-surround scale pair")
        if any(c >= s for c, s in zip(self.center_radii, self.surround_radii)):
            raise ValueError("each center radius must be smaller than its surround")
        if self.object_gain < 0:
            raise ValueError(f"object_gain must be >= 0, got {self.object_gain}")
        if not (self.splat_radius > 0 and self.splat_sigma > 0):
            raise ValueError("splat radius and sigma must be positive")
        if self.downsample < 1:
            raise ValueError(f"downsample must be >= 1, got {self.downsample}")
        lo, hi = self.bin_edges
        if not 0 < lo < hi < 100:
            raise ValueError(f"bin edges must satisfy 0 < lo < hi < 100, got {self.bin_edges}")

    def to_dict(self) -> dict:
        return {
            "surround_radii": list(self.surround_radii),
            "center_radii": list(self.center_radii),
            "object_gain": self.object_gain,
            "splat_radius": self.splat_radius,
            "splat_sigma": self.splat_sigma,
            "downsample": self.downsample,
            "bin_edges": list(self.bin_edges),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(payload) - known
        if unknown:
            raise SchemaMismatch(f"unknown pipeline config keys: {sorted(unknown)}")
        kwargs = dict(payload)
        for key in ("surround_radii", "center_radii", "bin_edges"):
            if key in kwargs:
                kwargs[key] = tuple(kwargs[key])
        try:
            return cls(**kwargs)
        except ValueError as exc:
            raise SchemaMismatch(str(exc)) from exc

    def hash(self) -> str:
        return config_hash(self.to_dict())


def canonical_json(payload: dict) -> str:
    """Deterministic JSON used for hashing: sorted keys, no whitespace."""
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def config_hash(payload: dict) -> str:
    return hashlib.sha256(canonical_json(payload).encode("utf-8")).hexdigest()


def load_pipeline_config(path) -> PipelineConfig:
    try:
        with open(path) as fh:
            payload = json.load(fh)
    except FileNotFoundError as exc:
        raise MissingFile(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaMismatch(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise SchemaMismatch(f"{path}: pipeline config must be a JSON object")
    return PipelineConfig.from_dict(payload)


def save_pipeline_config(config: PipelineConfig, path) -> None:
    with open(path, "w") as fh:
        json.dump(config.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
