"""Core domain types: boxes, manifest entries, activation tensors, feature vectors."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .errors import ManifestError

SPLIT_VALUES = ("train", "test", "unassigned")
BOX_SOURCES = ("detector", "user")

#: Sentinel individual id a reviewer may confirm when no candidate matches.
UNKNOWN_INDIVIDUAL = "unknown"


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box in fractions of image width/height."""

    x: float
    y: float
    w: float
    h: float
    confidence: float = 1.0
    source: str = "user"

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.x, self.y, self.w, self.h)):
            raise ValueError("box coordinates must be finite")
        if self.x < 0 or self.y < 0:
            raise ValueError(f"box origin must be non-negative, got ({self.x}, {self.y})")
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"box must have positive size, got {self.w}x{self.h}")
        if self.x + self.w > 1 + 1e-9 or self.y + self.h > 1 + 1e-9:
            raise ValueError("box extends beyond the unit square")
        if not 0 <= self.confidence <= 1:
            raise ValueError(f"confidence must be in [0, 1], got {self.confidence}")
        if self.source not in BOX_SOURCES:
            raise ValueError(f"unknown box source {self.source!r}")

    @property
    def area(self) -> float:
        return self.w * self.h

    def to_dict(self) -> dict:
        return {"x": self.x, "y": self.y, "w": self.w, "h": self.h}

    @classmethod
    def from_dict(cls, d: dict, source: str = "user") -> "BoundingBox":
        return cls(
            x=float(d["x"]), y=float(d["y"]), w=float(d["w"]), h=float(d["h"]),
            confidence=float(d.get("confidence", 1.0)),
            source=d.get("source", source),
        )


@dataclass(frozen=True)
class Individual:
    """A known animal in the gallery with up to five representative images."""

    id: str
    name: str = ""
    representative_image_ids: tuple = ()

    def __post_init__(self):
        if not self.id:
            raise ValueError("individual id must be nonempty")
        if len(self.representative_image_ids) > 5:
            raise ValueError("at most 5 representative images per individual")


@dataclass(frozen=True)
class ImageRecord:
    id: str
    uri: str
    individual_id: Optional[str] = None
    capture_year: Optional[int] = None


@dataclass(frozen=True)
class ManifestEntry:
    image_id: str
    uri: str
    individual_id: Optional[str] = None
    split: str = "unassigned"
    box: Optional[BoundingBox] = None

    def __post_init__(self):
        if not self.image_id:
            raise ValueError("image_id must be nonempty")
        if self.split not in SPLIT_VALUES:
            raise ValueError(f"split must be one of {SPLIT_VALUES}, got {self.split!r}")


@dataclass(frozen=True)
class DatasetManifest:
    """Immutable labeled image inventory with train/test assignment."""

    entries: tuple

    def __post_init__(self):
        seen = set()
        for e in self.entries:
            if e.image_id in seen:
                raise ManifestError(f"duplicate image id {e.image_id!r}")
            seen.add(e.image_id)

    def __len__(self):
        return len(self.entries)

    @property
    def individual_ids(self) -> list:
        out, seen = [], set()
        for e in self.entries:
            if e.individual_id and e.individual_id not in seen:
                seen.add(e.individual_id)
                out.append(e.individual_id)
        return out

    def class_counts(self) -> dict:
        """Number of images per individual, labeled entries only."""
        counts: dict = {}
        for e in self.entries:
            if e.individual_id:
                counts[e.individual_id] = counts.get(e.individual_id, 0) + 1
        return counts

    def subset(self, split: str) -> "DatasetManifest":
        if split not in SPLIT_VALUES:
            raise ValueError(f"unknown split {split!r}")
        return DatasetManifest(tuple(e for e in self.entries if e.split == split))

    def is_split(self) -> bool:
        return any(e.split != "unassigned" for e in self.entries)

    def get(self, image_id: str) -> ManifestEntry:
        for e in self.entries:
            if e.image_id == image_id:
                return e
        raise KeyError(image_id)


@dataclass(frozen=True)
class Provenance:
    """Where a feature vector came from; must match across vectors fed to one model."""

    layer_name: str
    input_resolution: int
    pool_size: Optional[int] = None
    flipped: bool = False
    pca_applied: bool = False

    def compatible(self, other: "Provenance") -> bool:
        """True when vectors from the two provenances may share a store or model.

        The flip flag is deliberately excluded: flipped and unflipped
        extractions of one configuration live in the same feature space.
        """
        return (
            self.layer_name == other.layer_name
            and self.input_resolution == other.input_resolution
            and self.pool_size == other.pool_size
            and self.pca_applied == other.pca_applied
        )

    def to_dict(self) -> dict:
        return {
            "layer_name": self.layer_name,
            "input_resolution": self.input_resolution,
            "pool_size": self.pool_size,
            "flipped": self.flipped,
            "pca_applied": self.pca_applied,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Provenance":
        return cls(
            layer_name=d["layer_name"],
            input_resolution=int(d["input_resolution"]),
            pool_size=None if d.get("pool_size") is None else int(d["pool_size"]),
            flipped=bool(d.get("flipped", False)),
            pca_applied=bool(d.get("pca_applied", False)),
        )


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    provenance: Provenance

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim != 1:
            raise ValueError(f"feature vector must be 1-D, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("feature vector contains non-finite values")
        object.__setattr__(self, "values", v)

    @property
    def dim(self) -> int:
        return int(self.values.shape[0])

    def with_flag(self, **changes) -> "FeatureVector":
        return FeatureVector(self.values, replace(self.provenance, **changes))


@dataclass(frozen=True)
class ActivationTensor:
    """C x H x W activations from a tapped network layer, channel-major."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim != 3:
            raise ValueError(f"activation tensor must be CxHxW, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("activation tensor contains non-finite values")
        object.__setattr__(self, "values", v)

    @property
    def shape(self):
        return self.values.shape

    @property
    def channels(self) -> int:
        return int(self.values.shape[0])

    @property
    def height(self) -> int:
        return int(self.values.shape[1])

    @property
    def width(self) -> int:
        return int(self.values.shape[2])


@dataclass(frozen=True)
class ImageInput:
    """An image handed to a backend: a stable id plus an optional pixel source.

    ``data`` may be a filesystem path or raw encoded bytes. Stub backends
    derive activations from ``id`` alone, so ``data`` may be None there.
    """

    id: str
    data: object = None

    @classmethod
    def from_path(cls, path) -> "ImageInput":
        from pathlib import Path

        p = Path(path)
        return cls(id=p.stem, data=str(p))
