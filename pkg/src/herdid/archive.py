"""Single-file persistence for a trained identification model.

Format: magic ``EID1``, a little-endian uint32 header length, a JSON header
(pipeline config, class list, calibration parameters, gallery, training
summary, section shapes), then four length-prefixed binary sections of
little-endian float64: PCA mean, PCA components (row-major), SVM weights
(row-major), SVM biases. Binary sections round-trip bit-exactly.
"""

import hashlib
import json
import os
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ArchiveFormatError
from .pca import PcaModel
from .svm import SvmModel
from .types import Individual

MAGIC = b"EID1"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class ModelArchive:
    pipeline_config: dict
    pca: PcaModel
    svm: SvmModel
    gallery: tuple            # of Individual
    training_summary: dict
    format_version: int = FORMAT_VERSION

    def individual(self, individual_id: str) -> Optional[Individual]:
        for ind in self.gallery:
            if ind.id == individual_id:
                return ind
        return None


def _section(arr: np.ndarray) -> bytes:
    raw = np.ascontiguousarray(arr, dtype="<f8").tobytes()
    return struct.pack("<Q", len(raw)) + raw


def _read_section(fh, what: str) -> np.ndarray:
    head = fh.read(8)
    if len(head) != 8:
        raise ArchiveFormatError(f"truncated archive while reading {what}")
    (length,) = struct.unpack("<Q", head)
    raw = fh.read(length)
    if len(raw) != length:
        raise ArchiveFormatError(f"truncated archive while reading {what}")
    return np.frombuffer(raw, dtype="<f8").copy()


def save_archive(archive: ModelArchive, path) -> None:
    """Serialize atomically: write to a temp file, then rename into place."""
    path = Path(path)
    svm = archive.svm
    pca = archive.pca
    header = {
        "format_version": archive.format_version,
        "pipeline_config": archive.pipeline_config,
        "pca": {
            "dim": pca.input_dim,
            "rank": pca.rank,
            "explained_variance": pca.explained_variance.tolist(),
        },
        "svm": {
            "classes": list(svm.classes),
            "dim": svm.dim,
            "c": svm.c,
            "bias_scale": svm.bias_scale,
            "class_weights": svm.class_weights,
            "calibration_a": None if svm.calibration_a is None else svm.calibration_a.tolist(),
            "calibration_b": None if svm.calibration_b is None else svm.calibration_b.tolist(),
            "calibration_info": svm.calibration_info,
        },
        "gallery": [
            {
                "id": ind.id,
                "name": ind.name,
                "representative_image_ids": list(ind.representative_image_ids),
            }
            for ind in archive.gallery
        ],
        "training_summary": archive.training_summary,
    }
    header_raw = json.dumps(header, sort_keys=True).encode("utf-8")

    tmp = path.with_name(path.name + ".tmp")
    with tmp.open("wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(header_raw)))
        fh.write(header_raw)
        fh.write(_section(pca.mean))
        fh.write(_section(pca.components))
        fh.write(_section(svm.weights))
        fh.write(_section(svm.biases))
        fh.flush()
        os.fsync(fh.fileno())
    tmp.replace(path)


def load_archive(path) -> ModelArchive:
    path = Path(path)
    with path.open("rb") as fh:
        if fh.read(4) != MAGIC:
            raise ArchiveFormatError(f"{path} is not a model archive (bad magic)")
        (header_len,) = struct.unpack("<I", fh.read(4))
        try:
            header = json.loads(fh.read(header_len).decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ArchiveFormatError(f"corrupt archive header: {exc}") from exc
        version = header.get("format_version")
        if version != FORMAT_VERSION:
            raise ArchiveFormatError(f"unsupported archive version {version!r}")

        pca_h = header["pca"]
        svm_h = header["svm"]
        mean = _read_section(fh, "pca mean")
        components = _read_section(fh, "pca components").reshape(
            pca_h["rank"], pca_h["dim"]
        )
        weights = _read_section(fh, "svm weights").reshape(
            len(svm_h["classes"]), svm_h["dim"]
        )
        biases = _read_section(fh, "svm biases")

    pca = PcaModel(
        mean=mean,
        components=components,
        explained_variance=np.asarray(pca_h["explained_variance"], dtype=np.float64),
    )
    cal_a = svm_h.get("calibration_a")
    cal_b = svm_h.get("calibration_b")
    svm = SvmModel(
        classes=tuple(svm_h["classes"]),
        weights=weights,
        biases=biases,
        c=float(svm_h["c"]),
        class_weights=svm_h["class_weights"],
        bias_scale=float(svm_h.get("bias_scale", 1.0)),
        calibration_a=None if cal_a is None else np.asarray(cal_a, dtype=np.float64),
        calibration_b=None if cal_b is None else np.asarray(cal_b, dtype=np.float64),
        calibration_info=svm_h.get("calibration_info", {}),
    )
    gallery = tuple(
        Individual(
            id=g["id"],
            name=g.get("name", g["id"]),
            representative_image_ids=tuple(g.get("representative_image_ids", ())),
        )
        for g in header["gallery"]
    )
    return ModelArchive(
        pipeline_config=header["pipeline_config"],
        pca=pca,
        svm=svm,
        gallery=gallery,
        training_summary=header["training_summary"],
        format_version=version,
    )


def archive_digest(path) -> str:
    """Short content hash of a saved archive; used as the serving model version."""
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()[:12]
