"""Training and identification orchestration.

Training: extract activations for every train image (plus horizontally
flipped copies when augmentation is on), pool, fit PCA with a target of
``pca_multiplier`` times the original (pre-augmentation) train image count,
project, train the one-vs-rest SVM and calibrate it. Identification:
extract each query unflipped, score, average calibrated confidences across
queries, and rank descending.
"""

import datetime as _dt
import json
from dataclasses import asdict, dataclass, replace
from typing import Optional

import numpy as np

from .archive import ModelArchive
from .detect import detect_heads
from .errors import ProvenanceConflictError, SingleClassError
from .manifest import round_half_up
from .pca import fit_pca, project_matrix
from .pooling import pool_and_flatten
from .svm import (
    ScoreVector,
    calibrated_matrix,
    fit_calibration,
    train_svm,
)
from .types import BoundingBox, DatasetManifest, ImageInput, Individual

DEFAULT_K_GRID = (1, 5, 10, 20)


@dataclass(frozen=True)
class PipelineConfig:
    layer_name: str = "activation_40"
    input_resolution: int = 512
    pool_size: Optional[int] = 6
    pca_multiplier: float = 2.0
    svm_c: float = 1.0
    svm_tol: float = 1e-3
    svm_max_epochs: int = 1000
    class_weight_mode: str = "balanced"
    calibration_folds: int = 3
    flip_augmentation: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.pca_multiplier <= 0:
            raise ValueError("pca_multiplier must be positive")
        if self.pool_size is not None and self.pool_size < 2:
            raise ValueError("pool_size must be >= 2 or None")

    def pca_target(self, n_train_images: int) -> int:
        """Reduction target: multiplier times the pre-augmentation image count."""
        return max(1, round_half_up(self.pca_multiplier * n_train_images))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown pipeline config fields: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "PipelineConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True)
class Ranking:
    """Calibrated per-individual confidences, sorted descending."""

    entries: tuple  # of (individual_id, confidence)
    query_image_count: int

    def __post_init__(self):
        confs = [c for _, c in self.entries]
        ids = [i for i, _ in self.entries]
        if len(set(ids)) != len(ids):
            raise ValueError("ranking repeats an individual")
        if any(confs[i] < confs[i + 1] for i in range(len(confs) - 1)):
            raise ValueError("ranking confidences must be non-increasing")
        if self.query_image_count < 1:
            raise ValueError("query_image_count must be >= 1")

    @property
    def ids(self):
        return [i for i, _ in self.entries]


def make_ranking(score: ScoreVector, query_image_count: int) -> Ranking:
    if score.kind != "calibrated":
        raise ValueError("ranking requires calibrated scores")
    order = sorted(
        range(len(score.classes)),
        key=lambda i: (-score.values[i], score.classes[i]),
    )
    entries = tuple((score.classes[i], float(score.values[i])) for i in order)
    return Ranking(entries=entries, query_image_count=query_image_count)


def aggregate(scores) -> ScoreVector:
    """Mean of calibrated score vectors, renormalized against rounding drift."""
    scores = list(scores)
    if not scores:
        raise ValueError("cannot aggregate an empty score list")
    first = scores[0]
    for s in scores[1:]:
        if s.classes != first.classes:
            raise ValueError("score vectors are not aligned to the same classes")
    if any(s.kind != "calibrated" for s in scores):
        raise ValueError("aggregation expects calibrated scores")
    stack = np.asarray([s.values for s in scores])
    # Summing each column in sorted order makes the result bit-identical
    # under any permutation of the query list.
    mean = np.sort(stack, axis=0).mean(axis=0)
    mean = mean / mean.sum()
    return ScoreVector(classes=first.classes, values=mean, kind="calibrated")


def top_k(r: Ranking, k: int):
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    return list(r.entries[:k])


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

def _check_backend(config: PipelineConfig, backend) -> None:
    bc = backend.config
    if (bc.layer_name, bc.input_resolution) != (config.layer_name, config.input_resolution):
        raise ProvenanceConflictError(
            f"backend is configured for ({bc.layer_name}, {bc.input_resolution}), "
            f"pipeline expects ({config.layer_name}, {config.input_resolution})"
        )


def _feature_for(entry_id, uri, box, flipped, config, backend, store):
    if store is not None and (entry_id, flipped) in store:
        return store.get(entry_id, flipped)
    tensor = backend.extract(ImageInput(id=entry_id, data=uri or None), box, flipped)
    vec = pool_and_flatten(
        tensor, config.layer_name, config.input_resolution, config.pool_size, flipped
    )
    if store is not None:
        store.put(entry_id, flipped, vec)
    return vec


def _resolve_box(entry, detector) -> BoundingBox:
    if entry.box is not None:
        return entry.box
    if detector is not None:
        found = detect_heads(detector, ImageInput(id=entry.image_id, data=entry.uri or None))
        if found:
            return found[0].box
    raise ValueError(
        f"train image {entry.image_id!r} has no box in the manifest and no "
        "detector proposal"
    )


def _pick_representatives(entries, limit=5):
    """Training images with the largest head boxes, as a quality proxy."""
    def area(e):
        return e.box.area if e.box is not None else 0.0

    ranked = sorted(entries, key=lambda e: (-area(e), e.image_id))
    return tuple(e.image_id for e in ranked[:limit])


def train_pipeline(
    manifest: DatasetManifest,
    config: PipelineConfig,
    backend,
    store=None,
    detector=None,
) -> ModelArchive:
    _check_backend(config, backend)
    train = manifest.subset("train")
    if len(train) == 0:
        raise ValueError("manifest has no train split; run stratified_split first")
    by_class = {}
    for e in train.entries:
        if e.individual_id is None:
            continue
        by_class.setdefault(e.individual_id, []).append(e)
    if len(by_class) < 2:
        raise SingleClassError(
            f"training requires at least 2 individuals, found {len(by_class)}"
        )

    labeled = [e for e in train.entries if e.individual_id is not None]
    boxes = {e.image_id: _resolve_box(e, detector) for e in labeled}

    vectors = []
    labels = []
    flips = (False, True) if config.flip_augmentation else (False,)
    provenance = None
    for e in labeled:
        for flipped in flips:
            v = _feature_for(
                e.image_id, e.uri, boxes[e.image_id], flipped, config, backend, store
            )
            if provenance is None:
                provenance = v.provenance
            elif not provenance.compatible(v.provenance):
                raise ProvenanceConflictError(
                    f"feature provenance drifted at image {e.image_id!r}"
                )
            vectors.append(v.values)
            labels.append(e.individual_id)

    x = np.asarray(vectors, dtype=np.float64)
    y = np.asarray(labels)
    n_original = len(labeled)
    target = config.pca_target(n_original)
    pca = fit_pca(x, target)
    z = project_matrix(pca, x)

    svm = train_svm(
        z, y, c=config.svm_c, class_weights=config.class_weight_mode,
        tol=config.svm_tol, max_epochs=config.svm_max_epochs, seed=config.seed,
    )
    svm = fit_calibration(svm, z, y, folds=config.calibration_folds, seed=config.seed)
    # Dual coefficients are training-time diagnostics; keep the archive lean.
    svm = replace(svm, fit_info={k: v for k, v in svm.fit_info.items()
                                 if k in ("tol", "max_epochs", "epochs")})

    gallery = tuple(
        Individual(
            id=cls,
            name=cls,
            representative_image_ids=_pick_representatives(by_class[cls]),
        )
        for cls in sorted(by_class)
    )
    summary = {
        "n_train_images": n_original,
        "n_training_vectors": int(x.shape[0]),
        "n_classes": len(by_class),
        "class_counts": {cls: len(v) for cls, v in sorted(by_class.items())},
        "feature_dim": int(x.shape[1]),
        "pca_target": target,
        "pca_rank": pca.rank,
        "pca_clamped": bool(pca.rank < target),
        "flip_augmentation": config.flip_augmentation,
        "calibration": svm.calibration_info,
        "trained_at": _dt.datetime.now(_dt.timezone.utc).isoformat(),
    }
    return ModelArchive(
        pipeline_config=config.to_dict(),
        pca=pca,
        svm=svm,
        gallery=gallery,
        training_summary=summary,
    )


# ---------------------------------------------------------------------------
# Identification
# ---------------------------------------------------------------------------

def identify(model: ModelArchive, queries, backend) -> Ranking:
    """Rank gallery individuals for one probe of one or more query images."""
    queries = list(queries)
    if not queries:
        raise ValueError("identify needs at least one query image")
    config = PipelineConfig.from_dict(model.pipeline_config)
    _check_backend(config, backend)

    per_image = []
    for image, box in queries:
        tensor = backend.extract(image, box, flipped=False)
        vec = pool_and_flatten(
            tensor, config.layer_name, config.input_resolution, config.pool_size,
            flipped=False,
        )
        if vec.dim != model.pca.input_dim:
            raise ProvenanceConflictError(
                f"query features have dim {vec.dim}, model expects "
                f"{model.pca.input_dim}; backend and model configs disagree"
            )
        projected = project_matrix(model.pca, vec.values[np.newaxis, :])
        probs = calibrated_matrix(model.svm, projected)[0]
        per_image.append(
            ScoreVector(classes=model.svm.classes, values=probs, kind="calibrated")
        )
    combined = aggregate(per_image)
    return make_ranking(combined, query_image_count=len(per_image))
