"""Individual animal identification from head photographs.

Pipeline: head-box selection (detector proposals, user-correctable), CNN
activation features from a tapped intermediate layer, spatial max pooling,
PCA reduction, one-vs-rest linear SVM with per-class calibration, and
ranked candidates with multi-image confidence averaging.
"""

from .archive import ModelArchive, load_archive, save_archive
from .backend import BackendConfig, OnnxEmbeddingBackend, StubBackend, get_backend
from .detect import (
    Detection,
    DetectionEvalResult,
    StubDetector,
    detect_heads,
    evaluate_detections,
    iou,
    nms,
)
from .errors import HerdidError
from .evaluate import (
    DEFAULT_GRID,
    EvaluationReport,
    GridRow,
    build_probes,
    per_class_top_k,
    run_evaluation,
    top_k_accuracy,
)
from .feature_store import FeatureStore
from .manifest import load_manifest, save_manifest, stratified_split
from .pca import PcaModel, fit_pca, project
from .pipeline import (
    PipelineConfig,
    Ranking,
    aggregate,
    identify,
    top_k,
    train_pipeline,
)
from .pooling import flatten, max_pool
from .svm import (
    ScoreVector,
    SvmModel,
    calibrated_probs,
    decision_scores,
    fit_calibration,
    train_svm,
)
from .types import (
    ActivationTensor,
    BoundingBox,
    DatasetManifest,
    FeatureVector,
    ImageInput,
    Individual,
    ManifestEntry,
    Provenance,
)

__version__ = "0.1.0"
