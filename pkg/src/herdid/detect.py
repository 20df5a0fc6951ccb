"""Head-box proposal, non-maximum suppression, and detection metrics.

Boxes are fractions of image size, so areas and overlaps are continuous
quantities (no pixel +1 conventions). Evaluation is single-class: mean
average precision equals the average precision of the head class.
"""

from dataclasses import dataclass

import numpy as np

from .backend import _seed_from, preprocess_crop
from .errors import BackendError
from .types import BoundingBox, ImageInput


@dataclass(frozen=True)
class Detection:
    box: BoundingBox
    score: float

    def __post_init__(self):
        if not 0 <= self.score <= 1:
            raise ValueError(f"score must be in [0, 1], got {self.score}")


@dataclass(frozen=True)
class DetectionEvalResult:
    precision: float
    recall: float
    average_precision: float
    tp: int
    fp: int
    fn: int
    degenerate: bool = False  # no predictions at all: precision reported as 0


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union; 0 for disjoint boxes.

    Areas are derived from corner coordinates with the same arithmetic as
    the intersection, so identical boxes give exactly 1.0.
    """
    ax2, ay2 = a.x + a.w, a.y + a.h
    bx2, by2 = b.x + b.w, b.y + b.h
    ix = max(0.0, min(ax2, bx2) - max(a.x, b.x))
    iy = max(0.0, min(ay2, by2) - max(a.y, b.y))
    inter = ix * iy
    if inter <= 0:
        return 0.0
    area_a = (ax2 - a.x) * (ay2 - a.y)
    area_b = (bx2 - b.x) * (by2 - b.y)
    return inter / (area_a + area_b - inter)


def nms(dets, iou_threshold: float):
    """Greedy NMS: keep the best remaining box, drop overlaps above threshold."""
    if not 0 < iou_threshold < 1:
        raise ValueError(f"iou_threshold must be in (0, 1), got {iou_threshold}")
    remaining = sorted(dets, key=lambda d: -d.score)
    kept = []
    while remaining:
        best = remaining.pop(0)
        kept.append(best)
        remaining = [d for d in remaining if iou(best.box, d.box) <= iou_threshold]
    return kept


def _interpolated_ap(recall: np.ndarray, precision: np.ndarray) -> float:
    """Area under the PR curve with the all-point precision envelope."""
    mrec = np.concatenate([[0.0], recall])
    mpre = np.concatenate([[0.0], precision])
    # Make precision monotonically non-increasing from the right.
    for i in range(len(mpre) - 2, -1, -1):
        mpre[i] = max(mpre[i], mpre[i + 1])
    ap = 0.0
    for i in range(1, len(mrec)):
        ap += (mrec[i] - mrec[i - 1]) * mpre[i]
    return float(ap)


def evaluate_detections(predictions: dict, ground_truth: dict,
                        iou_threshold: float = 0.5) -> DetectionEvalResult:
    """Greedy matching in descending score; each ground-truth box used once.

    ``predictions`` maps image id to a list of Detection, ``ground_truth``
    maps image id to a list of BoundingBox. The image id sets must agree.
    """
    if set(predictions) != set(ground_truth):
        missing = set(predictions) ^ set(ground_truth)
        raise ValueError(f"prediction/ground-truth image ids differ: {sorted(missing)}")

    flat = []
    for image_id in sorted(predictions):
        for j, det in enumerate(predictions[image_id]):
            flat.append((det.score, image_id, j, det))
    # Stable order: score descending, then image id and insertion index.
    flat.sort(key=lambda item: (-item[0], item[1], item[2]))

    n_gt = sum(len(v) for v in ground_truth.values())
    matched = {image_id: [False] * len(v) for image_id, v in ground_truth.items()}
    tp_flags = np.zeros(len(flat), dtype=bool)
    for rank, (_, image_id, _, det) in enumerate(flat):
        best_iou = 0.0
        best_gt = -1
        for gi, gt_box in enumerate(ground_truth[image_id]):
            if matched[image_id][gi]:
                continue
            overlap = iou(det.box, gt_box)
            if overlap > best_iou:
                best_iou, best_gt = overlap, gi
        if best_gt >= 0 and best_iou >= iou_threshold:
            matched[image_id][best_gt] = True
            tp_flags[rank] = True

    tp_total = int(tp_flags.sum())
    fp_total = len(flat) - tp_total
    fn_total = n_gt - tp_total

    if not flat:
        return DetectionEvalResult(
            precision=0.0, recall=0.0, average_precision=0.0,
            tp=0, fp=0, fn=n_gt, degenerate=True,
        )

    tp_cum = np.cumsum(tp_flags)
    fp_cum = np.cumsum(~tp_flags)
    precision_curve = tp_cum / (tp_cum + fp_cum)
    recall_curve = tp_cum / n_gt if n_gt > 0 else np.zeros(len(flat))
    ap = _interpolated_ap(recall_curve, precision_curve) if n_gt > 0 else 0.0

    return DetectionEvalResult(
        precision=tp_total / (tp_total + fp_total),
        recall=tp_total / n_gt if n_gt > 0 else 0.0,
        average_precision=ap,
        tp=tp_total, fp=fp_total, fn=fn_total,
    )


# ---------------------------------------------------------------------------
# Detector backends
# ---------------------------------------------------------------------------

class StubDetector:
    """Deterministic pixel-free detector for tests and demos.

    Proposes two disjoint boxes (left and right of frame, positions jittered
    by the image id) and a third box heavily overlapping the strongest one,
    which NMS at the default threshold removes.
    """

    def __init__(self, score_range=(0.55, 0.95)):
        self.score_range = score_range

    def propose(self, image: ImageInput):
        rng = np.random.default_rng(_seed_from("detector", image.id))
        lo, hi = self.score_range
        scores = lo + (hi - lo) * rng.random(3)
        jitter = 0.05 * rng.random(4)
        left = BoundingBox(0.05 + jitter[0], 0.1 + jitter[1], 0.35, 0.5, source="detector")
        right = BoundingBox(0.55 + jitter[2], 0.15 + jitter[3], 0.35, 0.5, source="detector")
        shadow = BoundingBox(
            min(left.x + 0.02, 0.6), left.y, left.w, left.h, source="detector"
        )
        main_score = float(max(scores[0], scores[1]))
        side_score = float(min(scores[0], scores[1]))
        return [
            Detection(left, main_score),
            Detection(right, side_score),
            Detection(shadow, max(0.0, main_score - 0.1)),
        ]


class OnnxDetector:
    """ONNX detector whose graph emits decoded boxes and scores directly.

    Expected outputs: ``boxes`` with shape (N, 4) as x, y, w, h fractions and
    ``scores`` with shape (N,). Grid-cell decoding belongs in the exported
    graph, not here.
    """

    def __init__(self, model_uri: str, input_resolution: int = 512):
        try:
            import onnxruntime
        except ImportError as exc:
            raise BackendError(
                "onnxruntime is not installed; install the 'onnx' extra or use "
                "--backend stub"
            ) from exc
        try:
            self._session = onnxruntime.InferenceSession(
                model_uri, providers=["CPUExecutionProvider"]
            )
        except Exception as exc:
            raise BackendError(f"failed to load detector {model_uri}: {exc}") from exc
        self._input_name = self._session.get_inputs()[0].name
        self.input_resolution = input_resolution

    def propose(self, image: ImageInput):
        if image.data is None:
            raise BackendError(f"image {image.id!r} has no pixel source")
        full = BoundingBox(0.0, 0.0, 1.0, 1.0)
        buf = preprocess_crop(image.data, full, self.input_resolution)
        try:
            boxes, scores = self._session.run(None, {self._input_name: buf[np.newaxis]})
        except Exception as exc:
            raise BackendError(f"detector failed on image {image.id!r}: {exc}") from exc
        out = []
        for (x, y, w, h), score in zip(np.asarray(boxes), np.asarray(scores)):
            try:
                box = BoundingBox(float(x), float(y), float(w), float(h), source="detector")
            except ValueError:
                continue
            out.append(Detection(box, float(np.clip(score, 0.0, 1.0))))
        return out


def detect_heads(detector, image: ImageInput, score_threshold: float = 0.25,
                 iou_threshold: float = 0.5):
    """Propose, filter by score, suppress overlaps; sorted by score descending."""
    raw = detector.propose(image)
    kept = [d for d in raw if d.score >= score_threshold]
    return nms(kept, iou_threshold)
