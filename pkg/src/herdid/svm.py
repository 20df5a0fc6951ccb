"""One-vs-rest linear SVM with per-class Platt calibration.

Each class is trained against the rest as an L1-hinge, L2-regularized
binary problem solved by dual coordinate descent (see ``_kernels.svm``).
Calibration fits a per-class sigmoid p = 1 / (1 + exp(A * s + B)) to
out-of-fold margins, giving the comparable per-class confidences that
cross-image averaging needs.
"""

from dataclasses import dataclass, field, replace
from typing import Optional, Union

import numpy as np

from ._kernels.svm import dual_cd_kernel
from .errors import (
    DimensionMismatchError,
    NotCalibratedError,
    SingleClassError,
)

DEFAULT_TOL = 1e-3
DEFAULT_MAX_EPOCHS = 1000


@dataclass(frozen=True)
class ScoreVector:
    """Per-class scores aligned with an SvmModel's class order."""

    classes: tuple
    values: np.ndarray
    kind: str  # "margin" or "calibrated"

    def __post_init__(self):
        if self.kind not in ("margin", "calibrated"):
            raise ValueError(f"unknown score kind {self.kind!r}")
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (len(self.classes),):
            raise ValueError("scores misaligned with class list")
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class SvmModel:
    classes: tuple                 # K ordered individual ids
    weights: np.ndarray            # (K, D)
    biases: np.ndarray             # (K,)
    c: float
    class_weights: dict
    bias_scale: float = 1.0
    calibration_a: Optional[np.ndarray] = None   # (K,), A_k < 0 after a good fit
    calibration_b: Optional[np.ndarray] = None
    calibration_info: dict = field(default_factory=dict)
    fit_info: dict = field(default_factory=dict)

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    @property
    def dim(self) -> int:
        return int(self.weights.shape[1])

    @property
    def is_calibrated(self) -> bool:
        return self.calibration_a is not None


def _resolve_class_weights(classes, y, mode) -> dict:
    if isinstance(mode, dict):
        return {k: float(mode.get(k, 1.0)) for k in classes}
    if mode == "uniform":
        return {k: 1.0 for k in classes}
    if mode == "balanced":
        n = len(y)
        k = len(classes)
        counts = {c: 0 for c in classes}
        for label in y:
            counts[label] += 1
        return {c: n / (k * counts[c]) for c in classes}
    raise ValueError(f"unknown class_weights mode {mode!r}")


def train_svm(
    x: np.ndarray,
    y,
    c: float = 1.0,
    class_weights: Union[str, dict] = "balanced",
    bias_scale: float = 1.0,
    tol: float = DEFAULT_TOL,
    max_epochs: int = DEFAULT_MAX_EPOCHS,
    seed: int = 0,
) -> SvmModel:
    """Train one binary dual-CD problem per class; returns an uncalibrated model."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.asarray(y)
    if x.ndim != 2:
        raise ValueError(f"expected 2-D training matrix, got shape {x.shape}")
    n, d = x.shape
    if n < 2:
        raise ValueError(f"need at least 2 samples, got {n}")
    if len(y) != n:
        raise ValueError("label count does not match sample count")
    if not np.all(np.isfinite(x)):
        raise ValueError("training matrix contains non-finite values")
    if c <= 0:
        raise ValueError(f"C must be positive, got {c}")

    classes = tuple(sorted(set(y.tolist())))
    if len(classes) < 2:
        raise SingleClassError("training data contains a single class")

    weights_map = _resolve_class_weights(classes, y, class_weights)
    # Per-sample dual upper bound: C times the weight of the sample's own class.
    upper = np.array([c * weights_map[label] for label in y], dtype=np.float64)

    aug = np.hstack([x, np.full((n, 1), bias_scale, dtype=np.float64)])
    aug = np.ascontiguousarray(aug)
    qii = np.einsum("ij,ij->i", aug, aug)

    k = len(classes)
    w_out = np.empty((k, d), dtype=np.float64)
    b_out = np.empty(k, dtype=np.float64)
    alphas = []
    epochs_run = []
    final_viol = []
    for ki, cls in enumerate(classes):
        t = np.where(y == cls, 1.0, -1.0)
        w_full, alpha, epochs, viol = dual_cd_kernel(
            aug, t, upper, qii, tol, max_epochs, seed + ki
        )
        w_out[ki] = w_full[:-1]
        b_out[ki] = w_full[-1] * bias_scale
        alphas.append(alpha)
        epochs_run.append(int(epochs))
        final_viol.append(float(viol))

    return SvmModel(
        classes=classes,
        weights=w_out,
        biases=b_out,
        c=float(c),
        class_weights=weights_map,
        bias_scale=float(bias_scale),
        fit_info={
            "tol": tol,
            "max_epochs": max_epochs,
            "epochs": epochs_run,
            "max_violation": final_viol,
            "dual_coef": alphas,
            "sample_upper_bounds": upper,
        },
    )


def decision_matrix(m: SvmModel, x: np.ndarray) -> np.ndarray:
    """Margins for a batch: rows are samples, columns follow ``m.classes``."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != m.dim:
        raise DimensionMismatchError(f"expected dim {m.dim}, got {x.shape[-1]}")
    return x @ m.weights.T + m.biases


def decision_scores(m: SvmModel, values: np.ndarray) -> ScoreVector:
    values = np.asarray(values, dtype=np.float64).ravel()
    margins = decision_matrix(m, values[np.newaxis, :])[0]
    return ScoreVector(classes=m.classes, values=margins, kind="margin")


def hinge_objectives(m: SvmModel, x: np.ndarray, y, class_index: int):
    """Primal and dual objective of one binary subproblem at the stored solution.

    Used for duality-gap checks; requires the training data the model was
    fitted on.
    """
    x = np.asarray(x, dtype=np.float64)
    cls = m.classes[class_index]
    t = np.where(np.asarray(y) == cls, 1.0, -1.0)
    upper = m.fit_info["sample_upper_bounds"]
    alpha = m.fit_info["dual_coef"][class_index]

    w_full = np.concatenate([m.weights[class_index], [m.biases[class_index] / m.bias_scale]])
    aug = np.hstack([x, np.full((x.shape[0], 1), m.bias_scale)])
    margins = t * (aug @ w_full)
    primal = 0.5 * w_full @ w_full + np.sum(upper * np.maximum(0.0, 1.0 - margins))
    dual = alpha.sum() - 0.5 * w_full @ w_full
    return primal, dual


# ---------------------------------------------------------------------------
# Platt calibration
# ---------------------------------------------------------------------------

def _stable_inv_logit(z: np.ndarray) -> np.ndarray:
    """1 / (1 + exp(z)) without overflow for large |z|."""
    ez = np.exp(-np.abs(z))
    return np.where(z >= 0, ez / (1.0 + ez), 1.0 / (1.0 + ez))


def _fit_sigmoid(scores: np.ndarray, positive: np.ndarray,
                 max_iter: int = 200, min_step: float = 1e-10,
                 ridge: float = 1e-12):
    """Newton fit of p = 1/(1+exp(A*s+B)) with Platt's smoothed targets.

    Follows the robust formulation of Lin, Lin and Weng: stable objective
    evaluation, Levenberg ridge on the Hessian, and a backtracking line
    search. Returns (A, B, converged).
    """
    scores = np.asarray(scores, dtype=np.float64)
    positive = np.asarray(positive, dtype=bool)
    prior1 = float(positive.sum())
    prior0 = float(len(positive) - prior1)
    hi = (prior1 + 1.0) / (prior1 + 2.0)
    lo = 1.0 / (prior0 + 2.0)
    t = np.where(positive, hi, lo)

    def objective(a, b):
        z = a * scores + b
        # -[t*log p + (1-t)*log(1-p)] with p = 1/(1+exp(z)), stably:
        pos_z = z >= 0
        out = np.where(pos_z, t * z + np.log1p(np.exp(-np.abs(z))),
                       (t - 1.0) * z + np.log1p(np.exp(-np.abs(z))))
        return float(out.sum())

    a = 0.0
    b = np.log((prior0 + 1.0) / (prior1 + 1.0))
    fval = objective(a, b)

    for _ in range(max_iter):
        z = a * scores + b
        p = _stable_inv_logit(z)
        q = 1.0 - p
        d2 = p * q
        h11 = float(scores @ (scores * d2)) + ridge
        h22 = float(d2.sum()) + ridge
        h21 = float(scores @ d2)
        d1 = t - p
        g1 = float(scores @ d1)
        g2 = float(d1.sum())
        if abs(g1) < 1e-5 and abs(g2) < 1e-5:
            return a, b, True
        det = h11 * h22 - h21 * h21
        da = -(h22 * g1 - h21 * g2) / det
        db = -(-h21 * g1 + h11 * g2) / det
        gd = g1 * da + g2 * db
        step = 1.0
        while step >= min_step:
            na = a + step * da
            nb = b + step * db
            nf = objective(na, nb)
            if nf < fval + 1e-4 * step * gd:
                a, b, fval = na, nb, nf
                break
            step /= 2.0
        else:
            return a, b, False
    return a, b, True


def _fold_assignment(y, classes, folds, seed):
    """Per-class round-robin folds after a seeded shuffle.

    Classes with fewer samples than folds get fold -1: they stay on every
    fold's training side and are scored in-sample.
    """
    y = np.asarray(y)
    assignment = np.full(len(y), -1, dtype=np.int64)
    rng = np.random.default_rng(seed)
    small = []
    for cls in classes:
        idx = np.flatnonzero(y == cls)
        if len(idx) < folds:
            small.append(cls)
            continue
        idx = idx[rng.permutation(len(idx))]
        for pos, sample in enumerate(idx):
            assignment[sample] = pos % folds
    return assignment, small


def fit_calibration(
    m: SvmModel,
    x: np.ndarray,
    y,
    folds: int = 3,
    seed: int = 0,
) -> SvmModel:
    """Fit per-class sigmoids on out-of-fold margins; returns a calibrated model."""
    if folds < 2:
        raise ValueError(f"folds must be >= 2, got {folds}")
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y)
    unknown = set(y.tolist()) - set(m.classes)
    if unknown:
        raise ValueError(f"labels not in the model's class list: {sorted(unknown)}")

    assignment, in_sample_classes = _fold_assignment(y, m.classes, folds, seed)
    margins = np.empty((len(y), m.n_classes), dtype=np.float64)

    in_sample_rows = assignment == -1
    if in_sample_rows.any():
        margins[in_sample_rows] = decision_matrix(m, x[in_sample_rows])

    for f in range(folds):
        held = assignment == f
        if not held.any():
            continue
        train_rows = ~held
        sub = train_svm(
            x[train_rows], y[train_rows],
            c=m.c, class_weights=m.class_weights, bias_scale=m.bias_scale,
            tol=m.fit_info.get("tol", DEFAULT_TOL),
            max_epochs=m.fit_info.get("max_epochs", DEFAULT_MAX_EPOCHS),
            seed=seed,
        )
        sub_margins = decision_matrix(sub, x[held])
        col = {cls: i for i, cls in enumerate(sub.classes)}
        for ki, cls in enumerate(m.classes):
            # Every class keeps >= 1 training sample per fold by construction.
            margins[held, ki] = sub_margins[:, col[cls]]

    a_out = np.empty(m.n_classes)
    b_out = np.empty(m.n_classes)
    fallback = []
    for ki, cls in enumerate(m.classes):
        s = margins[:, ki]
        positive = y == cls
        if np.ptp(s) == 0.0:
            a_out[ki], b_out[ki] = -1.0, 0.0
            fallback.append(cls)
            continue
        a, b, converged = _fit_sigmoid(s, positive)
        if not converged or a >= 0:
            # A non-negative slope means margins carry no usable signal for
            # this class; fall back to the neutral sigmoid and flag it.
            a_out[ki], b_out[ki] = -1.0, 0.0
            fallback.append(cls)
        else:
            a_out[ki], b_out[ki] = a, b

    return replace(
        m,
        calibration_a=a_out,
        calibration_b=b_out,
        calibration_info={
            "folds": folds,
            "seed": seed,
            "fallback_classes": fallback,
            "in_sample_classes": in_sample_classes,
        },
    )


def calibrated_matrix(m: SvmModel, x: np.ndarray) -> np.ndarray:
    """Row-wise calibrated, sum-1 probabilities for a batch."""
    if not m.is_calibrated:
        raise NotCalibratedError("model has no fitted calibration")
    margins = decision_matrix(m, x)
    p = _stable_inv_logit(m.calibration_a * margins + m.calibration_b)
    p = np.clip(p, 1e-300, None)
    return p / p.sum(axis=-1, keepdims=True)


def calibrated_probs(m: SvmModel, values: np.ndarray) -> ScoreVector:
    values = np.asarray(values, dtype=np.float64).ravel()
    probs = calibrated_matrix(m, values[np.newaxis, :])[0]
    return ScoreVector(classes=m.classes, values=probs, kind="calibrated")
