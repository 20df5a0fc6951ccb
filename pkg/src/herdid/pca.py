"""Principal component analysis via SVD of the centered data matrix.

The retained rank is min(target_dim, N - 1, D): N - 1 because centering
removes one degree of freedom, D because there are no more directions.
Components carry a deterministic sign: the entry of largest magnitude in
each component is made positive, so identical input yields an identical
model bit for bit.
"""

from dataclasses import dataclass, replace

import numpy as np

from .errors import DimensionMismatchError, InsufficientSamplesError
from .types import FeatureVector


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray            # (D,)
    components: np.ndarray      # (R, D), orthonormal rows
    explained_variance: np.ndarray  # (R,), non-increasing

    @property
    def input_dim(self) -> int:
        return int(self.mean.shape[0])

    @property
    def rank(self) -> int:
        return int(self.components.shape[0])


def _fix_signs(components: np.ndarray) -> np.ndarray:
    """Flip each row so its largest-magnitude entry is positive."""
    out = components.copy()
    for i in range(out.shape[0]):
        j = int(np.argmax(np.abs(out[i])))
        if out[i, j] < 0:
            out[i] = -out[i]
    return out


def fit_pca(x: np.ndarray, target_dim: int) -> PcaModel:
    """Fit on an N x D matrix, keeping at most ``target_dim`` components."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"expected a 2-D data matrix, got shape {x.shape}")
    n, d = x.shape
    if n < 2:
        raise InsufficientSamplesError(f"PCA needs at least 2 samples, got {n}")
    if target_dim < 1:
        raise ValueError(f"target_dim must be >= 1, got {target_dim}")
    if not np.all(np.isfinite(x)):
        raise ValueError("data matrix contains non-finite values")

    r = min(target_dim, n - 1, d)
    mean = x.mean(axis=0)
    centered = x - mean
    _, s, vh = np.linalg.svd(centered, full_matrices=False)
    components = _fix_signs(vh[:r])
    explained = (s[:r] ** 2) / (n - 1)
    return PcaModel(mean=mean, components=components, explained_variance=explained)


def project_matrix(m: PcaModel, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != m.input_dim:
        raise DimensionMismatchError(
            f"expected dim {m.input_dim}, got {x.shape[-1]}"
        )
    return (x - m.mean) @ m.components.T


def project(m: PcaModel, v: FeatureVector) -> FeatureVector:
    """Center and project one feature vector; marks provenance pca_applied."""
    if v.dim != m.input_dim:
        raise DimensionMismatchError(f"expected dim {m.input_dim}, got {v.dim}")
    values = project_matrix(m, v.values[np.newaxis, :])[0]
    return FeatureVector(values, replace(v.provenance, pca_applied=True))
