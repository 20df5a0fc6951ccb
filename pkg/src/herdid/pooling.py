"""Spatial max pooling of activation tensors and flattening to feature vectors.

Pooling uses non-overlapping n x n windows with stride n in floor mode:
trailing rows/columns that do not fill a window are dropped. Output spatial
size is therefore floor(H/n) x floor(W/n) per channel.
"""

from typing import Optional

import numpy as np

from ._kernels.pooling import max_pool_kernel
from .errors import InvalidPoolSizeError
from .types import ActivationTensor, FeatureVector, Provenance


def max_pool(t: ActivationTensor, n: int) -> ActivationTensor:
    """Per-channel window max over non-overlapping n x n windows."""
    if n < 2:
        raise InvalidPoolSizeError(f"pool size must be >= 2, got {n}")
    if n > min(t.height, t.width):
        raise InvalidPoolSizeError(
            f"pool size {n} exceeds spatial extent {t.height}x{t.width}"
        )
    values = np.ascontiguousarray(t.values)
    return ActivationTensor(max_pool_kernel(values, n))


def flatten(
    t: ActivationTensor,
    layer_name: str,
    input_resolution: int,
    pool_size: Optional[int] = None,
    flipped: bool = False,
) -> FeatureVector:
    """Flatten channel-major then row-major into a provenance-tagged vector."""
    vec = np.ascontiguousarray(t.values).ravel()
    prov = Provenance(
        layer_name=layer_name,
        input_resolution=input_resolution,
        pool_size=pool_size,
        flipped=flipped,
        pca_applied=False,
    )
    return FeatureVector(vec, prov)


def pool_and_flatten(
    t: ActivationTensor,
    layer_name: str,
    input_resolution: int,
    pool_size: Optional[int],
    flipped: bool,
) -> FeatureVector:
    """Apply optional pooling, then flatten. The pipeline's per-image step."""
    if pool_size is not None:
        t = max_pool(t, pool_size)
    return flatten(t, layer_name, input_resolution, pool_size, flipped)
