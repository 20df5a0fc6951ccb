import numpy as np
import pytest

from herdid.backend import BackendConfig, StubBackend
from herdid.manifest import stratified_split
from herdid.pipeline import PipelineConfig
from herdid.synthetic import uniform_manifest


def make_fixture(n_classes=8, images_per_class=6, noise_scale=0.05, seed=3,
                 layer="activation_43", resolution=256, pool_size=None,
                 folds=2, **config_kwargs):
    """Split manifest + matching stub backend + config, clustered by class."""
    manifest = stratified_split(
        uniform_manifest(n_classes, images_per_class, seed=seed), 0.25, seed=seed
    )
    config = PipelineConfig(
        layer_name=layer,
        input_resolution=resolution,
        pool_size=pool_size,
        calibration_folds=folds,
        seed=seed,
        **config_kwargs,
    )
    backend = StubBackend(
        BackendConfig(layer_name=layer, input_resolution=resolution),
        noise_scale=noise_scale,
    )
    return manifest, config, backend


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
