import numpy as np
import pytest

from herdid.errors import DimensionMismatchError, InsufficientSamplesError
from herdid.pca import fit_pca, project, project_matrix
from herdid.types import FeatureVector, Provenance

PROV = Provenance(layer_name="l", input_resolution=256)


def dense_pca_oracle(x, target_dim):
    """Full eigendecomposition of the covariance matrix (independent route)."""
    x = np.asarray(x, dtype=np.float64)
    n, d = x.shape
    r = min(target_dim, n - 1, d)
    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / (n - 1)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1][:r]
    comps = evecs[:, order].T.copy()
    for i in range(r):
        j = int(np.argmax(np.abs(comps[i])))
        if comps[i, j] < 0:
            comps[i] = -comps[i]
    return mean, comps, evals[order]


def test_two_point_symmetric_case():
    x = np.array([[-3.0, 0.0], [3.0, 0.0]])
    m = fit_pca(x, target_dim=5)
    assert np.allclose(m.mean, [0.0, 0.0])
    assert m.rank == 1
    assert np.allclose(m.components, [[1.0, 0.0]])
    v = FeatureVector(np.array([3.0, 0.0]), PROV)
    p = project(m, v)
    assert np.allclose(p.values, [3.0])
    assert p.provenance.pca_applied


def test_projection_of_mean_is_zero(rng):
    x = rng.normal(size=(12, 5))
    m = fit_pca(x, 4)
    assert np.allclose(project_matrix(m, m.mean[np.newaxis, :]), 0.0, atol=1e-12)


def test_matches_dense_oracle(rng):
    for _ in range(100):
        n = int(rng.integers(3, 31))
        d = int(rng.integers(2, 21))
        target = int(rng.integers(1, d + 3))
        x = rng.normal(size=(n, d)) * rng.uniform(0.5, 3.0)
        m = fit_pca(x, target)
        mean, comps, evals = dense_pca_oracle(x, target)
        assert np.allclose(m.mean, mean, atol=1e-12)
        got = project_matrix(m, x)
        want = (x - mean) @ comps.T
        assert np.allclose(got, want, atol=1e-8)
        assert np.allclose(m.explained_variance, evals, atol=1e-8)


def test_components_orthonormal(rng):
    x = rng.normal(size=(20, 12))
    m = fit_pca(x, 8)
    gram = m.components @ m.components.T
    assert np.allclose(gram, np.eye(m.rank), atol=1e-9)


def test_explained_variance_non_increasing_and_bounded(rng):
    x = rng.normal(size=(25, 10))
    m = fit_pca(x, 10)
    ev = m.explained_variance
    assert np.all(np.diff(ev) <= 1e-12)
    assert np.all(ev >= 0)
    total = ((x - x.mean(0)) ** 2).sum() / (len(x) - 1)
    assert ev.sum() <= total * (1 + 1e-8)


def test_projection_variance_equals_explained_variance(rng):
    x = rng.normal(size=(40, 8))
    m = fit_pca(x, 6)
    z = project_matrix(m, x)
    assert np.allclose(z.var(axis=0, ddof=1), m.explained_variance, rtol=1e-6)


def test_reconstruction_error_non_increasing_in_rank(rng):
    x = rng.normal(size=(15, 9))
    errs = []
    for r in range(1, min(len(x) - 1, 9) + 1):
        m = fit_pca(x, r)
        z = project_matrix(m, x)
        recon = z @ m.components + m.mean
        errs.append(((x - recon) ** 2).sum())
    assert all(errs[i + 1] <= errs[i] + 1e-9 for i in range(len(errs) - 1))


def test_rank_clamps_to_samples_minus_one(rng):
    x = rng.normal(size=(5, 20))
    m = fit_pca(x, 100)
    assert m.rank == 4


def test_deterministic_bit_identical(rng):
    x = rng.normal(size=(18, 7))
    a = fit_pca(x.copy(), 5)
    b = fit_pca(x.copy(), 5)
    assert np.array_equal(a.components, b.components)
    assert np.array_equal(a.mean, b.mean)
    assert np.array_equal(a.explained_variance, b.explained_variance)


def test_errors():
    with pytest.raises(InsufficientSamplesError):
        fit_pca(np.ones((1, 4)), 2)
    m = fit_pca(np.random.default_rng(0).normal(size=(6, 4)), 2)
    with pytest.raises(DimensionMismatchError):
        project(m, FeatureVector(np.zeros(9), PROV))
    with pytest.raises(ValueError):
        fit_pca(np.ones((4, 4)), 0)
