import numpy as np
import pytest

from herdid.archive import (
    ModelArchive,
    archive_digest,
    load_archive,
    save_archive,
)
from herdid.errors import ArchiveFormatError
from herdid.pca import fit_pca, project_matrix
from herdid.svm import fit_calibration, train_svm
from herdid.types import Individual


def build_archive(rng):
    x = rng.normal(size=(18, 6))
    y = np.array(["ada", "bea", "cleo"] * 6)
    x[:, 0] += np.array([{"ada": -3.0, "bea": 0.0, "cleo": 3.0}[label] for label in y])
    pca = fit_pca(x, 5)
    z = project_matrix(pca, x)
    svm = train_svm(z, y)
    svm = fit_calibration(svm, z, y, folds=2)
    gallery = tuple(
        Individual(id=c, name=c.title(), representative_image_ids=(f"{c}_01",))
        for c in svm.classes
    )
    return ModelArchive(
        pipeline_config={"layer_name": "activation_40", "input_resolution": 512,
                         "pool_size": 6},
        pca=pca,
        svm=svm,
        gallery=gallery,
        training_summary={"n_train_images": 18, "n_classes": 3},
    )


def test_round_trip_bit_exact(tmp_path, rng):
    archive = build_archive(rng)
    path = tmp_path / "model.eid"
    save_archive(archive, path)
    loaded = load_archive(path)

    assert np.array_equal(loaded.pca.mean, archive.pca.mean)
    assert np.array_equal(loaded.pca.components, archive.pca.components)
    assert np.array_equal(loaded.svm.weights, archive.svm.weights)
    assert np.array_equal(loaded.svm.biases, archive.svm.biases)
    assert loaded.svm.classes == archive.svm.classes
    assert np.array_equal(loaded.svm.calibration_a, archive.svm.calibration_a)
    assert np.array_equal(loaded.svm.calibration_b, archive.svm.calibration_b)
    assert loaded.gallery == archive.gallery
    assert loaded.pipeline_config == archive.pipeline_config
    assert loaded.training_summary == archive.training_summary
    assert loaded.format_version == 1


def test_magic_bytes(tmp_path, rng):
    path = tmp_path / "model.eid"
    save_archive(build_archive(rng), path)
    assert path.read_bytes()[:4] == b"EID1"


def test_bad_magic_rejected(tmp_path):
    path = tmp_path / "junk.eid"
    path.write_bytes(b"NOPE" + b"\x00" * 64)
    with pytest.raises(ArchiveFormatError):
        load_archive(path)


def test_truncated_file_rejected(tmp_path, rng):
    path = tmp_path / "model.eid"
    save_archive(build_archive(rng), path)
    raw = path.read_bytes()
    path.write_bytes(raw[: len(raw) - 16])
    with pytest.raises(ArchiveFormatError):
        load_archive(path)


def test_save_is_atomic_on_failure(tmp_path, rng, monkeypatch):
    path = tmp_path / "model.eid"
    archive = build_archive(rng)
    save_archive(archive, path)
    original = path.read_bytes()

    import pathlib

    def explode(self, target):
        raise OSError("simulated crash before rename")

    monkeypatch.setattr(pathlib.Path, "replace", explode)
    with pytest.raises(OSError):
        save_archive(build_archive(np.random.default_rng(99)), path)
    monkeypatch.undo()
    assert path.read_bytes() == original
    assert np.array_equal(load_archive(path).pca.mean, archive.pca.mean)


def test_digest_stable_and_content_sensitive(tmp_path, rng):
    p1 = tmp_path / "a.eid"
    p2 = tmp_path / "b.eid"
    archive = build_archive(rng)
    save_archive(archive, p1)
    save_archive(archive, p2)
    assert archive_digest(p1) == archive_digest(p2)
    other = build_archive(np.random.default_rng(4242))
    p3 = tmp_path / "c.eid"
    save_archive(other, p3)
    assert archive_digest(p3) != archive_digest(p1)


def test_uncalibrated_model_round_trips(tmp_path, rng):
    x = rng.normal(size=(10, 4))
    y = np.array(["a", "b"] * 5)
    svm = train_svm(x, y)
    archive = ModelArchive(
        pipeline_config={}, pca=fit_pca(x, 3), svm=svm, gallery=(),
        training_summary={},
    )
    path = tmp_path / "m.eid"
    save_archive(archive, path)
    loaded = load_archive(path)
    assert loaded.svm.calibration_a is None
    assert not loaded.svm.is_calibrated
