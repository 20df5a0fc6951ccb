import io
import json
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient
from PIL import Image

from herdid.archive import save_archive
from herdid.backend import BackendConfig, StubBackend
from herdid.detect import StubDetector
from herdid.manifest import save_manifest, stratified_split
from herdid.pipeline import PipelineConfig, train_pipeline
from herdid.service import create_app
from herdid.synthetic import uniform_manifest

CONFIG = dict(layer_name="activation_43", input_resolution=256, pool_size=None,
              calibration_folds=2, seed=3)


def backend_factory(config):
    return StubBackend(
        BackendConfig(layer_name=config.layer_name,
                      input_resolution=config.input_resolution),
        noise_scale=0.05,
    )


def png_bytes(seed=0, size=(48, 32)):
    rng = np.random.default_rng(seed)
    arr = rng.integers(0, 255, size=(size[1], size[0], 3), dtype=np.uint8)
    buf = io.BytesIO()
    Image.fromarray(arr, "RGB").save(buf, format="PNG")
    return buf.getvalue()


def make_model_file(data_dir):
    manifest = stratified_split(uniform_manifest(6, 6, seed=3), 0.25, seed=3)
    config = PipelineConfig(**CONFIG)
    archive = train_pipeline(manifest, config, backend_factory(config))
    save_archive(archive, data_dir / "model.eid")


@pytest.fixture
def client(tmp_path):
    make_model_file(tmp_path)
    app = create_app(tmp_path, backend_factory, detector=StubDetector())
    with TestClient(app) as c:
        yield c


@pytest.fixture
def bare_client(tmp_path):
    app = create_app(tmp_path / "empty", backend_factory, detector=None)
    with TestClient(app) as c:
        yield c


def upload(client, seed=0):
    r = client.post("/api/v1/images", content=png_bytes(seed))
    assert r.status_code == 200
    return r.json()["image_id"]


def identify_payload(image_ids, session_id=None):
    items = [
        {"image_id": i, "box": {"x": 0.1, "y": 0.1, "w": 0.5, "h": 0.5}}
        for i in image_ids
    ]
    payload = {"items": items}
    if session_id:
        payload["session_id"] = session_id
    return payload


class TestUpload:
    def test_upload_and_media(self, client):
        image_id = upload(client)
        assert len(image_id) == 16
        media = client.get(f"/media/{image_id}.png")
        assert media.status_code == 200
        assert media.content == png_bytes(0)

    def test_idempotent_by_content(self, client):
        assert upload(client, seed=1) == upload(client, seed=1)
        assert upload(client, seed=1) != upload(client, seed=2)

    def test_corrupt_bytes_415(self, client):
        r = client.post("/api/v1/images", content=b"not an image at all")
        assert r.status_code == 415

    def test_oversize_413(self, tmp_path):
        app = create_app(tmp_path / "small", backend_factory, max_upload_bytes=100)
        with TestClient(app) as c:
            r = c.post("/api/v1/images", content=png_bytes())
            assert r.status_code == 413


class TestDetect:
    def test_proposals_deterministic(self, client):
        image_id = upload(client)
        r1 = client.post(f"/api/v1/images/{image_id}/detect")
        r2 = client.post(f"/api/v1/images/{image_id}/detect")
        assert r1.status_code == 200
        assert r1.json() == r2.json()
        assert len(r1.json()["detections"]) >= 2

    def test_unknown_image_404(self, client):
        assert client.post("/api/v1/images/zzzz/detect").status_code == 404

    def test_no_detector_503(self, bare_client):
        image_id = upload(bare_client)
        r = bare_client.post(f"/api/v1/images/{image_id}/detect")
        assert r.status_code == 503


class TestIdentify:
    def test_no_model_409(self, bare_client):
        image_id = upload(bare_client)
        r = bare_client.post("/api/v1/identify", json=identify_payload([image_id]))
        assert r.status_code == 409

    def test_unknown_image_404(self, client):
        r = client.post("/api/v1/identify", json=identify_payload(["missing"]))
        assert r.status_code == 404

    def test_invalid_box_422(self, client):
        image_id = upload(client)
        payload = {"items": [{"image_id": image_id,
                              "box": {"x": 0.8, "y": 0.1, "w": 0.5, "h": 0.5}}]}
        r = client.post("/api/v1/identify", json=payload)
        assert r.status_code == 422

    def test_happy_path_single_and_joint(self, client):
        a, b = upload(client, 1), upload(client, 2)
        r = client.post("/api/v1/identify", json=identify_payload([a, b]))
        assert r.status_code == 200
        body = r.json()
        assert body["query_image_count"] == 2
        assert body["model_version"]
        ranking = body["ranking"]
        assert len(ranking) == min(10, 6)
        confs = [c["confidence"] for c in ranking]
        assert confs == sorted(confs, reverse=True)
        for candidate in ranking:
            assert 1 <= len(candidate["representative_image_ids"]) <= 5

    def test_session_round_trip(self, client):
        image_id = upload(client)
        r1 = client.post("/api/v1/identify",
                         json=identify_payload([image_id], "sess1"))
        assert r1.json()["session_id"] == "sess1"


class TestConfirm:
    def test_confirm_before_identify_409(self, client):
        r = client.post("/api/v1/confirmations",
                        json={"session_id": "ghost", "individual_id": "e000"})
        assert r.status_code == 409

    def test_confirm_top1_persisted(self, client, tmp_path):
        image_id = upload(client)
        body = client.post(
            "/api/v1/identify", json=identify_payload([image_id], "sess2")
        ).json()
        top1 = body["ranking"][0]["individual_id"]
        r = client.post("/api/v1/confirmations",
                        json={"session_id": "sess2", "individual_id": top1})
        assert r.status_code == 200
        record = r.json()
        assert record["individual_id"] == top1
        assert record["image_ids"] == [image_id]
        stored = list((tmp_path / "confirmations").glob("*.json"))
        assert len(stored) == 1
        assert json.loads(stored[0].read_text())["individual_id"] == top1

    def test_confirm_unknown_sentinel(self, client):
        image_id = upload(client)
        client.post("/api/v1/identify", json=identify_payload([image_id], "sess3"))
        r = client.post("/api/v1/confirmations",
                        json={"session_id": "sess3", "individual_id": "unknown"})
        assert r.status_code == 200

    def test_confirm_nonexistent_individual_404(self, client):
        image_id = upload(client)
        client.post("/api/v1/identify", json=identify_payload([image_id], "sess4"))
        r = client.post("/api/v1/confirmations",
                        json={"session_id": "sess4", "individual_id": "martian"})
        assert r.status_code == 404


class TestIndividuals:
    def test_list_and_detail(self, client):
        listing = client.get("/api/v1/individuals").json()
        assert len(listing["individuals"]) == 6
        first = listing["individuals"][0]["id"]
        detail = client.get(f"/api/v1/individuals/{first}").json()
        assert detail["id"] == first
        assert detail["training_image_count"] >= 1

    def test_unknown_individual_404(self, client):
        assert client.get("/api/v1/individuals/nobody").status_code == 404

    def test_empty_gallery_without_model(self, bare_client):
        listing = bare_client.get("/api/v1/individuals").json()
        assert listing == {"model_version": None, "individuals": []}


class TestTraining:
    def write_manifest(self, data_dir, n_classes=5):
        manifest = uniform_manifest(n_classes, 6, seed=4)
        save_manifest(manifest, data_dir / "train.jsonl")

    def wait_for(self, client, job_id, timeout=30.0):
        deadline = time.time() + timeout
        while time.time() < deadline:
            job = client.get(f"/api/v1/train/{job_id}").json()
            if job["status"] in ("done", "failed"):
                return job
            time.sleep(0.05)
        raise TimeoutError("training job did not finish")

    def test_job_lifecycle_and_snapshot_swap(self, tmp_path):
        app = create_app(tmp_path, backend_factory, detector=None)
        with TestClient(app) as client:
            assert client.get("/api/v1/healthz").json()["model_version"] is None
            self.write_manifest(tmp_path)
            r = client.post("/api/v1/train",
                            json={"manifest_path": "train.jsonl", "config": CONFIG})
            assert r.status_code == 200
            job = self.wait_for(client, r.json()["job_id"])
            assert job["status"] == "done", job
            version = job["model_version"]
            assert client.get("/api/v1/healthz").json()["model_version"] == version

            image_id = upload(client)
            out = client.post("/api/v1/identify", json=identify_payload([image_id]))
            assert out.json()["model_version"] == version

    def test_unknown_job_404(self, client):
        assert client.get("/api/v1/train/job-9999").status_code == 404

    def test_missing_manifest_404(self, client):
        r = client.post("/api/v1/train", json={"manifest_path": "absent.jsonl"})
        assert r.status_code == 404

    def test_concurrent_training_409(self, tmp_path):
        class SlowBackend(StubBackend):
            def extract(self, image, box, flipped):
                time.sleep(0.02)
                return super().extract(image, box, flipped)

        def slow_factory(config):
            return SlowBackend(
                BackendConfig(layer_name=config.layer_name,
                              input_resolution=config.input_resolution),
                noise_scale=0.05,
            )

        app = create_app(tmp_path, slow_factory, detector=None)
        with TestClient(app) as client:
            self.write_manifest(tmp_path)
            first = client.post("/api/v1/train",
                                json={"manifest_path": "train.jsonl",
                                      "config": CONFIG})
            assert first.status_code == 200
            second = client.post("/api/v1/train",
                                 json={"manifest_path": "train.jsonl",
                                       "config": CONFIG})
            assert second.status_code == 409
            self.wait_for(client, first.json()["job_id"])

    def test_retrain_changes_version(self, tmp_path):
        app = create_app(tmp_path, backend_factory, detector=None)
        with TestClient(app) as client:
            self.write_manifest(tmp_path, n_classes=5)
            j1 = self.wait_for(client, client.post(
                "/api/v1/train",
                json={"manifest_path": "train.jsonl", "config": CONFIG},
            ).json()["job_id"])
            self.write_manifest(tmp_path, n_classes=7)
            j2 = self.wait_for(client, client.post(
                "/api/v1/train",
                json={"manifest_path": "train.jsonl", "config": CONFIG},
            ).json()["job_id"])
            assert j1["model_version"] != j2["model_version"]


class TestRestart:
    def test_identify_reproducible_across_restart(self, tmp_path):
        make_model_file(tmp_path)
        app1 = create_app(tmp_path, backend_factory, detector=StubDetector())
        with TestClient(app1) as c1:
            image_id = upload(c1)
            out1 = c1.post("/api/v1/identify", json=identify_payload([image_id]))

        app2 = create_app(tmp_path, backend_factory, detector=StubDetector())
        with TestClient(app2) as c2:
            out2 = c2.post("/api/v1/identify", json=identify_payload([image_id]))

        b1, b2 = out1.json(), out2.json()
        assert b1["model_version"] == b2["model_version"]
        assert b1["ranking"] == b2["ranking"]


class TestReport:
    def test_missing_report_404(self, client):
        assert client.get("/api/v1/report").status_code == 404

    def test_stored_report_served(self, tmp_path, client):
        (tmp_path / "report.json").write_text(json.dumps({"rows": []}))
        assert client.get("/api/v1/report").json() == {"rows": []}


def test_healthz(client):
    body = client.get("/api/v1/healthz").json()
    assert body["status"] == "ok"
    assert body["model_version"]


class TestUiMount:
    def test_ui_served_when_configured(self, tmp_path):
        ui = tmp_path / "ui"
        ui.mkdir()
        (ui / "index.html").write_text("<html><body>review ui</body></html>")
        app = create_app(tmp_path / "data", backend_factory, ui_dir=ui)
        with TestClient(app) as client:
            r = client.get("/")
            assert r.status_code == 200
            assert "review ui" in r.text
            # API routes still win over the catch-all mount.
            assert client.get("/api/v1/healthz").status_code == 200
