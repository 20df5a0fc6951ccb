"""HTTP service for the interactive identification loop.

Endpoints live under ``/api/v1``; uploaded images are served back under
``/media``. All mutating writes follow write-then-rename, so a crash between
request and response never leaves a torn model archive, session, or
confirmation record. The serving model is an immutable snapshot swapped
atomically when a training job completes; in-flight identifications keep
scoring against the snapshot they started with.
"""

import hashlib
import io
import json
import threading
import time
from pathlib import Path
from typing import List, Optional

from fastapi import FastAPI, HTTPException, Request
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .archive import archive_digest, load_archive, save_archive
from .detect import detect_heads
from .errors import HerdidError
from .manifest import load_manifest, stratified_split
from .pipeline import PipelineConfig, identify, top_k, train_pipeline
from .types import UNKNOWN_INDIVIDUAL, BoundingBox, ImageInput

DEFAULT_MAX_UPLOAD = 10 * 1024 * 1024


class BoxPayload(BaseModel):
    x: float
    y: float
    w: float
    h: float

    def to_box(self) -> BoundingBox:
        try:
            return BoundingBox(self.x, self.y, self.w, self.h)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=f"invalid box: {exc}") from exc


class IdentifyItem(BaseModel):
    image_id: str
    box: BoxPayload


class IdentifyRequest(BaseModel):
    items: List[IdentifyItem] = Field(min_length=1)
    session_id: Optional[str] = None
    top_n: int = 10


class ConfirmRequest(BaseModel):
    session_id: str
    individual_id: str


class TrainRequest(BaseModel):
    manifest_path: str
    config: dict = Field(default_factory=dict)
    test_fraction: float = 0.25


def _atomic_write_json(path: Path, payload: dict) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with tmp.open("w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True)
    tmp.replace(path)


class ServiceState:
    def __init__(self, data_dir, backend_factory, detector=None,
                 max_upload_bytes=DEFAULT_MAX_UPLOAD):
        self.data_dir = Path(data_dir)
        self.images_dir = self.data_dir / "images"
        self.sessions_dir = self.data_dir / "sessions"
        self.confirmations_dir = self.data_dir / "confirmations"
        for d in (self.images_dir, self.sessions_dir, self.confirmations_dir):
            d.mkdir(parents=True, exist_ok=True)
        self.model_path = self.data_dir / "model.eid"
        self.backend_factory = backend_factory
        self.detector = detector
        self.max_upload_bytes = max_upload_bytes
        self.lock = threading.Lock()
        self.snapshot = None  # (archive, backend, version)
        self.jobs = {}
        self.training_active = False
        self._job_seq = 0
        if self.model_path.exists():
            self.load_snapshot(self.model_path)

    def load_snapshot(self, path) -> None:
        archive = load_archive(path)
        config = PipelineConfig.from_dict(archive.pipeline_config)
        backend = self.backend_factory(config)
        version = archive_digest(path)
        with self.lock:
            self.snapshot = (archive, backend, version)

    def current_snapshot(self):
        with self.lock:
            return self.snapshot

    def next_job_id(self) -> str:
        self._job_seq += 1
        return f"job-{self._job_seq:04d}"


def _image_path(state: ServiceState, image_id: str) -> Optional[Path]:
    hits = sorted(state.images_dir.glob(f"{image_id}.*"))
    return hits[0] if hits else None


def _session_path(state: ServiceState, session_id: str) -> Path:
    safe = "".join(c for c in session_id if c.isalnum() or c in "-_")
    if not safe or safe != session_id:
        raise HTTPException(status_code=422, detail="invalid session id")
    return state.sessions_dir / f"{safe}.json"


def _load_session(state: ServiceState, session_id: str) -> Optional[dict]:
    path = _session_path(state, session_id)
    if not path.exists():
        return None
    with path.open("r", encoding="utf-8") as fh:
        return json.load(fh)


def create_app(
    data_dir,
    backend_factory,
    detector=None,
    model_path=None,
    max_upload_bytes=DEFAULT_MAX_UPLOAD,
    ui_dir=None,
) -> FastAPI:
    """Build the service; ``backend_factory(config)`` supplies embed backends.

    ``ui_dir`` optionally points at a built review-ui checkout (the directory
    holding its index.html), served at the root path.
    """
    state = ServiceState(data_dir, backend_factory, detector, max_upload_bytes)
    if model_path is not None:
        state.load_snapshot(model_path)

    app = FastAPI(title="herdid", version="1")
    app.state.herdid = state
    app.mount("/media", StaticFiles(directory=str(state.images_dir)), name="media")

    api = "/api/v1"

    @app.get(api + "/healthz")
    def healthz():
        snap = state.current_snapshot()
        return {"status": "ok", "model_version": snap[2] if snap else None}

    @app.post(api + "/images")
    async def upload_image(request: Request):
        from PIL import Image, UnidentifiedImageError

        raw = await request.body()
        if len(raw) > state.max_upload_bytes:
            raise HTTPException(status_code=413, detail="image exceeds size limit")
        try:
            probe = Image.open(io.BytesIO(raw))
            probe.verify()
            fmt = (probe.format or "bin").lower()
        except (UnidentifiedImageError, OSError, ValueError) as exc:
            raise HTTPException(status_code=415, detail=f"undecodable image: {exc}")
        image_id = hashlib.sha256(raw).hexdigest()[:16]
        path = state.images_dir / f"{image_id}.{fmt}"
        if not path.exists():
            tmp = path.with_name(path.name + ".tmp")
            tmp.write_bytes(raw)
            tmp.replace(path)
        return {"image_id": image_id, "media_url": f"/media/{path.name}"}

    @app.post(api + "/images/{image_id}/detect")
    def detect_image(image_id: str):
        path = _image_path(state, image_id)
        if path is None:
            raise HTTPException(status_code=404, detail=f"unknown image {image_id}")
        if state.detector is None:
            raise HTTPException(status_code=503, detail="no detector configured")
        try:
            found = detect_heads(
                state.detector, ImageInput(id=image_id, data=str(path))
            )
        except HerdidError as exc:
            raise HTTPException(status_code=503, detail=str(exc))
        return {
            "image_id": image_id,
            "detections": [
                {"box": d.box.to_dict(), "score": d.score} for d in found
            ],
        }

    @app.post(api + "/identify")
    def identify_images(req: IdentifyRequest):
        snap = state.current_snapshot()
        if snap is None:
            raise HTTPException(status_code=409, detail="no model trained yet")
        archive, backend, version = snap

        queries = []
        image_ids = []
        for item in req.items:
            path = _image_path(state, item.image_id)
            if path is None:
                raise HTTPException(
                    status_code=404, detail=f"unknown image {item.image_id}"
                )
            queries.append(
                (ImageInput(id=item.image_id, data=str(path)), item.box.to_box())
            )
            image_ids.append(item.image_id)

        ranking = identify(archive, queries, backend)
        top = top_k(ranking, max(1, req.top_n))
        candidates = []
        for individual_id, confidence in top:
            ind = archive.individual(individual_id)
            reps = list(ind.representative_image_ids) if ind else []
            candidates.append({
                "individual_id": individual_id,
                "name": ind.name if ind else individual_id,
                "confidence": confidence,
                "representative_image_ids": reps[:5],
            })

        session_id = req.session_id or hashlib.sha1(
            f"{time.time_ns()}|{'|'.join(image_ids)}".encode()
        ).hexdigest()[:12]
        session = _load_session(state, session_id) or {
            "session_id": session_id,
            "confirmation": None,
        }
        session.update({
            "image_ids": image_ids,
            "boxes": {i.image_id: i.box.model_dump() for i in req.items},
            "ranking": [[i, c] for i, c in ranking.entries],
            "model_version": version,
        })
        _atomic_write_json(_session_path(state, session_id), session)

        return {
            "session_id": session_id,
            "model_version": version,
            "query_image_count": ranking.query_image_count,
            "ranking": candidates,
        }

    @app.post(api + "/confirmations")
    def confirm(req: ConfirmRequest):
        session = _load_session(state, req.session_id)
        if session is None or not session.get("ranking"):
            raise HTTPException(
                status_code=409, detail="session has no ranking to confirm"
            )
        snap = state.current_snapshot()
        if req.individual_id != UNKNOWN_INDIVIDUAL:
            archive = snap[0] if snap else None
            if archive is None or archive.individual(req.individual_id) is None:
                raise HTTPException(
                    status_code=404, detail=f"unknown individual {req.individual_id}"
                )
        record = {
            "session_id": req.session_id,
            "individual_id": req.individual_id,
            "image_ids": session.get("image_ids", []),
            "boxes": session.get("boxes", {}),
            "model_version": session.get("model_version"),
            "confirmed_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        }
        with state.lock:
            seq = len(list(state.confirmations_dir.glob("*.json")))
            name = f"{time.strftime('%Y%m%dT%H%M%S')}-{seq:06d}.json"
            _atomic_write_json(state.confirmations_dir / name, record)
        session["confirmation"] = req.individual_id
        _atomic_write_json(_session_path(state, req.session_id), session)
        return record

    @app.get(api + "/individuals")
    def list_individuals():
        snap = state.current_snapshot()
        if snap is None:
            return {"model_version": None, "individuals": []}
        archive, _, version = snap
        return {
            "model_version": version,
            "individuals": [
                {
                    "id": ind.id,
                    "name": ind.name,
                    "representative_image_ids": list(ind.representative_image_ids),
                }
                for ind in archive.gallery
            ],
        }

    @app.get(api + "/individuals/{individual_id}")
    def get_individual(individual_id: str):
        snap = state.current_snapshot()
        ind = snap[0].individual(individual_id) if snap else None
        if ind is None:
            raise HTTPException(
                status_code=404, detail=f"unknown individual {individual_id}"
            )
        counts = snap[0].training_summary.get("class_counts", {})
        return {
            "id": ind.id,
            "name": ind.name,
            "representative_image_ids": list(ind.representative_image_ids),
            "training_image_count": counts.get(ind.id),
        }

    @app.post(api + "/train")
    def start_training(req: TrainRequest):
        manifest_path = Path(req.manifest_path)
        if not manifest_path.is_absolute():
            manifest_path = state.data_dir / manifest_path
        if not manifest_path.exists():
            raise HTTPException(
                status_code=404, detail=f"manifest not found: {manifest_path}"
            )
        try:
            config = PipelineConfig.from_dict(req.config) if req.config else PipelineConfig()
        except (TypeError, ValueError) as exc:
            raise HTTPException(status_code=422, detail=f"bad config: {exc}")

        with state.lock:
            if state.training_active:
                raise HTTPException(
                    status_code=409, detail="a training job is already running"
                )
            state.training_active = True
            job_id = state.next_job_id()
            state.jobs[job_id] = {"job_id": job_id, "status": "queued",
                                  "model_version": None, "error": None}

        def run():
            job = state.jobs[job_id]
            job["status"] = "running"
            try:
                manifest = load_manifest(manifest_path)
                if not manifest.is_split():
                    manifest = stratified_split(
                        manifest, req.test_fraction, seed=config.seed
                    )
                backend = state.backend_factory(config)
                archive = train_pipeline(
                    manifest, config, backend, detector=state.detector
                )
                save_archive(archive, state.model_path)
                state.load_snapshot(state.model_path)
                job["model_version"] = state.current_snapshot()[2]
                job["status"] = "done"
            except Exception as exc:  # surfaced through job status
                job["status"] = "failed"
                job["error"] = str(exc)
            finally:
                with state.lock:
                    state.training_active = False

        threading.Thread(target=run, name=f"herdid-{job_id}", daemon=True).start()
        return {"job_id": job_id, "status": state.jobs[job_id]["status"]}

    @app.get(api + "/train/{job_id}")
    def job_status(job_id: str):
        job = state.jobs.get(job_id)
        if job is None:
            raise HTTPException(status_code=404, detail=f"unknown job {job_id}")
        return job

    @app.get(api + "/report")
    def get_report():
        path = state.data_dir / "report.json"
        if not path.exists():
            raise HTTPException(status_code=404, detail="no evaluation report stored")
        with path.open("r", encoding="utf-8") as fh:
            return json.load(fh)

    if ui_dir is not None:
        # Catch-all, so it must be mounted after every API route.
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
