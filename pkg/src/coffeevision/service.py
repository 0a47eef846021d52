"""HTTP backend for the field console.

Endpoints:

* ``GET  /health``                      -- liveness probe
* ``POST /sessions``                    -- create a tracking session
* ``GET  /sessions``                    -- list sessions
* ``GET  /sessions/{id}``               -- session detail with stored samples
* ``POST /sessions/{id}/analyze``       -- multipart image upload + analysis
* ``GET  /sessions/{id}/timeline``      -- ripeness series (binary|multiclass)

Persistence is deliberately plain: an append-only JSON-lines journal for
sessions, one per-session journal for samples, and a content-addressed image
directory, all fsynced before a request is acknowledged. Restarting the
process replays the journals, so every acknowledged write survives.

Samples are always stored at full stage granularity; the ``mode`` of an
analyze request (count | binary | multiclass) only projects the response, and
the timeline endpoint projects at read time. Errors are JSON objects
``{"error": ..., "detail": ...}``.
"""

from __future__ import annotations

import hashlib
import json
import os
import secrets
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from fastapi import FastAPI, File, Form, HTTPException, Request, UploadFile
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, Response

from .annotations import DEFAULT_STAGE_NAMES, parse_predictions
from .color import load_image
from .detectors import DetectorSpec, detect_classical, default_classical_spec
from .errors import CoffeeVisionError
from .metrics import DEFAULT_CONFIDENCE_THRESHOLD
from .ripeness import (DEFAULT_RIPE_STAGES, StageCounts, TimelineSeries,
                       make_sample, timeline_from_counts)

ANALYZE_MODES = ("count", "binary", "multiclass")


@dataclass
class ServiceConfig:
    data_dir: Path
    detector: DetectorSpec = field(default_factory=default_classical_spec)
    stage_names: list[str] = field(default_factory=lambda: list(DEFAULT_STAGE_NAMES))
    ripe_stages: list[str] = field(default_factory=lambda: list(DEFAULT_RIPE_STAGES))
    confidence_threshold: float = DEFAULT_CONFIDENCE_THRESHOLD
    console_dir: Path | None = None    # optional static mount for the browser console


@dataclass
class Session:
    session_id: str
    name: str
    created_at: str
    samples: list[dict] = field(default_factory=list)


def _append_durable(path: Path, record: dict) -> None:
    with open(path, "a", encoding="utf-8") as f:
        f.write(json.dumps(record, ensure_ascii=False) + "\n")
        f.flush()
        os.fsync(f.fileno())


class SessionStore:
    """Journal-backed session/sample store; appends are serialized per session."""

    def __init__(self, data_dir):
        self.root = Path(data_dir)
        self.root.mkdir(parents=True, exist_ok=True)
        (self.root / "images").mkdir(exist_ok=True)
        (self.root / "sessions").mkdir(exist_ok=True)
        self._sessions: dict[str, Session] = {}
        self._global_lock = threading.Lock()
        self._session_locks: dict[str, threading.Lock] = {}
        self._replay()

    @property
    def _session_journal(self) -> Path:
        return self.root / "sessions.jsonl"

    def _replay(self) -> None:
        if self._session_journal.is_file():
            with open(self._session_journal, encoding="utf-8") as f:
                for line in f:
                    if not line.strip():
                        continue
                    rec = json.loads(line)
                    s = Session(session_id=rec["session_id"], name=rec["name"],
                                created_at=rec["created_at"])
                    self._sessions[s.session_id] = s
                    self._session_locks[s.session_id] = threading.Lock()
        for s in self._sessions.values():
            journal = self.root / "sessions" / s.session_id / "samples.jsonl"
            if journal.is_file():
                with open(journal, encoding="utf-8") as f:
                    s.samples = [json.loads(line) for line in f if line.strip()]

    def create_session(self, name: str) -> Session:
        with self._global_lock:
            session = Session(session_id=secrets.token_hex(8), name=name,
                              created_at=datetime.now(timezone.utc).isoformat())
            _append_durable(self._session_journal, {
                "session_id": session.session_id,
                "name": session.name,
                "created_at": session.created_at,
            })
            (self.root / "sessions" / session.session_id).mkdir(parents=True)
            self._sessions[session.session_id] = session
            self._session_locks[session.session_id] = threading.Lock()
            return session

    def get(self, session_id: str) -> Session | None:
        return self._sessions.get(session_id)

    def list_sessions(self) -> list[Session]:
        with self._global_lock:
            return list(self._sessions.values())

    def save_image(self, content: bytes) -> str:
        digest = hashlib.sha256(content).hexdigest()
        path = self.root / "images" / digest
        if not path.exists():
            tmp = path.with_suffix(f".tmp{secrets.token_hex(4)}")
            tmp.write_bytes(content)
            os.replace(tmp, path)
        return digest

    def append_sample(self, session_id: str, record: dict) -> None:
        lock = self._session_locks[session_id]
        with lock:
            journal = self.root / "sessions" / session_id / "samples.jsonl"
            _append_durable(journal, record)
            self._sessions[session_id].samples.append(record)

    def samples(self, session_id: str) -> list[dict]:
        with self._session_locks[session_id]:
            return list(self._sessions[session_id].samples)


def _error(status: int, error: str, detail: str) -> HTTPException:
    return HTTPException(status_code=status, detail={"error": error, "detail": detail})


def _project_counts(counts: dict[str, int], mode: str, ripe_stages) -> dict[str, int]:
    if mode == "multiclass":
        return dict(counts)
    if mode == "binary":
        ripe_set = set(ripe_stages)
        folded = {"unripe": 0, "ripe": 0}
        for stage, n in counts.items():
            folded["ripe" if stage in ripe_set else "unripe"] += n
        return folded
    return {"fruit": sum(counts.values())}


def _project_stage(stage: str, mode: str, ripe_stages) -> str:
    if mode == "multiclass":
        return stage
    if mode == "binary":
        return "ripe" if stage in set(ripe_stages) else "unripe"
    return "fruit"


def create_app(config: ServiceConfig) -> FastAPI:
    app = FastAPI(title="coffeevision harvest service")
    app.add_middleware(CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
                       allow_headers=["*"])
    store = SessionStore(config.data_dir)
    app.state.store = store
    app.state.config = config

    @app.exception_handler(HTTPException)
    async def http_error(_request: Request, exc: HTTPException):
        detail = exc.detail
        if not isinstance(detail, dict):
            detail = {"error": "http_error", "detail": str(detail)}
        return JSONResponse(status_code=exc.status_code, content=detail)

    @app.exception_handler(RequestValidationError)
    async def validation_error(_request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=422,
                            content={"error": "validation", "detail": str(exc)})

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.post("/sessions", status_code=201)
    async def create_session(request: Request):
        try:
            doc = await request.json()
        except Exception:
            raise _error(400, "bad_request", "body must be JSON") from None
        name = doc.get("name") if isinstance(doc, dict) else None
        if not isinstance(name, str) or not name.strip():
            raise _error(400, "bad_request", "body must be {\"name\": <nonempty string>}")
        session = store.create_session(name.strip())
        return {"session_id": session.session_id}

    @app.get("/sessions")
    def list_sessions():
        return {"sessions": [
            {"session_id": s.session_id, "name": s.name,
             "created_at": s.created_at, "n_samples": len(s.samples)}
            for s in store.list_sessions()]}

    def _require_session(session_id: str) -> Session:
        session = store.get(session_id)
        if session is None:
            raise _error(404, "unknown_session", f"no session {session_id!r}")
        return session

    @app.get("/sessions/{session_id}")
    def session_detail(session_id: str):
        session = _require_session(session_id)
        return {"session_id": session.session_id, "name": session.name,
                "created_at": session.created_at,
                "samples": store.samples(session_id)}

    @app.post("/sessions/{session_id}/analyze")
    def analyze(session_id: str,
                image: UploadFile | None = File(None),
                predictions: UploadFile | None = File(None),
                mode: str = Form("multiclass"),
                detector: str = Form("classical"),
                captured_at: str | None = Form(None)):
        _require_session(session_id)
        if mode not in ANALYZE_MODES:
            raise _error(422, "bad_mode", f"mode must be one of {ANALYZE_MODES}")
        if detector not in ("classical", "external"):
            raise _error(422, "bad_detector", "detector must be classical or external")
        if image is None:
            raise _error(422, "missing_image", "multipart field 'image' is required")
        if captured_at is None:
            captured_at = datetime.now(timezone.utc).isoformat()
        else:
            try:
                datetime.fromisoformat(captured_at)
            except ValueError:
                raise _error(422, "bad_timestamp",
                             f"captured_at {captured_at!r} is not ISO-8601") from None

        content = image.file.read()
        try:
            raster = load_image(content)
        except CoffeeVisionError as e:
            raise _error(415, "undecodable_image", str(e)) from None

        if detector == "classical":
            pred = detect_classical(raster, config.detector)
            stages = config.detector.stage_names
        else:
            if predictions is None:
                raise _error(422, "missing_predictions",
                             "detector=external needs a 'predictions' part")
            try:
                pred = parse_predictions(
                    predictions.file.read().decode("utf-8"))
            except (CoffeeVisionError, UnicodeDecodeError) as e:
                raise _error(422, "bad_predictions", str(e)) from None
            stages = config.stage_names

        kept = [p for p in pred.entries
                if p.confidence >= config.confidence_threshold]
        for p in kept:
            if p.box.category_index >= len(stages):
                raise _error(422, "bad_predictions",
                             f"category {p.box.category_index} has no stage name")

        counts = {name: 0 for name in stages}
        detections = []
        for p in kept:
            stage = stages[p.box.category_index]
            counts[stage] += 1
            detections.append({"stage": stage, "confidence": p.confidence,
                               "cx": p.box.cx, "cy": p.box.cy,
                               "w": p.box.w, "h": p.box.h})

        sample = make_sample(captured_at, StageCounts(counts=counts), config.ripe_stages)
        record = {
            "sample_id": secrets.token_hex(8),
            "session_id": session_id,
            "captured_at": captured_at,
            "image_sha256": store.save_image(content),
            "detections": detections,
            "counts": counts,
            "ripeness_percent": sample.ripeness_percent,
            "unripeness_percent": sample.unripeness_percent,
        }
        store.append_sample(session_id, record)

        return {
            "sample_id": record["sample_id"],
            "captured_at": captured_at,
            "mode": mode,
            "detections": [
                {**d, "stage": _project_stage(d["stage"], mode, config.ripe_stages)}
                for d in detections],
            "counts": _project_counts(counts, mode, config.ripe_stages),
            "ripeness_percent": sample.ripeness_percent,
            "unripeness_percent": sample.unripeness_percent,
        }

    @app.get("/sessions/{session_id}/timeline")
    def timeline(session_id: str, mode: str = "binary"):
        _require_session(session_id)
        if mode not in ("binary", "multiclass"):
            raise _error(422, "bad_mode", "mode must be binary or multiclass")
        series = session_timeline(store.samples(session_id), mode,
                                  config.ripe_stages)
        return Response(content=series.to_json(), media_type="application/json")

    if config.console_dir is not None and Path(config.console_dir).is_dir():
        from fastapi.staticfiles import StaticFiles
        app.mount("/console", StaticFiles(directory=str(config.console_dir),
                                          html=True), name="console")

    return app


def session_timeline(samples: list[dict], mode: str, ripe_stages) -> TimelineSeries:
    """Build the ripeness series for stored samples at the requested granularity."""
    dated = [(rec["captured_at"],
              StageCounts(counts=dict(rec["counts"]), mode="multiclass"))
             for rec in samples]
    stage_names = sorted({s for _, c in dated for s in c.counts})
    return timeline_from_counts(dated, mode, ripe_stages, stage_names or None)
