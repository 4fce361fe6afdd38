"""HTTP service for human-in-the-loop labeling sessions.

One session = one target class: the service samples the shots synchronously
at creation, hands the candidates to an annotation client, accepts binary
labels (idempotent, audited overwrites), then trains and evaluates on
demand. Sessions persist as JSON files under the data directory, guarded by
an on-disk lock per session; ground-truth labels never leave the server.
"""

from __future__ import annotations

import json
import os
import time
import uuid
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import FileResponse, JSONResponse

from .classifier import serialize_svm
from .embedding_io import (
    SessionState,
    load_pool,
    load_query,
    pool_gt_labels,
    pool_vectors,
)
from .errors import (
    ConfigError,
    EmptyBandError,
    FlameError,
    FormatError,
    InsufficientSamplesError,
    SingleClassError,
    UnknownShotError,
)
from .numerics import cosine_similarities
from .pipeline import (
    candidate_payload,
    evaluate,
    sample_shots,
    score_pool,
    train_from_labels,
)
from .sampler import FlameConfig

_STATUS: dict[type, int] = {
    ConfigError: 400,
    FormatError: 400,
    EmptyBandError: 422,
    InsufficientSamplesError: 422,
    SingleClassError: 422,
    UnknownShotError: 404,
}


def _status_for(exc: FlameError) -> int:
    for klass, status in _STATUS.items():
        if isinstance(exc, klass):
            return status
    return 500


def _error(status: int, code: str, message: str, **details) -> JSONResponse:
    return JSONResponse(status_code=status,
                        content={"code": code, "message": message,
                                 "details": details})


class SessionStore:
    """File-backed session registry with per-session on-disk locks."""

    def __init__(self, data_dir: str | Path):
        self.root = Path(data_dir)
        self.root.mkdir(parents=True, exist_ok=True)

    def _path(self, session_id: str) -> Path:
        if not session_id.replace("-", "").isalnum():
            raise UnknownShotError(f"malformed session id {session_id!r}")
        return self.root / f"{session_id}.json"

    def exists(self, session_id: str) -> bool:
        return self._path(session_id).exists()

    def load(self, session_id: str) -> SessionState:
        path = self._path(session_id)
        if not path.exists():
            raise KeyError(session_id)
        return SessionState.from_json(path.read_text(encoding="utf-8"))

    def save(self, state: SessionState) -> None:
        path = self._path(state.session_id)
        tmp = path.with_suffix(".tmp")
        tmp.write_text(state.to_json(), encoding="utf-8")
        os.replace(tmp, path)

    class _Lock:
        def __init__(self, path: Path):
            self.path = path

        def __enter__(self):
            deadline = time.monotonic() + 10.0
            while True:
                try:
                    fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
                    os.close(fd)
                    return self
                except FileExistsError:
                    if time.monotonic() > deadline:
                        raise TimeoutError(f"session lock stuck: {self.path}")
                    time.sleep(0.01)

        def __exit__(self, *exc):
            self.path.unlink(missing_ok=True)

    def lock(self, session_id: str) -> "SessionStore._Lock":
        return self._Lock(self.root / f"{session_id}.lock")


def create_app(data_dir: str | Path = "flame_sessions",
               assets_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="flame annotation service")
    # the labeling UI is a static page; let it call us from any origin
    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["*"], allow_headers=["*"])
    store = SessionStore(data_dir)
    assets_root = Path(assets_dir).resolve() if assets_dir else None

    @app.exception_handler(FlameError)
    async def _flame_error(request: Request, exc: FlameError):
        payload = exc.to_payload()
        return _error(_status_for(exc), payload["code"], payload["message"],
                      **payload["details"])

    @app.exception_handler(RequestValidationError)
    async def _validation_error(request: Request, exc: RequestValidationError):
        return _error(400, "format_error", "malformed request body",
                      errors=[str(e.get("msg", e)) for e in exc.errors()])

    def _load_session_or_404(session_id: str):
        try:
            return store.load(session_id)
        except KeyError:
            return None

    @app.post("/sessions", status_code=201)
    async def create_session(body: dict):
        pool_path = body.get("pool_path")
        query_path = body.get("query_path")
        if not pool_path or not query_path:
            return _error(400, "config_error",
                          "pool_path and query_path are required")
        try:
            config = FlameConfig.from_dict(body.get("config") or {})
        except (ConfigError, TypeError) as exc:
            return _error(400, "config_error", str(exc))
        if not Path(pool_path).exists():
            return _error(400, "config_error", f"pool not found: {pool_path}")
        if not Path(query_path).exists():
            return _error(400, "config_error", f"query not found: {query_path}")
        pool = load_pool(pool_path)
        query = load_query(query_path)
        selection, shot_ids = sample_shots(pool, query, config)
        candidates = candidate_payload(pool, query, config, selection, shot_ids)
        state = SessionState(
            session_id=uuid.uuid4().hex,
            config=config.to_dict(),
            pool_path=str(pool_path),
            query_path=str(query_path),
            shot_ids=shot_ids,
            phase="awaiting_labels",
            candidates=candidates)
        store.save(state)
        return {"session_id": state.session_id, "status": state.phase,
                "shot_count": len(shot_ids),
                "effective_k": selection.effective_k}

    @app.get("/sessions/{session_id}")
    async def get_session(session_id: str):
        state = _load_session_or_404(session_id)
        if state is None:
            return _error(404, "unknown_session", f"no session {session_id}")
        return {
            "session_id": state.session_id,
            "status": state.phase,
            "shot_count": len(state.shot_ids),
            "labeled_count": len(state.labels),
            "config": state.config,
            "report": state.report,
        }

    @app.get("/sessions/{session_id}/candidates")
    async def get_candidates(session_id: str):
        state = _load_session_or_404(session_id)
        if state is None:
            return _error(404, "unknown_session", f"no session {session_id}")
        if state.phase != "awaiting_labels":
            return _error(409, "wrong_phase",
                          f"candidates available in phase awaiting_labels, "
                          f"session is {state.phase}")
        return {"session_id": state.session_id,
                "candidates": state.candidates,
                "labels": state.labels}

    @app.post("/sessions/{session_id}/labels")
    async def submit_labels(session_id: str, body: dict):
        labels = body.get("labels")
        if not isinstance(labels, dict) or not labels:
            return _error(400, "format_error",
                          "body must carry a non-empty 'labels' object")
        with store.lock(session_id):
            state = _load_session_or_404(session_id)
            if state is None:
                return _error(404, "unknown_session", f"no session {session_id}")
            if state.phase != "awaiting_labels":
                return _error(409, "wrong_phase",
                              f"labels accepted in phase awaiting_labels, "
                              f"session is {state.phase}")
            known = set(state.shot_ids)
            for shot_id, value in labels.items():
                if shot_id not in known:
                    return _error(404, "unknown_shot",
                                  f"shot {shot_id!r} is not in this session")
                if value not in (0, 1):
                    return _error(400, "format_error",
                                  f"label for {shot_id!r} must be 0 or 1, "
                                  f"got {value!r}")
            for shot_id, value in labels.items():
                if shot_id in state.labels and state.labels[shot_id] != value:
                    state.audit.append({
                        "shot_id": shot_id,
                        "previous": state.labels[shot_id],
                        "new": value,
                        "at": time.time(),
                    })
                state.labels[shot_id] = int(value)
            store.save(state)
            remaining = len(state.shot_ids) - len(state.labels)
        status = 200 if remaining == 0 else 202
        return JSONResponse(status_code=status, content={
            "accepted": len(labels), "remaining": remaining})

    @app.post("/sessions/{session_id}/train")
    async def train_session(session_id: str, body: dict | None = None):
        body = body or {}
        allow_partial = bool(body.get("allow_partial", False))
        with store.lock(session_id):
            state = _load_session_or_404(session_id)
            if state is None:
                return _error(404, "unknown_session", f"no session {session_id}")
            if state.phase in ("trained", "evaluated") and state.report is not None:
                return state.report  # idempotent retrain
            if state.phase != "awaiting_labels":
                return _error(409, "wrong_phase",
                              f"cannot train in phase {state.phase}")
            remaining = len(state.shot_ids) - len(state.labels)
            if remaining > 0 and not allow_partial:
                return _error(409, "labels_incomplete",
                              f"{remaining} shots still unlabeled; submit them "
                              "or pass allow_partial", remaining=remaining)
            config = FlameConfig.from_dict(state.config)
            pool = load_pool(state.pool_path)
            query = load_query(state.query_path)
            start = time.perf_counter()
            model, _ = train_from_labels(pool, query, state.labels, config)
            ids, scores = score_pool(model, pool, query)
            ordered = sorted(pool, key=lambda rec: rec.id)
            gt = pool_gt_labels(ordered)
            report_doc: dict = {
                "session_id": state.session_id,
                "labeled": len(state.labels),
            }
            if gt is not None:
                report = evaluate(scores, gt)
                baseline = cosine_similarities(pool_vectors(ordered), query)
                report.baseline_ap = evaluate(baseline, gt).average_precision
                report_doc.update({
                    "ap_flame": report.average_precision,
                    "ap_baseline": report.baseline_ap,
                    **report.to_dict(),
                })
                state.advance("trained")
                state.advance("evaluated")
            else:
                report_doc.update({"ap_flame": None, "ap_baseline": None})
                state.advance("trained")
            report_doc["post_labeling_seconds"] = time.perf_counter() - start
            state.model_json = serialize_svm(model)
            state.report = report_doc
            store.save(state)
            return report_doc

    @app.get("/sessions/{session_id}/report")
    async def get_report(session_id: str):
        state = _load_session_or_404(session_id)
        if state is None:
            return _error(404, "unknown_session", f"no session {session_id}")
        if state.report is None:
            return _error(409, "wrong_phase",
                          f"no report yet; session is {state.phase}")
        return state.report

    @app.get("/sessions/{session_id}/model")
    async def get_model(session_id: str):
        state = _load_session_or_404(session_id)
        if state is None:
            return _error(404, "unknown_session", f"no session {session_id}")
        if state.model_json is None:
            return _error(409, "wrong_phase",
                          f"no model yet; session is {state.phase}")
        return JSONResponse(content=json.loads(state.model_json))

    @app.get("/assets/{path:path}")
    async def get_asset(path: str):
        if assets_root is None:
            return _error(404, "no_assets", "service started without an asset dir")
        target = (assets_root / path).resolve()
        if not str(target).startswith(str(assets_root)) or not target.is_file():
            return _error(404, "missing_asset", f"no asset {path!r}")
        return FileResponse(target)

    return app
