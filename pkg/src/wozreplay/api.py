"""HTTP service: sessions, media (with byte ranges), counterfactual
generation, evaluation, coding view, CSV export.

All bodies are JSON; errors use {code, message, detail?}. No auth: this
is a research tool bound to loopback by default.
"""

from __future__ import annotations

import re
from pathlib import Path

from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .chain import TemplateSet, run_chain
from .context import Budget, assemble
from .errors import (
    AlreadyDecided,
    EmptyDenialReason,
    EmptyLabel,
    ProviderUnavailable,
    ScoreOutOfRange,
    TimestampOutOfRange,
    UnknownMessage,
    UnknownSession,
    UnparseablePhase,
    WozReplayError,
)
from .gateway import Gateway
from .media import frame_name_to_t
from .model import (
    Decision,
    DecisionState,
    MessageType,
    SupportMessage,
    TaskPhase,
)
from .store import Store, new_message_id, now_iso

_STATUS = {
    "TIMESTAMP_OUT_OF_RANGE": 400,
    "SCORE_OUT_OF_RANGE": 400,
    "EMPTY_DENIAL_REASON": 400,
    "EMPTY_LABEL": 400,
    "BAD_TIMECODE": 400,
    "UNKNOWN_SESSION": 404,
    "UNKNOWN_MESSAGE": 404,
    "ALREADY_DECIDED": 409,
    "UNPARSEABLE_PHASE": 422,
    "PROVIDER_UNAVAILABLE": 502,
    "AUTH_ERROR": 502,
    "PAYLOAD_TOO_LARGE": 502,
}


class GenerateRequest(BaseModel):
    t: int
    msg_type: MessageType
    phase_override: TaskPhase | None = None
    system_prompt_override: str | None = None


class DecisionRequest(BaseModel):
    state: str  # "approved" | "denied"
    reason: str | None = None


class RatingRequest(BaseModel):
    score: int
    rater: str = "anonymous"
    comment: str | None = None


class AnnotationRequest(BaseModel):
    label: str
    note: str | None = None


def _error_response(exc: WozReplayError) -> JSONResponse:
    status = _STATUS.get(exc.code, 400)
    body = {"code": exc.code, "message": str(exc)}
    if isinstance(exc, UnparseablePhase):
        body["detail"] = exc.raw
    return JSONResponse(status_code=status, content=body)


_RANGE_RE = re.compile(r"^bytes=(\d*)-(\d*)$")


def _serve_file(path: Path, media_type: str, request: Request) -> Response:
    if not path.is_file():
        return JSONResponse(status_code=404, content={"code": "NOT_FOUND", "message": str(path.name)})
    data = path.read_bytes()
    size = len(data)
    range_header = request.headers.get("range")
    if not range_header:
        return Response(content=data, media_type=media_type,
                        headers={"Accept-Ranges": "bytes"})
    m = _RANGE_RE.match(range_header.strip())
    if not m or (not m.group(1) and not m.group(2)):
        return Response(status_code=416, headers={"Content-Range": f"bytes */{size}"})
    if m.group(1):
        start = int(m.group(1))
        end = int(m.group(2)) if m.group(2) else size - 1
    else:
        # suffix range: last N bytes
        n = int(m.group(2))
        start, end = max(size - n, 0), size - 1
    if start >= size or end < start:
        return Response(status_code=416, headers={"Content-Range": f"bytes */{size}"})
    end = min(end, size - 1)
    return Response(
        content=data[start:end + 1], status_code=206, media_type=media_type,
        headers={
            "Content-Range": f"bytes {start}-{end}/{size}",
            "Accept-Ranges": "bytes",
        },
    )


def create_app(
    store: Store,
    templates: TemplateSet,
    gateway: Gateway,
    budget: Budget = Budget(),
    cors_origin: str | None = None,
    console_dir: Path | None = None,
) -> FastAPI:
    app = FastAPI(title="wozreplay")
    app.state.store = store
    app.state.templates = templates
    app.state.gateway = gateway
    app.state.budget = budget

    if cors_origin:
        from fastapi.middleware.cors import CORSMiddleware

        app.add_middleware(
            CORSMiddleware, allow_origins=[cors_origin],
            allow_methods=["*"], allow_headers=["*"],
        )

    @app.exception_handler(WozReplayError)
    async def _woz_error(request: Request, exc: WozReplayError):
        return _error_response(exc)

    # -- sessions ------------------------------------------------------

    @app.get("/api/sessions")
    def list_sessions():
        manifests, warnings = store.list_sessions()
        return {"sessions": [m.to_dict() for m in manifests], "warnings": warnings}

    @app.get("/api/sessions/{session_id}/transcript")
    def get_transcript(session_id: str):
        data = store.load_session_data(session_id)
        return {
            "utterances": [
                {"index": u.index, "start": u.start, "end": u.end,
                 "speaker": u.speaker.value, "text": u.text}
                for u in data.utterances
            ]
        }

    @app.get("/api/sessions/{session_id}/brief")
    def get_brief(session_id: str):
        data = store.load_session_data(session_id)
        return {"brief": data.brief}

    # -- media ---------------------------------------------------------

    @app.get("/media/{session_id}/video")
    def get_video(session_id: str, request: Request):
        manifest = store.read_manifest(session_id)
        if not manifest.video_uri:
            raise UnknownSession(f"session {session_id} has no video")
        return _serve_file(store.session_dir(session_id) / manifest.video_uri,
                           "video/mp4", request)

    @app.get("/media/{session_id}/frames/{name}")
    def get_frame(session_id: str, name: str, request: Request):
        store.read_manifest(session_id)
        if "/" in name or name.startswith("."):
            return JSONResponse(status_code=404, content={"code": "NOT_FOUND", "message": name})
        media_type = "image/png" if name.endswith(".png") else "image/jpeg"
        return _serve_file(store.session_dir(session_id) / "frames" / name, media_type, request)

    @app.put("/media/{session_id}/frames/{name}")
    async def put_frame(session_id: str, name: str, request: Request):
        # live-session side channel: frame bytes out of band, notices in band
        store.session_dir(session_id).mkdir(parents=True, exist_ok=True)
        if frame_name_to_t(name) is None:
            return JSONResponse(status_code=400, content={
                "code": "BAD_FRAME_NAME",
                "message": "expected frame_<millis>.jpg|png",
            })
        frames = store.session_dir(session_id) / "frames"
        frames.mkdir(exist_ok=True)
        body = await request.body()
        (frames / name).write_bytes(body)
        return {"stored": name, "bytes": len(body)}

    # -- generation ----------------------------------------------------

    @app.post("/api/sessions/{session_id}/generate")
    def generate(session_id: str, req: GenerateRequest):
        data = store.load_session_data(session_id)
        payload = assemble(
            data, req.t, requested_type=req.msg_type,
            system_prompt=req.system_prompt_override or "", budget=budget,
        )
        result = run_chain(payload, templates, gateway, override=req.phase_override)
        msg = SupportMessage(
            id=new_message_id(), session_id=session_id, t=req.t,
            msg_type=req.msg_type, phase=result.effective_phase,
            phase_source=result.phase_source,
            prompt_version=result.generate_version,
            provider_id=result.provider_id, text=result.message_text,
            created_at=now_iso(),
        )
        store.record_message(msg, payload_digest=payload.digest())
        body = msg.to_dict()
        body["classified_phase"] = (
            result.classified_phase.value if result.classified_phase else None
        )
        body["phase_confidence_raw"] = result.phase_confidence_raw
        body["classify_version"] = result.classify_version
        return body

    # -- evaluation ----------------------------------------------------

    @app.post("/api/messages/{message_id}/decision")
    def decide(message_id: str, req: DecisionRequest):
        session_id = store.find_session_of(message_id)
        if req.state not in ("approved", "denied"):
            return JSONResponse(status_code=400, content={
                "code": "BAD_DECISION", "message": f"unknown state {req.state!r}",
            })
        decision = Decision(DecisionState(req.state), reason=req.reason)
        return store.set_decision(session_id, message_id, decision).to_dict()

    @app.post("/api/messages/{message_id}/rating")
    def rate(message_id: str, req: RatingRequest):
        session_id = store.find_session_of(message_id)
        r = store.rate(session_id, message_id, req.score, req.rater, req.comment)
        return {"message_id": r.message_id, "score": r.score, "rater": r.rater,
                "comment": r.comment, "created_at": r.created_at}

    @app.post("/api/messages/{message_id}/annotation")
    def annotate(message_id: str, req: AnnotationRequest):
        session_id = store.find_session_of(message_id)
        a = store.annotate(session_id, message_id, req.label, req.note)
        return {"message_id": a.message_id, "label": a.label, "note": a.note,
                "created_at": a.created_at}

    @app.get("/api/sessions/{session_id}/messages")
    def list_messages(session_id: str, limit: int | None = None):
        msgs = store.list_messages(session_id)
        if limit is not None:
            msgs = msgs[:limit]
        return {"messages": [m.to_dict() for m in msgs]}

    @app.get("/api/sessions/{session_id}/coding-view")
    def coding_view(session_id: str):
        return {"rows": store.coding_rows(session_id)}

    @app.get("/api/sessions/{session_id}/export.csv")
    def export_csv(session_id: str):
        data = store.export_csv(session_id)
        return Response(content=data, media_type="text/csv; charset=utf-8")

    if console_dir is not None:
        app.mount("/", StaticFiles(directory=console_dir, html=True), name="console")

    return app
