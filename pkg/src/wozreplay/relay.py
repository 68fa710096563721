"""Live hybrid Wizard-of-Oz hub.

One user client streams utterances and frame notices; one wizard client
triggers the chain and approves deliveries. Every event gets a
server-assigned, strictly increasing per-session sequence number and is
appended to the live log, which close_live finalizes into an ordinary
replayable session directory.

Wire: WebSocket at /ws/{session_id}?role=user|wizard&resume=token, one
JSON object per frame: {seq?, at?, t, kind, body}. Server->client
messages always carry seq. Frame bytes travel out of band via HTTP PUT
/media/{id}/frames/; the in-band frame_notice carries only the filename.

Delivery contract: at-least-once on the wire (deliver events are
retained and re-sent on user reconnect until acknowledged), exactly-once
effect at the client via message-id dedupe.
"""

from __future__ import annotations

import asyncio
import json
import secrets
from dataclasses import dataclass, field, replace
from pathlib import Path

from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from .chain import TemplateSet, run_chain
from .context import Budget, SessionData, assemble
from .errors import UnparseablePhase, WozReplayError
from .gateway import Gateway
from .media import frame_name_to_t, index_from_refs
from .model import (
    Decision,
    DecisionState,
    FrameRef,
    MessageType,
    SessionManifest,
    SessionOrigin,
    Speaker,
    SupportMessage,
    TaskPhase,
    Utterance,
    validate_session,
)
from .store import Store, new_message_id, now_iso
from .transcript import serialize_srt

TIMECODE_SKEW_MS = 2000
EVENTS_FILE = "events.jsonl"

ROLES = ("user", "wizard")


async def _close_quietly(ws, code: int, reason: str) -> None:
    # a peer that is itself mid-disconnect must never block the loop
    try:
        await asyncio.wait_for(ws.close(code=code, reason=reason), timeout=1.0)
    except Exception:
        pass


@dataclass
class _LiveUtterance:
    t: int
    end: int
    text: str


@dataclass
class LiveSession:
    session_id: str
    store: Store
    seq: int = 0
    events: list[dict] = field(default_factory=list)
    sockets: dict = field(default_factory=lambda: {r: None for r in ROLES})
    resume_tokens: dict = field(default_factory=dict)
    utterances: list[_LiveUtterance] = field(default_factory=list)
    frames: list[FrameRef] = field(default_factory=list)
    pending_deliveries: dict = field(default_factory=dict)  # message_id -> deliver event
    last_utterance_t: int = 0
    max_t: int = 0
    closed: bool = False
    manifest: SessionManifest | None = None
    lock: asyncio.Lock = field(default_factory=asyncio.Lock)

    def next_event(self, kind: str, t: int, body: dict) -> dict:
        self.seq += 1
        self.max_t = max(self.max_t, t)
        ev = {"seq": self.seq, "at": now_iso(), "t": t, "kind": kind, "body": body}
        self.events.append(ev)
        with open(self.store.session_dir(self.session_id) / EVENTS_FILE, "a", encoding="utf-8") as f:
            f.write(json.dumps(ev, ensure_ascii=False) + "\n")
        return ev

    def sorted_utterances(self) -> list[Utterance]:
        ordered = sorted(self.utterances, key=lambda u: u.t)
        return [
            Utterance(index=i, start=u.t, end=max(u.end, u.t), speaker=Speaker.USER, text=u.text)
            for i, u in enumerate(ordered)
        ]

    def session_data(self) -> SessionData:
        manifest = replace(self._provisional_manifest(), duration=self.max_t)
        return SessionData(
            manifest=manifest,
            utterances=tuple(self.sorted_utterances()),
            frame_index=index_from_refs(self.session_id, self.frames),
            brief=None,
            messages=tuple(self.store.list_messages(self.session_id)),
        )

    def _provisional_manifest(self) -> SessionManifest:
        return SessionManifest(
            id=self.session_id,
            title=self.session_id,
            duration=self.max_t,
            transcript_uri="transcript.srt",
            frames_dir="frames",
            origin=SessionOrigin.LIVE_RECORDED,
            created_at=now_iso(),
        )


class Relay:
    def __init__(self, store: Store, templates: TemplateSet, gateway: Gateway,
                 budget: Budget = Budget()):
        self.store = store
        self.templates = templates
        self.gateway = gateway
        self.budget = budget
        self.sessions: dict[str, LiveSession] = {}

    def _session(self, session_id: str) -> LiveSession:
        live = self.sessions.get(session_id)
        if live is None:
            live = LiveSession(session_id=session_id, store=self.store)
            d = self.store.session_dir(session_id)
            (d / "frames").mkdir(parents=True, exist_ok=True)
            if not self.store.has_session(session_id):
                self.store.write_manifest(live._provisional_manifest())
                (d / "transcript.srt").write_text("", "utf-8")
            self.sessions[session_id] = live
        return live

    async def _send(self, ws, ev: dict) -> bool:
        try:
            await ws.send_text(json.dumps(ev, ensure_ascii=False))
            return True
        except Exception:
            return False

    async def _broadcast(self, live: LiveSession, ev: dict) -> None:
        for ws in list(live.sockets.values()):
            if ws is not None:
                await self._send(ws, ev)

    async def handle(self, ws: WebSocket, session_id: str, role: str, resume: str | None):
        if role not in ROLES:
            await ws.close(code=4000, reason=f"unknown role {role!r}")
            return
        await ws.accept()
        live = self._session(session_id)

        async with live.lock:
            if live.closed:
                await ws.send_text(json.dumps(
                    {"seq": 0, "t": 0, "kind": "error",
                     "body": {"code": "SESSION_CLOSED", "message": "session already closed"}}))
                await ws.close(code=4003)
                return
            occupied = live.sockets[role] is not None
            if occupied and resume != live.resume_tokens.get(role):
                await ws.send_text(json.dumps(
                    {"seq": 0, "t": 0, "kind": "error",
                     "body": {"code": "ROLE_OCCUPIED", "message": f"{role} slot taken"}}))
                await ws.close(code=4001)
                return
            if occupied:
                old = live.sockets[role]
                live.sockets[role] = None
                await _close_quietly(old, code=4002, reason="slot reclaimed")
            existing = live.resume_tokens.get(role)
            token = existing if (existing is not None and resume == existing) \
                else secrets.token_urlsafe(12)
            live.resume_tokens[role] = token
            live.sockets[role] = ws
            hello = live.next_event("hello", live.max_t, {"role": role, "resume_token": token})
            if role == "wizard":
                # snapshot heals seq gaps across reconnects
                for ev in live.events:
                    await self._send(ws, ev)
            else:
                await self._send(ws, hello)
                for ev in list(live.pending_deliveries.values()):
                    await self._send(ws, ev)
            other = live.sockets["wizard" if role == "user" else "user"]
            if other is not None:
                await self._send(other, hello)

        try:
            while True:
                raw = await ws.receive_text()
                try:
                    frame = json.loads(raw)
                except json.JSONDecodeError:
                    await self._send(ws, {"seq": 0, "t": 0, "kind": "error",
                                          "body": {"code": "BAD_JSON", "message": "unparseable frame"}})
                    continue
                await self._dispatch(live, ws, role, frame)
        except WebSocketDisconnect:
            pass
        finally:
            if live.sockets.get(role) is ws:
                live.sockets[role] = None

    async def _dispatch(self, live: LiveSession, ws, role: str, frame: dict) -> None:
        kind = frame.get("kind")
        t = int(frame.get("t", live.max_t))
        body = frame.get("body") or {}

        if kind == "ack" and role == "user":
            live.pending_deliveries.pop(body.get("message_id"), None)
            return

        async with live.lock:
            if live.closed:
                await self._send(ws, {"seq": 0, "t": t, "kind": "error",
                                      "body": {"code": "SESSION_CLOSED", "message": "closed"}})
                return
            if kind == "utterance" and role == "user":
                if t < live.last_utterance_t - TIMECODE_SKEW_MS:
                    ev = live.next_event("error", t, {
                        "code": "BAD_TIMECODE",
                        "message": f"t={t} regresses more than {TIMECODE_SKEW_MS}ms below {live.last_utterance_t}",
                    })
                    await self._send(ws, ev)
                    return
                live.last_utterance_t = max(live.last_utterance_t, t)
                live.utterances.append(_LiveUtterance(
                    t=t, end=int(body.get("end", t)), text=str(body.get("text", ""))))
                ev = live.next_event("utterance", t, {"text": body.get("text", ""),
                                                      "end": int(body.get("end", t))})
                await self._broadcast(live, ev)
                return
            if kind == "frame_notice" and role == "user":
                name = str(body.get("name", ""))
                ft = frame_name_to_t(name)
                path = self.store.session_dir(live.session_id) / "frames" / name
                if ft is None or not path.is_file():
                    ev = live.next_event("error", t, {
                        "code": "UNKNOWN_FRAME",
                        "message": f"frame {name!r} was not uploaded",
                    })
                    await self._send(ws, ev)
                    return
                live.frames.append(FrameRef(t=ft, uri=f"frames/{name}"))
                ev = live.next_event("frame_notice", t, {"name": name, "frame_t": ft})
                await self._broadcast(live, ev)
                return
            if kind == "generate_request" and role == "wizard":
                req_ev = live.next_event("generate_request", t, body)
                await self._broadcast(live, req_ev)
            elif kind == "classify_request" and role == "wizard":
                req_ev = live.next_event("classify_request", t, body)
                await self._broadcast(live, req_ev)
            elif kind == "decision" and role == "wizard":
                await self._handle_decision(live, ws, t, body)
                return
            else:
                await self._send(ws, {"seq": 0, "t": t, "kind": "error",
                                      "body": {"code": "BAD_KIND",
                                               "message": f"{kind!r} not accepted from {role}"}})
                return

        # chain calls run off the lock; their results re-enter serial order
        if kind == "generate_request":
            await self._handle_generate(live, ws, t, body)
        elif kind == "classify_request":
            await self._handle_classify(live, ws, t, body)

    async def _handle_generate(self, live: LiveSession, ws, t: int, body: dict) -> None:
        try:
            msg_type = MessageType(body["msg_type"])
            override = TaskPhase(body["phase_override"]) if body.get("phase_override") else None
            data = live.session_data()
            payload = assemble(
                data, t, requested_type=msg_type,
                system_prompt=body.get("system_prompt_override") or "",
                budget=self.budget,
            )
            result = await asyncio.to_thread(
                run_chain, payload, self.templates, self.gateway, override)
            msg = SupportMessage(
                id=new_message_id(), session_id=live.session_id, t=t,
                msg_type=msg_type, phase=result.effective_phase,
                phase_source=result.phase_source,
                prompt_version=result.generate_version,
                provider_id=result.provider_id, text=result.message_text,
                created_at=now_iso(),
            )
            await asyncio.to_thread(self.store.record_message, msg, payload.digest())
        except WozReplayError as e:
            async with live.lock:
                ev = live.next_event("error", t, {
                    "code": e.code, "message": str(e),
                    "detail": e.raw if isinstance(e, UnparseablePhase) else None,
                })
                await self._send(ws, ev)
            return
        async with live.lock:
            ev = live.next_event("chain_result", t, {
                "message": msg.to_dict(),
                "classified_phase": result.classified_phase.value if result.classified_phase else None,
                "phase_confidence_raw": result.phase_confidence_raw,
                "payload_digest": payload.digest(),
            })
            await self._broadcast(live, ev)

    async def _handle_classify(self, live: LiveSession, ws, t: int, body: dict) -> None:
        from .chain import classify_phase

        try:
            data = live.session_data()
            payload = assemble(data, t, budget=self.budget)
            phase, raw = await asyncio.to_thread(
                classify_phase, payload, self.templates, self.gateway)
        except WozReplayError as e:
            async with live.lock:
                ev = live.next_event("error", t, {
                    "code": e.code, "message": str(e),
                    "detail": e.raw if isinstance(e, UnparseablePhase) else None,
                })
                await self._send(ws, ev)
            return
        async with live.lock:
            ev = live.next_event("chain_result", t, {
                "classified_phase": phase.value, "phase_confidence_raw": raw,
            })
            await self._broadcast(live, ev)

    async def _handle_decision(self, live: LiveSession, ws, t: int, body: dict) -> None:
        message_id = body.get("message_id", "")
        state = body.get("state", "")
        reason = body.get("reason")
        try:
            decision = Decision(DecisionState(state), reason=reason)
            msg = await asyncio.to_thread(
                self.store.set_decision, live.session_id, message_id, decision)
        except (WozReplayError, ValueError) as e:
            code = getattr(e, "code", "BAD_DECISION")
            ev = live.next_event("error", t, {"code": code, "message": str(e)})
            await self._send(ws, ev)
            return
        ev = live.next_event("decision", t, {
            "message_id": message_id, "decision": msg.decision.to_dict(),
        })
        await self._broadcast(live, ev)
        if msg.decision.state == DecisionState.APPROVED:
            deliver = live.next_event("deliver", t, {
                "message_id": message_id, "text": msg.text,
                "msg_type": msg.msg_type.value, "phase": msg.phase.value,
            })
            await asyncio.to_thread(
                self.store.set_delivered, live.session_id, message_id, deliver["seq"])
            live.pending_deliveries[message_id] = deliver
            user_ws = live.sockets.get("user")
            if user_ws is not None:
                await self._send(user_ws, deliver)
            wiz = live.sockets.get("wizard")
            if wiz is not None:
                await self._send(wiz, deliver)

    async def close_live(self, session_id: str) -> SessionManifest:
        live = self.sessions.get(session_id)
        if live is None:
            # already finalized (or never opened live): return the stored manifest
            return self.store.read_manifest(session_id)
        async with live.lock:
            if live.closed and live.manifest is not None:
                return live.manifest
            utterances = live.sorted_utterances()
            d = self.store.session_dir(session_id)
            (d / "transcript.srt").write_text(serialize_srt(utterances), "utf-8")
            index = index_from_refs(session_id, live.frames)
            duration = max(
                [u.end for u in utterances] + [f.t for f in index.frames] + [live.max_t],
                default=0,
            )
            manifest = SessionManifest(
                id=session_id, title=session_id, duration=duration,
                transcript_uri="transcript.srt", frames_dir="frames",
                origin=SessionOrigin.LIVE_RECORDED, created_at=now_iso(),
            )
            violations = validate_session(manifest, utterances, list(index.frames))
            if violations:
                raise WozReplayError(
                    "live session failed validation: "
                    + "; ".join(f"{v.code}: {v.detail}" for v in violations))
            self.store.write_manifest(manifest)
            live.closed = True
            live.manifest = manifest
            for role, ws in list(live.sockets.items()):
                if ws is not None:
                    live.sockets[role] = None
                    await _close_quietly(ws, code=1000, reason="session closed")
            return manifest


def attach_relay(app: FastAPI, relay: Relay) -> None:
    @app.websocket("/ws/{session_id}")
    async def ws_endpoint(ws: WebSocket, session_id: str):
        role = ws.query_params.get("role", "")
        resume = ws.query_params.get("resume")
        await relay.handle(ws, session_id, role, resume)

    @app.post("/api/live/{session_id}/close")
    async def close_live(session_id: str):
        manifest = await relay.close_live(session_id)
        return manifest.to_dict()

    app.state.relay = relay
