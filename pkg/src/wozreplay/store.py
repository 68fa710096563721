"""File-based persistence for sessions, messages, decisions, ratings, annotations.

Layout: one directory per session under the media root, holding
`session.json`, `transcript.srt`, `frames/`, `messages.jsonl`,
`ratings.json`, `annotations.json` (and optionally `video.mp4`,
`brief.txt`).

`messages.jsonl` is append-only: decisions and deliveries are appended
as amendment records keyed by message id, latest wins. Each append is
flushed and fsynced before the call returns, so an acknowledged write
survives a crash. A torn trailing line is ignored on load with a
warning.
"""

from __future__ import annotations

import csv
import io
import json
import os
import threading
import uuid
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path

from . import media
from .context import SessionData
from .errors import (
    AlreadyDecided,
    EmptyDenialReason,
    EmptyLabel,
    ScoreOutOfRange,
    UnknownMessage,
    UnknownSession,
)
from .model import (
    Annotation,
    Decision,
    DecisionState,
    Rating,
    SessionManifest,
    SupportMessage,
)
from .transcript import parse_srt

MESSAGES_FILE = "messages.jsonl"
RATINGS_FILE = "ratings.json"
ANNOTATIONS_FILE = "annotations.json"
MANIFEST_FILE = "session.json"

EXPORT_HEADER = [
    "session_id", "message_id", "t_millis", "type", "phase", "phase_source",
    "decision", "denial_reason", "score", "comment", "label", "text",
]


def now_iso() -> str:
    return datetime.now(timezone.utc).isoformat()


def new_message_id() -> str:
    return uuid.uuid4().hex


@dataclass
class _SessionState:
    messages: dict[str, SupportMessage] = field(default_factory=dict)
    order: list[str] = field(default_factory=list)
    payload_digests: dict[str, str] = field(default_factory=dict)
    batch_ids: set[str] = field(default_factory=set)
    ratings: dict[tuple[str, str], Rating] = field(default_factory=dict)
    annotations: list[Annotation] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)


class Store:
    """Single-writer per session: every mutation takes that session's lock."""

    def __init__(self, root: Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._locks: dict[str, threading.Lock] = {}
        self._states: dict[str, _SessionState] = {}
        self._global = threading.Lock()

    # -- session directory plumbing ------------------------------------

    def session_dir(self, session_id: str) -> Path:
        return self.root / session_id

    def has_session(self, session_id: str) -> bool:
        return (self.session_dir(session_id) / MANIFEST_FILE).is_file()

    def _require(self, session_id: str) -> Path:
        d = self.session_dir(session_id)
        if not (d / MANIFEST_FILE).is_file():
            raise UnknownSession(f"no session {session_id!r} under {self.root}")
        return d

    def _lock(self, session_id: str) -> threading.Lock:
        with self._global:
            return self._locks.setdefault(session_id, threading.Lock())

    def list_sessions(self) -> tuple[list[SessionManifest], list[str]]:
        """All valid session manifests sorted by id, plus warnings for invalid dirs."""
        manifests, warnings = [], []
        for entry in sorted(self.root.iterdir()) if self.root.is_dir() else []:
            if not entry.is_dir():
                continue
            mf = entry / MANIFEST_FILE
            if not mf.is_file():
                warnings.append(f"{entry.name}: missing {MANIFEST_FILE}")
                continue
            try:
                manifests.append(SessionManifest.from_dict(json.loads(mf.read_text("utf-8"))))
            except Exception as e:
                warnings.append(f"{entry.name}: unreadable manifest ({e})")
        manifests.sort(key=lambda m: m.id)
        return manifests, warnings

    def read_manifest(self, session_id: str) -> SessionManifest:
        d = self._require(session_id)
        return SessionManifest.from_dict(json.loads((d / MANIFEST_FILE).read_text("utf-8")))

    def write_manifest(self, manifest: SessionManifest) -> None:
        d = self.session_dir(manifest.id)
        d.mkdir(parents=True, exist_ok=True)
        _atomic_write_json(d / MANIFEST_FILE, manifest.to_dict())

    def load_session_data(self, session_id: str) -> SessionData:
        """Materialize everything the context assembler needs."""
        d = self._require(session_id)
        manifest = self.read_manifest(session_id)
        utterances = parse_srt((d / manifest.transcript_uri).read_bytes())
        index = media.build_index(session_id, d / manifest.frames_dir)
        brief = None
        if manifest.brief_uri and (d / manifest.brief_uri).is_file():
            brief = (d / manifest.brief_uri).read_text("utf-8")
        state = self._state(session_id)
        # batch-sweep messages never feed back into assembled history
        msgs = tuple(state.messages[i] for i in state.order if i not in state.batch_ids)
        return SessionData(
            manifest=manifest, utterances=tuple(utterances), frame_index=index,
            brief=brief, messages=msgs,
        )

    # -- materialized state --------------------------------------------

    def _state(self, session_id: str) -> _SessionState:
        with self._global:
            st = self._states.get(session_id)
        if st is not None:
            return st
        st = self._load_state(session_id)
        with self._global:
            return self._states.setdefault(session_id, st)

    def _load_state(self, session_id: str) -> _SessionState:
        d = self._require(session_id)
        st = _SessionState()
        path = d / MESSAGES_FILE
        if path.is_file():
            raw = path.read_bytes()
            lines = raw.split(b"\n")
            if lines and lines[-1] != b"":
                st.warnings.append(f"{MESSAGES_FILE}: ignored torn trailing line")
                lines = lines[:-1]
            for ln in lines:
                if not ln.strip():
                    continue
                try:
                    rec = json.loads(ln)
                except json.JSONDecodeError:
                    st.warnings.append(f"{MESSAGES_FILE}: ignored unparseable line")
                    continue
                self._apply(st, rec)
        rpath = d / RATINGS_FILE
        if rpath.is_file():
            for rd in json.loads(rpath.read_text("utf-8")):
                r = Rating(
                    message_id=rd["message_id"], score=rd["score"], rater=rd["rater"],
                    comment=rd.get("comment"), created_at=rd["created_at"],
                )
                st.ratings[(r.message_id, r.rater)] = r
        apath = d / ANNOTATIONS_FILE
        if apath.is_file():
            for ad in json.loads(apath.read_text("utf-8")):
                st.annotations.append(Annotation(
                    message_id=ad["message_id"], label=ad["label"],
                    note=ad.get("note"), created_at=ad["created_at"],
                ))
        return st

    @staticmethod
    def _apply(st: _SessionState, rec: dict) -> None:
        kind = rec.get("kind")
        if kind == "message":
            msg = SupportMessage.from_dict(rec["message"])
            if msg.id not in st.messages:
                st.order.append(msg.id)
            st.messages[msg.id] = msg
            if rec.get("payload_digest"):
                st.payload_digests[msg.id] = rec["payload_digest"]
            if rec.get("batch"):
                st.batch_ids.add(msg.id)
        elif kind == "decision":
            mid = rec["message_id"]
            if mid in st.messages:
                st.messages[mid] = replace(
                    st.messages[mid], decision=Decision.from_dict(rec["decision"])
                )
        elif kind == "delivery":
            mid = rec["message_id"]
            if mid in st.messages:
                st.messages[mid] = replace(st.messages[mid], delivered_seq=rec["seq"])

    def _append(self, session_id: str, rec: dict) -> None:
        path = self._require(session_id) / MESSAGES_FILE
        line = json.dumps(rec, ensure_ascii=False, separators=(",", ":")) + "\n"
        with open(path, "ab") as f:
            f.write(line.encode("utf-8"))
            f.flush()
            os.fsync(f.fileno())

    # -- operations ----------------------------------------------------

    def record_message(self, msg: SupportMessage, payload_digest: str = "",
                       batch: bool = False) -> str:
        with self._lock(msg.session_id):
            st = self._state(msg.session_id)
            rec = {"kind": "message", "message": msg.to_dict()}
            if payload_digest:
                rec["payload_digest"] = payload_digest
            if batch:
                rec["batch"] = True
            self._append(msg.session_id, rec)
            self._apply(st, rec)
        return msg.id

    def _find(self, session_id: str, message_id: str) -> SupportMessage:
        st = self._state(session_id)
        if message_id not in st.messages:
            raise UnknownMessage(f"no message {message_id!r} in session {session_id!r}")
        return st.messages[message_id]

    def find_session_of(self, message_id: str) -> str:
        """Locate which session a message belongs to (scans known sessions)."""
        manifests, _ = self.list_sessions()
        for m in manifests:
            st = self._state(m.id)
            if message_id in st.messages:
                return m.id
        raise UnknownMessage(f"no message {message_id!r} in any session")

    def set_decision(self, session_id: str, message_id: str, decision: Decision) -> SupportMessage:
        if decision.state == DecisionState.DENIED and not (decision.reason or "").strip():
            raise EmptyDenialReason("denied decisions require a non-empty reason")
        with self._lock(session_id):
            msg = self._find(session_id, message_id)
            if msg.decision.state != DecisionState.PENDING:
                raise AlreadyDecided(f"message {message_id} already {msg.decision.state.value}")
            rec = {
                "kind": "decision", "message_id": message_id,
                "decision": decision.to_dict(), "at": now_iso(),
            }
            self._append(session_id, rec)
            st = self._state(session_id)
            self._apply(st, rec)
            return st.messages[message_id]

    def set_delivered(self, session_id: str, message_id: str, seq: int) -> SupportMessage:
        with self._lock(session_id):
            msg = self._find(session_id, message_id)
            if msg.decision.state != DecisionState.APPROVED:
                raise AlreadyDecided("only approved messages can be delivered")
            rec = {"kind": "delivery", "message_id": message_id, "seq": seq, "at": now_iso()}
            self._append(session_id, rec)
            st = self._state(session_id)
            self._apply(st, rec)
            return st.messages[message_id]

    def rate(self, session_id: str, message_id: str, score: int, rater: str,
             comment: str | None = None) -> Rating:
        if not 1 <= score <= 5:
            raise ScoreOutOfRange(f"score {score} outside [1, 5]")
        with self._lock(session_id):
            self._find(session_id, message_id)
            st = self._state(session_id)
            r = Rating(message_id=message_id, score=score, rater=rater,
                       comment=comment, created_at=now_iso())
            st.ratings[(message_id, rater)] = r
            self._save_ratings(session_id, st)
            return r

    def annotate(self, session_id: str, message_id: str, label: str,
                 note: str | None = None) -> Annotation:
        if not label.strip():
            raise EmptyLabel("annotation label must be non-empty")
        with self._lock(session_id):
            self._find(session_id, message_id)
            st = self._state(session_id)
            a = Annotation(message_id=message_id, label=label, note=note, created_at=now_iso())
            st.annotations.append(a)
            self._save_annotations(session_id, st)
            return a

    def _save_ratings(self, session_id: str, st: _SessionState) -> None:
        data = [
            {"message_id": r.message_id, "score": r.score, "rater": r.rater,
             "comment": r.comment, "created_at": r.created_at}
            for r in st.ratings.values()
        ]
        _atomic_write_json(self.session_dir(session_id) / RATINGS_FILE, data)

    def _save_annotations(self, session_id: str, st: _SessionState) -> None:
        data = [
            {"message_id": a.message_id, "label": a.label, "note": a.note,
             "created_at": a.created_at}
            for a in st.annotations
        ]
        _atomic_write_json(self.session_dir(session_id) / ANNOTATIONS_FILE, data)

    # -- reads ---------------------------------------------------------

    def list_messages(self, session_id: str) -> list[SupportMessage]:
        self._require(session_id)
        st = self._state(session_id)
        return [st.messages[i] for i in st.order]

    def payload_digest_of(self, session_id: str, message_id: str) -> str | None:
        st = self._state(session_id)
        return st.payload_digests.get(message_id)

    def coding_rows(self, session_id: str) -> list[dict]:
        """Every message joined with its decision, ratings, annotations; t order."""
        self._require(session_id)
        st = self._state(session_id)
        rows = []
        for mid in st.order:
            m = st.messages[mid]
            ratings = [st.ratings[k] for k in st.ratings if k[0] == mid]
            labels = [a for a in st.annotations if a.message_id == mid]
            rows.append({
                "message": m.to_dict(),
                "ratings": [
                    {"score": r.score, "rater": r.rater, "comment": r.comment} for r in ratings
                ],
                "annotations": [{"label": a.label, "note": a.note} for a in labels],
            })
        rows.sort(key=lambda r: r["message"]["t"])
        return rows

    def export_csv(self, session_id: str) -> bytes:
        """RFC 4180 CSV, one row per message, UTF-8."""
        self._require(session_id)
        st = self._state(session_id)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow(EXPORT_HEADER)
        ordered = sorted((st.messages[i] for i in st.order), key=lambda m: (m.t, m.created_at))
        for m in ordered:
            ratings = [st.ratings[k] for k in st.ratings if k[0] == m.id]
            rating = max(ratings, key=lambda r: r.created_at) if ratings else None
            labels = [a for a in st.annotations if a.message_id == m.id]
            label = labels[-1].label if labels else ""
            w.writerow([
                m.session_id, m.id, m.t, m.msg_type.value, m.phase.value,
                m.phase_source.value, m.decision.state.value,
                m.decision.reason or "",
                rating.score if rating else "",
                (rating.comment or "") if rating else "",
                label, m.text,
            ])
        return buf.getvalue().encode("utf-8")

    def warnings_for(self, session_id: str) -> list[str]:
        return list(self._state(session_id).warnings)


def _atomic_write_json(path: Path, data) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(data, ensure_ascii=False, indent=2), "utf-8")
    os.replace(tmp, path)
