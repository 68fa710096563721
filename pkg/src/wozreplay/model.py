"""Canonical session data model shared by replay, live relay, persistence and the UI.

All value types are frozen dataclasses or enums: safe to share between
concurrent tasks, no interior mutation. Timecodes are plain integer
milliseconds internally; formatted time strings exist only at the
transcript boundary.
"""

from __future__ import annotations

import enum
import posixpath
import re
from dataclasses import dataclass, field


Timecode = int  # non-negative milliseconds since session start

SLUG_RE = re.compile(r"^[a-z0-9-]{1,64}$")


class Speaker(str, enum.Enum):
    USER = "user"
    WIZARD = "wizard"
    AGENT = "agent"


class MessageType(str, enum.Enum):
    REFLECTIVE_QUESTION = "ReflectiveQuestion"
    DESIGN_SUGGESTION = "DesignSuggestion"
    SOFTWARE_TIP = "SoftwareTip"


class TaskPhase(str, enum.Enum):
    PLANNING = "Planning"
    LOAD_SPECIFICATION = "LoadSpecification"
    OBSTACLE_GEOMETRY = "ObstacleGeometry"
    MANUFACTURABILITY = "Manufacturability"
    SIMULATION = "Simulation"
    OUTCOME_EVALUATION = "OutcomeEvaluation"


class PhaseSource(str, enum.Enum):
    MODEL = "model"
    WIZARD_OVERRIDE = "wizard_override"


class SessionOrigin(str, enum.Enum):
    IMPORTED = "imported"
    LIVE_RECORDED = "live_recorded"


class DecisionState(str, enum.Enum):
    PENDING = "pending"
    APPROVED = "approved"
    DENIED = "denied"


@dataclass(frozen=True)
class Utterance:
    index: int
    start: Timecode
    end: Timecode
    speaker: Speaker
    text: str


@dataclass(frozen=True)
class FrameRef:
    t: Timecode
    uri: str  # relative path inside the session directory, e.g. "frames/frame_5000.jpg"
    byte_len: int | None = None


@dataclass(frozen=True)
class SessionManifest:
    id: str
    title: str
    duration: Timecode
    transcript_uri: str
    frames_dir: str
    origin: SessionOrigin
    created_at: str  # ISO-8601 wall clock
    video_uri: str | None = None
    brief_uri: str | None = None

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "title": self.title,
            "duration": self.duration,
            "video_uri": self.video_uri,
            "transcript_uri": self.transcript_uri,
            "frames_dir": self.frames_dir,
            "brief_uri": self.brief_uri,
            "origin": self.origin.value,
            "created_at": self.created_at,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SessionManifest":
        return cls(
            id=d["id"],
            title=d["title"],
            duration=int(d["duration"]),
            video_uri=d.get("video_uri"),
            transcript_uri=d["transcript_uri"],
            frames_dir=d["frames_dir"],
            brief_uri=d.get("brief_uri"),
            origin=SessionOrigin(d["origin"]),
            created_at=d["created_at"],
        )


@dataclass(frozen=True)
class Decision:
    state: DecisionState
    reason: str | None = None  # required (non-empty) when state is DENIED

    def to_dict(self) -> dict:
        d: dict = {"state": self.state.value}
        if self.reason is not None:
            d["reason"] = self.reason
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Decision":
        return cls(state=DecisionState(d["state"]), reason=d.get("reason"))


PENDING = Decision(DecisionState.PENDING)


@dataclass(frozen=True)
class SupportMessage:
    id: str
    session_id: str
    t: Timecode
    msg_type: MessageType
    phase: TaskPhase
    phase_source: PhaseSource
    prompt_version: str
    provider_id: str
    text: str
    created_at: str
    decision: Decision = PENDING
    delivered_seq: int | None = None

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "session_id": self.session_id,
            "t": self.t,
            "msg_type": self.msg_type.value,
            "phase": self.phase.value,
            "phase_source": self.phase_source.value,
            "prompt_version": self.prompt_version,
            "provider_id": self.provider_id,
            "text": self.text,
            "decision": self.decision.to_dict(),
            "delivered_seq": self.delivered_seq,
            "created_at": self.created_at,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SupportMessage":
        return cls(
            id=d["id"],
            session_id=d["session_id"],
            t=int(d["t"]),
            msg_type=MessageType(d["msg_type"]),
            phase=TaskPhase(d["phase"]),
            phase_source=PhaseSource(d["phase_source"]),
            prompt_version=d["prompt_version"],
            provider_id=d["provider_id"],
            text=d["text"],
            decision=Decision.from_dict(d["decision"]),
            delivered_seq=d.get("delivered_seq"),
            created_at=d["created_at"],
        )


@dataclass(frozen=True)
class Rating:
    message_id: str
    score: int  # 1..5
    rater: str
    created_at: str
    comment: str | None = None


@dataclass(frozen=True)
class Annotation:
    message_id: str
    label: str
    created_at: str
    note: str | None = None


@dataclass(frozen=True)
class Violation:
    code: str
    detail: str
    index: int | None = None

    def to_dict(self) -> dict:
        d: dict = {"code": self.code, "detail": self.detail}
        if self.index is not None:
            d["index"] = self.index
        return d


def is_valid_slug(s: str) -> bool:
    return bool(SLUG_RE.match(s))


def frame_uri_escapes(uri: str, frames_dir: str = "frames") -> bool:
    """True when a frame uri would resolve outside the session's frame directory."""
    if posixpath.isabs(uri):
        return True
    norm = posixpath.normpath(uri)
    return norm.startswith("..") or not (
        norm == frames_dir or norm.startswith(frames_dir + "/")
    )


def validate_session(
    manifest: SessionManifest,
    utterances: list[Utterance],
    frames: list[FrameRef],
) -> list[Violation]:
    """Collect every invariant violation; empty list means the session is valid.

    Pure and idempotent: violations are data, not failures.
    """
    out: list[Violation] = []

    if not is_valid_slug(manifest.id) and not manifest.id.startswith("live-"):
        out.append(Violation("BAD_SESSION_ID", f"id {manifest.id!r} is not a valid slug"))
    if manifest.duration < 0:
        out.append(Violation("NEGATIVE_DURATION", f"duration {manifest.duration}"))

    prev_start = None
    for i, u in enumerate(utterances):
        if u.index != i:
            out.append(Violation("UTTERANCE_INDEX", f"expected index {i}, got {u.index}", index=i))
        if u.start < 0:
            out.append(Violation("NEGATIVE_TIMECODE", f"utterance {i} start {u.start}", index=i))
        if u.start > u.end:
            out.append(Violation("UTTERANCE_ORDER", f"start {u.start} > end {u.end}", index=i))
        if not u.text.strip():
            out.append(Violation("EMPTY_UTTERANCE", "text empty after trim", index=i))
        if prev_start is not None and u.start < prev_start:
            out.append(Violation("UTTERANCE_UNSORTED", f"start {u.start} < previous {prev_start}", index=i))
        prev_start = u.start
        if u.end > manifest.duration:
            out.append(Violation("DURATION_SHORT", f"utterance {i} ends at {u.end} > duration {manifest.duration}", index=i))

    for i, f in enumerate(frames):
        if f.t < 0:
            out.append(Violation("NEGATIVE_TIMECODE", f"frame {i} t {f.t}", index=i))
        if frame_uri_escapes(f.uri, manifest.frames_dir):
            out.append(Violation("FRAME_PATH_ESCAPE", f"uri {f.uri!r} leaves {manifest.frames_dir!r}", index=i))
        if f.t > manifest.duration:
            out.append(Violation("DURATION_SHORT", f"frame {i} at {f.t} > duration {manifest.duration}", index=i))

    return out
