"""Builds the exact multimodal context payload for a request at timestamp t.

Everything here is pure: identical inputs give byte-identical payloads
and rendered requests, which is what makes counterfactual replay and the
live/replay equivalence check possible.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field, replace

from .errors import TimestampOutOfRange, UnknownPlaceholder
from .gateway import ImagePart, Message, ProviderRequest, TextPart
from .media import FrameIndex, SamplingPolicy, sample_frames
from .model import (
    DecisionState,
    FrameRef,
    MessageType,
    SessionManifest,
    SupportMessage,
    TaskPhase,
    Timecode,
    Utterance,
)
from .transcript import format_timecode_short, slice_at

_PLACEHOLDER_RE = re.compile(r"\{([a-z_]+)\}")
ALLOWED_PLACEHOLDERS = {"brief", "transcript", "history", "type", "phase"}

TYPE_LABELS = {
    MessageType.REFLECTIVE_QUESTION: "ReflectiveQuestion",
    MessageType.DESIGN_SUGGESTION: "DesignSuggestion",
    MessageType.SOFTWARE_TIP: "SoftwareTip",
}


@dataclass(frozen=True)
class Budget:
    max_transcript_chars: int = 24000
    sampling: SamplingPolicy = field(default_factory=SamplingPolicy)


@dataclass(frozen=True)
class HistoryEntry:
    t: Timecode
    msg_type: MessageType
    text: str
    decision: DecisionState


@dataclass(frozen=True)
class SessionData:
    """Everything assemble() needs about one session, already materialized."""

    manifest: SessionManifest
    utterances: tuple[Utterance, ...]
    frame_index: FrameIndex
    brief: str | None = None
    messages: tuple[SupportMessage, ...] = ()


@dataclass(frozen=True)
class ContextPayload:
    session_id: str
    t: Timecode
    system_prompt: str
    brief: str | None
    transcript_window: tuple[tuple[Timecode, str, str], ...]  # (start, speaker, text)
    frames: tuple[FrameRef, ...]
    history: tuple[HistoryEntry, ...]
    requested_type: MessageType | None
    phase: TaskPhase | None
    transcript_truncated: bool
    frames_truncated: bool

    def to_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "t": self.t,
            "system_prompt": self.system_prompt,
            "brief": self.brief,
            "transcript_window": [list(e) for e in self.transcript_window],
            "frames": [{"t": f.t, "uri": f.uri} for f in self.frames],
            "history": [
                {"t": h.t, "msg_type": h.msg_type.value, "text": h.text, "decision": h.decision.value}
                for h in self.history
            ],
            "requested_type": self.requested_type.value if self.requested_type else None,
            "phase": self.phase.value if self.phase else None,
            "transcript_truncated": self.transcript_truncated,
            "frames_truncated": self.frames_truncated,
        }

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"), ensure_ascii=False)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def assemble(
    session: SessionData,
    t: Timecode,
    requested_type: MessageType | None = None,
    phase: TaskPhase | None = None,
    system_prompt: str = "",
    budget: Budget = Budget(),
    include_wizard_speech: bool = True,
) -> ContextPayload:
    """Assemble the context for timestamp t.

    Transcript truncation drops oldest whole utterances, never
    mid-utterance, so the window is always a suffix of the slice. Denied
    messages are excluded from history: the model should not build on
    messages the user never saw. History is strictly earlier (m.t < t) so
    that replaying a recorded request never sees the message it produced.
    """
    if t > session.manifest.duration:
        raise TimestampOutOfRange(f"t={t} beyond session duration {session.manifest.duration}")

    window = slice_at(list(session.utterances), t)
    if not include_wizard_speech:
        window = [u for u in window if u.speaker.value != "wizard"]
    total = sum(len(u.text) for u in window)
    truncated = False
    start = 0
    while total > budget.max_transcript_chars and start < len(window):
        total -= len(window[start].text)
        start += 1
        truncated = True
    window = window[start:]

    all_before = sum(1 for f in session.frame_index.frames if f.t <= t)
    frames = sample_frames(session.frame_index, t, budget.sampling)

    history = tuple(
        HistoryEntry(t=m.t, msg_type=m.msg_type, text=m.text, decision=m.decision.state)
        for m in sorted(session.messages, key=lambda m: m.t)
        if m.t < t and m.decision.state != DecisionState.DENIED
    )

    return ContextPayload(
        session_id=session.manifest.id,
        t=t,
        system_prompt=system_prompt,
        brief=session.brief,
        transcript_window=tuple((u.start, u.speaker.value, u.text) for u in window),
        frames=tuple(frames),
        history=history,
        requested_type=requested_type,
        phase=phase,
        transcript_truncated=truncated,
        frames_truncated=len(frames) < all_before,
    )


def transcript_block(payload: ContextPayload) -> str:
    return "\n".join(
        f"[({format_timecode_short(t)})] {speaker}: {text}"
        for t, speaker, text in payload.transcript_window
    )


def history_block(payload: ContextPayload) -> str:
    return "\n".join(
        f"[({format_timecode_short(h.t)})] {h.msg_type.value}: {h.text} [{h.decision.value}]"
        for h in payload.history
    )


def _substitute(segment: str, payload: ContextPayload) -> str:
    values = {
        "brief": payload.brief or "",
        "transcript": transcript_block(payload),
        "history": history_block(payload),
        "type": TYPE_LABELS[payload.requested_type] if payload.requested_type else "",
        "phase": payload.phase.value if payload.phase else "",
    }

    def repl(m: re.Match) -> str:
        name = m.group(1)
        if name not in ALLOWED_PLACEHOLDERS:
            raise UnknownPlaceholder(name)
        return values[name]

    return _PLACEHOLDER_RE.sub(repl, segment)


def _media_type(uri: str) -> str:
    return "image/png" if uri.endswith(".png") else "image/jpeg"


def render_messages(
    payload: ContextPayload,
    template,  # PromptTemplate
    temperature: float = 0.7,
    model_id: str = "default",
) -> ProviderRequest:
    """Render the payload into a provider-neutral message list.

    One system message (payload.system_prompt overrides the template's
    system segment when non-empty), then one user message: transcript
    text block, image parts in ascending t, instruction segment.
    """
    system_text = _substitute(payload.system_prompt or template.system_segment, payload)
    instruction = _substitute(template.instruction_segment, payload)
    parts: list = [TextPart(transcript_block(payload))]
    parts += [ImagePart(media_type=_media_type(f.uri), image_uri=f.uri) for f in payload.frames]
    parts.append(TextPart(instruction))
    stage = "classify" if template.name == "classify" else "generate"
    return ProviderRequest(
        messages=(
            Message(role="system", parts=(TextPart(system_text),)),
            Message(role="user", parts=tuple(parts)),
        ),
        model_id=model_id,
        temperature=temperature,
        tags=(
            ("stage", stage),
            ("template", template.name),
            ("phase", payload.phase.value if payload.phase else ""),
            ("type", payload.requested_type.value if payload.requested_type else ""),
        ),
    )
