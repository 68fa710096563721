"""Frame index over pre-extracted video frames, plus recency-biased sampling.

The core never decodes video; frames arrive as `frame_<millis>.jpg|png`
files in the session's `frames/` directory (extraction happens at import
time via an external command, or frames are pre-extracted).
"""

from __future__ import annotations

import bisect
import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import DuplicateTimestamp
from .model import FrameRef, Timecode

_FRAME_NAME_RE = re.compile(r"^frame_(\d+)\.(jpg|png)$")

FRAMES_DIRNAME = "frames"


@dataclass(frozen=True)
class SamplingPolicy:
    max_frames: int = 10
    min_stride: Timecode = 5000


@dataclass(frozen=True)
class FrameIndex:
    session_id: str
    frames: tuple[FrameRef, ...]  # sorted strictly ascending by t
    warnings: tuple[str, ...] = ()


def frame_name_to_t(name: str) -> Timecode | None:
    m = _FRAME_NAME_RE.match(name)
    return int(m.group(1)) if m else None


def build_index(session_id: str, frames_dir: Path) -> FrameIndex:
    """Index every `frame_<millis>.<jpg|png>` file; ignore the rest with a warning."""
    refs: list[FrameRef] = []
    warnings: list[str] = []
    if frames_dir.is_dir():
        for entry in sorted(frames_dir.iterdir()):
            m = _FRAME_NAME_RE.match(entry.name)
            if not m:
                warnings.append(f"ignored non-frame file {entry.name!r}")
                continue
            refs.append(FrameRef(t=int(m.group(1)), uri=f"{FRAMES_DIRNAME}/{entry.name}"))
    refs.sort(key=lambda r: r.t)
    for a, b in zip(refs, refs[1:]):
        if a.t == b.t:
            raise DuplicateTimestamp(a.t)
    return FrameIndex(session_id=session_id, frames=tuple(refs), warnings=tuple(warnings))


def index_from_refs(session_id: str, refs: list[FrameRef]) -> FrameIndex:
    """Build an index from already-known FrameRefs (live relay path)."""
    ordered = sorted(refs, key=lambda r: r.t)
    for a, b in zip(ordered, ordered[1:]):
        if a.t == b.t:
            raise DuplicateTimestamp(a.t)
    return FrameIndex(session_id=session_id, frames=tuple(ordered))


def sample_frames(index: FrameIndex, t: Timecode, policy: SamplingPolicy) -> list[FrameRef]:
    """Most recent frames at or before t, walking backward with a minimum stride.

    A frame is kept only if it is >= min_stride older than the previously
    kept frame; stop after max_frames. Result is in ascending t order.
    """
    if policy.max_frames <= 0:
        return []
    frames = index.frames
    hi = bisect.bisect_right(frames, t, key=lambda r: r.t)
    kept: list[FrameRef] = []
    last_t: Timecode | None = None
    for i in range(hi - 1, -1, -1):
        f = frames[i]
        if last_t is None or last_t - f.t >= policy.min_stride:
            kept.append(f)
            last_t = f.t
            if len(kept) >= policy.max_frames:
                break
    kept.reverse()
    return kept
