"""SRT transcript parsing, serialization, and timestamp slicing.

Timecode strings exist only here; everything downstream works on integer
milliseconds. Cue numbers found in input files are ignored and
regenerated (malformed numbering in the wild is common). Overlapping
cues are permitted; only per-cue start <= end is enforced.
"""

from __future__ import annotations

import bisect
import re

from .errors import MalformedCue, MalformedTimecode, Unsorted
from .model import Speaker, Timecode, Utterance

_TIMECODE_RE = re.compile(r"^(\d{2,}):([0-5]\d):([0-5]\d)(?:,(\d{3}))?$")
_ARROW_RE = re.compile(r"^(\S+)\s+-->\s+(\S+)$")


def parse_timecode(s: str) -> Timecode:
    """Parse "HH:MM:SS,mmm" or "HH:MM:SS" into milliseconds."""
    m = _TIMECODE_RE.match(s.strip())
    if not m:
        raise MalformedTimecode(f"bad timecode {s!r}")
    hh, mm, ss = int(m.group(1)), int(m.group(2)), int(m.group(3))
    mmm = int(m.group(4)) if m.group(4) else 0
    return ((hh * 60 + mm) * 60 + ss) * 1000 + mmm


def format_timecode(t: Timecode) -> str:
    """Milliseconds to canonical "HH:MM:SS,mmm"."""
    if t < 0:
        raise MalformedTimecode(f"negative timecode {t}")
    ss, mmm = divmod(t, 1000)
    mm, ss = divmod(ss, 60)
    hh, mm = divmod(mm, 60)
    return f"{hh:02d}:{mm:02d}:{ss:02d},{mmm:03d}"


def format_timecode_short(t: Timecode) -> str:
    """Milliseconds to "HH:MM:SS" (floor to whole seconds)."""
    ss = t // 1000
    mm, ss = divmod(ss, 60)
    hh, mm = divmod(mm, 60)
    return f"{hh:02d}:{mm:02d}:{ss:02d}"


def parse_srt(data: bytes | str, default_speaker: Speaker = Speaker.USER) -> list[Utterance]:
    """Parse SRT text into Utterances with contiguous indices from 0.

    Tolerates BOM, CRLF, trailing whitespace, and bogus cue numbers.
    Multi-line cue text is joined with single spaces. Raises
    MalformedCue(line_no) on a missing arrow line or bad timecode.
    """
    if isinstance(data, bytes):
        text = data.decode("utf-8-sig")
    else:
        text = data.lstrip("﻿")
    lines = [ln.rstrip() for ln in text.replace("\r\n", "\n").replace("\r", "\n").split("\n")]

    utterances: list[Utterance] = []
    i = 0
    n = len(lines)
    while i < n:
        if not lines[i].strip():
            i += 1
            continue
        block_start = i
        # optional cue-number line
        if lines[i].strip().isdigit():
            i += 1
            if i >= n:
                raise MalformedCue(block_start + 1, "cue number without body")
        arrow = _ARROW_RE.match(lines[i].strip())
        if not arrow:
            raise MalformedCue(i + 1, f"expected 'start --> end', got {lines[i]!r}")
        try:
            start = parse_timecode(arrow.group(1))
            end = parse_timecode(arrow.group(2))
        except MalformedTimecode as e:
            raise MalformedCue(i + 1, str(e)) from e
        if start > end:
            raise MalformedCue(i + 1, f"start {start} > end {end}")
        i += 1
        text_lines: list[str] = []
        while i < n and lines[i].strip():
            text_lines.append(lines[i].strip())
            i += 1
        joined = " ".join(text_lines)
        if not joined.strip():
            raise MalformedCue(block_start + 1, "cue has no text")
        utterances.append(
            Utterance(index=len(utterances), start=start, end=end, speaker=default_speaker, text=joined)
        )
    return utterances


def serialize_srt(utterances: list[Utterance]) -> str:
    """Canonical SRT: 1-based numbering, LF endings, one text line per cue."""
    for a, b in zip(utterances, utterances[1:]):
        if b.start < a.start:
            raise Unsorted("utterances not sorted by start")
    blocks = []
    for i, u in enumerate(utterances, start=1):
        blocks.append(f"{i}\n{format_timecode(u.start)} --> {format_timecode(u.end)}\n{u.text}\n")
    return "\n".join(blocks)


def slice_at(utterances: list[Utterance], t: Timecode) -> list[Utterance]:
    """All utterances with start <= t, in order. Binary search on start.

    An utterance still in progress at t is included: the wizard sees
    partial speech when triggering generation mid-utterance.
    """
    hi = bisect.bisect_right(utterances, t, key=lambda u: u.start)
    return utterances[:hi]
