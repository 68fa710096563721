"""Session import: build a session directory from media files and validate it.

Import is atomic: the session is staged in a temporary directory and
only moved into place after validation passes, so a failed import never
leaves a partial session behind.
"""

from __future__ import annotations

import shlex
import shutil
import subprocess
import tempfile
from pathlib import Path

from . import media
from .errors import ExtractorFailed, ValidationFailed
from .model import SessionManifest, SessionOrigin, is_valid_slug, validate_session
from .store import MANIFEST_FILE, Store, now_iso
from .transcript import parse_srt


def import_session(
    store: Store,
    session_id: str,
    srt_path: Path,
    video_path: Path | None = None,
    brief_path: Path | None = None,
    frames_dir: Path | None = None,
    extract_cmd: str | None = None,
    extract_stride_ms: int = 5000,
    title: str | None = None,
) -> SessionManifest:
    if not is_valid_slug(session_id):
        raise ValueError(f"session id {session_id!r} must match [a-z0-9-]{{1,64}}")
    if store.has_session(session_id):
        raise ValueError(f"session {session_id!r} already exists")

    staging = Path(tempfile.mkdtemp(prefix=f"import-{session_id}-", dir=store.root))
    try:
        shutil.copy(srt_path, staging / "transcript.srt")
        if video_path is not None:
            shutil.copy(video_path, staging / "video.mp4")
        if brief_path is not None:
            shutil.copy(brief_path, staging / "brief.txt")
        staged_frames = staging / media.FRAMES_DIRNAME
        if frames_dir is not None:
            shutil.copytree(frames_dir, staged_frames)
        else:
            staged_frames.mkdir()
            if extract_cmd is not None:
                if video_path is None:
                    raise ValueError("--extract-cmd requires a video")
                _run_extractor(extract_cmd, staging / "video.mp4", staged_frames, extract_stride_ms)

        utterances = parse_srt((staging / "transcript.srt").read_bytes())
        index = media.build_index(session_id, staged_frames)
        duration = max(
            [u.end for u in utterances] + [f.t for f in index.frames], default=0
        )
        manifest = SessionManifest(
            id=session_id,
            title=title or session_id,
            duration=duration,
            video_uri="video.mp4" if video_path is not None else None,
            transcript_uri="transcript.srt",
            frames_dir=media.FRAMES_DIRNAME,
            brief_uri="brief.txt" if brief_path is not None else None,
            origin=SessionOrigin.IMPORTED,
            created_at=now_iso(),
        )
        violations = validate_session(manifest, utterances, list(index.frames))
        if violations:
            raise ValidationFailed(violations)

        import json
        (staging / MANIFEST_FILE).write_text(
            json.dumps(manifest.to_dict(), ensure_ascii=False, indent=2), "utf-8"
        )
        staging.rename(store.session_dir(session_id))
        return manifest
    except BaseException:
        shutil.rmtree(staging, ignore_errors=True)
        raise


def _run_extractor(cmd_template: str, video: Path, outdir: Path, stride_ms: int) -> None:
    """Run the user-supplied extractor command; {video} {outdir} {stride_ms}."""
    cmd = cmd_template.format(video=shlex.quote(str(video)),
                              outdir=shlex.quote(str(outdir)),
                              stride_ms=stride_ms)
    proc = subprocess.run(cmd, shell=True, capture_output=True, text=True)
    if proc.returncode != 0:
        raise ExtractorFailed(
            f"extractor exited {proc.returncode}: {proc.stderr.strip()[:500]}"
        )
