import shutil
from pathlib import Path

import pytest

from wozreplay.chain import load_templates
from wozreplay.cli import DEFAULT_PROMPTS_DIR
from wozreplay.gateway import make_gateway
from wozreplay.sessions import import_session
from wozreplay.store import Store

FIXTURES = Path(__file__).parent.parent / "fixtures"

P03_T1 = 521000  # 00:08:41
P03_T2 = 588000  # 00:09:48
P03_HUMAN_1 = "How will the bracket be connected to other parts, and will these move in any way?"
P03_HUMAN_2 = "What are the structural constraints of your load cases?"


@pytest.fixture
def templates():
    return load_templates(DEFAULT_PROMPTS_DIR)


@pytest.fixture
def mock_gateway():
    return make_gateway("mock")


@pytest.fixture
def store(tmp_path):
    return Store(tmp_path / "media")


def import_fixture(store: Store, name: str, session_id: str, tmp_path: Path,
                   with_video: bool = True, with_brief: bool = True):
    src = FIXTURES / name
    video = None
    if with_video:
        video = tmp_path / f"{session_id}.mp4"
        video.write_bytes(b"\x00\x00\x00\x18ftypmp42" + b"x" * 4096)
    brief = src / "brief.txt" if with_brief and (src / "brief.txt").is_file() else None
    return import_session(
        store, session_id,
        srt_path=src / "transcript.srt",
        video_path=video,
        brief_path=brief,
        frames_dir=src / "frames",
    )


@pytest.fixture
def p03_store(store, tmp_path):
    import_fixture(store, "p03", "p03", tmp_path)
    return store


@pytest.fixture
def demo_store(store, tmp_path):
    import_fixture(store, "demo", "demo", tmp_path, with_brief=False)
    return store
