import json
from dataclasses import replace
from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from wozreplay.chain import PromptTemplate
from wozreplay.context import (
    Budget,
    SessionData,
    assemble,
    render_messages,
    transcript_block,
)
from wozreplay.errors import TimestampOutOfRange, UnknownPlaceholder
from wozreplay.gateway import ImagePart, TextPart
from wozreplay.media import SamplingPolicy, index_from_refs
from wozreplay.model import (
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
)
from wozreplay.transcript import slice_at

GOLDEN = Path(__file__).parent.parent / "fixtures" / "requests"


def mk_session(starts_texts, frame_ts=(), duration=10**7, messages=(), brief=None):
    utterances = tuple(
        Utterance(index=i, start=s, end=s + 500, speaker=Speaker.USER, text=txt)
        for i, (s, txt) in enumerate(starts_texts)
    )
    manifest = SessionManifest(
        id="sx", title="sx", duration=duration, transcript_uri="transcript.srt",
        frames_dir="frames", origin=SessionOrigin.IMPORTED,
        created_at="2026-01-01T00:00:00+00:00",
    )
    index = index_from_refs("sx", [FrameRef(t=t, uri=f"frames/frame_{t}.jpg") for t in frame_ts])
    return SessionData(manifest=manifest, utterances=utterances, frame_index=index,
                       brief=brief, messages=tuple(messages))


def mk_message(t, decision=DecisionState.PENDING, text="m"):
    return SupportMessage(
        id=f"m{t}", session_id="sx", t=t, msg_type=MessageType.REFLECTIVE_QUESTION,
        phase=TaskPhase.PLANNING, phase_source="model", prompt_version="0" * 16,
        provider_id="mock", text=text, created_at="2026-01-01T00:00:00+00:00",
        decision=Decision(decision, reason="r" if decision == DecisionState.DENIED else None),
    )


class TestAssemble:
    def test_t_zero_everything_empty(self):
        s = mk_session([(100, "a")], frame_ts=[100])
        p = assemble(s, 0)
        assert p.transcript_window == () and p.frames == () and p.history == ()

    def test_out_of_range(self):
        s = mk_session([(100, "a")], duration=1000)
        with pytest.raises(TimestampOutOfRange):
            assemble(s, 1001)

    def test_window_is_slice(self):
        s = mk_session([(10000, "a"), (520000, "b"), (600000, "c")])
        p = assemble(s, 521000)
        assert [e[2] for e in p.transcript_window] == ["a", "b"]

    def test_budget_drops_oldest_whole(self):
        s = mk_session([(0, "x" * 20), (10, "y" * 20), (20, "z" * 20)])
        p = assemble(s, 100, budget=Budget(max_transcript_chars=10))
        assert p.transcript_window == () or len(p.transcript_window) <= 1
        assert p.transcript_truncated

    def test_budget_keeps_suffix_that_fits(self):
        s = mk_session([(0, "x" * 20), (10, "y" * 20), (20, "abc")])
        p = assemble(s, 100, budget=Budget(max_transcript_chars=10))
        assert [e[2] for e in p.transcript_window] == ["abc"]

    def test_denied_excluded_from_history(self):
        msgs = [mk_message(10), mk_message(20, DecisionState.DENIED),
                mk_message(30, DecisionState.APPROVED)]
        s = mk_session([(0, "a")], messages=msgs)
        p = assemble(s, 1000)
        assert [h.t for h in p.history] == [10, 30]

    def test_history_strictly_earlier(self):
        s = mk_session([(0, "a")], messages=[mk_message(50)])
        assert [h.t for h in assemble(s, 50).history] == []
        assert [h.t for h in assemble(s, 51).history] == [50]

    def test_wizard_speech_filter(self):
        u = (
            Utterance(index=0, start=0, end=1, speaker=Speaker.USER, text="u"),
            Utterance(index=1, start=5, end=6, speaker=Speaker.WIZARD, text="w"),
        )
        s = replace(mk_session([]), utterances=u)
        assert len(assemble(s, 100).transcript_window) == 2
        assert len(assemble(s, 100, include_wizard_speech=False).transcript_window) == 1

    def test_determinism(self):
        s = mk_session([(0, "a"), (10, "b")], frame_ts=[0, 5000], brief="brief")
        a = assemble(s, 6000, requested_type=MessageType.SOFTWARE_TIP)
        b = assemble(s, 6000, requested_type=MessageType.SOFTWARE_TIP)
        assert a == b and a.digest() == b.digest()


texts = st.lists(st.text(alphabet="abcdef ", min_size=1, max_size=30)
                 .filter(lambda s: s.strip()), max_size=15)


@given(texts, st.integers(min_value=0, max_value=3000),
       st.integers(min_value=1, max_value=200))
def test_window_always_suffix_of_slice(txts, t, max_chars):
    starts_texts = [(i * 100, txt) for i, txt in enumerate(txts)]
    s = mk_session(starts_texts)
    p = assemble(s, t, budget=Budget(max_transcript_chars=max_chars))
    full = slice_at(list(s.utterances), t)
    suffix = [u.text for u in full[len(full) - len(p.transcript_window):]]
    assert [e[2] for e in p.transcript_window] == suffix
    total = sum(len(x) for x in suffix)
    assert total <= max_chars or not suffix


@given(texts, st.integers(min_value=0, max_value=3000),
       st.integers(min_value=0, max_value=3000))
def test_monotone_context_without_truncation(txts, a, b):
    t1, t2 = min(a, b), max(a, b)
    s = mk_session([(i * 100, txt) for i, txt in enumerate(txts)])
    w1 = assemble(s, t1).transcript_window
    w2 = assemble(s, t2).transcript_window
    assert w2[: len(w1)] == w1


class TestRenderMessages:
    def _payload(self, **kw):
        s = mk_session([(1000, "hello world")], frame_ts=[0, 5000], brief="the brief")
        kw.setdefault("requested_type", MessageType.SOFTWARE_TIP)
        kw.setdefault("phase", TaskPhase.OBSTACLE_GEOMETRY)
        return assemble(s, 6000, **kw)

    def test_structure(self):
        t = PromptTemplate(name="generate.software", system_segment="sys {brief}",
                           instruction_segment="make a {type} for {phase}")
        req = render_messages(self._payload(), t)
        assert req.messages[0].role == "system"
        assert req.messages[0].parts[0].text == "sys the brief"
        user = req.messages[1].parts
        assert isinstance(user[0], TextPart)
        assert sum(1 for p in user if isinstance(p, ImagePart)) == 2
        assert user[-1].text == "make a SoftwareTip for ObstacleGeometry"

    def test_zero_frames_zero_image_parts(self):
        s = mk_session([(0, "a")])
        p = assemble(s, 100, requested_type=MessageType.SOFTWARE_TIP)
        t = PromptTemplate(name="x", system_segment="s", instruction_segment="i")
        req = render_messages(p, t)
        assert all(isinstance(x, TextPart) for x in req.messages[1].parts)

    def test_unknown_placeholder(self):
        t = PromptTemplate(name="x", system_segment="s", instruction_segment="{bogus}")
        with pytest.raises(UnknownPlaceholder):
            render_messages(self._payload(), t)

    def test_transcript_line_format(self):
        p = self._payload()
        assert transcript_block(p) == "[(00:00:01)] user: hello world"

    def test_system_prompt_override_replaces_system_segment(self):
        p = self._payload(system_prompt="custom system")
        t = PromptTemplate(name="x", system_segment="default", instruction_segment="i")
        req = render_messages(p, t)
        assert req.messages[0].parts[0].text == "custom system"

    def test_golden_request(self):
        t = PromptTemplate(name="generate.software", system_segment="sys {brief}",
                           instruction_segment="make a {type} for {phase}\n{history}")
        req = render_messages(self._payload(), t)
        rendered = {
            "model_id": req.model_id,
            "temperature": req.temperature,
            "tags": list(map(list, req.tags)),
            "messages": [
                {
                    "role": m.role,
                    "parts": [
                        {"text": p.text} if isinstance(p, TextPart)
                        else {"image_uri": p.image_uri, "media_type": p.media_type}
                        for p in m.parts
                    ],
                }
                for m in req.messages
            ],
        }
        golden_path = GOLDEN / "generate_software_fixture.json"
        golden = json.loads(golden_path.read_text("utf-8"))
        assert rendered == golden
