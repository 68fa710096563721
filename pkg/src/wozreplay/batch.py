"""Tabular comparison pipeline: counterfactual model messages next to the
human wizard messages recorded at the same timestamps.

For each reference message, the session context up to that timestamp is
assembled, the full chain runs (classification included, no override),
and one comparison row is emitted. Per-row failures land in the error
column; the batch never aborts.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

from .chain import ChainResult, TemplateSet, run_chain
from .context import Budget, assemble
from .gateway import Gateway
from .model import MessageType, PhaseSource, SupportMessage, TaskPhase, Timecode
from .store import Store, new_message_id, now_iso
from .transcript import format_timecode, parse_timecode

BATCH_CSV_HEADER = [
    "session_id", "timestamp", "human_text", "generated_text",
    "msg_type", "phase", "prompt_version", "error",
]


@dataclass(frozen=True)
class ReferenceMessage:
    session_id: str
    t: Timecode
    text: str


@dataclass(frozen=True)
class ComparisonRow:
    session_id: str
    t: Timecode
    human_text: str
    generated_text: str
    msg_type: MessageType
    phase: TaskPhase | None
    prompt_version: str
    error: str = ""


def load_refs(data: bytes | str) -> list[ReferenceMessage]:
    """Sidecar refs.csv: session_id,timestamp,text with SRT-format timestamps."""
    text = data.decode("utf-8-sig") if isinstance(data, bytes) else data
    reader = csv.DictReader(io.StringIO(text))
    refs = []
    for row in reader:
        refs.append(ReferenceMessage(
            session_id=row["session_id"].strip(),
            t=parse_timecode(row["timestamp"].strip()),
            text=row["text"],
        ))
    return refs


def run_batch(
    store: Store,
    session_id: str,
    refs: list[ReferenceMessage],
    msg_type: MessageType,
    templates: TemplateSet,
    gateway: Gateway,
    budget: Budget = Budget(),
) -> list[ComparisonRow]:
    session = store.load_session_data(session_id)
    rows: list[ComparisonRow] = []
    for ref in refs:
        try:
            payload = assemble(session, ref.t, requested_type=msg_type, budget=budget)
            result = run_chain(payload, templates, gateway, override=None)
            msg = SupportMessage(
                id=new_message_id(), session_id=session_id, t=ref.t,
                msg_type=msg_type, phase=result.effective_phase,
                phase_source=result.phase_source,
                prompt_version=result.generate_version,
                provider_id=result.provider_id, text=result.message_text,
                created_at=now_iso(),
            )
            store.record_message(msg, payload_digest=payload.digest(), batch=True)
            rows.append(ComparisonRow(
                session_id=session_id, t=ref.t, human_text=ref.text,
                generated_text=result.message_text, msg_type=msg_type,
                phase=result.effective_phase, prompt_version=result.generate_version,
            ))
        except Exception as e:
            rows.append(ComparisonRow(
                session_id=session_id, t=ref.t, human_text=ref.text,
                generated_text="", msg_type=msg_type, phase=None,
                prompt_version="", error=f"{type(e).__name__}: {e}",
            ))
    return rows


def rows_to_csv(rows: list[ComparisonRow]) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(BATCH_CSV_HEADER)
    for r in rows:
        w.writerow([
            r.session_id, format_timecode(r.t), r.human_text, r.generated_text,
            r.msg_type.value, r.phase.value if r.phase else "",
            r.prompt_version, r.error,
        ])
    return buf.getvalue().encode("utf-8")
