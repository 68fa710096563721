"""Two-stage pipeline: task-phase classification, then typed message generation.

The wizard can override the classified phase between stages; the
classification result is always recorded even when overridden so the
override rate stays analyzable. No silent default phases: a
classification that cannot be parsed is surfaced, and only an explicit
override rescues the chain.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from pathlib import Path

from .context import ContextPayload, render_messages
from .errors import EmptyGeneration, TemplateVersionMismatch, UnparseablePhase
from .gateway import Gateway, fnv1a64
from .model import MessageType, PhaseSource, TaskPhase

CLASSIFY_TEMPERATURE = 0.2
GENERATE_TEMPERATURE = 0.7

SEGMENT_SEPARATOR = "\n---\n"

GENERATE_FILENAMES = {
    MessageType.REFLECTIVE_QUESTION: "generate.question.txt",
    MessageType.DESIGN_SUGGESTION: "generate.design.txt",
    MessageType.SOFTWARE_TIP: "generate.software.txt",
}

_PHASE_LINE_RE = re.compile(r"^\s*PHASE:\s*([A-Za-z]+)\s*$", re.IGNORECASE)
_PHASES_BY_LOWER = {p.value.lower(): p for p in TaskPhase}


def template_version(system_segment: str, instruction_segment: str) -> str:
    return f"{fnv1a64((system_segment + instruction_segment).encode('utf-8')):016x}"


@dataclass(frozen=True)
class PromptTemplate:
    name: str
    system_segment: str
    instruction_segment: str
    version: str = ""

    def __post_init__(self):
        expected = template_version(self.system_segment, self.instruction_segment)
        if self.version == "":
            object.__setattr__(self, "version", expected)
        elif self.version != expected:
            raise TemplateVersionMismatch(
                f"template {self.name!r}: declared {self.version}, computed {expected}"
            )


@dataclass(frozen=True)
class TemplateSet:
    classify: PromptTemplate
    generate: dict  # MessageType -> PromptTemplate

    def __post_init__(self):
        missing = [t for t in MessageType if t not in self.generate]
        if missing:
            raise ValueError(f"generate templates missing for {[m.value for m in missing]}")


def _parse_template_file(name: str, text: str) -> PromptTemplate:
    if SEGMENT_SEPARATOR in text:
        system, instruction = text.split(SEGMENT_SEPARATOR, 1)
    else:
        system, instruction = "", text
    return PromptTemplate(name=name, system_segment=system, instruction_segment=instruction)


def load_templates(prompts_dir: Path) -> TemplateSet:
    """Load classify.txt and the three generate.*.txt files.

    Each file holds the system segment, a line "---", then the
    instruction segment; files without the separator are instruction-only.
    """
    classify = _parse_template_file("classify", (prompts_dir / "classify.txt").read_text("utf-8"))
    generate = {}
    for msg_type, fname in GENERATE_FILENAMES.items():
        name = fname.removesuffix(".txt")
        generate[msg_type] = _parse_template_file(name, (prompts_dir / fname).read_text("utf-8"))
    return TemplateSet(classify=classify, generate=generate)


@dataclass(frozen=True)
class ChainResult:
    classified_phase: TaskPhase | None
    phase_confidence_raw: str
    effective_phase: TaskPhase
    phase_source: PhaseSource
    message_text: str
    classify_version: str
    generate_version: str
    provider_id: str


def parse_phase_line(raw: str) -> TaskPhase:
    for line in raw.splitlines():
        m = _PHASE_LINE_RE.match(line)
        if m and m.group(1).lower() in _PHASES_BY_LOWER:
            return _PHASES_BY_LOWER[m.group(1).lower()]
    raise UnparseablePhase(raw)


def classify_phase(
    payload: ContextPayload, templates: TemplateSet, gateway: Gateway
) -> tuple[TaskPhase, str]:
    """Classify the user's current task phase. Never guesses on parse failure."""
    classify_payload = replace(payload, requested_type=None, phase=None, system_prompt="")
    req = render_messages(classify_payload, templates.classify, temperature=CLASSIFY_TEMPERATURE)
    resp = gateway.complete(req)
    return parse_phase_line(resp.text), resp.text


def generate_message(
    payload: ContextPayload,
    phase: TaskPhase,
    msg_type: MessageType,
    templates: TemplateSet,
    gateway: Gateway,
) -> str:
    """Generate one support message of the given type for the given phase."""
    assert payload.requested_type == msg_type and payload.phase == phase
    template = templates.generate[msg_type]
    req = render_messages(payload, template, temperature=GENERATE_TEMPERATURE)
    resp = gateway.complete(req)
    text = resp.text.strip()
    if not text:
        raise EmptyGeneration("model returned only whitespace")
    # keep the first paragraph when the model rambles
    return text.split("\n\n", 1)[0].strip()


def run_chain(
    payload: ContextPayload,
    templates: TemplateSet,
    gateway: Gateway,
    override: TaskPhase | None = None,
) -> ChainResult:
    """Classification always runs (and is recorded) even when overridden.

    A classification error with an override present still proceeds to
    generation: the override rescues the chain.
    """
    if payload.requested_type is None:
        raise ValueError("run_chain requires a requested message type")

    classified: TaskPhase | None = None
    raw = ""
    try:
        classified, raw = classify_phase(payload, templates, gateway)
    except UnparseablePhase as e:
        if override is None:
            raise
        raw = e.raw

    effective = override if override is not None else classified
    assert effective is not None
    gen_payload = replace(payload, phase=effective)
    text = generate_message(gen_payload, effective, payload.requested_type, templates, gateway)

    return ChainResult(
        classified_phase=classified,
        phase_confidence_raw=raw,
        effective_phase=effective,
        phase_source=PhaseSource.WIZARD_OVERRIDE if override is not None else PhaseSource.MODEL,
        message_text=text,
        classify_version=templates.classify.version,
        generate_version=templates.generate[payload.requested_type].version,
        provider_id=gateway.provider_id,
    )
