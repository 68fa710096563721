"""Domain exceptions shared across modules."""


class WozReplayError(Exception):
    code = "ERROR"


class MalformedTimecode(WozReplayError):
    code = "MALFORMED_TIMECODE"


class MalformedCue(WozReplayError):
    code = "MALFORMED_CUE"

    def __init__(self, line_no: int, detail: str = ""):
        self.line_no = line_no
        super().__init__(f"malformed cue at line {line_no}" + (f": {detail}" if detail else ""))


class Unsorted(WozReplayError):
    code = "UNSORTED"


class DuplicateTimestamp(WozReplayError):
    code = "DUPLICATE_TIMESTAMP"

    def __init__(self, t: int):
        self.t = t
        super().__init__(f"two frames map to t={t}")


class TimestampOutOfRange(WozReplayError):
    code = "TIMESTAMP_OUT_OF_RANGE"


class UnknownPlaceholder(WozReplayError):
    code = "UNKNOWN_PLACEHOLDER"

    def __init__(self, name: str):
        self.name = name
        super().__init__(f"unknown placeholder {{{name}}}")


class AuthError(WozReplayError):
    code = "AUTH_ERROR"


class ProviderUnavailable(WozReplayError):
    code = "PROVIDER_UNAVAILABLE"


class PayloadTooLarge(WozReplayError):
    code = "PAYLOAD_TOO_LARGE"


class UnparseablePhase(WozReplayError):
    code = "UNPARSEABLE_PHASE"

    def __init__(self, raw: str):
        self.raw = raw
        super().__init__("no PHASE line found in model output")


class EmptyGeneration(WozReplayError):
    code = "EMPTY_GENERATION"


class TemplateVersionMismatch(WozReplayError):
    code = "TEMPLATE_VERSION_MISMATCH"


class UnknownSession(WozReplayError):
    code = "UNKNOWN_SESSION"


class UnknownMessage(WozReplayError):
    code = "UNKNOWN_MESSAGE"


class AlreadyDecided(WozReplayError):
    code = "ALREADY_DECIDED"


class EmptyDenialReason(WozReplayError):
    code = "EMPTY_DENIAL_REASON"


class ScoreOutOfRange(WozReplayError):
    code = "SCORE_OUT_OF_RANGE"


class EmptyLabel(WozReplayError):
    code = "EMPTY_LABEL"


class RoleOccupied(WozReplayError):
    code = "ROLE_OCCUPIED"


class BadTimecode(WozReplayError):
    code = "BAD_TIMECODE"


class ValidationFailed(WozReplayError):
    code = "VALIDATION_FAILED"

    def __init__(self, violations):
        self.violations = violations
        super().__init__("; ".join(f"{v.code}: {v.detail}" for v in violations))


class ExtractorFailed(WozReplayError):
    code = "EXTRACTOR_FAILED"
