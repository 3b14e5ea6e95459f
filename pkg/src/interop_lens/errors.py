"""Exception hierarchy for interop-lens."""


class InteropLensError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(InteropLensError):
    """Input data or configuration violates a declared contract."""


class SchemaMismatch(ValidationError):
    pass


class UnknownChain(ValidationError):
    pass


class UnknownBridge(ValidationError):
    pass


class DuplicateKey(ValidationError):
    pass


class SelfLoop(ValidationError):
    pass


class SummaryOrderViolation(ValidationError):
    pass


class NegativeValue(ValidationError):
    pass


class InvalidRecord(ValidationError):
    pass


class ConfigError(ValidationError):
    pass


class MemberCountOutOfRange(InteropLensError):
    pass


class SameChain(InteropLensError):
    pass


class UnknownFilter(InteropLensError):
    pass


class UnclassifiedChain(InteropLensError):
    pass


class InvalidProbability(InteropLensError):
    pass


class NoSummaries(InteropLensError):
    pass


class RankDeficient(InteropLensError):
    pass


class InsufficientVariation(InteropLensError):
    pass


class DegenerateTreatment(InteropLensError):
    pass


class InsufficientPairs(InteropLensError):
    pass


class JoinKeyMismatch(InteropLensError):
    pass


class IncompleteBundle(InteropLensError):
    pass


class StageError(InteropLensError):
    """A pipeline stage failed; ``stage`` names it."""

    def __init__(self, stage, cause):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
