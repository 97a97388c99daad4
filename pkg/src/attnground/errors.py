"""Structured error types shared across the pipeline.

Every data-dependent failure maps to one of these; callers (service, CLI)
translate them into HTTP status codes / process exit codes.
"""


class AttnGroundError(Exception):
    """Base class for all library errors."""


class UsageError(AttnGroundError):
    """Bad arguments or configuration (caller mistake, not data)."""


class DataError(AttnGroundError):
    """Malformed or invariant-violating input data."""

    def __init__(self, message: str, *, sample_id: str | None = None, stage: str | None = None):
        super().__init__(message)
        self.sample_id = sample_id
        self.stage = stage

    def __str__(self) -> str:
        parts = [super().__str__()]
        if self.sample_id is not None:
            parts.append(f"sample_id={self.sample_id}")
        if self.stage is not None:
            parts.append(f"stage={self.stage}")
        return " | ".join(parts)


class MalformedHeader(DataError):
    """Tensor file does not start with a valid header."""


class TruncatedFile(DataError):
    """Tensor file ends before the declared payload is complete."""


class UnsupportedTensor(DataError):
    """Tensor dtype/rank outside the supported interchange set."""


class ShapeMismatch(DataError):
    """Tensor shape disagrees with what the manifest declares."""


class ManifestError(DataError):
    """Manifest file missing required fields or referencing absent files."""


class InvariantViolation(DataError):
    """A loaded value violates a documented data invariant."""


class EmptyTrace(DataError):
    """Attention trace has zero steps or zero heads."""


class EmptyMap(DataError):
    """Score map is identically zero where a nonzero map is required."""


class AllZeroAttention(DataError):
    """Cross-attention map is all zeros at the interaction stage."""


class ResolutionMismatch(DataError):
    """Score map and self-attention operate at different resolutions."""


class FixtureSpecError(UsageError):
    """Synthetic fixture specification is internally inconsistent."""
