"""Exception types raised by pdqeval."""

from __future__ import annotations


class PDQError(Exception):
    """Base class for every error raised by this package."""


class InvalidCovariance(PDQError, ValueError):
    """A corner covariance is not a symmetric positive semi-definite 2x2 matrix."""


class InvalidThreshold(PDQError, ValueError):
    """A support threshold outside the open interval (0, 0.5)."""


class InvalidProbabilities(PDQError, ValueError):
    """A label distribution with entries outside [0, 1] or total mass above 1."""


class EmptyMask(PDQError, ValueError):
    """A segment mask with no set pixels."""


class MixedFrames(PDQError, ValueError):
    """Objects from different frames were passed to a per-frame operation."""


class TooLarge(PDQError, ValueError):
    """Input exceeds the size an exhaustive oracle is willing to enumerate."""


class UnknownFormat(PDQError, ValueError):
    """Unsupported report format."""


class DocumentError(PDQError):
    """A single violation found while validating an input document.

    ``frame`` and ``record`` locate the offending entry when known.
    """

    def __init__(self, message: str, frame: int | None = None, record: int | None = None):
        self.message = message
        self.frame = frame
        self.record = record
        super().__init__(str(self))

    @property
    def location(self) -> str:
        parts = []
        if self.frame is not None:
            parts.append(f"frame {self.frame}")
        if self.record is not None:
            parts.append(f"record {self.record}")
        return ", ".join(parts) if parts else "document"

    def __str__(self) -> str:
        return f"{type(self).__name__} at {self.location}: {self.message}"


class MalformedSyntax(DocumentError):
    pass


class WrongProbVectorLength(DocumentError):
    pass


class InvalidProbability(DocumentError):
    pass


class NegativeVariance(DocumentError):
    pass


class NonSymmetricCovariance(DocumentError):
    pass


class InvertedBox(DocumentError):
    pass


class RleLengthMismatch(DocumentError):
    pass


class UnknownClass(DocumentError):
    pass


class EmptySegment(DocumentError):
    pass


class DocumentInvalid(PDQError):
    """Raised when a document fails validation; carries every violation found."""

    def __init__(self, violations: list[DocumentError]):
        self.violations = list(violations)
        lines = "\n".join(f"  {v}" for v in self.violations)
        super().__init__(f"{len(self.violations)} violation(s):\n{lines}")
