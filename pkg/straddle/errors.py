"""Exception types shared by the synthesis, analysis and CLI layers"""

from typing import Optional


class StraddleError(Exception):
    """Base class for every error raised by the straddle package"""


class InvalidInputError(StraddleError):
    """Input violates a precondition (shape, unitarity, partition, ...)

    Args:
        message: Human readable diagnostic
        check: Name of the failed check, when one applies
    """

    def __init__(self, message: str, check: Optional[str] = None):
        super().__init__(message)
        self.check = check


class ResourceLimitError(StraddleError):
    """A configured size cap was exceeded"""


class VerificationError(StraddleError):
    """A synthesized circuit failed its fidelity or reconstruction oracle"""
