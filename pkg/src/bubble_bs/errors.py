"""Exception hierarchy.

Two families map onto the CLI exit codes: ``InputError`` (exit 2) for
anything the caller can fix by changing inputs, ``NumericalError`` (exit 3)
for methods that ran but could not produce a trustworthy number.
"""
from __future__ import annotations

from dataclasses import dataclass


class BubbleError(Exception):
    """Base class; ``code`` is a stable machine-readable identifier."""

    code = "error"


class InputError(BubbleError, ValueError):
    code = "input_error"


class NumericalError(BubbleError, ArithmeticError):
    code = "numerical_error"


@dataclass(frozen=True)
class Issue:
    code: str
    path: str
    message: str

    def __str__(self) -> str:
        return f"{self.path}: {self.message} [{self.code}]"


class ValidationError(InputError):
    code = "validation_error"

    def __init__(self, issues, message: str | None = None):
        if isinstance(issues, Issue):
            issues = [issues]
        self.issues = list(issues)
        if message is None:
            message = "; ".join(str(i) for i in self.issues) or "invalid input"
        super().__init__(message)


class ParseError(InputError):
    code = "parse_error"


class PoleProximity(ValidationError):
    """Bubble amplitude within the pole guard of sigma (v diverges at f = sigma)."""

    code = "pole_proximity"

    def __init__(self, issues, message: str | None = None, segment_index: int | None = None):
        super().__init__(issues, message)
        self.segment_index = segment_index


class OutOfRange(InputError):
    code = "out_of_range"


class DegenerateTime(InputError):
    code = "degenerate_time"


class StrikeShiftUnsupported(InputError):
    code = "strike_shift_unsupported"


class UnstableConfig(InputError):
    code = "unstable_config"


class NonConvergence(NumericalError):
    code = "non_convergence"


class BubbleTooStrong(NumericalError):
    code = "bubble_too_strong"


class TruncationNotConverged(NumericalError):
    """The series hit ``max_order`` before the stopping rule fired.

    The truncated result is still available as ``.result``.
    """

    code = "truncation_not_converged"

    def __init__(self, message: str, result=None):
        super().__init__(message)
        self.result = result
