"""Exception hierarchy shared by all litsieve modules."""

from __future__ import annotations


class LitsieveError(Exception):
    """Base class for all litsieve errors."""

    code = "error"

    def __init__(self, message: str, details: object = None) -> None:
        super().__init__(message)
        self.message = message
        self.details = details


class PreconditionError(LitsieveError):
    """An operation was invoked on state that does not satisfy its preconditions."""

    code = "precondition"


class DataIntegrityError(LitsieveError):
    """Stored or computed data violates a structural invariant."""

    code = "data_integrity"


class ParseError(LitsieveError):
    """Input file could not be parsed. Carries the 1-based line number."""

    code = "parse"

    def __init__(self, message: str, line: int) -> None:
        super().__init__(f"line {line}: {message}", details={"line": line})
        self.line = line


class ProfileError(LitsieveError):
    """A source profile does not match the file it is applied to."""

    code = "profile"


class StaleRevisionError(LitsieveError):
    """A write was based on an outdated project revision; refresh and retry."""

    code = "stale_revision"


class UnknownReviewerError(LitsieveError):
    """Reviewer id or token is not part of the project configuration."""

    code = "unknown_reviewer"


class VoteError(LitsieveError):
    """A vote violates scale bounds, uniqueness, or round state."""

    code = "vote"
