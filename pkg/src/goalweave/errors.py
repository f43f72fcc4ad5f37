"""Shared exception hierarchy."""


class GoalweaveError(Exception):
    """Base class for all errors raised by this package."""


class TheoremViolation(GoalweaveError):
    """A runtime assertion backing one of the formal guarantees failed.

    Raised by the comparison harness and the verify suites; mapped to
    exit status 1 by the CLI.
    """
