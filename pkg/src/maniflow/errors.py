"""Exception taxonomy shared across the library.

Exit-code mapping used by the CLI: usage/config errors exit 2, budget
errors exit 3, assertion failures exit 1.
"""


class ManiflowError(Exception):
    """Base class for all library errors."""


class InvalidArgumentError(ManiflowError, ValueError):
    """Inconsistent dimensions, mismatched base points, bad atom index."""


class TubeViolationError(ManiflowError):
    """Metric projection queried outside its uniqueness tube."""


class UnsupportedOperationError(ManiflowError):
    """Operation not defined for the given manifold kind."""


class BudgetExceededError(ManiflowError):
    """Deterministic-oracle work bound would be exceeded.

    Carries the budget that would be required so callers can re-plan.
    """

    def __init__(self, message: str, required: int | None = None):
        super().__init__(message)
        self.required = required


class StepFailureError(ManiflowError):
    """An optimizer step could not be completed; carries the offending state."""

    def __init__(self, message: str, state=None):
        super().__init__(message)
        self.state = state


class InsufficientDataError(ManiflowError, ValueError):
    """Fewer valid points than a fit requires."""


class ConfigurationError(ManiflowError, ValueError):
    """Malformed experiment configuration or unsatisfiable solver settings."""
