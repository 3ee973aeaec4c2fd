"""Custom exceptions for gmudc."""

from typing import Any, List, Optional


class GmudcError(Exception):
    """Base exception for all gmudc errors."""

    pass


class ConfigurationError(GmudcError):
    """Raised when a scenario or spec fails validation."""

    def __init__(self, message: str, key_path: Optional[str] = None):
        self.key_path = key_path
        self.detail = message
        if key_path:
            message = f"{key_path}: {message}"
        super().__init__(message)


class InvalidParameterError(GmudcError, ValueError):
    """Raised when a numeric argument is outside its admissible range."""

    def __init__(self, name: str, value: Any, requirement: str):
        self.name = name
        self.value = value
        self.requirement = requirement
        super().__init__(f"Invalid {name}={value!r}: {requirement}")


class BudgetViolationError(GmudcError):
    """Raised when a server set exceeds the compute or fan-out budget."""

    def __init__(
        self,
        kind: str,
        server: int,
        size: int,
        budget: int,
        line_number: Optional[int] = None,
    ):
        self.kind = kind
        self.server = server
        self.size = size
        self.budget = budget
        self.line_number = line_number

        budget_name = "Gamma" if kind == "assignment" else "Delta"
        message = (
            f"Server {server + 1} {kind} set has {size} entries, "
            f"exceeding {budget_name}={budget}"
        )
        if line_number is not None:
            message = f"line {line_number}: {message}"

        super().__init__(message)


class UnknownUserError(GmudcError):
    """Raised when a user id falls outside [K]."""

    def __init__(self, user: int, num_users: int):
        self.user = user
        self.num_users = num_users
        super().__init__(
            f"Unknown user {user + 1}; valid users are 1..{num_users}"
        )


class DimensionMismatchError(GmudcError):
    """Raised when vector or matrix dimensions disagree."""

    def __init__(self, what: str, expected: Any, actual: Any):
        self.what = what
        self.expected = expected
        self.actual = actual
        super().__init__(f"{what}: expected dimension {expected}, got {actual}")


class UnsupportedKernelError(GmudcError):
    """Raised when an operation cannot use the configured kernel family."""

    def __init__(
        self,
        family: str,
        operation: str,
        suggestions: Optional[List[str]] = None,
    ):
        self.family = family
        self.operation = operation
        self.suggestions = suggestions or []

        message = f"Kernel family '{family}' is not supported by {operation}"
        if self.suggestions:
            message += f"\nSuggestions: {', '.join(self.suggestions)}"

        super().__init__(message)


class CoverageFloorError(GmudcError):
    """Raised when an uncovered target declares no separation."""

    def __init__(self, user: Optional[int] = None):
        self.user = user
        who = f"user {user + 1}" if user is not None else "target"
        super().__init__(
            f"Coverage floor for {who} is undefined: the target is uncovered "
            "but declares no separation.\nAdd `separation = <value>` to its "
            "[[tasks]] entry or use a linear target."
        )


class NumericalError(GmudcError):
    """Raised when a non-finite value reaches a report."""

    def __init__(self, quantity: str, detail: str = ""):
        self.quantity = quantity
        message = f"Non-finite value detected in {quantity}"
        if detail:
            message += f" ({detail})"
        super().__init__(message)


class EmptyReportError(GmudcError):
    """Raised when a report has no rows to emit."""

    pass
