"""Runtime settings shared by every gmudc computation."""

import logging

from .exceptions import InvalidParameterError


class LabConfig:
    """Global numeric settings for gmudc."""

    def __init__(self) -> None:
        self._eigen_floor = 1e-10
        self._pinv_cutoff = 1e-10
        self._float_digits = 17

    @property
    def eigen_floor(self) -> float:
        """Eigenvalues above -floor and below it are clamped to zero."""
        return self._eigen_floor

    @property
    def pinv_cutoff(self) -> float:
        """Relative cutoff for the minimum-norm ridge solution."""
        return self._pinv_cutoff

    @property
    def float_digits(self) -> int:
        """Significant digits used when writing reports."""
        return self._float_digits

    def set_eigen_floor(self, floor: float) -> None:
        """Set the eigenvalue clamping threshold."""
        if not 0 <= floor < 1e-3:
            raise InvalidParameterError("eigen_floor", floor, "must lie in [0, 1e-3)")
        self._eigen_floor = floor

    def set_pinv_cutoff(self, cutoff: float) -> None:
        """Set the relative pseudo-inverse cutoff."""
        if not 0 < cutoff < 1:
            raise InvalidParameterError("pinv_cutoff", cutoff, "must lie in (0, 1)")
        self._pinv_cutoff = cutoff

    def set_float_digits(self, digits: int) -> None:
        """Set report float precision."""
        if not 1 <= digits <= 17:
            raise InvalidParameterError("float_digits", digits, "must lie in 1..17")
        self._float_digits = digits

    def set_log_level(self, level: int) -> None:
        """Set the level of the package logger."""
        logging.getLogger("gmudc").setLevel(level)

    def reset(self) -> None:
        """Restore the defaults."""
        self.__init__()  # type: ignore[misc]


# Global configuration instance
config = LabConfig()


def get_eigen_floor() -> float:
    """Get the eigenvalue clamping threshold using global config."""
    return config.eigen_floor


def get_pinv_cutoff() -> float:
    """Get the pseudo-inverse cutoff using global config."""
    return config.pinv_cutoff


def format_float(value: float) -> str:
    """Format a float with the configured number of significant digits."""
    return format(float(value), f".{config.float_digits}g")
