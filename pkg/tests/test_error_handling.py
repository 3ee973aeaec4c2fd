"""Tests for the gmudc exception hierarchy."""

import pytest

from gmudc.exceptions import (
    BudgetViolationError,
    ConfigurationError,
    CoverageFloorError,
    DimensionMismatchError,
    EmptyReportError,
    GmudcError,
    InvalidParameterError,
    NumericalError,
    UnknownUserError,
    UnsupportedKernelError,
)
from gmudc.topology import parse_topology, received_count

HEADER = "K = 2\nN = 2\nL = 4\nGamma = 2\nDelta = 2\nT = 1\n"


def test_exception_hierarchy():
    """Test every gmudc exception derives from GmudcError."""
    for error_type in (
        BudgetViolationError,
        ConfigurationError,
        CoverageFloorError,
        DimensionMismatchError,
        EmptyReportError,
        InvalidParameterError,
        NumericalError,
        UnknownUserError,
        UnsupportedKernelError,
    ):
        assert issubclass(error_type, GmudcError)
    assert issubclass(InvalidParameterError, ValueError)


def test_configuration_error_key_path():
    """Test the key path prefixes the message when given."""
    error = ConfigurationError("must be positive", "system.K")
    assert error.key_path == "system.K"
    assert error.detail == "must be positive"
    assert str(error) == "system.K: must be positive"
    assert str(ConfigurationError("bad file")) == "bad file"


def test_invalid_parameter_error_attributes():
    """Test name, value and requirement are kept."""
    error = InvalidParameterError("lambda", -1.0, "must be non-negative")
    assert error.name == "lambda"
    assert error.value == -1.0
    assert str(error) == "Invalid lambda=-1.0: must be non-negative"


def test_budget_violation_message():
    """Test servers are reported 1-based with the violated budget."""
    error = BudgetViolationError("assignment", 1, 3, 2, line_number=8)
    assert str(error) == "line 8: Server 2 assignment set has 3 entries, exceeding Gamma=2"
    fanout = BudgetViolationError("links", 0, 4, 3)
    assert str(fanout) == "Server 1 links set has 4 entries, exceeding Delta=3"
    assert fanout.line_number is None


def test_budget_violation_from_topology_file():
    """Test an oversize assignment line raises with its line number."""
    text = HEADER + "S 1 1 2\nS 2 1 2 3\nT 1 1 2\nT 2 1\n"
    with pytest.raises(BudgetViolationError) as exc_info:
        parse_topology(text)
    assert exc_info.value.kind == "assignment"
    assert exc_info.value.server == 1
    assert exc_info.value.line_number == 8


def test_unknown_user_error():
    """Test user ids outside [K] are reported 1-based."""
    error = UnknownUserError(5, 3)
    assert str(error) == "Unknown user 6; valid users are 1..3"
    config, topology = parse_topology(HEADER + "S 1 1 2\nS 2 3 4\nT 1 1 2\nT 2 1 2\n")
    with pytest.raises(UnknownUserError) as exc_info:
        received_count(topology, config, 2)
    assert exc_info.value.num_users == 2


def test_dimension_mismatch_error():
    """Test the message names what disagreed."""
    error = DimensionMismatchError("labels", 10, 9)
    assert str(error) == "labels: expected dimension 10, got 9"
    assert (error.expected, error.actual) == (10, 9)


def test_unsupported_kernel_suggestions():
    """Test suggestions are appended on their own line."""
    error = UnsupportedKernelError("gaussian", "mp-gap", ["use family = 'linear'"])
    assert str(error).startswith("Kernel family 'gaussian' is not supported by mp-gap")
    assert "\nSuggestions: use family = 'linear'" in str(error)
    assert "Suggestions" not in str(UnsupportedKernelError("linear", "masked RFF"))


def test_coverage_floor_error_message():
    """Test the remedy is part of the message."""
    error = CoverageFloorError(user=0)
    assert "user 1" in str(error)
    assert "separation = <value>" in str(error)
    assert "target is uncovered" in str(CoverageFloorError())


def test_numerical_error_message():
    """Test the quantity and detail appear in the message."""
    error = NumericalError("risk", "quenched report value nan")
    assert error.quantity == "risk"
    assert str(error) == "Non-finite value detected in risk (quenched report value nan)"
