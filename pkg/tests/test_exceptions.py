"""Tests for the custom exception classes."""

import pytest

from ofdm_phy.exceptions import (
    ConfigurationError,
    InvalidArgumentError,
    OfdmPhyError,
    SimulationError,
)


def test_base_exception():
    """Test the base OfdmPhyError class."""
    error = OfdmPhyError("Test error")
    assert str(error) == "Test error"
    assert error.message == "Test error"
    assert error.cause is None
    assert error.details == {}

    cause = ValueError("Original error")
    error = OfdmPhyError("Test error", cause=cause)
    assert "Test error Caused by: Original error" in str(error)
    assert error.cause == cause

    error = OfdmPhyError("Test error", details={"key": "value"})
    assert error.details == {"key": "value"}


def test_invalid_argument_error():
    """Test the InvalidArgumentError class."""
    error = InvalidArgumentError("bad length")
    assert error.parameter is None
    assert error.value is None

    error = InvalidArgumentError("rolloff too long", parameter="rolloff_len", value=0)
    assert error.parameter == "rolloff_len"
    assert error.value == 0
    assert error.details == {"parameter": "rolloff_len", "value": 0}


def test_invalid_argument_error_is_value_error():
    """Callers catching ValueError also see argument errors."""
    with pytest.raises(ValueError):
        raise InvalidArgumentError("empty input", parameter="x")


def test_configuration_error():
    """Test the ConfigurationError class."""
    error = ConfigurationError("Configuration error")
    assert str(error) == "Configuration error"
    assert error.parameter is None
    assert error.line is None

    error = ConfigurationError("cp_len must be < n_fft", parameter="cp_len", value=64, line=4)
    assert error.parameter == "cp_len"
    assert error.value == 64
    assert error.line == 4
    assert error.details == {"parameter": "cp_len", "value": 64, "line": 4}


def test_simulation_error():
    """Test the SimulationError class."""
    cause = FloatingPointError("overflow")
    error = SimulationError("Trial failed", experiment="ber_sweep", trial=3, cause=cause)
    assert error.experiment == "ber_sweep"
    assert error.trial == 3
    assert error.details == {"experiment": "ber_sweep", "trial": 3}
    assert "Caused by: overflow" in str(error)


def test_exception_hierarchy():
    """Test that all exceptions inherit from OfdmPhyError."""
    assert issubclass(InvalidArgumentError, OfdmPhyError)
    assert issubclass(ConfigurationError, OfdmPhyError)
    assert issubclass(SimulationError, OfdmPhyError)

    errors = [
        InvalidArgumentError("Invalid argument"),
        ConfigurationError("Configuration error"),
        SimulationError("Simulation error"),
    ]
    for error in errors:
        try:
            raise error
        except OfdmPhyError as e:
            assert e is error
