"""Custom exceptions for the ofdm_phy package.

Three families sit under :class:`OfdmPhyError`:

* :class:`InvalidArgumentError`: a library call got an argument it cannot use;
* :class:`ConfigurationError`: a scenario document is malformed or invalid
  (CLI exit code 1);
* :class:`SimulationError`: a validated run failed while executing
  (CLI exit code 2).
"""

from typing import Any


class OfdmPhyError(Exception):
    """Base exception for all ofdm_phy errors.

    Attributes:
        message: Human-readable error message, without the cause
        cause: Underlying exception, if any
        details: Structured context (offending key, trial index, ...)

    """

    def __init__(self, message: str, cause: Exception | None = None, details: dict[str, Any] | None = None):
        self.message = message
        self.cause = cause
        self.details = details or {}
        super().__init__(f"{message} Caused by: {cause!s}" if cause else message)

    @staticmethod
    def _with_context(details: dict[str, Any] | None, **context: Any) -> dict[str, Any]:
        """Merge the non-None context fields into ``details``."""
        merged = dict(details or {})
        merged.update({key: value for key, value in context.items() if value is not None})
        return merged


class InvalidArgumentError(OfdmPhyError, ValueError):
    """A transform, modem, channel or analysis call received an unusable argument.

    Typical causes are empty input, a length that does not match N or the
    plan, and out-of-range parameters such as ``|epsilon| >= 0.5``. Also a
    ``ValueError`` so that generic callers can catch it.
    """

    def __init__(
        self,
        message: str,
        parameter: str | None = None,
        value: Any | None = None,
        cause: Exception | None = None,
        details: dict[str, Any] | None = None,
    ):
        self.parameter = parameter
        self.value = value
        super().__init__(message, cause, self._with_context(details, parameter=parameter, value=value))


class ConfigurationError(OfdmPhyError):
    """A scenario could not be loaded or validated.

    ``parameter`` is the dotted key (``"impairments.snr_db"``) and ``line``
    the 1-based line of that key in the JSON document when it is known.
    """

    def __init__(
        self,
        message: str,
        parameter: str | None = None,
        value: Any | None = None,
        line: int | None = None,
        cause: Exception | None = None,
        details: dict[str, Any] | None = None,
    ):
        self.parameter = parameter
        self.value = value
        self.line = line
        super().__init__(message, cause, self._with_context(details, parameter=parameter, value=value, line=line))


class SimulationError(OfdmPhyError):
    """A Monte-Carlo run failed after its configuration was accepted."""

    def __init__(
        self,
        message: str,
        experiment: str | None = None,
        trial: int | None = None,
        cause: Exception | None = None,
        details: dict[str, Any] | None = None,
    ):
        self.experiment = experiment
        self.trial = trial
        super().__init__(message, cause, self._with_context(details, experiment=experiment, trial=trial))
