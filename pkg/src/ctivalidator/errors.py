"""Exception hierarchy shared by all ctivalidator modules.

Errors are split along the lines callers care about: bad input syntax
(FormatError), bad wiring (ConfigurationError), bad names or shapes
(SchemaError / SpecMismatchError), bad argument values (ContractError),
expected-but-absent data (DataUnavailableError), resource limits
(BudgetExceededError) and persistence trouble (StorageError).
"""

from __future__ import annotations


class CtiValidatorError(Exception):
    """Base class for every error raised by this package."""


class FormatError(CtiValidatorError, ValueError):
    """Input bytes do not parse as the expected format (CSV header, JSON, ...)."""


class ConfigurationError(CtiValidatorError, ValueError):
    """A configuration object (column map, registry root, ...) is unusable."""


class SchemaError(CtiValidatorError, ValueError):
    """A name does not belong to the record schema."""


class UnknownAttributeError(SchemaError):
    """An attribute name is not a known record field."""

    def __init__(self, name: str):
        super().__init__(f"unknown attribute: {name!r}")
        self.name = name


class ContractError(CtiValidatorError, ValueError):
    """An argument value violates a documented precondition."""


class DataUnavailableError(CtiValidatorError):
    """No rows carry the attributes a requirement asks for.

    This is an expected signal, not a defect: the orchestrator converts it
    into a data request rather than a crash.
    """

    def __init__(self, message: str, missing: tuple[str, ...] = ()):
        super().__init__(message)
        self.missing = missing


class SpecMismatchError(CtiValidatorError, ValueError):
    """Data presented for transform/predict does not match the fitted artifact."""


class BudgetExceededError(CtiValidatorError):
    """A model build ran past its wall-clock or memory budget.

    ``kind`` is ``"time"`` or ``"memory"``; ``elapsed`` is seconds spent
    before the budget check fired.
    """

    def __init__(self, kind: str, elapsed: float, detail: str = ""):
        msg = f"budget exceeded ({kind}) after {elapsed:.3f}s"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)
        self.kind = kind
        self.elapsed = elapsed


class NoModelFoundError(CtiValidatorError):
    """Every candidate in a build timed out or failed."""


class StorageError(CtiValidatorError):
    """The model registry could not read or write its on-disk state."""
