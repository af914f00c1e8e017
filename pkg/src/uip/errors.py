"""Exception hierarchy shared by the whole package.

The CLI maps these onto process exit codes: ConfigError -> 2,
DataError (and subclasses) -> 3, DivergenceError -> 4. Contract
violations are programming errors and are allowed to crash.
"""


class UipError(Exception):
    """Base class for errors raised by this package."""


class ContractViolationError(UipError):
    """A documented precondition or invariant was broken by the caller."""


class ConfigError(UipError):
    """Bad or inconsistent configuration (unknown key, invalid value)."""


class DataError(UipError):
    """Missing, stale, or malformed input data."""


class CalibrationError(DataError):
    """A calibration step could not produce a usable result."""


class CheckpointVersionError(DataError):
    """Checkpoint format version does not match this code."""


class DivergenceError(UipError):
    """A numeric procedure left the finite regime (NaN/inf loss, filter blowup)."""
