"""Ultra-wideband + inertial pose tracking, end to end on synthetic data.

The package covers the whole loop: body motion synthesis, raw IMU and
two-way-ranging simulation, clock and range calibration, orientation and
distance filtering, and a distance-aware pose network with its own tape
autodiff. The `uip` command line drives the stages; each module is also
usable on its own.
"""
from .errors import (
    CalibrationError,
    ConfigError,
    ContractViolationError,
    DataError,
    DivergenceError,
    UipError,
)

__version__ = "0.1.0"

__all__ = [
    "CalibrationError",
    "ConfigError",
    "ContractViolationError",
    "DataError",
    "DivergenceError",
    "UipError",
    "__version__",
]
