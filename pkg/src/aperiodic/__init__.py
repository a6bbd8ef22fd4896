"""Aperiodic point sets, their diffraction, and Fibonacci Hamiltonian spectra."""

__version__ = "0.1.0"

from .errors import AperiodicError, CapExceededError, ConfigError  # noqa: E402
from .pointset import PointSet  # noqa: E402

__all__ = ["AperiodicError", "CapExceededError", "ConfigError", "PointSet", "__version__"]
