"""Deterministic simulator and solver suite for user association and resource
allocation in virtualized wireless networks."""

__version__ = "0.1.0"

from .errors import (ConfigError, InfeasibleError, KindMismatchError, OracleSizeError,
                     StaleEpochError, UndefinedMetricError)

__all__ = ["ConfigError", "InfeasibleError", "KindMismatchError", "OracleSizeError",
           "StaleEpochError", "UndefinedMetricError", "__version__"]
