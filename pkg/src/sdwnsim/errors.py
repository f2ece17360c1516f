"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid scenario configuration or mismatched input dimensions."""


class InfeasibleError(RuntimeError):
    """Reservations cannot all be met.

    Carries the maximal uniform scaling factor s < 1 such that the scaled
    reservations s*beta_k (or s*R_k) are feasible.
    """

    def __init__(self, message, scaling):
        super().__init__(message)
        self.scaling = float(scaling)


class OracleSizeError(ValueError):
    """Instance exceeds the brute-force oracle's size limits."""


class StaleEpochError(RuntimeError):
    """A schedule with a non-increasing epoch was replayed to SD-LRM."""


class KindMismatchError(TypeError):
    """A RAN received an allocation or SLA of the wrong kind."""


class UndefinedMetricError(ValueError):
    """Metric is undefined for the given input (e.g. all-zero throughputs)."""
