"""Exception types raised across the package."""


class HypctrlError(Exception):
    """Base class for all package errors."""


class EvaluationError(HypctrlError):
    """A model coefficient function returned a non-finite value.

    Carries the name of the offending function and the evaluation point.
    """

    def __init__(self, func_name, point, message=""):
        self.func_name = func_name
        self.point = point
        super().__init__(
            message or f"non-finite value from {func_name!r} at {point!r}"
        )


class CharacteristicError(HypctrlError):
    """Characteristic transit time could not be computed (bad speed)."""

    def __init__(self, x, message=""):
        self.x = x
        super().__init__(message or f"invalid propagation speed at x={x!r}")


class RangeError(HypctrlError):
    """Query time outside the range covered by a characteristic curve."""


class PredictionError(HypctrlError):
    """The state blew up while solving over a determinate set."""


class ControlError(HypctrlError):
    """Controller-internal failure (target-system divergence or similar)."""


class ObserverError(HypctrlError):
    """Observer-internal failure (estimate blow-up or CFL violation)."""


class UnsupportedModel(HypctrlError):
    """The operation does not support the given model structure."""


class ConfigError(HypctrlError):
    """Scenario configuration is missing, malformed or inconsistent.

    ``key`` names the offending configuration entry when known.
    """

    def __init__(self, message, key=None):
        self.key = key
        super().__init__(message)


class InputCoverageError(HypctrlError):
    """The supplied input signal does not cover a requested time."""


class NumericsError(HypctrlError):
    """Internal numerical failure not attributable to plant blow-up."""
