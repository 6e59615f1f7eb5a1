"""Exception types raised across the package."""


class CastrackError(Exception):
    """Base class for all package errors."""


class ParameterDomainError(CastrackError, ValueError):
    """A physical parameter is outside its admissible domain."""


class ScenarioRejected(CastrackError, ValueError):
    """A scenario violates a wave-regime or structural invariant."""


class BoundaryViolation(CastrackError):
    """An agent state left the admissible set.

    Attributes:
        axis: index of the offending coordinate (0..5 over [p, v]).
        quantity: ``"position"`` or ``"velocity"``.
        value: the offending value.
    """

    def __init__(self, axis: int, quantity: str, value: float, bound: tuple[float, float]):
        self.axis = axis
        self.quantity = quantity
        self.value = value
        self.bound = bound
        name = "xyz"[axis % 3]
        super().__init__(
            f"{quantity} {name}={value:.6g} outside [{bound[0]:.6g}, {bound[1]:.6g}]"
        )


class FitError(CastrackError, ValueError):
    """Detection-model fitting failed on a degenerate table."""


class SizeGuardError(CastrackError, ValueError):
    """A requested enumeration or sweep exceeds its size guard."""


class ConfigError(CastrackError, ValueError):
    """Configuration file failed to parse or validate."""
