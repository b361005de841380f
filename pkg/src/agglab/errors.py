"""Exception types raised across the package."""


class AggLabError(Exception):
    """Base class for all errors raised by agglab."""


class DimensionMismatch(AggLabError, ValueError):
    pass


class DomainError(AggLabError, ValueError):
    """A formula was evaluated outside of its domain (pole, division by zero)."""


class NoMajorantError(AggLabError, ValueError):
    """The kernel has no finite upper bound over the current particle system."""


class MajorantViolation(AggLabError, RuntimeError):
    """A kernel value exceeded the majorant used for rejection sampling."""


class ConvergenceError(AggLabError, RuntimeError):
    """Step-doubling or quadrature refinement did not meet its tolerance."""


class ConfigError(AggLabError, ValueError):
    """Configuration failed validation; ``errors`` lists every problem found."""

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))
