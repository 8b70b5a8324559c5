"""Semantic exceptions shared across the lab."""


class SimplicityOodError(Exception):
    """Base class for every error raised by this package."""


class DimensionMismatchError(SimplicityOodError, ValueError):
    """A parameter or covariate vector has the wrong length."""

    def __init__(self, expected: int, actual: int, what: str = "beta"):
        self.expected = expected
        self.actual = actual
        super().__init__(f"{what} has dimension {actual}, expected {expected}")


class EmptyDatasetError(SimplicityOodError, ValueError):
    """An operation that averages over samples received zero samples."""


class ScheduleDomainError(SimplicityOodError, ValueError):
    """A regularization schedule was evaluated outside its domain."""


class SingularMatrixError(SimplicityOodError, ValueError):
    """A linear system or matrix inverse is singular where full rank is required."""


class NonconvergenceError(SimplicityOodError, RuntimeError):
    """No optimizer start reached the stationarity tolerance.

    Carries the best terminal point seen so far for diagnosis.
    """

    def __init__(self, message: str, best_beta=None, best_objective=None,
                 best_grad_norm=None):
        self.best_beta = best_beta
        self.best_objective = best_objective
        self.best_grad_norm = best_grad_norm
        super().__init__(message)


class DegenerateFitError(SimplicityOodError, ValueError):
    """A log-log rate fit is impossible (nonpositive medians or too few points)."""


class DivergenceError(SimplicityOodError, RuntimeError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch: int, value: float):
        self.epoch = epoch
        self.value = value
        super().__init__(f"non-finite training loss {value!r} at epoch {epoch}")


class ConfigError(SimplicityOodError, ValueError):
    """An experiment config file is malformed or inconsistent."""
