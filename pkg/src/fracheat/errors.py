"""Exception hierarchy shared by all modules."""


class FracHeatError(Exception):
    """Base class for package errors."""


class DomainError(FracHeatError, ValueError):
    """An argument lies outside the domain of an operation."""


class NumericError(FracHeatError, ArithmeticError):
    """A numerical routine failed to reach its tolerance.

    Parameters
    ----------
    message : str
        Description of the failure.
    achieved : float, optional
        Best error estimate or gap reached before giving up.
    """

    def __init__(self, message: str, achieved: float | None = None):
        super().__init__(message)
        self.achieved = achieved


class SimulationDiverged(NumericError):
    """The SPDE state became non-finite."""

    def __init__(self, step: int, seed: int | None = None):
        where = f"step {step}" if seed is None else f"step {step} (seed {seed})"
        super().__init__(f"simulation diverged at {where}")
        self.step = step
        self.seed = seed
