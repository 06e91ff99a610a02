"""Numerical toolkit for fractional stochastic heat equations.

Modules
-------
kernel
    Fractional heat kernel quadrature and exact Gaussian identities.
spde
    Spectral solver for the system on a periodic grid.
stats
    Increment moments, Hölder fits, kernel density estimates and density bounds.
potential
    Riesz capacities, Hausdorff pre-measures and dimension thresholds.
hitting
    Monte Carlo hitting probabilities and their comparison with the bounds.
cli
    The ``fracheat`` command-line interface.
"""

__version__ = "0.1.0"

from .errors import DomainError, FracHeatError, NumericError, SimulationDiverged  # noqa: E402

__all__ = ["__version__", "FracHeatError", "DomainError", "NumericError", "SimulationDiverged"]
