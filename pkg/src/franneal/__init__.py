"""franneal: simulation and verification toolkit for fractional annealing.

Generates Liouville fractional Brownian motion and its epsilon-semimartingale
approximation, integrates the fractional Langevin annealing SDE, evaluates the
linearized closed-form solution around steady states, and quantifies the L2
convergence of the approximation by deterministic quadrature and Monte Carlo.
"""

from ._kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
