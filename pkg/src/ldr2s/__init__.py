"""Two-stage linear decision rule bounds for multi-stage stochastic LPs.

Approximates a multi-stage stochastic linear program by restricting its
state variables (primal) or state-equation duals (dual) to linear
decision rules, solves the resulting two-stage problems by Benders
decomposition and the bundle-level method, and turns the solutions into
feasible policies with statistical upper/lower bounds.
"""

from ._backend import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
