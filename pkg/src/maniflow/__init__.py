"""Manifold stochastic optimization and its continuum limits.

Geometry primitives for embedded and chart manifolds, the retraction-based
stochastic optimizer, its gradient-flow and modified-flow (diffusion)
limits, deterministic and Monte Carlo expectation oracles, and a rate
harness that measures the weak-error orders of both approximations.
"""

from . import calculus, flows, geometry, kernels, kolmogorov, noise, problems, rsgd
from .calculus import OperatorStack, TestFunction
from .geometry import ManifoldDescriptor, Point, RetractionScheme, TangentVector
from .noise import FiniteSampleSpace, StochasticObjective
from .problems import ProblemSpec, make_problem

__version__ = "0.1.0"

__all__ = [
    "FiniteSampleSpace",
    "ManifoldDescriptor",
    "OperatorStack",
    "Point",
    "ProblemSpec",
    "RetractionScheme",
    "StochasticObjective",
    "TangentVector",
    "TestFunction",
    "__version__",
    "calculus",
    "flows",
    "geometry",
    "kernels",
    "kolmogorov",
    "make_problem",
    "noise",
    "problems",
    "rsgd",
]
