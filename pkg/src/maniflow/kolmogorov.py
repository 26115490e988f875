"""Deterministic circle oracle for modified-flow expectations.

Assembles the angle-chart generator (drift b, squared diffusion a) of a
circle objective and solves the backward equation u_t = b u' + (a/2) u''
with u(0, .) = g on a uniform periodic grid: fourth-order central
differences in space, classical RK4 in time under a parabolic stability
bound, cubic interpolation at the query angle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import kernels
from .calculus import TestFunction
from .errors import ConfigurationError, InvalidArgumentError, UnsupportedOperationError
from .geometry import ManifoldKind, Point
from .noise import StochasticObjective

DEFAULT_GRID_N = 2048
MAX_TIME_STEPS = 20_000_000


@dataclass(frozen=True)
class CircleGenerator:
    """Periodic drift and nonnegative squared-diffusion coefficients."""

    drift_coeff: Callable[[np.ndarray], np.ndarray]
    diffusion_coeff: Callable[[np.ndarray], np.ndarray]

    def tabulate(self, thetas: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        b = np.asarray(self.drift_coeff(thetas), dtype=float)
        a = np.asarray(self.diffusion_coeff(thetas), dtype=float)
        if np.any(a < -1e-14):
            raise InvalidArgumentError("diffusion coefficient must be nonnegative")
        return b, np.maximum(a, 0.0)


def circle_generator(obj: StochasticObjective, eta: float) -> CircleGenerator:
    """Chart generator of the modified flow for a circle objective."""
    if obj.manifold.kind is not ManifoldKind.CIRCLE:
        raise UnsupportedOperationError("the PDE oracle is circle-only")
    chart = obj.chart
    if chart is None:
        raise InvalidArgumentError(f"{obj.name} carries no angle-chart hooks")
    weights = np.asarray(obj.space.weights)

    def b(thetas: np.ndarray) -> np.ndarray:
        grad = chart.grad(thetas)
        return -grad - 0.5 * eta * grad * chart.grad_prime(thetas)

    def a(thetas: np.ndarray) -> np.ndarray:
        grad = chart.grad(thetas)
        acc = np.zeros_like(np.asarray(thetas, dtype=float))
        for i, w in enumerate(weights):
            gbar = grad - chart.f_tilde(thetas, i)
            acc = acc + w * gbar * gbar
        return eta * acc

    return CircleGenerator(drift_coeff=b, diffusion_coeff=a)


def _eval_g_on_grid(g: TestFunction, thetas: np.ndarray) -> np.ndarray:
    if g.chart is not None:
        return np.asarray(g.chart(thetas), dtype=float)
    from .geometry import circle

    m = circle()
    return np.array(
        [g(Point(m, np.array([math.cos(t), math.sin(t)]))) for t in thetas]
    )


def _cubic_periodic(u: np.ndarray, theta: float) -> float:
    """4-point Lagrange interpolation on the uniform periodic grid."""
    n = u.shape[0]
    pos = (theta % (2.0 * math.pi)) / (2.0 * math.pi) * n
    j = int(math.floor(pos))
    t = pos - j
    um1, u0, u1, u2 = (u[(j + k) % n] for k in (-1, 0, 1, 2))
    w_m1 = -t * (t - 1.0) * (t - 2.0) / 6.0
    w_0 = (t * t - 1.0) * (t - 2.0) / 2.0
    w_1 = -t * (t + 1.0) * (t - 2.0) / 2.0
    w_2 = t * (t * t - 1.0) / 6.0
    return float(w_m1 * um1 + w_0 * u0 + w_1 * u1 + w_2 * u2)


def solve_backward(
    gen: CircleGenerator,
    g: TestFunction,
    T: float,
    theta0: float,
    grid_n: int = DEFAULT_GRID_N,
    max_steps: int = MAX_TIME_STEPS,
) -> float:
    """u(T, theta0) for u_t = b u' + (a/2) u'', u(0, .) = g."""
    if T < 0:
        raise InvalidArgumentError("T must be nonnegative")
    if grid_n < 256 or grid_n & (grid_n - 1) != 0:
        raise InvalidArgumentError("grid_n must be a power of two, at least 256")
    thetas = np.arange(grid_n) * (2.0 * math.pi / grid_n)
    u0 = _eval_g_on_grid(g, thetas)
    if T == 0:
        return _cubic_periodic(u0, theta0)
    b, a = gen.tabulate(thetas)
    dtheta = 2.0 * math.pi / grid_n
    a_max = float(np.max(a))
    b_max = float(np.max(np.abs(b)))
    bounds = [0.5 * dtheta / max(b_max, 1e-12)]
    if a_max > 0:
        bounds.append(0.4 * dtheta * dtheta / a_max)
    dt_max = min(bounds)
    n_steps = max(1, int(math.ceil(T / dt_max - 1e-12)))
    if n_steps > max_steps:
        raise ConfigurationError(
            f"stability requires {n_steps} time steps (budget {max_steps}); "
            "coarsen the grid or shorten the horizon"
        )
    dt = T / n_steps
    u = kernels.pde_rk4(u0, b, a, dtheta, dt, n_steps)
    return _cubic_periodic(u, theta0)
