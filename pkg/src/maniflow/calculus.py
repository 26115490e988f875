"""Differential operators on scalar test functions.

Second and third derivatives of test functions are always taken along
geodesics (d^2/dt^2 g(exp_x(tv))), so manifolds only need an exponential
map; no ambient Hessians are formed.  The one-step Taylor surrogates at the
bottom are the order-eta^2 expansions of a single optimizer step and of the
matching diffusion step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import InvalidArgumentError
from .geometry import (
    ManifoldKind,
    Point,
    TangentVector,
    covariant_derivative,
    exp_map,
    implementation_for,
    inner,
    riemannian_gradient_from_euclidean,
)

# 4th-order second-difference step: balances h^4 truncation vs eps/h^2 rounding
_H2 = float(np.finfo(float).eps ** (1.0 / 6.0))

TangentField = Callable[[Point], TangentVector]


@dataclass(frozen=True)
class TestFunction:
    """A scalar observable g on the manifold.

    ``ambient_gradient`` (when given) is the Euclidean gradient of a smooth
    ambient/chart extension of g; ``chart`` is an optional vectorized
    angle-chart evaluation used by the circle PDE oracle.
    """

    evaluate: Callable[[Point], float]
    ambient_gradient: Callable[[Point], np.ndarray] | None = None
    smoothness: str = "C4"
    chart: Callable[[np.ndarray], np.ndarray] | None = None
    chart_code: int | None = None  # 0 = sin, 1 = cos (compiled-kernel dispatch)
    evaluate_batch: Callable[[np.ndarray], np.ndarray] | None = None
    name: str = "g"

    def __call__(self, x: Point) -> float:
        return float(self.evaluate(x))

    def gradient(self, x: Point) -> TangentVector:
        if self.ambient_gradient is not None:
            return riemannian_gradient_from_euclidean(x, self.ambient_gradient(x))
        return _fd_gradient(self, x)


def _fd_gradient(g: TestFunction, x: Point) -> TangentVector:
    m = x.manifold
    impl = implementation_for(m)
    h = float(np.cbrt(np.finfo(float).eps)) * (1.0 + float(np.linalg.norm(x.coords)))
    d = m.ambient_dim
    out = np.empty(d)
    if m.kind is ManifoldKind.FISHER_HALF_PLANE:
        h = min(h, 0.25 * x.coords[1])
        for i in range(d):
            e = np.zeros(d)
            e[i] = h
            out[i] = (
                g.evaluate(Point(m, x.coords + e)) - g.evaluate(Point(m, x.coords - e))
            ) / (2.0 * h)
    else:
        for i in range(d):
            e = np.zeros(d)
            e[i] = h
            gp = g.evaluate(Point(m, impl.metric_project(x.coords + e)))
            gm = g.evaluate(Point(m, impl.metric_project(x.coords - e)))
            out[i] = (gp - gm) / (2.0 * h)
    return riemannian_gradient_from_euclidean(x, out)


def lie_apply(V: TangentField, g: TestFunction, x: Point) -> float:
    """V g (x) = <grad g(x), V(x)>_x."""
    return inner(x, g.gradient(x), V(x))


def _geodesic_second_derivative(g: TestFunction, x: Point, v_arr: np.ndarray) -> float:
    """d^2/dt^2 g(exp_x(t v)) at t = 0 by a 4th-order central stencil."""
    m = x.manifold
    impl = implementation_for(m)
    speed = impl.norm(x.coords, v_arr)
    if speed <= 1e-300:
        return 0.0
    h = _H2 / max(1.0, speed)

    def at(t: float) -> float:
        return g.evaluate(Point(m, impl.exp(x.coords, t * v_arr)))

    g0 = g.evaluate(x)
    return (
        -at(2 * h) + 16.0 * at(h) - 30.0 * g0 + 16.0 * at(-h) - at(-2 * h)
    ) / (12.0 * h * h)


def hessian_quadratic(g: TestFunction, x: Point, v: TangentVector) -> float:
    """<Hess g(x) v, v> as the second geodesic derivative along v."""
    return _geodesic_second_derivative(g, x, v.coords)


def hessian_form(
    g: TestFunction, x: Point, v: TangentVector, w: TangentVector
) -> float:
    """Symmetric Hessian bilinear form; off-diagonal by polarization."""
    if np.array_equal(v.coords, w.coords):
        return hessian_quadratic(g, x, v)
    qp = _geodesic_second_derivative(g, x, v.coords + w.coords)
    qm = _geodesic_second_derivative(g, x, v.coords - w.coords)
    return 0.25 * (qp - qm)


def field_second_order_apply(
    V: TangentField,
    g: TestFunction,
    x: Point,
    jacobian=None,
) -> float:
    """V V g (x) = <Hess g(x) V(x), V(x)> + (nabla_V V) g (x)."""
    vx = V(x)
    quad = hessian_quadratic(g, x, vx)
    nabla = covariant_derivative(V, x, vx, jacobian=jacobian)
    return quad + inner(x, g.gradient(x), nabla)


@dataclass
class OperatorStack:
    """Drift and per-atom centered noise fields of the diffusion generator.

    ``noise[i]`` is the unscaled field whose sqrt(eta * weight) multiples
    drive the SDE; ``eta`` scales the noise part of the generator.  Optional
    jacobians supply analytic directional derivatives for the covariant
    terms.
    """

    drift: TangentField
    noise: Sequence[TangentField]
    weights: np.ndarray
    eta: float
    drift_jacobian: Callable | None = None
    noise_jacobians: Sequence[Callable] | None = field(default=None)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        if len(self.noise) != self.weights.shape[0]:
            raise InvalidArgumentError("one weight per noise field is required")


def generator_apply(stack: OperatorStack, g: TestFunction, x: Point) -> float:
    """Generator of the diffusion: B g + (eta / 2) sum_i w_i (G_i G_i g)."""
    total = lie_apply(stack.drift, g, x)
    if stack.eta == 0.0:
        return total
    acc = 0.0
    for i, (w, field_i) in enumerate(zip(stack.weights, stack.noise)):
        jac = stack.noise_jacobians[i] if stack.noise_jacobians else None
        acc += w * field_second_order_apply(field_i, g, x, jacobian=jac)
    return total + 0.5 * stack.eta * acc


def one_step_rsgd_expansion(obj, g: TestFunction, x: Point, eta: float) -> float:
    """Second-order Taylor surrogate of E[g(Z_1)] for one optimizer step.

    g(x) - eta <grad f, grad g> + (eta^2 / 2) E[<Hess g f~, f~>], valid for
    second-order retractions.
    """
    if eta < 0:
        raise InvalidArgumentError("eta must be nonnegative")
    g0 = g.evaluate(x)
    if eta == 0.0:
        return float(g0)
    gradf = obj.grad_f(x)
    first = inner(x, g.gradient(x), gradf)
    quad = 0.0
    for i, w in enumerate(obj.space.weights):
        ft = obj.f_tilde(x, i)
        quad += w * hessian_quadratic(g, x, ft)
    return float(g0 - eta * first + 0.5 * eta * eta * quad)


def one_step_rsmf_expansion(
    stack: OperatorStack, g: TestFunction, x: Point, eta: float
) -> float:
    """Third-order surrogate of the diffusion marginal E[g(X_eta)].

    g + eta B g + (eta^2 / 2) (B B g + sum_i w_i G_i G_i g); the stack must
    have been assembled at the same eta.
    """
    if abs(stack.eta - eta) > 1e-14:
        raise InvalidArgumentError("operator stack was built for a different eta")
    g0 = g.evaluate(x)
    if eta == 0.0:
        return float(g0)
    bg = lie_apply(stack.drift, g, x)
    bbg = field_second_order_apply(stack.drift, g, x, jacobian=stack.drift_jacobian)
    acc = 0.0
    for i, (w, field_i) in enumerate(zip(stack.weights, stack.noise)):
        jac = stack.noise_jacobians[i] if stack.noise_jacobians else None
        acc += w * field_second_order_apply(field_i, g, x, jacobian=jac)
    return float(g0 + eta * bg + 0.5 * eta * eta * (bbg + acc))
