"""Continuum limits: the gradient-flow ODE and the modified-flow SDE.

The SDE drift carries two eta/2 corrections on top of the negative
gradient: the covariant self-derivative of the gradient field (Euler bias)
and the atom average of the covariant self-derivatives of the centered
noise fields (Stratonovich-to-Ito bookkeeping).  The two noise terms cancel
analytically, so the intrinsic Ito drift used by the geodesic
Euler-Maruyama stepper is -grad f - (eta/2) nabla_{grad f} grad f.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .calculus import OperatorStack, TestFunction
from .errors import InvalidArgumentError
from .geometry import (
    ManifoldKind,
    Point,
    TangentVector,
    covariant_derivative,
    exp_map,
    implementation_for,
    parallel_transport,
)
from .noise import StochasticObjective, brownian_increments


class OdeScheme(enum.Enum):
    PROJECTED_RK4 = "projected_rk4"
    GEODESIC_RK4 = "geodesic_rk4"


@dataclass(frozen=True)
class IntegratorConfig:
    delta: float = 1e-3
    ode_scheme: OdeScheme = OdeScheme.PROJECTED_RK4
    seed: int = 0

    def __post_init__(self):
        if self.delta <= 0:
            raise InvalidArgumentError("substep delta must be positive")


@dataclass
class RsmfCoefficients:
    """Assembled SDE coefficients at one point."""

    eta: float
    drift: TangentVector
    ito_drift: TangentVector
    diffusion: list[TangentVector]


# ---------------------------------------------------------------------------
# gradient flow
# ---------------------------------------------------------------------------


def gradient_flow(
    obj: StochasticObjective,
    x0: Point,
    T: float,
    cfg: IntegratorConfig | None = None,
    return_trajectory: bool = False,
):
    """Integrate dx/dt = -grad f(x) up to time T (RK4)."""
    cfg = cfg or IntegratorConfig()
    if T < 0:
        raise InvalidArgumentError("T must be nonnegative")
    if T == 0:
        return (x0, [(0.0, x0)]) if return_trajectory else x0
    n = max(1, int(math.ceil(T / cfg.delta - 1e-12)))
    h = T / n
    m = x0.manifold
    impl = implementation_for(m)
    chartlike = m.kind is ManifoldKind.FISHER_HALF_PLANE

    def field(z: np.ndarray) -> np.ndarray:
        p = Point(m, z if chartlike else impl.metric_project(z))
        return -obj.grad_f(p).coords

    traj = [(0.0, x0)]
    if cfg.ode_scheme is OdeScheme.PROJECTED_RK4 or chartlike:
        z = x0.coords.copy()
        for k in range(n):
            k1 = field(z)
            k2 = field(z + 0.5 * h * k1)
            k3 = field(z + 0.5 * h * k2)
            k4 = field(z + h * k3)
            z = z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if not chartlike:
                z = impl.metric_project(z)
            if return_trajectory:
                traj.append(((k + 1) * h, Point(m, z)))
        out = Point(m, z)
    else:
        x = x0
        for k in range(n):
            x = _geodesic_rk4_step(obj, x, h)
            if return_trajectory:
                traj.append(((k + 1) * h, x))
        out = x
    return (out, traj) if return_trajectory else out


def _geodesic_rk4_step(obj: StochasticObjective, x: Point, h: float) -> Point:
    """Classical RK4 with stages pulled back by parallel transport."""

    def pull_back(y: Point, u: TangentVector, w: TangentVector) -> TangentVector:
        # transport w from y back to the start of the geodesic exp(x, u)
        gdot = parallel_transport(x, u, u)
        back = parallel_transport(y, TangentVector(y, -gdot.coords), w)
        return TangentVector(x, back.coords)

    def vfield(y: Point) -> TangentVector:
        return TangentVector(y, -obj.grad_f(y).coords)

    k1 = vfield(x)
    u1 = TangentVector(x, 0.5 * h * k1.coords)
    y2 = exp_map(x, u1)
    k2 = pull_back(y2, u1, vfield(y2))
    u2 = TangentVector(x, 0.5 * h * k2.coords)
    y3 = exp_map(x, u2)
    k3 = pull_back(y3, u2, vfield(y3))
    u3 = TangentVector(x, h * k3.coords)
    y4 = exp_map(x, u3)
    k4 = pull_back(y4, u3, vfield(y4))
    step = (h / 6.0) * (k1.coords + 2.0 * k2.coords + 2.0 * k3.coords + k4.coords)
    return exp_map(x, TangentVector(x, step))


# ---------------------------------------------------------------------------
# modified-flow coefficients
# ---------------------------------------------------------------------------


def _drift_parts(obj: StochasticObjective, x: Point):
    """(grad f, nabla_{grad f} grad f, sum_i w_i nabla_{G_i} G_i) at x."""
    gradf = obj.grad_f(x)

    def grad_field(p: Point) -> TangentVector:
        return obj.grad_f(p)

    self_term = covariant_derivative(
        grad_field, x, gradf, jacobian=obj.grad_f_jacobian()
    )
    noise_sum = np.zeros(x.manifold.ambient_dim)
    for i, w in enumerate(obj.space.weights):
        gi = _noise_field_closure(obj, i)
        gix = gi(x)
        jac = _noise_jacobian(obj, i)
        noise_sum += w * covariant_derivative(gi, x, gix, jacobian=jac).coords
    return gradf, self_term, noise_sum


def _noise_field_closure(obj: StochasticObjective, i: int):
    def field(p: Point) -> TangentVector:
        return TangentVector(p, obj.grad_f(p).coords - obj.f_tilde(p, i).coords)

    return field


def _noise_jacobian(obj: StochasticObjective, i: int):
    gj = obj.grad_f_jacobian()
    fj = obj.f_tilde_jacobian(i)
    if gj is None or fj is None:
        return None

    def jac(x: Point, v: TangentVector) -> np.ndarray:
        return np.asarray(gj(x, v)) - np.asarray(fj(x, v))

    return jac


def rsmf_drift(obj: StochasticObjective, x: Point, eta: float) -> TangentVector:
    """Stratonovich drift: -grad f - (eta/2)(nabla_grad + E[nabla_noise])."""
    if eta < 0:
        raise InvalidArgumentError("eta must be nonnegative")
    gradf, self_term, noise_sum = _drift_parts(obj, x)
    out = -gradf.coords - 0.5 * eta * (self_term.coords + noise_sum)
    return TangentVector(x, out)


def rsmf_ito_drift(obj: StochasticObjective, x: Point, eta: float) -> TangentVector:
    """Intrinsic Ito drift: Stratonovich drift plus half the noise square sum."""
    if eta < 0:
        raise InvalidArgumentError("eta must be nonnegative")
    gradf, self_term, noise_sum = _drift_parts(obj, x)
    strato = -gradf.coords - 0.5 * eta * (self_term.coords + noise_sum)
    return TangentVector(x, strato + 0.5 * eta * noise_sum)


def rsmf_coefficients(obj: StochasticObjective, x: Point, eta: float) -> RsmfCoefficients:
    from .noise import diffusion_vectors

    gradf, self_term, noise_sum = _drift_parts(obj, x)
    strato = -gradf.coords - 0.5 * eta * (self_term.coords + noise_sum)
    return RsmfCoefficients(
        eta=eta,
        drift=TangentVector(x, strato),
        ito_drift=TangentVector(x, strato + 0.5 * eta * noise_sum),
        diffusion=diffusion_vectors(obj, x, eta),
    )


def build_operator_stack(obj: StochasticObjective, eta: float) -> OperatorStack:
    """Generator data for the modified flow at learning rate eta."""

    def drift(p: Point) -> TangentVector:
        return rsmf_drift(obj, p, eta)

    noise_fields = [_noise_field_closure(obj, i) for i in range(len(obj.space))]
    jacs = [_noise_jacobian(obj, i) for i in range(len(obj.space))]
    if any(j is None for j in jacs):
        jacs = None
    return OperatorStack(
        drift=drift,
        noise=noise_fields,
        weights=np.asarray(obj.space.weights),
        eta=eta,
        drift_jacobian=None,
        noise_jacobians=jacs,
    )


# ---------------------------------------------------------------------------
# geodesic Euler-Maruyama
# ---------------------------------------------------------------------------


def _check_horizon(T: float, delta: float) -> int:
    if T == 0:
        return 0
    if delta > T:
        raise InvalidArgumentError("substep delta exceeds the horizon")
    n = int(round(T / delta))
    if abs(n * delta - T) > 1e-12 * max(1.0, T):
        raise InvalidArgumentError("T must be an integer multiple of delta")
    return n


def rsmf_integrate(
    obj: StochasticObjective,
    x0: Point,
    T: float,
    eta: float,
    cfg: IntegratorConfig,
    return_trajectory: bool = False,
):
    """One sample path of the modified flow by geodesic Euler-Maruyama.

    Each substep moves along exp_x of (ito drift * delta + sum_i sigma_i
    dW_i) with independent Normal(0, delta) increments per atom.
    """
    n = _check_horizon(T, cfg.delta)
    x = x0
    traj = [(0.0, x0)]
    sqrt_w = np.sqrt(eta * np.asarray(obj.space.weights))
    for k in range(n):
        drift = rsmf_ito_drift(obj, x, eta)
        v = drift.coords * cfg.delta
        for i in range(len(obj.space)):
            dw = brownian_increments(cfg.seed, k, i, 1, cfg.delta)[0]
            gbar = obj.grad_f(x).coords - obj.f_tilde(x, i).coords
            v = v + sqrt_w[i] * gbar * dw
        x = exp_map(x, TangentVector(x, v))
        if return_trajectory:
            traj.append(((k + 1) * cfg.delta, x))
    return (x, traj) if return_trajectory else x


def rsmf_mc_expectation(
    obj: StochasticObjective,
    g: TestFunction,
    x0: Point,
    T: float,
    eta: float,
    cfg: IntegratorConfig,
    n_paths: int,
) -> tuple[float, float]:
    """Monte Carlo estimate of the modified-flow marginal E[g(X_T)]."""
    if n_paths < 2:
        raise InvalidArgumentError("need at least two paths for a standard error")
    n = _check_horizon(T, cfg.delta)
    if obj.manifold.kind is ManifoldKind.CIRCLE and obj.chart is not None and g.chart is not None:
        vals = _rsmf_mc_circle(obj, g, x0, n, eta, cfg, n_paths)
    else:
        vals = _rsmf_mc_generic(obj, g, x0, n, eta, cfg, n_paths)
    mean = float(np.mean(vals))
    se = float(np.std(vals, ddof=1) / math.sqrt(n_paths))
    return mean, se


def _rsmf_mc_circle(obj, g, x0, n_sub, eta, cfg, n_paths):
    chart = obj.chart
    weights = np.asarray(obj.space.weights)
    sqrt_w = np.sqrt(eta * weights)
    thetas = np.full(n_paths, math.atan2(float(x0.coords[1]), float(x0.coords[0])))
    for k in range(n_sub):
        grad = chart.grad(thetas)
        b = -grad - 0.5 * eta * grad * chart.grad_prime(thetas)
        v = b * cfg.delta
        for i in range(len(weights)):
            dw = brownian_increments(cfg.seed, k, i, n_paths, cfg.delta)
            v = v + sqrt_w[i] * (grad - chart.f_tilde(thetas, i)) * dw
        thetas = thetas + v
    return np.asarray(g.chart(thetas), dtype=float)


def _rsmf_mc_generic(obj, g, x0, n_sub, eta, cfg, n_paths):
    sqrt_w = np.sqrt(eta * np.asarray(obj.space.weights))
    vals = np.empty(n_paths)
    draws = [
        [
            brownian_increments(cfg.seed, k, i, n_paths, cfg.delta)
            for i in range(len(obj.space))
        ]
        for k in range(n_sub)
    ]
    for p in range(n_paths):
        x = x0
        for k in range(n_sub):
            drift = rsmf_ito_drift(obj, x, eta)
            v = drift.coords * cfg.delta
            gradc = obj.grad_f(x).coords
            for i in range(len(obj.space)):
                gbar = gradc - obj.f_tilde(x, i).coords
                v = v + sqrt_w[i] * gbar * draws[k][i][p]
            x = exp_map(x, TangentVector(x, v))
        vals[p] = g(x)
    return vals
