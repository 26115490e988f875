"""Public geometry operations (typed, dispatching on the manifold kind)."""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from ..errors import InvalidArgumentError, UnsupportedOperationError
from .descriptors import (
    EUCLIDEAN_EMBEDDED_KINDS,
    ManifoldDescriptor,
    ManifoldKind,
    Point,
    RetractionScheme,
    RetractionVariant,
    TangentVector,
)
from .kinds import implementation_for

#: central-difference step: truncation/rounding balance for first derivatives
FD_STEP = float(np.cbrt(np.finfo(float).eps))

TangentField = Callable[[Point], TangentVector]


def _check_same_base(x: Point, *vs: TangentVector):
    for v in vs:
        if v.base.manifold != x.manifold or not np.array_equal(
            v.base.coords, x.coords
        ):
            raise InvalidArgumentError("tangent vector is not based at the given point")


def as_point(m: ManifoldDescriptor, coords) -> Point:
    return Point(m, np.asarray(coords, dtype=float))


def as_tangent(x: Point, coords, project: bool = False) -> TangentVector:
    arr = np.asarray(coords, dtype=float)
    if project:
        arr = implementation_for(x.manifold).tangent_project(x.coords, arr)
    return TangentVector(x, arr)


def zero_tangent(x: Point) -> TangentVector:
    return TangentVector(x, np.zeros(x.manifold.ambient_dim))


def inner(x: Point, v: TangentVector, w: TangentVector) -> float:
    """Riemannian inner product <v, w>_x under the manifold's metric family."""
    _check_same_base(x, v, w)
    return implementation_for(x.manifold).inner(x.coords, v.coords, w.coords)


def norm(x: Point, v: TangentVector) -> float:
    _check_same_base(x, v)
    return implementation_for(x.manifold).norm(x.coords, v.coords)


def tangent_project(x: Point, z) -> TangentVector:
    """Orthogonal projection of an ambient vector onto T_x M."""
    arr = np.asarray(z, dtype=float).reshape(-1)
    if arr.shape[0] != x.manifold.ambient_dim:
        raise InvalidArgumentError(
            f"expected {x.manifold.ambient_dim} components, got {arr.shape[0]}"
        )
    return TangentVector(x, implementation_for(x.manifold).tangent_project(x.coords, arr))


def metric_project(m: ManifoldDescriptor, z) -> Point:
    """Nearest manifold point; raises TubeViolationError outside the tube."""
    arr = np.asarray(z, dtype=float).reshape(-1)
    if arr.shape[0] != m.ambient_dim:
        raise InvalidArgumentError(
            f"expected {m.ambient_dim} components, got {arr.shape[0]}"
        )
    return Point(m, implementation_for(m).metric_project(arr))


def exp_map(x: Point, v: TangentVector) -> Point:
    """Exponential map: time-1 point of the geodesic with velocity v."""
    _check_same_base(x, v)
    return Point(x.manifold, implementation_for(x.manifold).exp(x.coords, v.coords))


def distance(x: Point, y: Point) -> float:
    if x.manifold != y.manifold:
        raise InvalidArgumentError("points live on different manifolds")
    return implementation_for(x.manifold).distance(x.coords, y.coords)


def _cutoff(v: np.ndarray, s: float, r: float) -> np.ndarray:
    """Identity inside s <= r/2, smooth norm clamp (< 0.95 r) beyond."""
    a, b = 0.5 * r, 0.95 * r
    if s <= a or s == 0.0:
        return v
    clamped = a + (b - a) * math.tanh((s - a) / (b - a))
    return v * (clamped / s)


def retract(x: Point, v: TangentVector, scheme: RetractionScheme) -> Point:
    """Apply the selected retraction; retract(x, 0) = x for every scheme."""
    _check_same_base(x, v)
    if not scheme.admissible_for(x.manifold):
        raise InvalidArgumentError(
            f"{scheme.variant.value} retraction is not admissible on "
            f"{x.manifold.kind.value}"
        )
    impl = implementation_for(x.manifold)
    if scheme.variant is RetractionVariant.EXPONENTIAL:
        return exp_map(x, v)
    if scheme.variant is RetractionVariant.METRIC_PROJECTION:
        s = impl.norm(x.coords, v.coords)
        vv = _cutoff(v.coords, s, impl.tube_radius)
        return Point(x.manifold, impl.metric_project(x.coords + vv))
    if scheme.variant is RetractionVariant.STEREOGRAPHIC:
        return Point(x.manifold, impl.stereographic(x.coords, v.coords))
    if scheme.variant is RetractionVariant.CHART_ADDITIVE:
        out = x.coords + v.coords
        if out[1] <= 1e-12:
            from ..errors import TubeViolationError

            raise TubeViolationError("chart step left the half-plane (sigma <= 0)")
        return Point(x.manifold, out)
    raise InvalidArgumentError(f"unknown retraction {scheme!r}")


def parallel_transport(x: Point, v: TangentVector, w: TangentVector) -> TangentVector:
    """Transport w along the geodesic t -> exp(x, t v) to t = 1."""
    _check_same_base(x, v, w)
    impl = implementation_for(x.manifold)
    out = impl.parallel_transport(x.coords, v.coords, w.coords)
    endpoint = Point(x.manifold, impl.exp(x.coords, v.coords))
    return TangentVector(endpoint, out)


def riemannian_gradient_from_euclidean(x: Point, dg) -> TangentVector:
    """Metric-raised gradient from the ambient/chart Euclidean gradient."""
    arr = np.asarray(dg, dtype=float).reshape(-1)
    kind = x.manifold.kind
    impl = implementation_for(x.manifold)
    if kind is ManifoldKind.HYPERBOLOID:
        # raise the index with the Minkowski metric before projecting
        j = arr.copy()
        j[0] = -j[0]
        return TangentVector(x, impl.tangent_project(x.coords, j))
    if kind is ManifoldKind.FISHER_HALF_PLANE:
        s2 = x.coords[1] ** 2
        return TangentVector(x, np.array([arr[0] * s2, 0.5 * arr[1] * s2]))
    return TangentVector(x, impl.tangent_project(x.coords, arr))


def riemannian_gradient(obj, x: Point) -> TangentVector:
    """Riemannian gradient of an objective exposing a Euclidean gradient."""
    return riemannian_gradient_from_euclidean(x, obj.euclidean_grad_f(x))


def ambient_extend(g: Callable[[Point], float], m: ManifoldDescriptor):
    """Extend a scalar function on M to the projection tube: g(proj(z)).

    The extension is constant along normal directions at manifold points.
    Only available for the Euclidean-embedded kinds.
    """
    if m.kind not in EUCLIDEAN_EMBEDDED_KINDS:
        raise UnsupportedOperationError(
            f"ambient extension needs a Euclidean embedding, not {m.kind.value}"
        )
    impl = implementation_for(m)

    def extended(z) -> float:
        arr = np.asarray(z, dtype=float).reshape(-1)
        return float(g(Point(m, impl.metric_project(arr))))

    return extended


def covariant_derivative(
    field: TangentField,
    x: Point,
    v: TangentVector,
    jacobian=None,
    fd_step: float | None = None,
) -> TangentVector:
    """Levi-Civita derivative of a tangent field along v at x.

    On embedded kinds this is the tangent projection of the ambient
    directional derivative of (any smooth extension of) the field; on the
    Fisher chart it is the chart derivative plus the Christoffel correction.
    ``jacobian(x, v) -> array`` supplies the analytic ambient/chart
    directional derivative; otherwise central differences with step
    ``fd_step`` (default cbrt(eps) * (1 + |x|)) are used.
    """
    _check_same_base(x, v)
    m = x.manifold
    impl = implementation_for(m)
    h = fd_step if fd_step is not None else FD_STEP * (1.0 + float(np.linalg.norm(x.coords)))

    if m.kind is ManifoldKind.FISHER_HALF_PLANE:
        if jacobian is not None:
            dw = np.asarray(jacobian(x, v), dtype=float)
        else:
            # keep sigma positive on both sides of the stencil
            if v.coords[1] != 0.0:
                h = min(h, 0.25 * x.coords[1] / abs(v.coords[1]))
            fp = field(Point(m, x.coords + h * v.coords)).coords
            fm = field(Point(m, x.coords - h * v.coords)).coords
            dw = (fp - fm) / (2.0 * h)
        gamma = impl.christoffel(x.coords, v.coords, field(x).coords)
        return TangentVector(x, dw + gamma)

    if jacobian is not None:
        dw = np.asarray(jacobian(x, v), dtype=float)
    else:
        cp = impl.metric_project(x.coords + h * v.coords)
        cm = impl.metric_project(x.coords - h * v.coords)
        fp = field(Point(m, cp)).coords
        fm = field(Point(m, cm)).coords
        dw = (fp - fm) / (2.0 * h)
    return TangentVector(x, impl.tangent_project(x.coords, dw))


# ---------------------------------------------------------------------------
# geodesic machinery shared by Stiefel/Fisher exp and used as the
# independent integration oracle for the closed forms
# ---------------------------------------------------------------------------


def _geodesic_steps(speed: float, n_steps: int | None) -> int:
    if n_steps is not None:
        return max(1, int(n_steps))
    return max(16, int(math.ceil(speed / 1e-3)))


def geodesic_rk4(
    m: ManifoldDescriptor, x: np.ndarray, v: np.ndarray, n_steps: int | None = None
) -> np.ndarray:
    """Integrate the geodesic ODE x' = v, v' = accel(x, v) over t in [0, 1].

    Classical RK4 with constraint restoration after every step (projected
    RK4); arc-length substep <= 1e-3 by default.
    """
    impl = implementation_for(m)
    speed = impl.norm(x, v)
    if speed <= 1e-300:
        return np.array(x, dtype=float, copy=True)
    n = _geodesic_steps(speed, n_steps)
    h = 1.0 / n
    x = np.array(x, dtype=float, copy=True)
    v = np.array(v, dtype=float, copy=True)
    for _ in range(n):
        k1x, k1v = v, impl.geodesic_accel(x, v)
        k2x = v + 0.5 * h * k1v
        k2v = impl.geodesic_accel(x + 0.5 * h * k1x, k2x)
        k3x = v + 0.5 * h * k2v
        k3v = impl.geodesic_accel(x + 0.5 * h * k2x, k3x)
        k4x = v + h * k3v
        k4v = impl.geodesic_accel(x + h * k3x, k4x)
        x = x + (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        v = v + (h / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
        x, v = impl.constrain(x, v)
    return x


def _dtangent_project(impl, x, u, w):
    """(D P_x)[u] w: derivative of the tangent-projector field."""
    kind = impl.m.kind
    if kind in (ManifoldKind.CIRCLE, ManifoldKind.SPHERE):
        return -u * (x @ w) - x * (u @ w)
    if kind is ManifoldKind.STIEFEL:
        n, r = impl.m.params
        b, um, wm = x.reshape(n, r), u.reshape(n, r), w.reshape(n, r)
        btw = b.T @ wm
        utw = um.T @ wm
        out = (
            um @ (0.5 * (btw - btw.T))
            + b @ (0.5 * (utw - utw.T))
            - um @ (b.T @ wm)
            - b @ (um.T @ wm)
        )
        return out.reshape(-1)
    if kind is ManifoldKind.PRODUCT_SPHERE_EUCLID:
        xb, _ = impl._blocks(x)
        ub, _ = impl._blocks(u)
        wb, _ = impl._blocks(w)
        out = -ub * np.sum(xb * wb, axis=1, keepdims=True) - xb * np.sum(
            ub * wb, axis=1, keepdims=True
        )
        return impl._join(out, np.zeros(2 * impl.d1 + 1))
    if kind is ManifoldKind.HYPERBOLOID:
        return impl._mink(u, w) * x + impl._mink(x, w) * u
    raise UnsupportedOperationError(f"no projector derivative for {kind.value}")


def transport_rk4(
    m: ManifoldDescriptor,
    x: np.ndarray,
    v: np.ndarray,
    w: np.ndarray,
    n_steps: int | None = None,
) -> np.ndarray:
    """Parallel transport along t -> exp(x, t v) by integrating w' = DP[v] w."""
    impl = implementation_for(m)
    speed = impl.norm(x, v)
    if speed <= 1e-300:
        return np.array(w, dtype=float, copy=True)
    n = _geodesic_steps(speed, n_steps)
    h = 1.0 / n
    x = np.array(x, dtype=float, copy=True)
    v = np.array(v, dtype=float, copy=True)
    w = np.array(w, dtype=float, copy=True)

    def rhs(state):
        xx, vv, ww = state
        return (
            vv,
            impl.geodesic_accel(xx, vv),
            _dtangent_project(impl, xx, vv, ww),
        )

    for _ in range(n):
        s0 = (x, v, w)
        k1 = rhs(s0)
        k2 = rhs(tuple(s + 0.5 * h * k for s, k in zip(s0, k1)))
        k3 = rhs(tuple(s + 0.5 * h * k for s, k in zip(s0, k2)))
        k4 = rhs(tuple(s + h * k for s, k in zip(s0, k3)))
        x, v, w = tuple(
            s + (h / 6.0) * (a + 2.0 * b + 2.0 * c + d)
            for s, a, b, c, d in zip(s0, k1, k2, k3, k4)
        )
        x, v = impl.constrain(x, v)
        w = impl.tangent_project(x, w)
    return w


def random_point(m: ManifoldDescriptor, rng: np.random.Generator) -> Point:
    return Point(m, implementation_for(m).random_point(rng))


def random_tangent(x: Point, rng: np.random.Generator) -> TangentVector:
    return TangentVector(
        x, implementation_for(x.manifold).random_tangent(x.coords, rng)
    )
