"""Per-kind geometry formulas behind the public operations.

Each supported manifold kind provides the same small vocabulary on raw
coordinate arrays: residuals, tangent projection, metric projection,
exponential map, parallel transport along geodesics, metric inner product,
distance, and the geodesic acceleration used by the projected-RK4
integrator.  The public, type-checked API in :mod:`maniflow.geometry.ops`
dispatches here.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from ..errors import (
    InvalidArgumentError,
    TubeViolationError,
    UnsupportedOperationError,
)
from .descriptors import ManifoldDescriptor, ManifoldKind

_EPS = np.finfo(float).eps


class KindImpl:
    """Coordinate-level geometry for one manifold kind."""

    # radius of the metric-projection tube used by the retraction cutoff
    tube_radius: float | None = None
    has_closed_form_exp = True

    def __init__(self, m: ManifoldDescriptor):
        self.m = m

    # -- residuals ---------------------------------------------------------
    def point_residual(self, x: np.ndarray) -> float:
        raise NotImplementedError

    def tangency_residual(self, x: np.ndarray, v: np.ndarray) -> float:
        return float(np.linalg.norm(v - self.tangent_project(x, v)))

    # -- linear structure ----------------------------------------------------
    def tangent_project(self, x: np.ndarray, z: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def inner(self, x: np.ndarray, v: np.ndarray, w: np.ndarray) -> float:
        return float(v @ w)

    def norm(self, x: np.ndarray, v: np.ndarray) -> float:
        return math.sqrt(max(self.inner(x, v, v), 0.0))

    # -- nonlinear structure -------------------------------------------------
    def metric_project(self, z: np.ndarray) -> np.ndarray:
        raise UnsupportedOperationError(
            f"metric projection is not defined for {self.m.kind.value}"
        )

    def exp(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def distance(self, x: np.ndarray, y: np.ndarray) -> float:
        raise NotImplementedError

    def parallel_transport(
        self, x: np.ndarray, v: np.ndarray, w: np.ndarray
    ) -> np.ndarray:
        raise UnsupportedOperationError(
            f"parallel transport is not defined for {self.m.kind.value}"
        )

    def geodesic_accel(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Acceleration dv/dt of the geodesic system (x' = v, v' = accel)."""
        raise UnsupportedOperationError(
            f"no geodesic ODE formulation for {self.m.kind.value}"
        )

    def constrain(self, x: np.ndarray, v: np.ndarray):
        """Re-impose the constraints after a numerical integrator step."""
        return x, v

    # -- randomized test inputs ----------------------------------------------
    def random_point(self, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def random_tangent(self, x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        return self.tangent_project(x, rng.standard_normal(self.m.ambient_dim))


class _SphereLike(KindImpl):
    """Unit sphere S^d embedded in R^{d+1}; the circle is d = 1."""

    tube_radius = 0.5

    def point_residual(self, x):
        return abs(float(np.linalg.norm(x)) - 1.0)

    def tangent_project(self, x, z):
        return z - (x @ z) * x

    def metric_project(self, z):
        nrm = float(np.linalg.norm(z))
        if nrm <= 1e-14:
            raise TubeViolationError("no nearest sphere point for the zero vector")
        return z / nrm

    def exp(self, x, v):
        s = float(np.linalg.norm(v))
        if s <= 1e-300:
            return x.copy()
        return math.cos(s) * x + math.sin(s) * (v / s)

    def distance(self, x, y):
        return math.acos(min(1.0, max(-1.0, float(x @ y))))

    def parallel_transport(self, x, v, w):
        s = float(np.linalg.norm(v))
        if s <= 1e-300:
            return w.copy()
        u = v / s
        a = float(w @ u)
        w_perp = w - a * u
        return w_perp + a * (math.cos(s) * u - math.sin(s) * x)

    def geodesic_accel(self, x, v):
        return -(v @ v) * x

    def constrain(self, x, v):
        x = x / np.linalg.norm(x)
        return x, self.tangent_project(x, v)

    def stereographic(self, x, v):
        # curve traced from the antipode -x; second order at v = 0
        q = 0.25 * float(v @ v)
        return (v + (1.0 - q) * x) / (1.0 + q)

    def random_point(self, rng):
        z = rng.standard_normal(self.m.ambient_dim)
        return z / np.linalg.norm(z)


class _Circle(_SphereLike):
    @staticmethod
    def angle_of(x: np.ndarray) -> float:
        return math.atan2(float(x[1]), float(x[0]))

    @staticmethod
    def point_of_angle(theta: float) -> np.ndarray:
        return np.array([math.cos(theta), math.sin(theta)])

    @staticmethod
    def chart_frame(x: np.ndarray) -> np.ndarray:
        """Unit tangent dtheta at x."""
        return np.array([-x[1], x[0]])

    def chart_coeff(self, x: np.ndarray, v: np.ndarray) -> float:
        return float(v @ self.chart_frame(x))


class _Stiefel(KindImpl):
    """St(n, r) with the metric inherited from R^{n x r} (Frobenius)."""

    tube_radius = 0.5
    has_closed_form_exp = False

    def __init__(self, m):
        super().__init__(m)
        self.n, self.r = m.params

    def _mat(self, x):
        return x.reshape(self.n, self.r)

    def point_residual(self, x):
        b = self._mat(x)
        return float(np.linalg.norm(b.T @ b - np.eye(self.r)))

    def tangent_project(self, x, z):
        b, zm = self._mat(x), self._mat(z)
        btz = b.T @ zm
        skew = 0.5 * (btz - btz.T)
        out = b @ skew + zm - b @ btz
        return out.reshape(-1)

    def metric_project(self, z):
        zm = self._mat(z)
        u, s, vt = np.linalg.svd(zm, full_matrices=False)
        # non-unique nearest point when the tube is left
        if s[-1] < 1e-8:
            raise TubeViolationError(
                f"rank-deficient matrix (smallest singular value {s[-1]:.3e})"
            )
        return (u @ vt).reshape(-1)

    def exp(self, x, v):
        from .ops import geodesic_rk4  # local import; shared integrator

        return geodesic_rk4(self.m, x, v)

    def distance(self, x, y):
        # near-field use only (retraction-order measurements): for
        # separations << 1 the chord agrees with the geodesic distance to
        # third order in the separation.
        return float(np.linalg.norm(x - y))

    def parallel_transport(self, x, v, w):
        from .ops import transport_rk4

        return transport_rk4(self.m, x, v, w)

    def geodesic_accel(self, x, v):
        # derivative of the tangent-projector field along the curve:
        # v' = (D P)(v) v  with  P_B(W) = B skew(B^T W) + (I - B B^T) W
        b, u = self._mat(x), self._mat(v)
        btu = b.T @ u
        skew = 0.5 * (btu - btu.T)
        acc = u @ skew - u @ btu - b @ (u.T @ u)
        return acc.reshape(-1)

    def constrain(self, x, v):
        x = self.metric_project(x)
        return x, self.tangent_project(x, v)

    def random_point(self, rng):
        a = rng.standard_normal((self.n, self.r))
        q, rr = np.linalg.qr(a)
        q = q * np.sign(np.diag(rr))
        return q.reshape(-1)


class _ProductSphereEuclid(KindImpl):
    """d1 copies of S^{d0-1} times R^{2 d1 + 1}, direct-sum metric."""

    tube_radius = 0.5
    has_closed_form_exp = True

    def __init__(self, m):
        super().__init__(m)
        d0, d1 = m.params
        self.d0, self.d1 = d0, d1
        self.sphere = _SphereLike(ManifoldDescriptor(ManifoldKind.SPHERE, (d0 - 1,)))
        self.n_sphere = d0 * d1

    def _blocks(self, z):
        return z[: self.n_sphere].reshape(self.d1, self.d0), z[self.n_sphere :]

    def _join(self, blocks, tail):
        return np.concatenate([blocks.reshape(-1), tail])

    def point_residual(self, x):
        blocks, _ = self._blocks(x)
        return float(np.max(np.abs(np.linalg.norm(blocks, axis=1) - 1.0)))

    def tangent_project(self, x, z):
        xb, _ = self._blocks(x)
        zb, zt = self._blocks(z)
        out = zb - (np.sum(xb * zb, axis=1, keepdims=True)) * xb
        return self._join(out, zt)

    def metric_project(self, z):
        zb, zt = self._blocks(z)
        nrm = np.linalg.norm(zb, axis=1, keepdims=True)
        if np.any(nrm <= 1e-14):
            raise TubeViolationError("a sphere factor received the zero vector")
        return self._join(zb / nrm, zt)

    def exp(self, x, v):
        xb, xt = self._blocks(x)
        vb, vt = self._blocks(v)
        out = np.empty_like(xb)
        for j in range(self.d1):
            out[j] = self.sphere.exp(xb[j], vb[j])
        return self._join(out, xt + vt)

    def distance(self, x, y):
        xb, xt = self._blocks(x)
        yb, yt = self._blocks(y)
        dots = np.clip(np.sum(xb * yb, axis=1), -1.0, 1.0)
        return math.sqrt(float(np.sum(np.arccos(dots) ** 2) + np.sum((xt - yt) ** 2)))

    def parallel_transport(self, x, v, w):
        xb, _ = self._blocks(x)
        vb, vt = self._blocks(v)
        wb, wt = self._blocks(w)
        out = np.empty_like(wb)
        for j in range(self.d1):
            out[j] = self.sphere.parallel_transport(xb[j], vb[j], wb[j])
        return self._join(out, wt)

    def geodesic_accel(self, x, v):
        xb, _ = self._blocks(x)
        vb, _ = self._blocks(v)
        acc = -(np.sum(vb * vb, axis=1, keepdims=True)) * xb
        return self._join(acc, np.zeros(2 * self.d1 + 1))

    def constrain(self, x, v):
        x = self.metric_project(x)
        return x, self.tangent_project(x, v)

    def random_point(self, rng):
        blocks = rng.standard_normal((self.d1, self.d0))
        blocks /= np.linalg.norm(blocks, axis=1, keepdims=True)
        tail = rng.standard_normal(2 * self.d1 + 1)
        return self._join(blocks, tail)


class _Hyperboloid(KindImpl):
    """Upper hyperboloid sheet in Minkowski space R^{1,d}."""

    has_closed_form_exp = True
    tube_radius = 1.0  # retraction clamp bound; x + v is timelike iff |v| < 1

    def _mink(self, u, v) -> float:
        return float(-u[0] * v[0] + u[1:] @ v[1:])

    def point_residual(self, x):
        if x[0] <= 0:
            return 1.0
        return abs(self._mink(x, x) + 1.0)

    def tangent_project(self, x, z):
        return z + self._mink(x, z) * x

    def inner(self, x, v, w):
        return self._mink(v, w)

    def metric_project(self, z):
        # radial (Minkowski) normalization onto the upper sheet
        q = self._mink(z, z)
        if q >= -1e-14 or z[0] <= 0:
            raise TubeViolationError("vector is not timelike-upper; cannot project")
        return z / math.sqrt(-q)

    def exp(self, x, v):
        s = self.norm(x, v)
        if s <= 1e-300:
            return x.copy()
        return math.cosh(s) * x + math.sinh(s) * (v / s)

    def distance(self, x, y):
        return math.acosh(max(1.0, -self._mink(x, y)))

    def parallel_transport(self, x, v, w):
        s = self.norm(x, v)
        if s <= 1e-300:
            return w.copy()
        u = v / s
        a = self._mink(w, u)
        w_perp = w - a * u
        return w_perp + a * (math.cosh(s) * u + math.sinh(s) * x)

    def geodesic_accel(self, x, v):
        return self._mink(v, v) * x

    def constrain(self, x, v):
        x = x / math.sqrt(-self._mink(x, x))
        return x, self.tangent_project(x, v)

    def random_point(self, rng):
        y = 0.7 * rng.standard_normal(self.m.ambient_dim - 1)
        return np.concatenate([[math.sqrt(1.0 + y @ y)], y])


class _FisherHalfPlane(KindImpl):
    """Normal family (mu, sigma) with the Fisher metric diag(1, 2) / sigma^2."""

    has_closed_form_exp = False

    def point_residual(self, x):
        return 0.0 if x[1] > 0 else 1.0

    def tangency_residual(self, x, v):
        return 0.0  # chart vectors are unconstrained

    def tangent_project(self, x, z):
        return np.asarray(z, dtype=float).copy()

    def inner(self, x, v, w):
        s2 = x[1] * x[1]
        return float((v[0] * w[0] + 2.0 * v[1] * w[1]) / s2)

    def metric_tensor(self, x) -> np.ndarray:
        s2 = x[1] * x[1]
        return np.diag([1.0 / s2, 2.0 / s2])

    def exp(self, x, v):
        from .ops import geodesic_rk4

        return geodesic_rk4(self.m, x, v)

    def distance(self, x, y):
        # isometric (up to the factor sqrt(2)) to the Poincare half-plane
        # via u = mu / sqrt(2)
        u1, s1 = x[0] / math.sqrt(2.0), x[1]
        u2, s2 = y[0] / math.sqrt(2.0), y[1]
        arg = 1.0 + ((u2 - u1) ** 2 + (s2 - s1) ** 2) / (2.0 * s1 * s2)
        return math.sqrt(2.0) * math.acosh(max(1.0, arg))

    def geodesic_accel(self, x, v):
        sigma = x[1]
        mu_dot, s_dot = v
        return np.array(
            [
                2.0 * mu_dot * s_dot / sigma,
                -0.5 * mu_dot * mu_dot / sigma + s_dot * s_dot / sigma,
            ]
        )

    def constrain(self, x, v):
        if x[1] <= 0:
            raise InvalidArgumentError("geodesic left the half-plane (sigma <= 0)")
        return x, v

    def christoffel(self, x, u, w) -> np.ndarray:
        """Gamma_x(u, w), the connection coefficients contracted twice."""
        sigma = x[1]
        return np.array(
            [
                -(u[0] * w[1] + u[1] * w[0]) / sigma,
                0.5 * u[0] * w[0] / sigma - u[1] * w[1] / sigma,
            ]
        )

    def random_point(self, rng):
        return np.array([rng.standard_normal(), math.exp(0.3 * rng.standard_normal())])

    def random_tangent(self, x, rng):
        return rng.standard_normal(2)


_IMPLS = {
    ManifoldKind.CIRCLE: _Circle,
    ManifoldKind.SPHERE: _SphereLike,
    ManifoldKind.STIEFEL: _Stiefel,
    ManifoldKind.PRODUCT_SPHERE_EUCLID: _ProductSphereEuclid,
    ManifoldKind.HYPERBOLOID: _Hyperboloid,
    ManifoldKind.FISHER_HALF_PLANE: _FisherHalfPlane,
}


@lru_cache(maxsize=None)
def implementation_for(m: ManifoldDescriptor) -> KindImpl:
    return _IMPLS[m.kind](m)
