"""Randomized invariant battery behind the `invariants` CLI subcommand.

Each check runs on every manifold kind where the operation is defined and
reports (name, kind, worst residual, tolerance, pass).  The batch passes
only if every row passes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..geometry import (
    EUCLIDEAN_EMBEDDED_KINDS,
    ManifoldKind,
    Point,
    TangentVector,
    covariant_derivative,
    implementation_for,
    inner,
    norm,
    parallel_transport,
    random_point,
    random_tangent,
    tangent_project,
)
from ..geometry.ops import _dtangent_project
from ..noise import noise_field
from ..problems import ProblemSpec, make_problem

TANGENCY_TOL = 1e-10
IDEMPOTENCE_TOL = 1e-12
ISOMETRY_TOL = 1e-8
UNBIASEDNESS_TOL = 1e-10
COVARIANT_FD_TOL = 1e-6

#: representative descriptor and problem per manifold kind
_KIND_PROBLEMS = {
    ManifoldKind.CIRCLE: ProblemSpec("CircleTestbed"),
    ManifoldKind.SPHERE: ProblemSpec("SphereRayleigh"),
    ManifoldKind.STIEFEL: ProblemSpec("PcaStiefel", {"n": 4, "r": 2, "m": 6}),
    ManifoldKind.PRODUCT_SPHERE_EUCLID: ProblemSpec("WeightNorm"),
    ManifoldKind.HYPERBOLOID: ProblemSpec("HyperbolicMean"),
    ManifoldKind.FISHER_HALF_PLANE: ProblemSpec("FisherKL"),
}


@dataclass
class CheckResult:
    check: str
    kind: str
    worst: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.worst <= self.tolerance

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return (
            f"[{flag}] {self.check:<24} {self.kind:<22} "
            f"worst={self.worst:.3e} tol={self.tolerance:.0e}"
        )


def _objectives():
    return {kind: make_problem(spec) for kind, spec in _KIND_PROBLEMS.items()}


def run_invariants(n_samples: int = 1000, seed: int = 2024) -> list[CheckResult]:
    results = []
    objs = _objectives()
    for kind, obj in objs.items():
        m = obj.manifold
        impl = implementation_for(m)
        rng = np.random.default_rng(seed)
        kind_name = kind.value

        worst_tan = 0.0
        for _ in range(n_samples):
            x = random_point(m, rng)
            z = rng.standard_normal(m.ambient_dim)
            v = tangent_project(x, z)
            worst_tan = max(worst_tan, impl.tangency_residual(x.coords, v.coords))
        results.append(CheckResult("tangency", kind_name, worst_tan, TANGENCY_TOL))

        if kind in EUCLIDEAN_EMBEDDED_KINDS:
            worst_idem = 0.0
            for _ in range(200):
                x = random_point(m, rng)
                z = x.coords + 0.1 * rng.standard_normal(m.ambient_dim)
                p1 = impl.metric_project(z)
                p2 = impl.metric_project(p1)
                worst_idem = max(worst_idem, float(np.max(np.abs(p1 - p2))))
            results.append(
                CheckResult("projection-idempotence", kind_name, worst_idem, IDEMPOTENCE_TOL)
            )

        if kind is not ManifoldKind.FISHER_HALF_PLANE:
            worst_iso = 0.0
            for _ in range(200):
                x = random_point(m, rng)
                v = random_tangent(x, rng)
                w1 = random_tangent(x, rng)
                w2 = random_tangent(x, rng)
                t1 = parallel_transport(x, v, w1)
                t2 = parallel_transport(x, v, w2)
                y = t1.base
                worst_iso = max(
                    worst_iso, abs(inner(y, t1, t2) - inner(x, w1, w2))
                )
            results.append(
                CheckResult("transport-isometry", kind_name, worst_iso, ISOMETRY_TOL)
            )

        worst_unb = 0.0
        for _ in range(n_samples):
            x = random_point(m, rng)
            acc = np.zeros(m.ambient_dim)
            for i, w in enumerate(obj.space.weights):
                acc += w * obj.f_tilde(x, i).coords
            worst_unb = max(worst_unb, norm(x, TangentVector(x, acc - obj.grad_f(x).coords)))
        results.append(
            CheckResult("unbiasedness", kind_name, worst_unb, UNBIASEDNESS_TOL)
        )

        results.append(
            CheckResult(
                "covariant-fd-agreement",
                kind_name,
                _covariant_fd_residual(m, rng),
                COVARIANT_FD_TOL,
            )
        )
    return results


def _covariant_fd_residual(m, rng, n_samples: int = 50) -> float:
    """Analytic-vs-FD covariant derivative of a linear test field."""
    impl = implementation_for(m)
    d = m.ambient_dim
    a_mat = rng.standard_normal((d, d)) / math.sqrt(d)
    chartlike = m.kind is ManifoldKind.FISHER_HALF_PLANE

    def field(p: Point) -> TangentVector:
        if chartlike:
            return TangentVector(p, a_mat @ p.coords)
        return TangentVector(p, impl.tangent_project(p.coords, a_mat @ p.coords))

    def jac(p: Point, v: TangentVector) -> np.ndarray:
        if chartlike:
            return a_mat @ v.coords
        return _dtangent_project(impl, p.coords, v.coords, a_mat @ p.coords) + impl.tangent_project(
            p.coords, a_mat @ v.coords
        )

    worst = 0.0
    for _ in range(n_samples):
        x = random_point(m, rng)
        v = random_tangent(x, rng)
        exact = covariant_derivative(field, x, v, jacobian=jac)
        approx = covariant_derivative(field, x, v)
        worst = max(worst, float(np.max(np.abs(exact.coords - approx.coords))))
    return worst


def noise_model_checks(n_samples: int = 200, seed: int = 7) -> list[CheckResult]:
    """Estimator-field checks: analytic atom Jacobians against FD."""
    out = []
    for kind, spec in _KIND_PROBLEMS.items():
        obj = make_problem(spec)
        if obj.f_tilde_jacobian_fn is None:
            continue
        m = obj.manifold
        rng = np.random.default_rng(seed)
        worst = 0.0
        for _ in range(n_samples):
            x = random_point(m, rng)
            v = random_tangent(x, rng)
            for i in range(len(obj.space)):
                field = lambda p, i=i: obj.f_tilde(p, i)
                exact = covariant_derivative(field, x, v, jacobian=obj.f_tilde_jacobian(i))
                approx = covariant_derivative(field, x, v)
                worst = max(worst, float(np.max(np.abs(exact.coords - approx.coords))))
        out.append(
            CheckResult("atom-jacobian-fd", kind.value, worst, COVARIANT_FD_TOL)
        )
    return out
