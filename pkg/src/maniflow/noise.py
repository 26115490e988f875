"""Finite atom spaces, stochastic gradient estimators, diffusion vectors.

The sample space is a finite probability space (atoms, weights).  A
stochastic objective bundles the loss, its gradient estimator field over
the atoms, and optional analytic directional Jacobians.  Sampling uses
counter-based (Philox) streams keyed by (seed, step[, atom]), with the path
index addressing a position inside the keyed stream, so any single path is
reproducible in isolation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .calculus import TestFunction
from .errors import InvalidArgumentError
from .geometry import (
    ManifoldDescriptor,
    Point,
    TangentVector,
    riemannian_gradient_from_euclidean,
)

WEIGHT_SUM_TOL = 1e-12


@dataclass(frozen=True)
class FiniteSampleSpace:
    """Atoms with positive weights summing to one."""

    atoms: tuple
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "atoms", tuple(self.atoms))
        if len(self.atoms) != w.shape[0]:
            raise InvalidArgumentError("one weight per atom is required")
        if np.any(w <= 0):
            raise InvalidArgumentError("weights must be positive")
        if abs(float(w.sum()) - 1.0) > WEIGHT_SUM_TOL:
            raise InvalidArgumentError("weights must sum to one")

    @classmethod
    def uniform(cls, m: int, labels: Sequence | None = None) -> "FiniteSampleSpace":
        labels = tuple(labels) if labels is not None else tuple(range(m))
        return cls(labels, np.full(m, 1.0 / m))

    def __len__(self) -> int:
        return len(self.atoms)


@dataclass
class StochasticObjective:
    """Objective f with an unbiased per-atom gradient estimator field.

    ``f_tilde(x, i)`` returns the estimator for atom i as a tangent vector;
    its weighted atom average must equal the Riemannian gradient of f.
    ``f_tilde_jacobian(x, i, v)`` optionally returns the analytic ambient
    (chart) directional derivative of a smooth extension of the estimator
    field.  ``chart`` / ``batch`` are optional vectorized hooks used by the
    fast circle-chart and path-parallel code.
    """

    manifold: ManifoldDescriptor
    f: TestFunction
    space: FiniteSampleSpace
    f_tilde_fn: Callable[[Point, int], np.ndarray]
    euclidean_grad_f_fn: Callable[[Point], np.ndarray] | None = None
    grad_f_fn: Callable[[Point], np.ndarray] | None = None
    f_tilde_jacobian_fn: Callable[[Point, int, np.ndarray], np.ndarray] | None = None
    grad_f_jacobian_fn: Callable[[Point, np.ndarray], np.ndarray] | None = None
    chart: "CircleChart | None" = None
    batch: "BatchHooks | None" = None
    name: str = "objective"
    default_start: Point | None = None
    test_functions: dict = field(default_factory=dict)

    def n_atoms(self) -> int:
        return len(self.space)

    def _check_atom(self, i: int):
        if not 0 <= i < len(self.space):
            raise InvalidArgumentError(
                f"atom index {i} out of range for {len(self.space)} atoms"
            )

    def f_tilde(self, x: Point, i: int) -> TangentVector:
        self._check_atom(i)
        return TangentVector(x, np.asarray(self.f_tilde_fn(x, i), dtype=float))

    def euclidean_grad_f(self, x: Point) -> np.ndarray:
        if self.euclidean_grad_f_fn is None:
            raise InvalidArgumentError(f"{self.name} has no Euclidean gradient")
        return np.asarray(self.euclidean_grad_f_fn(x), dtype=float)

    def grad_f(self, x: Point) -> TangentVector:
        if self.grad_f_fn is not None:
            return TangentVector(x, np.asarray(self.grad_f_fn(x), dtype=float))
        if self.euclidean_grad_f_fn is not None:
            return riemannian_gradient_from_euclidean(x, self.euclidean_grad_f(x))
        # unbiasedness makes the weighted atom average exact
        acc = np.zeros(self.manifold.ambient_dim)
        for i, w in enumerate(self.space.weights):
            acc += w * np.asarray(self.f_tilde_fn(x, i), dtype=float)
        return TangentVector(x, acc)

    def f_tilde_jacobian(self, i: int):
        """Directional-jacobian closure for atom i, or None."""
        if self.f_tilde_jacobian_fn is None:
            return None
        self._check_atom(i)

        def jac(x: Point, v: TangentVector) -> np.ndarray:
            return self.f_tilde_jacobian_fn(x, i, v.coords)

        return jac

    def grad_f_jacobian(self):
        if self.grad_f_jacobian_fn is None:
            return None

        def jac(x: Point, v: TangentVector) -> np.ndarray:
            return self.grad_f_jacobian_fn(x, v.coords)

        return jac


@dataclass
class CircleChart:
    """Vectorized angle-chart views of a circle objective.

    All callables map arrays of angles to arrays of chart coefficients in
    the arc-length frame dtheta.
    """

    grad: Callable[[np.ndarray], np.ndarray]
    grad_prime: Callable[[np.ndarray], np.ndarray]
    f_tilde: Callable[[np.ndarray, int], np.ndarray]
    theta0: float = 1.0
    #: (p, q) with estimator chart values sin(t) + p_i + q_i cos(t); enables
    #: the compiled enumeration kernel
    affine_noise: tuple | None = None


@dataclass
class BatchHooks:
    """Path-parallel hooks: rows of X are points, one atom index per row."""

    f_tilde: Callable[[np.ndarray, np.ndarray], np.ndarray]
    grad_f: Callable[[np.ndarray], np.ndarray] | None = None


def noise_field(obj: StochasticObjective, x: Point, atom_index: int) -> TangentVector:
    """Centered estimator fluctuation for one atom: grad f(x) - f~(x, atom)."""
    obj._check_atom(atom_index)
    g = obj.grad_f(x)
    ft = obj.f_tilde(x, atom_index)
    return TangentVector(x, g.coords - ft.coords)


def diffusion_vectors(
    obj: StochasticObjective, x: Point, eta: float
) -> list[TangentVector]:
    """Per-atom diffusion vectors sqrt(eta * w_i) * (grad f - f~_i).

    Their outer-product sum equals eta times the centered second moment of
    the estimator field.
    """
    if eta < 0:
        raise InvalidArgumentError("eta must be nonnegative")
    out = []
    scale = np.sqrt(eta * obj.space.weights)
    for i in range(len(obj.space)):
        nf = noise_field(obj, x, i)
        out.append(TangentVector(x, scale[i] * nf.coords))
    return out


def third_moment_diagnostic(
    obj: StochasticObjective, sample_points: Sequence[Point]
) -> float:
    """max over samples of E_atoms ||f~(x, xi)||^3 (finite-moment proxy)."""
    if not sample_points:
        raise InvalidArgumentError("need at least one sample point")
    from .geometry import norm as metric_norm

    worst = 0.0
    for x in sample_points:
        acc = 0.0
        for i, w in enumerate(obj.space.weights):
            acc += w * metric_norm(x, obj.f_tilde(x, i)) ** 3
        worst = max(worst, acc)
    return worst


# ---------------------------------------------------------------------------
# counter-based random streams
# ---------------------------------------------------------------------------

_TAG_ATOM = 0x41
_TAG_BM = 0x42
_MASK64 = (1 << 64) - 1


def _philox(seed: int, tag: int, a: int = 0, b: int = 0) -> np.random.Generator:
    key = ((seed & _MASK64) << 64) | ((tag & 0xFF) << 56) | ((b & 0xFFFF) << 40) | (
        a & ((1 << 40) - 1)
    )
    return np.random.Generator(np.random.Philox(key=key))


def atom_indices(
    seed: int, step: int, n: int, weights: np.ndarray
) -> np.ndarray:
    """n atom draws for a given step; entry p belongs to path p."""
    u = _philox(seed, _TAG_ATOM, step).random(n)
    cum = np.cumsum(np.asarray(weights, dtype=float))
    idx = np.searchsorted(cum, u, side="right")
    return np.minimum(idx, len(cum) - 1)


def brownian_increments(
    seed: int, substep: int, atom: int, n: int, delta: float
) -> np.ndarray:
    """n Normal(0, delta) increments for (substep, atom); entry p is path p."""
    z = _philox(seed, _TAG_BM, substep, atom).standard_normal(n)
    return z * np.sqrt(delta)
