"""The discrete optimizer and its expectation oracles.

One step retracts the negative scaled estimator:
``Z_n = retr(Z_{n-1}, -eta * f~(Z_{n-1}, xi_n))``.  Expectations of test
functions over the atom-sequence law are computed either exactly (full
tree enumeration, budget-guarded, compensated summation) or by seeded
Monte Carlo; the two oracles cross-check each other in the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from . import kernels
from .calculus import TestFunction
from .errors import (
    BudgetExceededError,
    InvalidArgumentError,
    StepFailureError,
    TubeViolationError,
)
from .geometry import (
    EXPONENTIAL,
    METRIC_PROJECTION,
    CHART_ADDITIVE,
    ManifoldDescriptor,
    ManifoldKind,
    Point,
    RetractionScheme,
    RetractionVariant,
    TangentVector,
    retract,
)
from .noise import StochasticObjective, atom_indices

DEFAULT_ENUM_BUDGET = 20_000_000

_SCHEME_CODES = {
    RetractionVariant.EXPONENTIAL: kernels.SCHEME_EXP,
    RetractionVariant.METRIC_PROJECTION: kernels.SCHEME_PROJ,
    RetractionVariant.STEREOGRAPHIC: kernels.SCHEME_STEREO,
}


@dataclass(frozen=True)
class RsgdConfig:
    eta: float
    n_steps: int
    retraction: RetractionScheme = EXPONENTIAL
    seed: int = 0

    def __post_init__(self):
        if self.n_steps < 0:
            raise InvalidArgumentError("n_steps must be nonnegative")
        if self.eta < 0:
            raise InvalidArgumentError("eta must be nonnegative")
        if self.n_steps > 0 and self.eta <= 0:
            raise InvalidArgumentError("eta must be positive when stepping")


def default_retraction(m: ManifoldDescriptor) -> RetractionScheme:
    """Exponential where closed forms exist, projection on matrix/product
    manifolds, chart addition on the Fisher half-plane."""
    if m.kind in (ManifoldKind.STIEFEL, ManifoldKind.PRODUCT_SPHERE_EUCLID):
        return METRIC_PROJECTION
    if m.kind is ManifoldKind.FISHER_HALF_PLANE:
        return CHART_ADDITIVE
    return EXPONENTIAL


def rsgd_step(
    obj: StochasticObjective, x: Point, atom_index: int, cfg: RsgdConfig
) -> Point:
    """One optimizer step for the given atom."""
    if cfg.eta == 0.0:
        return x
    ft = obj.f_tilde(x, atom_index)
    v = TangentVector(x, -cfg.eta * ft.coords)
    try:
        return retract(x, v, cfg.retraction)
    except TubeViolationError as exc:
        raise StepFailureError(f"retraction failed: {exc}", state=x) from exc


def rsgd_iterates(
    obj: StochasticObjective, x0: Point, cfg: RsgdConfig
) -> Iterator[tuple[int, Point]]:
    """Yield (step, point) along one seeded trajectory, starting at step 0."""
    x = x0
    yield 0, x
    for k in range(cfg.n_steps):
        atom = int(atom_indices(cfg.seed, k, 1, obj.space.weights)[0])
        x = rsgd_step(obj, x, atom, cfg)
        yield k + 1, x


def _check_budget(m_atoms: int, n_steps: int, budget: int):
    leaves = m_atoms**n_steps
    if leaves > budget:
        raise BudgetExceededError(
            f"enumeration needs {leaves} leaf evaluations "
            f"(budget {budget}); reduce n_steps or raise the budget",
            required=leaves,
        )


def rsgd_exact_expectation(
    obj: StochasticObjective,
    g: TestFunction,
    x0: Point,
    cfg: RsgdConfig,
    budget: int = DEFAULT_ENUM_BUDGET,
) -> float:
    """Exact E[g(Z_n)]: weighted sum over all atom sequences.

    The leaf-count guard runs before any work.  Circle-chart problems use
    the vectorized (or compiled) kernel; everything else walks the tree
    depth-first with an explicit stack and Kahan-compensated accumulation.
    """
    _check_budget(len(obj.space), cfg.n_steps, budget)
    if cfg.n_steps == 0:
        return g(x0)

    chart = obj.chart
    if (
        obj.manifold.kind is ManifoldKind.CIRCLE
        and chart is not None
        and cfg.retraction.variant in _SCHEME_CODES
    ):
        theta0 = math.atan2(float(x0.coords[1]), float(x0.coords[0]))
        scheme = _SCHEME_CODES[cfg.retraction.variant]
        if chart.affine_noise is not None and g.chart_code is not None:
            p_coef, q_coef = chart.affine_noise
            return float(
                kernels.circle_enumeration(
                    theta0,
                    cfg.eta,
                    cfg.n_steps,
                    np.asarray(obj.space.weights),
                    np.asarray(p_coef, dtype=float),
                    np.asarray(q_coef, dtype=float),
                    scheme,
                    g.chart_code,
                )
            )
        if g.chart is not None:
            return _chart_enumeration(obj, g, theta0, cfg, scheme)

    return _generic_enumeration(obj, g, x0, cfg)


def _chart_enumeration(
    obj: StochasticObjective, g: TestFunction, theta0: float, cfg, scheme: int
) -> float:
    from .kernels import _pure

    weights = np.asarray(obj.space.weights)
    thetas = np.array([theta0])
    probs = np.array([1.0])
    for _ in range(cfg.n_steps):
        branches, wbranches = [], []
        for i, w in enumerate(weights):
            s = -cfg.eta * obj.chart.f_tilde(thetas, i)
            branches.append(thetas + _pure._chart_offset(s, scheme))
            wbranches.append(probs * w)
        thetas = np.concatenate(branches)
        probs = np.concatenate(wbranches)
    return math.fsum((probs * g.chart(thetas)).tolist())


def _generic_enumeration(
    obj: StochasticObjective, g: TestFunction, x0: Point, cfg: RsgdConfig
) -> float:
    m = len(obj.space)
    weights = obj.space.weights
    total = 0.0
    comp = 0.0  # Kahan carry
    stack: list[tuple[Point, float, int]] = [(x0, 1.0, 0)]
    while stack:
        x, prob, depth = stack.pop()
        if depth == cfg.n_steps:
            term = prob * g(x) - comp
            new_total = total + term
            comp = (new_total - total) - term
            total = new_total
            continue
        for i in range(m):
            stack.append((rsgd_step(obj, x, i, cfg), prob * weights[i], depth + 1))
    return total


def rsgd_mc_expectation(
    obj: StochasticObjective,
    g: TestFunction,
    x0: Point,
    cfg: RsgdConfig,
    n_paths: int,
) -> tuple[float, float]:
    """Seeded Monte Carlo estimate of E[g(Z_n)] with its standard error."""
    if n_paths < 2:
        raise InvalidArgumentError("need at least two paths for a standard error")
    vals = _mc_terminal_values(obj, g, x0, cfg, n_paths)
    mean = float(np.mean(vals))
    se = float(np.std(vals, ddof=1) / math.sqrt(n_paths))
    return mean, se


def _mc_terminal_values(obj, g, x0, cfg, n_paths: int) -> np.ndarray:
    chart = obj.chart
    if (
        obj.manifold.kind is ManifoldKind.CIRCLE
        and chart is not None
        and cfg.retraction.variant in _SCHEME_CODES
        and g.chart is not None
    ):
        return _mc_circle(obj, g, x0, cfg, n_paths)
    if (
        obj.batch is not None
        and obj.manifold.kind is ManifoldKind.SPHERE
        and g.evaluate_batch is not None
    ):
        return _mc_sphere(obj, g, x0, cfg, n_paths)
    return _mc_generic(obj, g, x0, cfg, n_paths)


def _mc_circle(obj, g, x0, cfg, n_paths):
    from .kernels import _pure

    scheme = _SCHEME_CODES[cfg.retraction.variant]
    weights = np.asarray(obj.space.weights)
    m = len(weights)
    thetas = np.full(n_paths, math.atan2(float(x0.coords[1]), float(x0.coords[0])))
    for k in range(cfg.n_steps):
        idx = atom_indices(cfg.seed, k, n_paths, weights)
        stacked = np.stack([obj.chart.f_tilde(thetas, i) for i in range(m)])
        s = -cfg.eta * stacked[idx, np.arange(n_paths)]
        thetas = thetas + _pure._chart_offset(s, scheme)
    return np.asarray(g.chart(thetas), dtype=float)


def _mc_sphere(obj, g, x0, cfg, n_paths):
    weights = np.asarray(obj.space.weights)
    xs = np.tile(x0.coords, (n_paths, 1))
    for k in range(cfg.n_steps):
        idx = atom_indices(cfg.seed, k, n_paths, weights)
        v = -cfg.eta * obj.batch.f_tilde(xs, idx)
        xs = _sphere_retract_batch(xs, v, cfg.retraction.variant)
    return np.asarray(g.evaluate_batch(xs), dtype=float)


def _sphere_retract_batch(xs, v, variant: RetractionVariant):
    if variant is RetractionVariant.EXPONENTIAL:
        s = np.linalg.norm(v, axis=1, keepdims=True)
        small = s < 1e-300
        safe = np.where(small, 1.0, s)
        out = np.cos(s) * xs + np.sin(s) * (v / safe)
        out = np.where(small, xs, out)
    elif variant is RetractionVariant.METRIC_PROJECTION:
        from .kernels._pure import _soft_clamp

        s = np.linalg.norm(v, axis=1, keepdims=True)
        safe = np.where(s > 0, s, 1.0)
        out = xs + v * (_soft_clamp(s) / safe)
    else:  # stereographic
        q = 0.25 * np.sum(v * v, axis=1, keepdims=True)
        out = (v + (1.0 - q) * xs) / (1.0 + q)
    return out / np.linalg.norm(out, axis=1, keepdims=True)


def _mc_generic(obj, g, x0, cfg, n_paths):
    weights = obj.space.weights
    idx_all = [
        atom_indices(cfg.seed, k, n_paths, weights) for k in range(cfg.n_steps)
    ]
    vals = np.empty(n_paths)
    for p in range(n_paths):
        x = x0
        for k in range(cfg.n_steps):
            x = rsgd_step(obj, x, int(idx_all[k][p]), cfg)
        vals[p] = g(x)
    return vals
