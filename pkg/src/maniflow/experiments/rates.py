"""Weak-error rate measurement harness.

An experiment fixes a problem, a comparison mode, oracles, and a grid of
learning rates; for each eta it computes the optimizer expectation and a
reference value at the matching horizon n = floor(T / eta), records the
absolute error with its oracle uncertainty, and fits a log-log slope.
Points whose error is below four times their uncertainty are flagged and
excluded from the fit.
"""

from __future__ import annotations

import enum
import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from ..calculus import TestFunction, one_step_rsgd_expansion, one_step_rsmf_expansion
from ..errors import ConfigurationError, InsufficientDataError, InvalidArgumentError
from ..flows import IntegratorConfig, build_operator_stack, gradient_flow, rsmf_mc_expectation
from ..geometry import (
    EXPONENTIAL,
    METRIC_PROJECTION,
    STEREOGRAPHIC,
    CHART_ADDITIVE,
    ManifoldDescriptor,
    Point,
    RetractionScheme,
    TangentVector,
    distance,
    exp_map,
    norm,
    random_point,
    random_tangent,
    retract,
)
from ..kolmogorov import circle_generator, solve_backward
from ..noise import StochasticObjective
from ..problems import ProblemSpec, default_test_function, make_problem
from ..rsgd import (
    DEFAULT_ENUM_BUDGET,
    RsgdConfig,
    default_retraction,
    rsgd_exact_expectation,
    rsgd_mc_expectation,
)

_SCHEMES = {
    "exponential": EXPONENTIAL,
    "metric_projection": METRIC_PROJECTION,
    "stereographic": STEREOGRAPHIC,
    "chart_additive": CHART_ADDITIVE,
}


class Comparison(enum.Enum):
    ODE_VS_RSGD = "ode_vs_rsgd"
    RSMF_VS_RSGD = "rsmf_vs_rsgd"
    ONE_STEP_RSMF = "one_step_rsmf"
    ONE_STEP_ODE = "one_step_ode"
    RETRACTION_ORDER = "retraction_order"


class Oracle(enum.Enum):
    EXACT_ENUM = "exact_enum"
    MONTE_CARLO = "monte_carlo"
    PDE = "pde"


@dataclass
class RateExperiment:
    problem: ProblemSpec
    comparison: Comparison
    oracle: Oracle
    eta_grid: tuple[float, ...]
    T: float = 0.5
    seed: int = 0
    g_name: str | None = None
    x0: tuple[float, ...] | None = None
    reference_oracle: Oracle | None = None
    retraction: str | None = None
    mc_paths: int = 1_000_000
    reference_mc_paths: int = 100_000
    enum_budget: int = DEFAULT_ENUM_BUDGET
    pde_grid: int = 2048
    rsmf_delta: float | None = None
    retraction_pairs: int = 100
    threads: int = 1

    def __post_init__(self):
        grid = tuple(float(e) for e in self.eta_grid)
        if len(grid) < 3:
            raise ConfigurationError("eta_grid needs at least three points")
        if any(e <= 0 for e in grid):
            raise ConfigurationError("eta_grid entries must be positive")
        if any(a <= b for a, b in zip(grid, grid[1:])):
            raise ConfigurationError("eta_grid must be strictly decreasing")
        self.eta_grid = grid
        if self.T <= 0:
            raise ConfigurationError("horizon T must be positive")

    @classmethod
    def from_json_obj(cls, obj: dict) -> "RateExperiment":
        obj = dict(obj)
        obj.pop("schema", None)
        window = obj.pop("assert_window", None)
        residual_max = obj.pop("residual_max", None)
        try:
            exp = cls(
                problem=ProblemSpec.from_json_obj(obj.pop("problem")),
                comparison=Comparison(obj.pop("comparison")),
                oracle=Oracle(obj.pop("oracle")),
                eta_grid=tuple(obj.pop("eta_grid")),
                **{
                    k: (Oracle(v) if k == "reference_oracle" and v else v)
                    for k, v in obj.items()
                },
            )
        except (KeyError, ValueError, TypeError) as exc:
            raise ConfigurationError(f"bad experiment config: {exc}") from exc
        exp.assert_window = tuple(window) if window else None
        exp.residual_max = residual_max
        return exp

    def config_hash(self) -> str:
        payload = {
            "problem": self.problem.to_json_obj(),
            "comparison": self.comparison.value,
            "oracle": self.oracle.value,
            "reference_oracle": self.reference_oracle.value
            if self.reference_oracle
            else None,
            "eta_grid": list(self.eta_grid),
            "T": self.T,
            "seed": self.seed,
            "g": self.g_name,
            "x0": list(self.x0) if self.x0 else None,
            "retraction": self.retraction,
            "mc_paths": self.mc_paths,
            "reference_mc_paths": self.reference_mc_paths,
            "pde_grid": self.pde_grid,
            "rsmf_delta": self.rsmf_delta,
            "retraction_pairs": self.retraction_pairs,
        }
        blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class ErrorCurve:
    etas: list
    n_steps: list
    lhs_values: list
    ref_values: list
    errors: list
    error_bars: list
    included: list
    slope: float
    intercept: float
    residual: float
    warnings: list = field(default_factory=list)
    config_hash: str = ""
    meta: dict = field(default_factory=dict)

    def to_json_obj(self) -> dict:
        return {
            "etas": self.etas,
            "n_steps": self.n_steps,
            "lhs_values": self.lhs_values,
            "ref_values": self.ref_values,
            "errors": self.errors,
            "error_bars": self.error_bars,
            "included": self.included,
            "slope": self.slope,
            "intercept": self.intercept,
            "residual": self.residual,
            "warnings": self.warnings,
            "config_hash": self.config_hash,
            "meta": self.meta,
        }


def fit_rate(points) -> tuple[float, float, float]:
    """Least squares on (log eta, log error); residual is the max absolute
    deviation of log error from the fitted line."""
    pts = [(float(e), float(err)) for e, err in points]
    if len(pts) < 3:
        raise InsufficientDataError(f"need at least 3 points, got {len(pts)}")
    if any(err <= 0 for _, err in pts):
        raise InsufficientDataError("errors must be positive for a log-log fit")
    lx = np.log([e for e, _ in pts])
    ly = np.log([err for _, err in pts])
    slope, intercept = np.polyfit(lx, ly, 1)
    residual = float(np.max(np.abs(ly - (slope * lx + intercept))))
    return float(slope), float(intercept), residual


def _per_eta_seed(seed: int, idx: int) -> int:
    # fresh randomness per grid point: the discrete and continuous processes
    # live on independent probability spaces
    return (seed * 1_000_003 + 7919 * (idx + 1)) & ((1 << 62) - 1)


def _resolve(exp: RateExperiment):
    obj = make_problem(exp.problem)
    g = default_test_function(obj, exp.g_name)
    x0 = (
        Point(obj.manifold, np.asarray(exp.x0, dtype=float))
        if exp.x0 is not None
        else obj.default_start
    )
    if x0 is None:
        raise ConfigurationError(f"{obj.name} has no default start; provide x0")
    scheme = (
        _SCHEMES[exp.retraction]
        if exp.retraction
        else default_retraction(obj.manifold)
    )
    return obj, g, x0, scheme


def _theta_of(x0: Point) -> float:
    return math.atan2(float(x0.coords[1]), float(x0.coords[0]))


def _rsgd_side(exp, obj, g, x0, scheme, eta, n, seed) -> tuple[float, float]:
    cfg = RsgdConfig(eta=eta, n_steps=n, retraction=scheme, seed=seed)
    if exp.oracle is Oracle.EXACT_ENUM:
        return rsgd_exact_expectation(obj, g, x0, cfg, budget=exp.enum_budget), 0.0
    if exp.oracle is Oracle.MONTE_CARLO:
        return rsgd_mc_expectation(obj, g, x0, cfg, exp.mc_paths)
    raise ConfigurationError("the optimizer side needs exact_enum or monte_carlo")


def _rsmf_reference(exp, obj, g, x0, eta, t_n, seed) -> tuple[float, float]:
    ref_oracle = exp.reference_oracle or Oracle.PDE
    if ref_oracle is Oracle.PDE:
        gen = circle_generator(obj, eta)
        return solve_backward(gen, g, t_n, _theta_of(x0), exp.pde_grid), 0.0
    if ref_oracle is Oracle.MONTE_CARLO:
        delta0 = exp.rsmf_delta if exp.rsmf_delta else min(1e-3, eta**3)
        n_sub = max(1, int(math.ceil(t_n / delta0 - 1e-12)))
        cfg = IntegratorConfig(delta=t_n / n_sub, seed=seed + 1)
        return rsmf_mc_expectation(obj, g, x0, t_n, eta, cfg, exp.reference_mc_paths)
    raise ConfigurationError("the reference side needs pde or monte_carlo")


def _point_for_eta(exp, obj, g, x0, scheme, idx, eta):
    seed = _per_eta_seed(exp.seed, idx)
    if exp.comparison in (Comparison.ONE_STEP_RSMF, Comparison.ONE_STEP_ODE):
        n = 1
        t_n = eta
    else:
        n = int(math.floor(exp.T / eta + 1e-9))
        t_n = n * eta
    if exp.comparison is Comparison.ODE_VS_RSGD:
        lhs, bar = _rsgd_side(exp, obj, g, x0, scheme, eta, n, seed)
        ref = g(gradient_flow(obj, x0, t_n))
    elif exp.comparison is Comparison.RSMF_VS_RSGD:
        lhs, bar = _rsgd_side(exp, obj, g, x0, scheme, eta, n, seed)
        ref, ref_bar = _rsmf_reference(exp, obj, g, x0, eta, t_n, seed)
        bar = math.hypot(bar, ref_bar)
    elif exp.comparison is Comparison.ONE_STEP_RSMF:
        stack = build_operator_stack(obj, eta)
        ref = one_step_rsmf_expansion(stack, g, x0, eta)
        if exp.oracle is Oracle.PDE:
            gen = circle_generator(obj, eta)
            lhs, bar = solve_backward(gen, g, eta, _theta_of(x0), exp.pde_grid), 0.0
        else:
            lhs, bar = _rsgd_side(exp, obj, g, x0, scheme, eta, 1, seed)
    elif exp.comparison is Comparison.ONE_STEP_ODE:
        lhs = g(gradient_flow(obj, x0, eta))
        bar = 0.0
        gradf = obj.grad_f(x0)
        from ..geometry import inner

        ref = g(x0) - eta * inner(x0, g.gradient(x0), gradf)
    else:
        raise ConfigurationError(f"unsupported comparison {exp.comparison}")
    return n, lhs, ref, bar


def run_rate_experiment(exp: RateExperiment) -> ErrorCurve:
    """Execute the experiment and fit the error-vs-eta slope."""
    if exp.comparison is Comparison.RETRACTION_ORDER:
        return retraction_order_curve_from_experiment(exp)
    obj, g, x0, scheme = _resolve(exp)
    indices = list(range(len(exp.eta_grid)))

    def work(idx):
        return _point_for_eta(exp, obj, g, x0, scheme, idx, exp.eta_grid[idx])

    if exp.threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=exp.threads) as pool:
            results = list(pool.map(work, indices))
    else:
        results = [work(i) for i in indices]

    warnings = []
    n_steps, lhs_vals, ref_vals, errors, bars, included = [], [], [], [], [], []
    for idx, (n, lhs, ref, bar) in zip(indices, results):
        err = abs(lhs - ref)
        keep = err > 0 and (bar == 0.0 or err >= 4.0 * bar)
        if not keep:
            warnings.append(
                f"degenerate-fit: eta={exp.eta_grid[idx]} error {err:.3e} "
                f"below 4x oracle uncertainty {bar:.3e}; point excluded"
            )
        n_steps.append(n)
        lhs_vals.append(lhs)
        ref_vals.append(ref)
        errors.append(err)
        bars.append(bar)
        included.append(keep)

    fit_points = [
        (e, err) for e, err, keep in zip(exp.eta_grid, errors, included) if keep
    ]
    slope, intercept, residual = fit_rate(fit_points)
    return ErrorCurve(
        etas=list(exp.eta_grid),
        n_steps=n_steps,
        lhs_values=lhs_vals,
        ref_values=ref_vals,
        errors=errors,
        error_bars=bars,
        included=included,
        slope=slope,
        intercept=intercept,
        residual=residual,
        warnings=warnings,
        config_hash=exp.config_hash(),
        meta={
            "comparison": exp.comparison.value,
            "oracle": exp.oracle.value,
            "problem": exp.problem.name,
            "T": exp.T,
            "seed": exp.seed,
        },
    )


# ---------------------------------------------------------------------------
# retraction order
# ---------------------------------------------------------------------------


def retraction_order_curve(
    manifold: ManifoldDescriptor,
    scheme: RetractionScheme,
    t_grid,
    n_pairs: int = 100,
    seed: int = 0,
) -> ErrorCurve:
    """Mean geodesic distance between retract(x, t v) and exp(x, t v).

    Unit tangents; the log-log slope certifies first / second retraction
    order (>= 2 and >= 3 up to fit noise).
    """
    t_grid = [float(t) for t in t_grid]
    means = []
    for t in t_grid:
        acc = []
        # same pairs across the whole t grid
        rng_pairs = np.random.default_rng(seed + 1)
        for _ in range(n_pairs):
            x = random_point(manifold, rng_pairs)
            v = random_tangent(x, rng_pairs)
            nv = norm(x, v)
            if nv < 1e-12:
                continue
            u = TangentVector(x, (t / nv) * v.coords)
            acc.append(distance(retract(x, u, scheme), exp_map(x, u)))
        means.append(float(np.mean(acc)))
    slope, intercept, residual = fit_rate(list(zip(t_grid, means)))
    return ErrorCurve(
        etas=t_grid,
        n_steps=[0] * len(t_grid),
        lhs_values=means,
        ref_values=[0.0] * len(t_grid),
        errors=means,
        error_bars=[0.0] * len(t_grid),
        included=[True] * len(t_grid),
        slope=slope,
        intercept=intercept,
        residual=residual,
        meta={
            "comparison": Comparison.RETRACTION_ORDER.value,
            "manifold": manifold.to_json_obj(),
            "scheme": scheme.variant.value,
            "n_pairs": n_pairs,
        },
    )


def retraction_order_curve_from_experiment(exp: RateExperiment) -> ErrorCurve:
    obj, _, _, scheme = _resolve(exp)
    if exp.retraction is None:
        raise ConfigurationError("retraction-order experiments must name a scheme")
    curve = retraction_order_curve(
        obj.manifold, scheme, exp.eta_grid, exp.retraction_pairs, exp.seed
    )
    curve.config_hash = exp.config_hash()
    return curve
