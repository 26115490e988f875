"""Command-line interface.

Subcommands: rates, onestep, retraction-order, invariants, rsgd-run,
rsmf-run, rsmf-expect, pde-solve, pca-demo, list-problems.  Exit codes:
0 success, 1 assertion failure, 2 usage/config error, 3 budget error.
Outputs are byte-identical for identical config + seed.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from .. import kernels
from ..errors import (
    BudgetExceededError,
    ConfigurationError,
    InsufficientDataError,
    InvalidArgumentError,
    ManiflowError,
    StepFailureError,
    TubeViolationError,
    UnsupportedOperationError,
)
from ..flows import IntegratorConfig, gradient_flow, rsmf_integrate, rsmf_mc_expectation
from ..geometry import ManifoldDescriptor, Point
from ..kolmogorov import circle_generator, solve_backward
from ..problems import (
    PARAMETER_SCHEMAS,
    ProblemSpec,
    default_test_function,
    make_problem,
    pca_optimum,
)
from ..rsgd import RsgdConfig, default_retraction, rsgd_iterates
from .invariants import noise_model_checks, run_invariants
from .rates import (
    Comparison,
    ErrorCurve,
    Oracle,
    RateExperiment,
    retraction_order_curve,
    run_rate_experiment,
)
from ..geometry import (
    CHART_ADDITIVE,
    EXPONENTIAL,
    METRIC_PROJECTION,
    STEREOGRAPHIC,
    circle,
    fisher_half_plane,
    hyperboloid,
    product_sphere_euclid,
    sphere,
    stiefel,
)

_SCHEMES = {
    "exponential": EXPONENTIAL,
    "metric_projection": METRIC_PROJECTION,
    "stereographic": STEREOGRAPHIC,
    "chart_additive": CHART_ADDITIVE,
}


class AssertionWindowFailure(ManiflowError):
    pass


def _float_list(text: str) -> tuple[float, ...]:
    return tuple(float(tok) for tok in text.split(",") if tok.strip())


def _parse_manifold(text: str) -> ManifoldDescriptor:
    name, _, params = text.partition(":")
    args = [int(tok) for tok in params.split(",") if tok.strip()]
    builders = {
        "circle": circle,
        "sphere": sphere,
        "stiefel": stiefel,
        "product": product_sphere_euclid,
        "hyperboloid": hyperboloid,
        "fisher": fisher_half_plane,
    }
    try:
        return builders[name](*args)
    except (KeyError, TypeError) as exc:
        raise ConfigurationError(f"bad manifold spec {text!r}") from exc


def _emit_text(text: str, out: str | None):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _emit_json(obj, out: str | None):
    _emit_text(json.dumps(obj, sort_keys=True, indent=2) + "\n", out)


def _curve_csv(curve: ErrorCurve) -> str:
    lines = [
        "eta,n_steps,rsgd_expectation,reference_value,abs_error,error_bar,included_in_fit"
    ]
    for i in range(len(curve.etas)):
        lines.append(
            f"{curve.etas[i]!r},{curve.n_steps[i]},{curve.lhs_values[i]!r},"
            f"{curve.ref_values[i]!r},{curve.errors[i]!r},{curve.error_bars[i]!r},"
            f"{int(curve.included[i])}"
        )
    return "\n".join(lines) + "\n"


def _fit_sidecar(curve: ErrorCurve) -> dict:
    return {
        "slope": curve.slope,
        "intercept": curve.intercept,
        "residual": curve.residual,
        "config_hash": curve.config_hash,
        "warnings": curve.warnings,
        "meta": curve.meta,
    }


def _emit_curve(curve: ErrorCurve, out: str | None, fmt: str):
    if fmt == "json":
        _emit_json(curve.to_json_obj(), out)
        return
    csv_text = _curve_csv(curve)
    if out:
        _emit_text(csv_text, out)
        _emit_json(_fit_sidecar(curve), out + ".fit.json")
    else:
        sys.stdout.write(csv_text)
        sys.stdout.write(json.dumps(_fit_sidecar(curve), sort_keys=True) + "\n")


def _apply_assert(curve: ErrorCurve, window, residual_max):
    if window is None:
        raise ConfigurationError("--assert requires an assert_window in the config")
    lo, hi = float(window[0]), float(window[1])
    if not lo <= curve.slope <= hi:
        raise AssertionWindowFailure(
            f"slope {curve.slope:.4f} outside window [{lo}, {hi}]"
        )
    if residual_max is not None and curve.residual > float(residual_max):
        raise AssertionWindowFailure(
            f"fit residual {curve.residual:.4f} exceeds {residual_max}"
        )


# ---------------------------------------------------------------------------
# subcommand handlers
# ---------------------------------------------------------------------------


def _cmd_rates(args) -> int:
    with open(args.config) as fh:
        cfg = json.load(fh)
    exp = RateExperiment.from_json_obj(cfg)
    if args.seed is not None:
        exp.seed = args.seed
    exp.threads = args.threads
    curve = run_rate_experiment(exp)
    _emit_curve(curve, args.out, args.format)
    if args.assert_window:
        _apply_assert(curve, getattr(exp, "assert_window", None), getattr(exp, "residual_max", None))
    return 0


def _cmd_onestep(args) -> int:
    grid = _float_list(args.eta_grid)
    exp = RateExperiment(
        problem=ProblemSpec(args.problem),
        comparison=Comparison.ONE_STEP_RSMF,
        oracle=Oracle(args.oracle),
        eta_grid=grid,
        T=max(grid),
        seed=args.seed if args.seed is not None else 0,
        g_name=args.g,
        pde_grid=args.grid,
        threads=args.threads,
    )
    curve = run_rate_experiment(exp)
    _emit_curve(curve, args.out, args.format)
    if args.min_slope is not None and curve.slope < args.min_slope:
        raise AssertionWindowFailure(
            f"slope {curve.slope:.3f} below required {args.min_slope}"
        )
    return 0


def _cmd_retraction_order(args) -> int:
    m = _parse_manifold(args.manifold)
    scheme = _SCHEMES[args.scheme]
    curve = retraction_order_curve(
        m,
        scheme,
        _float_list(args.t_grid),
        n_pairs=args.pairs,
        seed=args.seed if args.seed is not None else 0,
    )
    _emit_curve(curve, args.out, args.format)
    if args.min_slope is not None and curve.slope < args.min_slope:
        raise AssertionWindowFailure(
            f"slope {curve.slope:.3f} below required {args.min_slope}"
        )
    return 0


def _cmd_invariants(args) -> int:
    results = run_invariants(n_samples=args.samples, seed=args.seed or 2024)
    results += noise_model_checks()
    lines = [r.line() for r in results]
    ok = all(r.passed for r in results)
    text = "\n".join(lines) + ("\n" + ("all invariants hold" if ok else "FAILURES above") + "\n")
    _emit_text(text, args.out)
    return 0 if ok else 1


def _cmd_rsgd_run(args) -> int:
    obj = make_problem(ProblemSpec(args.problem))
    scheme = _SCHEMES[args.retraction] if args.retraction else default_retraction(obj.manifold)
    cfg = RsgdConfig(
        eta=args.eta,
        n_steps=args.steps,
        retraction=scheme,
        seed=args.seed if args.seed is not None else 0,
    )
    x0 = obj.default_start
    dim = obj.manifold.ambient_dim
    header = "step," + ",".join(f"c{i}" for i in range(dim)) + ",f_value"
    rows = [header]
    for k, x in rsgd_iterates(obj, x0, cfg):
        coords = ",".join(repr(float(c)) for c in x.coords)
        rows.append(f"{k},{coords},{obj.f(x)!r}")
    _emit_text("\n".join(rows) + "\n", args.out)
    return 0


def _cmd_rsmf_run(args) -> int:
    obj = make_problem(ProblemSpec(args.problem))
    cfg = IntegratorConfig(delta=args.delta, seed=args.seed if args.seed is not None else 0)
    x0 = obj.default_start
    _, traj = rsmf_integrate(obj, x0, args.T, args.eta, cfg, return_trajectory=True)
    dim = obj.manifold.ambient_dim
    header = "t," + ",".join(f"c{i}" for i in range(dim)) + ",f_value"
    rows = [header]
    for i, (t, x) in enumerate(traj):
        if i % max(1, args.save_every) and i != len(traj) - 1:
            continue
        coords = ",".join(repr(float(c)) for c in x.coords)
        rows.append(f"{t!r},{coords},{obj.f(x)!r}")
    _emit_text("\n".join(rows) + "\n", args.out)
    return 0


def _cmd_rsmf_expect(args) -> int:
    obj = make_problem(ProblemSpec(args.problem))
    g = default_test_function(obj, args.g)
    cfg = IntegratorConfig(delta=args.delta, seed=args.seed if args.seed is not None else 0)
    mean, se = rsmf_mc_expectation(
        obj, g, obj.default_start, args.T, args.eta, cfg, args.paths
    )
    _emit_json(
        {
            "mean": mean,
            "std_error": se,
            "n_paths": args.paths,
            "delta": args.delta,
            "seed": cfg.seed,
        },
        args.out,
    )
    return 0


def _cmd_pde_solve(args) -> int:
    obj = make_problem(ProblemSpec(args.problem))
    g = default_test_function(obj, args.g)
    gen = circle_generator(obj, args.eta)
    theta0 = args.theta0 if args.theta0 is not None else obj.chart.theta0
    value = solve_backward(gen, g, args.T, theta0, args.grid)
    _emit_json(
        {"T": args.T, "theta0": theta0, "value": value, "grid_n": args.grid},
        args.out,
    )
    return 0


def _cmd_pca_demo(args) -> int:
    obj = make_problem(ProblemSpec("PcaStiefel"))
    opt_point, f_opt = pca_optimum(obj)
    grad_norm = float(np.linalg.norm(obj.grad_f(opt_point).coords))
    cfg = RsgdConfig(
        eta=args.eta,
        n_steps=args.steps,
        retraction=default_retraction(obj.manifold),
        seed=args.seed if args.seed is not None else 0,
    )
    best_gap = math.inf
    steps_to_tol = None
    for k, x in rsgd_iterates(obj, obj.default_start, cfg):
        gap = obj.f(x) - f_opt
        if gap < best_gap:
            best_gap = gap
        if steps_to_tol is None and gap <= args.tol:
            steps_to_tol = k
            break
    reached = steps_to_tol is not None
    _emit_json(
        {
            "reached": reached,
            "steps_to_tol": steps_to_tol,
            "best_f_gap": best_gap,
            "f_optimum": f_opt,
            "grad_norm_at_optimum": grad_norm,
            "tol": args.tol,
            "eta": args.eta,
        },
        args.out,
    )
    return 0 if reached and grad_norm <= 1e-10 else 1


def _cmd_list_problems(args) -> int:
    catalog = {
        name: {"params": schema}
        for name, schema in sorted(PARAMETER_SCHEMAS.items())
    }
    catalog["_backend"] = kernels.backend_name()
    _emit_json(catalog, args.out)
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="override the seed")
    common.add_argument("--out", type=str, default=None, help="output file path")
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--format", choices=("csv", "json"), default="csv")

    parser = argparse.ArgumentParser(
        prog="maniflow",
        description="Manifold optimizer continuum limits: rate experiments and oracles.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rates", parents=[common], help="run a rate experiment from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--assert", dest="assert_window", action="store_true")
    p.set_defaults(handler=_cmd_rates)

    p = sub.add_parser("onestep", parents=[common], help="single-step expansion error vs eta")
    p.add_argument("--problem", default="CircleTestbed")
    p.add_argument("--g", default=None)
    p.add_argument("--oracle", choices=("pde", "exact_enum"), default="pde")
    p.add_argument("--eta-grid", dest="eta_grid", default="0.2,0.1,0.05,0.025")
    p.add_argument("--grid", type=int, default=2048)
    p.add_argument("--min-slope", type=float, default=None)
    p.set_defaults(handler=_cmd_onestep)

    p = sub.add_parser("retraction-order", parents=[common], help="distance-to-exp slopes")
    p.add_argument("--manifold", default="sphere:2")
    p.add_argument("--scheme", choices=sorted(_SCHEMES), default="metric_projection")
    p.add_argument("--t-grid", dest="t_grid", default="0.2,0.1,0.05,0.025")
    p.add_argument("--pairs", type=int, default=100)
    p.add_argument("--min-slope", type=float, default=None)
    p.set_defaults(handler=_cmd_retraction_order)

    p = sub.add_parser("invariants", parents=[common], help="run the invariant battery")
    p.add_argument("--samples", type=int, default=1000)
    p.set_defaults(handler=_cmd_invariants)

    p = sub.add_parser("rsgd-run", parents=[common], help="emit one optimizer trajectory as CSV")
    p.add_argument("--problem", default="CircleTestbed")
    p.add_argument("--eta", type=float, default=0.05)
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--retraction", choices=sorted(_SCHEMES), default=None)
    p.set_defaults(handler=_cmd_rsgd_run)

    p = sub.add_parser("rsmf-run", parents=[common], help="emit one diffusion path as CSV")
    p.add_argument("--problem", default="CircleTestbed")
    p.add_argument("--eta", type=float, default=0.05)
    p.add_argument("--T", type=float, default=0.5)
    p.add_argument("--delta", type=float, default=1e-3)
    p.add_argument("--save-every", type=int, default=10)
    p.set_defaults(handler=_cmd_rsmf_run)

    p = sub.add_parser("rsmf-expect", parents=[common], help="Monte Carlo diffusion expectation")
    p.add_argument("--problem", default="CircleTestbed")
    p.add_argument("--g", default=None)
    p.add_argument("--eta", type=float, default=0.05)
    p.add_argument("--T", type=float, default=0.5)
    p.add_argument("--delta", type=float, default=1e-3)
    p.add_argument("--paths", type=int, default=10_000)
    p.set_defaults(handler=_cmd_rsmf_expect)

    p = sub.add_parser("pde-solve", parents=[common], help="backward-equation oracle value")
    p.add_argument("--problem", default="CircleTestbed")
    p.add_argument("--g", default=None)
    p.add_argument("--eta", type=float, default=0.05)
    p.add_argument("--T", type=float, default=0.5)
    p.add_argument("--theta0", type=float, default=None)
    p.add_argument("--grid", type=int, default=2048)
    p.set_defaults(handler=_cmd_pde_solve)

    p = sub.add_parser("pca-demo", parents=[common], help="Stiefel PCA optimization demo")
    p.add_argument("--eta", type=float, default=0.01)
    p.add_argument("--steps", type=int, default=10_000)
    p.add_argument("--tol", type=float, default=1e-3)
    p.set_defaults(handler=_cmd_pca_demo)

    p = sub.add_parser("list-problems", parents=[common], help="print the problem catalog")
    p.set_defaults(handler=_cmd_list_problems)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except AssertionWindowFailure as exc:
        _error_out("assertion-failure", exc)
        return 1
    except BudgetExceededError as exc:
        _error_out("budget-error", exc)
        return 3
    except (
        ConfigurationError,
        InvalidArgumentError,
        InsufficientDataError,
        UnsupportedOperationError,
        TubeViolationError,
        StepFailureError,
        FileNotFoundError,
        json.JSONDecodeError,
    ) as exc:
        _error_out("config-error", exc)
        return 2


def _error_out(kind: str, exc: Exception):
    sys.stderr.write(
        json.dumps({"error": kind, "message": str(exc)}, sort_keys=True) + "\n"
    )


if __name__ == "__main__":
    sys.exit(main())
