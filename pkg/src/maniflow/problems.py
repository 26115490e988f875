"""Ready-made stochastic objectives on the supported manifolds.

Each constructor returns a :class:`~maniflow.noise.StochasticObjective`
whose estimator field is unbiased by construction, together with a default
start point and a small catalog of smooth test functions.  Data-driven
problems (PCA, sphere Rayleigh quotient, hyperbolic means, the toy
network) generate their samples from a fixed-seed generator so instances
are reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .calculus import TestFunction
from .errors import InvalidArgumentError
from .geometry import (
    ManifoldKind,
    Point,
    circle,
    fisher_half_plane,
    hyperboloid,
    implementation_for,
    product_sphere_euclid,
    sphere,
    stiefel,
)
from .noise import BatchHooks, CircleChart, FiniteSampleSpace, StochasticObjective

PROBLEM_NAMES = (
    "CircleTestbed",
    "SphereRayleigh",
    "PcaStiefel",
    "WeightNorm",
    "HyperbolicMean",
    "FisherKL",
)


@dataclass(frozen=True)
class ProblemSpec:
    """Problem name plus a parameter map (missing entries take defaults)."""

    name: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in PROBLEM_NAMES:
            raise InvalidArgumentError(
                f"unknown problem {self.name!r}; choose from {PROBLEM_NAMES}"
            )

    @classmethod
    def from_json_obj(cls, obj: dict) -> "ProblemSpec":
        params = dict(obj.get("params", {}))
        if "atoms" in obj:
            params.setdefault("m", int(obj["atoms"]))
        spec = cls(obj["problem"], params)
        if "weights" in obj:
            params["weights"] = list(obj["weights"])
        return spec

    def to_json_obj(self) -> dict:
        return {"problem": self.name, "params": dict(self.params)}


def _params_with_defaults(spec: ProblemSpec, defaults: dict) -> dict:
    unknown = set(spec.params) - set(defaults)
    if unknown:
        raise InvalidArgumentError(
            f"{spec.name} does not accept parameters {sorted(unknown)}"
        )
    out = dict(defaults)
    out.update(spec.params)
    return out


# ---------------------------------------------------------------------------
# circle testbed
# ---------------------------------------------------------------------------


def _circle_testbed(spec: ProblemSpec) -> StochasticObjective:
    p = _params_with_defaults(spec, {"c0": 0.5, "c1": 0.25, "theta0": 1.0})
    c0, c1 = float(p["c0"]), float(p["c1"])
    m = circle()
    signs = (1.0, -1.0)

    def f_eval(x: Point) -> float:
        return -float(x.coords[0])

    def f_grad(x: Point) -> np.ndarray:
        return np.array([-1.0, 0.0])

    f = TestFunction(f_eval, f_grad, smoothness="C4", chart=lambda t: -np.cos(t), name="f")

    def frame(coords: np.ndarray) -> np.ndarray:
        return np.array([-coords[1], coords[0]])

    def amplitude(coords: np.ndarray) -> float:
        return c0 + c1 * coords[0]

    def f_tilde_fn(x: Point, i: int) -> np.ndarray:
        c = x.coords
        return (c[1] + signs[i] * amplitude(c)) * frame(c)

    def f_tilde_jac(x: Point, i: int, v: np.ndarray) -> np.ndarray:
        c = x.coords
        s = c[1] + signs[i] * amplitude(c)
        ds = signs[i] * c1 * v[0] + v[1]
        return ds * frame(c) + s * np.array([-v[1], v[0]])

    def grad_jac(x: Point, v: np.ndarray) -> np.ndarray:
        c = x.coords
        return v[1] * frame(c) + c[1] * np.array([-v[1], v[0]])

    chart = CircleChart(
        grad=np.sin,
        grad_prime=np.cos,
        f_tilde=lambda t, i: np.sin(t) + signs[i] * (c0 + c1 * np.cos(t)),
        theta0=float(p["theta0"]),
        affine_noise=(
            np.array([c0, -c0]),
            np.array([c1, -c1]),
        ),
    )
    theta0 = float(p["theta0"])
    start = Point(m, np.array([math.cos(theta0), math.sin(theta0)]))
    gs = {
        "sin": TestFunction(
            lambda x: float(x.coords[1]),
            lambda x: np.array([0.0, 1.0]),
            chart=np.sin,
            chart_code=0,
            name="sin",
        ),
        "cos": TestFunction(
            lambda x: float(x.coords[0]),
            lambda x: np.array([1.0, 0.0]),
            chart=np.cos,
            chart_code=1,
            name="cos",
        ),
    }
    return StochasticObjective(
        manifold=m,
        f=f,
        space=FiniteSampleSpace(("plus", "minus"), np.array([0.5, 0.5])),
        f_tilde_fn=f_tilde_fn,
        euclidean_grad_f_fn=f_grad,
        f_tilde_jacobian_fn=f_tilde_jac,
        grad_f_jacobian_fn=grad_jac,
        chart=chart,
        name="CircleTestbed",
        default_start=start,
        test_functions=gs,
    )


# ---------------------------------------------------------------------------
# Rayleigh-quotient / PCA family
# ---------------------------------------------------------------------------


def _gaussian_samples(d: int, m: int, cov_diag, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    lam = np.asarray(cov_diag, dtype=float)
    if lam.shape != (d,) or np.any(lam <= 0):
        raise InvalidArgumentError("cov_diag must list one positive value per dim")
    return rng.standard_normal((m, d)) * np.sqrt(lam)


def _sphere_rayleigh(spec: ProblemSpec) -> StochasticObjective:
    p = _params_with_defaults(
        spec, {"d": 3, "m": 8, "seed": 7, "cov_diag": None, "weights": None}
    )
    d, n_atoms = int(p["d"]), int(p["m"])
    if d < 2:
        raise InvalidArgumentError("SphereRayleigh needs d >= 2")
    cov = p["cov_diag"] if p["cov_diag"] is not None else 2.0 / (1.0 + np.arange(d))
    data = _gaussian_samples(d, n_atoms, cov, int(p["seed"]))
    a_mat = data.T @ data / n_atoms
    m = sphere(d - 1)

    f = TestFunction(
        lambda x: -0.5 * float(x.coords @ a_mat @ x.coords),
        lambda x: -(a_mat @ x.coords),
        name="rayleigh",
    )

    def f_tilde_fn(x: Point, i: int) -> np.ndarray:
        c = x.coords
        s = float(data[i] @ c)
        return -s * data[i] + (s * s) * c

    def f_tilde_jac(x: Point, i: int, v: np.ndarray) -> np.ndarray:
        c = x.coords
        z = data[i]
        s, sv = float(z @ c), float(z @ v)
        return -sv * z + 2.0 * s * sv * c + (s * s) * v

    def grad_jac(x: Point, v: np.ndarray) -> np.ndarray:
        c = x.coords
        return -(a_mat @ v) + 2.0 * float(c @ a_mat @ v) * c + float(c @ a_mat @ c) * v

    def f_tilde_batch(xs: np.ndarray, atoms: np.ndarray) -> np.ndarray:
        z = data[atoms]
        s = np.sum(z * xs, axis=1, keepdims=True)
        return -s * z + (s * s) * xs

    weights = (
        np.asarray(p["weights"], dtype=float)
        if p["weights"] is not None
        else np.full(n_atoms, 1.0 / n_atoms)
    )
    start = Point(m, np.ones(d) / math.sqrt(d))
    gs = {
        "coord0": TestFunction(
            lambda x: float(x.coords[0]),
            lambda x: np.eye(d)[0],
            evaluate_batch=lambda xs: xs[:, 0],
            name="coord0",
        )
    }
    obj = StochasticObjective(
        manifold=m,
        f=f,
        space=FiniteSampleSpace(tuple(range(n_atoms)), weights),
        f_tilde_fn=f_tilde_fn,
        euclidean_grad_f_fn=lambda x: -(a_mat @ x.coords),
        f_tilde_jacobian_fn=f_tilde_jac,
        grad_f_jacobian_fn=grad_jac,
        batch=BatchHooks(f_tilde=f_tilde_batch),
        name="SphereRayleigh",
        default_start=start,
        test_functions=gs,
    )
    obj.second_moment = a_mat
    obj.data = data
    return obj


def _pca_stiefel(spec: ProblemSpec) -> StochasticObjective:
    p = _params_with_defaults(
        spec, {"n": 8, "r": 2, "m": 16, "seed": 11, "cov_diag": None}
    )
    n, r, n_atoms = int(p["n"]), int(p["r"]), int(p["m"])
    if not 1 <= r <= n:
        raise InvalidArgumentError("PcaStiefel needs 1 <= r <= n")
    if p["cov_diag"] is not None:
        cov = p["cov_diag"]
    else:
        cov = np.concatenate([[2.0, 1.2][:min(2, r + 1)], np.full(n - min(2, r + 1), 0.05)])
    data = _gaussian_samples(n, n_atoms, cov, int(p["seed"]))
    a_mat = data.T @ data / n_atoms
    m = stiefel(n, r)
    impl = implementation_for(m)

    def proj_field(b: np.ndarray, c_mat: np.ndarray) -> np.ndarray:
        cb = c_mat @ b
        btcb = b.T @ cb
        return b @ (0.5 * (btcb - btcb.T)) + cb - b @ (b.T @ cb)

    def dproj_field(b: np.ndarray, u: np.ndarray, c_mat: np.ndarray) -> np.ndarray:
        cb, cu = c_mat @ b, c_mat @ u
        btcb = b.T @ cb
        mixed = u.T @ cb + b.T @ cu
        return (
            u @ (0.5 * (btcb - btcb.T))
            + b @ (0.5 * (mixed - mixed.T))
            - (u @ (b.T @ cb) + b @ (u.T @ cb))
            + cu
            - b @ (b.T @ cu)
        )

    f = TestFunction(
        lambda x: -0.5 * float(np.trace(x.matrix().T @ a_mat @ x.matrix())),
        lambda x: -(a_mat @ x.matrix()).reshape(-1),
        name="pca",
    )

    def f_tilde_fn(x: Point, i: int) -> np.ndarray:
        z = data[i]
        b = x.matrix()
        return proj_field(b, -np.outer(z, z)).reshape(-1)

    def f_tilde_jac(x: Point, i: int, v: np.ndarray) -> np.ndarray:
        z = data[i]
        b, u = x.matrix(), v.reshape(n, r)
        return dproj_field(b, u, -np.outer(z, z)).reshape(-1)

    def grad_jac(x: Point, v: np.ndarray) -> np.ndarray:
        b, u = x.matrix(), v.reshape(n, r)
        return dproj_field(b, u, -a_mat).reshape(-1)

    rng = np.random.default_rng(int(p["seed"]) + 1)
    start = Point(m, impl.random_point(rng))
    gs = {
        "entry00": TestFunction(
            lambda x: float(x.matrix()[0, 0]),
            lambda x: np.eye(n * r)[0],
            name="entry00",
        )
    }
    obj = StochasticObjective(
        manifold=m,
        f=f,
        space=FiniteSampleSpace(tuple(range(n_atoms)), np.full(n_atoms, 1.0 / n_atoms)),
        f_tilde_fn=f_tilde_fn,
        euclidean_grad_f_fn=lambda x: -(a_mat @ x.matrix()).reshape(-1),
        f_tilde_jacobian_fn=f_tilde_jac,
        grad_f_jacobian_fn=grad_jac,
        name="PcaStiefel",
        default_start=start,
        test_functions=gs,
    )
    obj.second_moment = a_mat
    obj.data = data
    return obj


def pca_optimum(obj: StochasticObjective) -> tuple[Point, float]:
    """Eigenvector frame of the empirical second moment and its loss value."""
    a_mat = getattr(obj, "second_moment", None)
    if a_mat is None:
        raise InvalidArgumentError("pca_optimum expects a PCA-family objective")
    lam, vecs = np.linalg.eigh(a_mat)
    order = np.argsort(lam)[::-1]
    if obj.manifold.kind is ManifoldKind.STIEFEL:
        _, r = obj.manifold.params
        frame = vecs[:, order[:r]]
        value = -0.5 * float(np.sum(lam[order[:r]]))
        return Point(obj.manifold, frame.reshape(-1)), value
    top = vecs[:, order[0]]
    return Point(obj.manifold, top), -0.5 * float(lam[order[0]])


# ---------------------------------------------------------------------------
# weight-normalized one-hidden-layer network
# ---------------------------------------------------------------------------


def network_response(w1, b1, w2, b2, x) -> np.ndarray:
    """Response of the one-hidden-layer ReLU network (rows of x are inputs)."""
    pre = x @ np.asarray(w1).T + np.asarray(b1)
    return np.maximum(pre, 0.0) @ np.asarray(w2) + float(b2)


def normalize_weights(w1, b1, w2, b2):
    """Rewrite a configuration to unit first-layer rows, same response."""
    w1 = np.asarray(w1, dtype=float)
    scales = np.linalg.norm(w1, axis=1)
    if np.any(scales <= 0):
        raise InvalidArgumentError("first-layer rows must be nonzero")
    return (
        w1 / scales[:, None],
        np.asarray(b1, dtype=float) / scales,
        np.asarray(w2, dtype=float) * scales,
        float(b2),
    )


def _weight_norm(spec: ProblemSpec) -> StochasticObjective:
    p = _params_with_defaults(
        spec, {"d0": 3, "d1": 4, "n_data": 16, "seed": 3, "noise": 0.05}
    )
    d0, d1, n_data = int(p["d0"]), int(p["d1"]), int(p["n_data"])
    m = product_sphere_euclid(d0, d1)
    impl = implementation_for(m)
    rng = np.random.default_rng(int(p["seed"]))

    teacher_w1 = rng.standard_normal((d1, d0))
    teacher_w1 /= np.linalg.norm(teacher_w1, axis=1, keepdims=True)
    teacher = (teacher_w1, rng.standard_normal(d1), rng.standard_normal(d1), 0.3)
    xs = rng.standard_normal((n_data, d0))
    ys = network_response(*teacher, xs) + float(p["noise"]) * rng.standard_normal(n_data)

    def unpack(coords: np.ndarray):
        w1 = coords[: d0 * d1].reshape(d1, d0)
        tail = coords[d0 * d1 :]
        return w1, tail[:d1], tail[d1 : 2 * d1], float(tail[2 * d1])

    def pack(w1, b1, w2, b2) -> np.ndarray:
        return np.concatenate([np.reshape(w1, -1), b1, w2, [b2]])

    def sample_euclid_grad(coords: np.ndarray, k: int) -> np.ndarray:
        w1, b1, w2, b2 = unpack(coords)
        a = xs[k] @ w1.T + b1
        act = np.maximum(a, 0.0)
        resid = float(act @ w2 + b2 - ys[k])
        dact = (a > 0).astype(float)
        dw2 = resid * act
        db2 = resid
        db1 = resid * w2 * dact
        dw1 = db1[:, None] * xs[k][None, :]
        return pack(dw1, db1, dw2, db2)

    def f_eval(x: Point) -> float:
        w1, b1, w2, b2 = unpack(x.coords)
        r = network_response(w1, b1, w2, b2, xs) - ys
        return 0.5 * float(np.mean(r * r))

    def f_euclid_grad(x: Point) -> np.ndarray:
        acc = np.zeros(m.ambient_dim)
        for k in range(n_data):
            acc += sample_euclid_grad(x.coords, k)
        return acc / n_data

    def f_tilde_fn(x: Point, k: int) -> np.ndarray:
        return impl.tangent_project(x.coords, sample_euclid_grad(x.coords, k))

    start = Point(m, impl.random_point(np.random.default_rng(int(p["seed"]) + 1)))
    gs = {
        "bias": TestFunction(
            lambda x: float(x.coords[-1]),
            lambda x: np.eye(m.ambient_dim)[-1],
            name="bias",
        )
    }
    obj = StochasticObjective(
        manifold=m,
        f=TestFunction(f_eval, f_euclid_grad, smoothness="C0", name="halfmse"),
        space=FiniteSampleSpace(tuple(range(n_data)), np.full(n_data, 1.0 / n_data)),
        f_tilde_fn=f_tilde_fn,
        euclidean_grad_f_fn=f_euclid_grad,
        name="WeightNorm",
        default_start=start,
        test_functions=gs,
    )
    obj.unpack = unpack
    obj.pack = pack
    obj.data = (xs, ys)
    return obj


# ---------------------------------------------------------------------------
# hyperbolic Frechet mean
# ---------------------------------------------------------------------------


def _hyperbolic_log(impl, x: np.ndarray, p: np.ndarray) -> np.ndarray:
    alpha = -impl._mink(x, p)
    if alpha <= 1.0 + 1e-14:
        return np.zeros_like(x)
    dist = math.acosh(alpha)
    w = p - alpha * x
    return dist * w / math.sqrt(alpha * alpha - 1.0)


def _hyperbolic_mean(spec: ProblemSpec) -> StochasticObjective:
    p = _params_with_defaults(spec, {"d": 2, "m": 8, "seed": 5, "spread": 0.8})
    d, n_atoms = int(p["d"]), int(p["m"])
    m = hyperboloid(d)
    impl = implementation_for(m)
    rng = np.random.default_rng(int(p["seed"]))
    base = np.zeros(d + 1)
    base[0] = 1.0
    anchors = []
    for _ in range(n_atoms):
        v = impl.random_tangent(base, rng) * float(p["spread"])
        anchors.append(impl.exp(base, v))
    anchors = np.array(anchors)

    def f_eval(x: Point) -> float:
        return 0.5 * float(
            np.mean([impl.distance(x.coords, a) ** 2 for a in anchors])
        )

    def grad_fn(x: Point) -> np.ndarray:
        acc = np.zeros(d + 1)
        for a in anchors:
            acc -= _hyperbolic_log(impl, x.coords, a)
        return acc / n_atoms

    def f_tilde_fn(x: Point, i: int) -> np.ndarray:
        return -_hyperbolic_log(impl, x.coords, anchors[i])

    start = Point(m, impl.exp(base, impl.random_tangent(base, rng) * 0.3))
    gs = {
        "height": TestFunction(
            lambda x: float(x.coords[0]),
            lambda x: np.eye(d + 1)[0],
            name="height",
        )
    }
    obj = StochasticObjective(
        manifold=m,
        f=TestFunction(f_eval, None, name="frechet"),
        space=FiniteSampleSpace(tuple(range(n_atoms)), np.full(n_atoms, 1.0 / n_atoms)),
        f_tilde_fn=f_tilde_fn,
        grad_f_fn=grad_fn,
        name="HyperbolicMean",
        default_start=start,
        test_functions=gs,
    )
    obj.anchors = anchors
    return obj


# ---------------------------------------------------------------------------
# Fisher half-plane KL objective
# ---------------------------------------------------------------------------


def _fisher_kl(spec: ProblemSpec) -> StochasticObjective:
    p = _params_with_defaults(
        spec, {"mu_star": 0.0, "sigma_star": 1.0, "c0": 0.4}
    )
    mu_s, sg_s, c0 = float(p["mu_star"]), float(p["sigma_star"]), float(p["c0"])
    if sg_s <= 0:
        raise InvalidArgumentError("sigma_star must be positive")
    m = fisher_half_plane()

    def f_eval(x: Point) -> float:
        mu, sg = x.coords
        return (
            math.log(sg_s / sg) + (sg * sg + (mu - mu_s) ** 2) / (2 * sg_s * sg_s) - 0.5
        )

    def df(x: Point) -> np.ndarray:
        mu, sg = x.coords
        return np.array([(mu - mu_s) / sg_s**2, -1.0 / sg + sg / sg_s**2])

    def grad_fn(x: Point) -> np.ndarray:
        mu, sg = x.coords
        d = df(x)
        return np.array([d[0] * sg * sg, 0.5 * d[1] * sg * sg])

    def grad_dir(x: Point, v: np.ndarray) -> np.ndarray:
        mu, sg = x.coords
        dmu = np.array([sg * sg / sg_s**2, 0.0])
        dsg = np.array(
            [2.0 * sg * (mu - mu_s) / sg_s**2, 1.5 * sg * sg / sg_s**2 - 0.5]
        )
        return v[0] * dmu + v[1] * dsg

    signs = (1.0, -1.0)

    def f_tilde_fn(x: Point, i: int) -> np.ndarray:
        sg = x.coords[1]
        return grad_fn(x) + signs[i] * np.array([c0 * sg, 0.0])

    def f_tilde_jac(x: Point, i: int, v: np.ndarray) -> np.ndarray:
        return grad_dir(x, v) + signs[i] * np.array([c0 * v[1], 0.0])

    start = Point(m, np.array([0.8, 1.6]))
    gs = {
        "mu": TestFunction(
            lambda x: float(x.coords[0]), lambda x: np.array([1.0, 0.0]), name="mu"
        )
    }
    return StochasticObjective(
        manifold=m,
        f=TestFunction(f_eval, df, name="kl"),
        space=FiniteSampleSpace(("plus", "minus"), np.array([0.5, 0.5])),
        f_tilde_fn=f_tilde_fn,
        euclidean_grad_f_fn=df,
        f_tilde_jacobian_fn=f_tilde_jac,
        grad_f_jacobian_fn=grad_dir,
        name="FisherKL",
        default_start=start,
        test_functions=gs,
    )


_BUILDERS = {
    "CircleTestbed": _circle_testbed,
    "SphereRayleigh": _sphere_rayleigh,
    "PcaStiefel": _pca_stiefel,
    "WeightNorm": _weight_norm,
    "HyperbolicMean": _hyperbolic_mean,
    "FisherKL": _fisher_kl,
}

PARAMETER_SCHEMAS = {
    "CircleTestbed": {"c0": 0.5, "c1": 0.25, "theta0": 1.0},
    "SphereRayleigh": {"d": 3, "m": 8, "seed": 7, "cov_diag": None, "weights": None},
    "PcaStiefel": {"n": 8, "r": 2, "m": 16, "seed": 11, "cov_diag": None},
    "WeightNorm": {"d0": 3, "d1": 4, "n_data": 16, "seed": 3, "noise": 0.05},
    "HyperbolicMean": {"d": 2, "m": 8, "seed": 5, "spread": 0.8},
    "FisherKL": {"mu_star": 0.0, "sigma_star": 1.0, "c0": 0.4},
}


def make_problem(spec: ProblemSpec) -> StochasticObjective:
    """Instantiate a named problem; unbiasedness and tangency hold for all."""
    return _BUILDERS[spec.name](spec)


def default_test_function(obj: StochasticObjective, name: str | None = None) -> TestFunction:
    if not obj.test_functions:
        raise InvalidArgumentError(f"{obj.name} ships no test functions")
    if name is None:
        return next(iter(obj.test_functions.values()))
    try:
        return obj.test_functions[name]
    except KeyError as exc:
        raise InvalidArgumentError(
            f"{obj.name} has no test function {name!r}; "
            f"available: {sorted(obj.test_functions)}"
        ) from exc
