"""Pure-python/numpy implementations of the hot kernels.

These are the fallbacks selected when the compiled extension is
unavailable (or disabled via MANIFLOW_PURE=1).  Signatures and results
match :mod:`maniflow.kernels._core` to rounding.
"""

from __future__ import annotations

import math

import numpy as np

BACKEND_NAME = "pure"

# chart offset maps per retraction: exponential, metric projection,
# stereographic (tangent half-angle)
SCHEME_EXP = 0
SCHEME_PROJ = 1
SCHEME_STEREO = 2

# circle tube radius and the soft norm clamp of the projection retraction
_CLAMP_A = 0.25
_CLAMP_B = 0.475


def _soft_clamp(s: np.ndarray) -> np.ndarray:
    mag = np.abs(s)
    span = _CLAMP_B - _CLAMP_A
    clamped = _CLAMP_A + span * np.tanh((mag - _CLAMP_A) / span)
    return np.where(mag <= _CLAMP_A, s, np.sign(s) * clamped)


def _chart_offset(s: np.ndarray, scheme: int) -> np.ndarray:
    if scheme == SCHEME_EXP:
        return s
    if scheme == SCHEME_PROJ:
        return np.arctan(_soft_clamp(s))
    if scheme == SCHEME_STEREO:
        return 2.0 * np.arctan(0.5 * s)
    raise ValueError(f"unknown chart scheme code {scheme}")


def circle_enumeration(
    theta0: float,
    eta: float,
    n_steps: int,
    weights: np.ndarray,
    p_coef: np.ndarray,
    q_coef: np.ndarray,
    scheme: int,
    g_code: int,
) -> float:
    """Exact E[g(Z_n)] for the affine-noise circle family.

    Estimator chart values are sin(t) + p_i + q_i cos(t) per atom i; g is
    sin (code 0) or cos (code 1).  Breadth-first over per-depth state
    arrays with an exactly compensated final reduction.
    """
    weights = np.asarray(weights, dtype=float)
    thetas = np.array([theta0], dtype=float)
    probs = np.array([1.0])
    for _ in range(n_steps):
        branches = []
        wbranches = []
        for i, w in enumerate(weights):
            s = -eta * (np.sin(thetas) + p_coef[i] + q_coef[i] * np.cos(thetas))
            branches.append(thetas + _chart_offset(s, scheme))
            wbranches.append(probs * w)
        thetas = np.concatenate(branches)
        probs = np.concatenate(wbranches)
    vals = np.sin(thetas) if g_code == 0 else np.cos(thetas)
    return math.fsum((probs * vals).tolist())


def pde_rk4(
    u0: np.ndarray,
    b: np.ndarray,
    a: np.ndarray,
    dtheta: float,
    dt: float,
    n_steps: int,
) -> np.ndarray:
    """March u_t = b u' + (a/2) u'' with RK4 in time.

    Fourth-order central differences on the uniform periodic grid.
    """
    n = u0.shape[0]
    idx = np.arange(n)
    ip1, im1 = (idx + 1) % n, (idx - 1) % n
    ip2, im2 = (idx + 2) % n, (idx - 2) % n
    inv12h = 1.0 / (12.0 * dtheta)
    inv12h2 = 1.0 / (12.0 * dtheta * dtheta)
    half_a = 0.5 * a

    def rhs(u):
        du = (8.0 * (u[ip1] - u[im1]) - (u[ip2] - u[im2])) * inv12h
        d2u = (-30.0 * u + 16.0 * (u[ip1] + u[im1]) - (u[ip2] + u[im2])) * inv12h2
        return b * du + half_a * d2u

    u = np.array(u0, dtype=float, copy=True)
    for _ in range(n_steps):
        k1 = rhs(u)
        k2 = rhs(u + 0.5 * dt * k1)
        k3 = rhs(u + 0.5 * dt * k2)
        k4 = rhs(u + dt * k3)
        u += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return u
