# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels.

Same contracts as :mod:`maniflow.kernels._pure`: the affine-noise circle
enumeration (depth-first with an explicit stack, Kahan-compensated leaf
accumulation) and the periodic fourth-order PDE stepper.
"""

from libc.math cimport atan, copysign, cos, fabs, sin, tanh

import numpy as np

BACKEND_NAME = "compiled"

cdef double CLAMP_A = 0.25
cdef double CLAMP_B = 0.475


cdef inline double _soft_clamp(double s) nogil:
    cdef double mag = fabs(s)
    cdef double span = CLAMP_B - CLAMP_A
    if mag <= CLAMP_A:
        return s
    return copysign(CLAMP_A + span * tanh((mag - CLAMP_A) / span), s)


cdef inline double _chart_offset(double s, int scheme) nogil:
    if scheme == 0:
        return s
    elif scheme == 1:
        return atan(_soft_clamp(s))
    return 2.0 * atan(0.5 * s)


def circle_enumeration(double theta0, double eta, int n_steps,
                       const double[::1] weights, const double[::1] p_coef,
                       const double[::1] q_coef, int scheme, int g_code):
    """Exact E[g(Z_n)] for the affine-noise circle family (see _pure)."""
    cdef Py_ssize_t m = weights.shape[0]
    cdef Py_ssize_t cap = <Py_ssize_t> n_steps * (m - 1) + m + 2
    buf_theta = np.empty(cap, dtype=np.float64)
    buf_prob = np.empty(cap, dtype=np.float64)
    buf_depth = np.empty(cap, dtype=np.int64)
    cdef double[::1] st = buf_theta
    cdef double[::1] sp = buf_prob
    cdef long long[::1] sd = buf_depth
    cdef Py_ssize_t top = 1
    cdef Py_ssize_t i
    cdef long long depth
    cdef double total = 0.0, comp = 0.0, term, bumped
    cdef double theta, prob, s, leaf
    st[0] = theta0
    sp[0] = 1.0
    sd[0] = 0
    with nogil:
        while top > 0:
            top -= 1
            theta = st[top]
            prob = sp[top]
            depth = sd[top]
            if depth == n_steps:
                leaf = sin(theta) if g_code == 0 else cos(theta)
                term = prob * leaf - comp
                bumped = total + term
                comp = (bumped - total) - term
                total = bumped
                continue
            for i in range(m):
                s = -eta * (sin(theta) + p_coef[i] + q_coef[i] * cos(theta))
                st[top] = theta + _chart_offset(s, scheme)
                sp[top] = prob * weights[i]
                sd[top] = depth + 1
                top += 1
    return total


cdef void _rhs(const double[::1] u, const double[::1] b, const double[::1] half_a,
               double inv12h, double inv12h2, double[::1] out) nogil:
    cdef Py_ssize_t n = u.shape[0]
    cdef Py_ssize_t i, ip1, ip2, im1, im2
    cdef double du, d2u
    for i in range(n):
        ip1 = i + 1
        if ip1 >= n:
            ip1 -= n
        ip2 = i + 2
        if ip2 >= n:
            ip2 -= n
        im1 = i - 1
        if im1 < 0:
            im1 += n
        im2 = i - 2
        if im2 < 0:
            im2 += n
        du = (8.0 * (u[ip1] - u[im1]) - (u[ip2] - u[im2])) * inv12h
        d2u = (-30.0 * u[i] + 16.0 * (u[ip1] + u[im1]) - (u[ip2] + u[im2])) * inv12h2
        out[i] = b[i] * du + half_a[i] * d2u


def pde_rk4(u0, b, a, double dtheta, double dt, n_steps):
    """March u_t = b u' + (a/2) u'' with RK4 (see _pure for the layout)."""
    u_arr = np.array(u0, dtype=np.float64, copy=True)
    b_arr = np.ascontiguousarray(b, dtype=np.float64)
    half_a_arr = 0.5 * np.ascontiguousarray(a, dtype=np.float64)
    cdef Py_ssize_t n = u_arr.shape[0]
    k1_arr = np.empty(n)
    k2_arr = np.empty(n)
    k3_arr = np.empty(n)
    k4_arr = np.empty(n)
    tmp_arr = np.empty(n)
    cdef double[::1] u = u_arr
    cdef const double[::1] bb = b_arr
    cdef const double[::1] ha = half_a_arr
    cdef double[::1] k1 = k1_arr
    cdef double[::1] k2 = k2_arr
    cdef double[::1] k3 = k3_arr
    cdef double[::1] k4 = k4_arr
    cdef double[::1] tmp = tmp_arr
    cdef double inv12h = 1.0 / (12.0 * dtheta)
    cdef double inv12h2 = 1.0 / (12.0 * dtheta * dtheta)
    cdef double sixth = dt / 6.0
    cdef double half_dt = 0.5 * dt
    cdef long long steps = <long long> n_steps
    cdef long long k
    cdef Py_ssize_t i
    with nogil:
        for k in range(steps):
            _rhs(u, bb, ha, inv12h, inv12h2, k1)
            for i in range(n):
                tmp[i] = u[i] + half_dt * k1[i]
            _rhs(tmp, bb, ha, inv12h, inv12h2, k2)
            for i in range(n):
                tmp[i] = u[i] + half_dt * k2[i]
            _rhs(tmp, bb, ha, inv12h, inv12h2, k3)
            for i in range(n):
                tmp[i] = u[i] + dt * k3[i]
            _rhs(tmp, bb, ha, inv12h, inv12h2, k4)
            for i in range(n):
                u[i] = u[i] + sixth * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
    return u_arr
