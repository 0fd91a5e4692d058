"""Compiled kernels: conformal metric terms and the geodesic integrator.

The geodesic equation of ``lam(z) |dz|^2`` in the chart is

    z'' + Gamma(z) z'^2 = 0,    Gamma = d/dz log lam,

and its linearisation (Jacobi field ``J = dz/da`` along a one-parameter
family) is

    J'' = -(Gamma_z J + Gamma_zbar conj(J)) z'^2 - 2 Gamma z' J'.

With ``f = phi'`` and ``<a, b> = conj(a)^T H b``:

    lam = <f, f>,  Gamma = <f, f'>/lam,
    Gamma_z = <f, f''>/lam - Gamma^2,
    Gamma_zbar = (<f', f'> lam - |<f, f'>|^2) / lam^2   (real, = -K lam / 2).
"""

from __future__ import annotations

import numpy as np
from numba import njit
from scipy.integrate._ivp import dop853_coefficients as _dop

N_STAGES = _dop.N_STAGES
_A = np.ascontiguousarray(_dop.A[:N_STAGES, :N_STAGES])
_B = np.ascontiguousarray(_dop.B)
_C = np.ascontiguousarray(_dop.C[:N_STAGES])
_E3 = np.ascontiguousarray(_dop.E3)
_E5 = np.ascontiguousarray(_dop.E5)

# integrator exit codes
REACHED_T = 0
ORIGIN_EVENT = 1
BOUNDARY_EVENT = 2
STEP_FAILURE = 3


@njit(cache=True)
def horner(c, z):
    acc = 0j
    for k in range(c.shape[0] - 1, -1, -1):
        acc = acc * z + c[k]
    return acc


@njit(cache=True)
def metric_terms(C1, C2, C3, G, z):
    """Return (lam, Gamma, Gamma_z, Gamma_zbar) at a chart point z != 0.

    ``G`` whitens the Hermitian form (H = G^* G), so inner products become
    plain ones and the Gram determinant lam |f'|^2 - |<f, f'>|^2 is summed by
    the Lagrange identity without cancellation.
    """
    n = C1.shape[0]
    p = np.empty(n, np.complex128)
    p1 = np.empty(n, np.complex128)
    p2 = np.empty(n, np.complex128)
    for j in range(n):
        p[j] = horner(C1[j], z)
        p1[j] = horner(C2[j], z)
        p2[j] = horner(C3[j], z)
    f = G @ p
    f1 = G @ p1
    f2 = G @ p2
    lam = 0.0
    a = 0j
    c = 0j
    for j in range(n):
        lam += f[j].real * f[j].real + f[j].imag * f[j].imag
        a += np.conj(f[j]) * f1[j]
        c += np.conj(f[j]) * f2[j]
    gram = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            w = f[i] * f1[j] - f[j] * f1[i]
            gram += w.real * w.real + w.imag * w.imag
    gam = a / lam
    gz = c / lam - gam * gam
    gzb = gram / (lam * lam)
    return lam, gam, gz, gzb


@njit(cache=True)
def _rhs(C1, C2, C3, G, y, out):
    lam, gam, gz, gzb = metric_terms(C1, C2, C3, G, y[0])
    v = y[1]
    v2 = v * v
    out[0] = v
    out[1] = -gam * v2
    out[2] = y[3]
    out[3] = -(gz * y[2] + gzb * np.conj(y[2])) * v2 - 2.0 * gam * v * y[3]


@njit(cache=True)
def integrate(C1, C2, C3, G, y0, T, rtol, atol, r_min, r_max, t_out,
              max_steps, record):
    """Adaptive DOP853 integration of the geodesic + Jacobi system.

    Error control acts on (z, z') only. Steps are clamped so that every time in
    the sorted array ``t_out`` is hit exactly, and so that one step never moves
    the chart point by more than 0.3 |z| (keeps the solver off the cone point).

    Returns (status, t, y, outs, n_out, traj_t, traj_y, n_traj).
    """
    y = y0.copy()
    t = 0.0
    K = np.zeros((N_STAGES + 1, 4), np.complex128)
    outs = np.zeros((t_out.shape[0], 4), np.complex128)
    cap = 256 if record else 1
    traj_t = np.empty(cap)
    traj_y = np.empty((cap, 4), np.complex128)
    n_traj = 0
    if record:
        traj_t[0] = 0.0
        traj_y[0] = y
        n_traj = 1
    n_out = 0
    while n_out < t_out.shape[0] and t_out[n_out] <= 0.0:
        outs[n_out] = y
        n_out += 1
    if T <= 0.0:
        return REACHED_T, t, y, outs, n_out, traj_t, traj_y, n_traj

    tmp = np.empty(4, np.complex128)
    ynew = np.empty(4, np.complex128)
    _rhs(C1, C2, C3, G, y, K[0])
    h = min(T, 0.01 * T + 1e-3 * abs(y[0]) / (abs(y[1]) + 1e-300))
    steps = 0
    while t < T:
        if steps >= max_steps:
            return STEP_FAILURE, t, y, outs, n_out, traj_t, traj_y, n_traj
        zabs = abs(y[0])
        vabs = abs(y[1])
        hcap = 0.3 * zabs / vabs if vabs > 0 else h
        if h > hcap:
            h = hcap
        t_target = T
        if n_out < t_out.shape[0] and t_out[n_out] < T:
            t_target = t_out[n_out]
        clamped = False
        if t + h >= t_target:
            h = t_target - t
            clamped = True
        if h <= 1e-15 * max(1.0, T):
            return STEP_FAILURE, t, y, outs, n_out, traj_t, traj_y, n_traj
        # stages
        for s in range(1, N_STAGES):
            for i in range(4):
                acc = 0j
                for j in range(s):
                    acc += _A[s, j] * K[j, i]
                tmp[i] = y[i] + h * acc
            _rhs(C1, C2, C3, G, tmp, K[s])
        for i in range(4):
            acc = 0j
            for j in range(N_STAGES):
                acc += _B[j] * K[j, i]
            ynew[i] = y[i] + h * acc
        _rhs(C1, C2, C3, G, ynew, K[N_STAGES])
        err5 = 0.0
        err3 = 0.0
        for i in range(2):
            sc = atol + rtol * max(abs(y[i]), abs(ynew[i]))
            e5 = 0j
            e3 = 0j
            for j in range(N_STAGES + 1):
                e5 += _E5[j] * K[j, i]
                e3 += _E3[j] * K[j, i]
            a5 = abs(e5) / sc
            a3 = abs(e3) / sc
            err5 += a5 * a5
            err3 += a3 * a3
        denom = err5 + 0.01 * err3
        if denom > 0:
            err = h * err5 / np.sqrt(denom * 2.0)
        else:
            err = 0.0
        if err <= 1.0:
            t = t_target if clamped else t + h
            for i in range(4):
                y[i] = ynew[i]
                K[0, i] = K[N_STAGES, i]
            steps += 1
            if record:
                if n_traj == cap:
                    cap *= 2
                    nt_ = np.empty(cap)
                    ny_ = np.empty((cap, 4), np.complex128)
                    nt_[:n_traj] = traj_t[:n_traj]
                    ny_[:n_traj] = traj_y[:n_traj]
                    traj_t = nt_
                    traj_y = ny_
                traj_t[n_traj] = t
                traj_y[n_traj] = y
                n_traj += 1
            while n_out < t_out.shape[0] and t_out[n_out] <= t:
                outs[n_out] = y
                n_out += 1
            za = abs(y[0])
            if za < r_min:
                return ORIGIN_EVENT, t, y, outs, n_out, traj_t, traj_y, n_traj
            if za > r_max:
                return BOUNDARY_EVENT, t, y, outs, n_out, traj_t, traj_y, n_traj
            fac = 10.0 if err == 0.0 else min(10.0, 0.9 * err ** (-1.0 / 8.0))
            h = h * fac
        else:
            h = h * max(0.2, 0.9 * err ** (-1.0 / 8.0))
    return REACHED_T, t, y, outs, n_out, traj_t, traj_y, n_traj
