"""Compiled inner loops for mean-field time integration.

A single Dormand-Prince 5(4) stepper serves both the two-sublattice (6-dim)
and full-lattice (3N-dim) equations of motion; the right-hand side is selected
by an integer code so every kernel stays cacheable.  The propagated solution
is 5th order, the embedded 4th-order solution supplies the error estimate,
and the last stage is reused as the first stage of the next step (FSAL).

Steps are clamped to land exactly on requested sample times, so sampled states
carry no interpolation error.  Status codes: 0 = reached t_final, 1 = stopped
early at a steady state (remaining samples frozen), 2 = step-size underflow,
3 = step budget exhausted.
"""

import numpy as np
from numba import njit

KIND_BIPARTITE = 0
KIND_LATTICE = 1

STATUS_DONE = 0
STATUS_STEADY = 1
STATUS_UNDERFLOW = 2
STATUS_MAXSTEPS = 3

# Dormand-Prince coefficients (same pair as scipy's RK45)
_C2, _C3, _C4, _C5 = 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0
_A21 = 1.0 / 5.0
_A31, _A32 = 3.0 / 40.0, 9.0 / 40.0
_A41, _A42, _A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
_A51, _A52, _A53, _A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
_A61, _A62, _A63, _A64, _A65 = (
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
)
_B1, _B3, _B4, _B5, _B6 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
_E1, _E3, _E4, _E5, _E6, _E7 = (
    71.0 / 57600.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
)


@njit(cache=True)
def mf_rhs_kernel(kind, y, p, v1m, v2m, out):
    """Mean-field equations of motion.

    kind 0 (bipartite): y = (SxA, SyA, SzA, SxB, SyB, SzB),
        p = (omega, delta, gamma_s, gamma_m, n_sites, v1, v2, coordination).
    kind 1 (lattice): y = (Sx_0..Sx_{N-1}, Sy_..., Sz_...),
        p = (omega, delta, gamma_s, gamma_m), v1m/v2m the N x N couplings;
        the collective decay is all-to-all with constant gamma_m.
    """
    omega, delta, gs, gm = p[0], p[1], p[2], p[3]
    if kind == KIND_BIPARTITE:
        n, v1, v2, coord = p[4], p[5], p[6], p[7]
        ax, ay, az = y[0], y[1], y[2]
        bx, by, bz = y[3], y[4], y[5]
        sva = coord * (v1 * (1.0 - 2.0 * az) - v2 * (1.0 + 2.0 * az)) * 0.25
        svb = coord * (v1 * (1.0 - 2.0 * bz) - v2 * (1.0 + 2.0 * bz)) * 0.25
        cxa = (n - 2.0) * ax / n + bx
        cya = (n - 2.0) * ay / n + by
        cxb = (n - 2.0) * bx / n + ax
        cyb = (n - 2.0) * by / n + ay
        dab = ax * bx + ay * by
        out[0] = -0.5 * gs * ax + (delta + svb) * ay + 0.5 * n * gm * cxa * az
        out[1] = -(delta + svb) * ax - 0.5 * gs * ay + (0.5 * n * gm * cya - omega) * az
        out[2] = (
            omega * ay
            - 0.5 * gs * (1.0 + 2.0 * az)
            - 0.5 * (n - 2.0) * gm * (ax * ax + ay * ay)
            - 0.5 * n * gm * dab
        )
        out[3] = -0.5 * gs * bx + (delta + sva) * by + 0.5 * n * gm * cxb * bz
        out[4] = -(delta + sva) * bx - 0.5 * gs * by + (0.5 * n * gm * cyb - omega) * bz
        out[5] = (
            omega * by
            - 0.5 * gs * (1.0 + 2.0 * bz)
            - 0.5 * (n - 2.0) * gm * (bx * bx + by * by)
            - 0.5 * n * gm * dab
        )
    else:
        n = v1m.shape[0]
        sx = y[0:n]
        sy = y[n : 2 * n]
        sz = y[2 * n : 3 * n]
        tx = sx.sum()
        ty = sy.sum()
        one_m = 1.0 - 2.0 * sz
        one_p = 1.0 + 2.0 * sz
        for j in range(n):
            u = 0.0
            for k in range(n):
                u += v1m[j, k] * one_m[k] - v2m[j, k] * one_p[k]
            u *= 0.25
            ox = tx - sx[j]
            oy = ty - sy[j]
            out[j] = -0.5 * gs * sx[j] + delta * sy[j] + sy[j] * u + gm * sz[j] * ox
            out[n + j] = (
                -0.5 * gs * sy[j] - delta * sx[j] - omega * sz[j] - sx[j] * u + gm * sz[j] * oy
            )
            out[2 * n + j] = (
                -0.5 * gs * (1.0 + 2.0 * sz[j])
                + omega * sy[j]
                - gm * (sx[j] * ox + sy[j] * oy)
            )
    return out


@njit(cache=True)
def _err_norm(e, y0, y1, rtol, atol):
    acc = 0.0
    for i in range(e.size):
        sc = atol + rtol * max(abs(y0[i]), abs(y1[i]))
        q = e[i] / sc
        acc += q * q
    return np.sqrt(acc / e.size)


@njit(cache=True)
def dp54_integrate(kind, y0, t0, t1, p, v1m, v2m, t_eval, rtol, atol, steady_tol, max_steps):
    """Adaptive DP54 integration sampling the solution at t_eval.

    Returns (status, ys, n_filled, t_reached, n_steps).  ys[i] is the state at
    t_eval[i] for i < n_filled.  If steady_tol > 0 and the RHS max-norm drops
    below it, the remaining samples are frozen at the steady state.
    """
    ndim = y0.size
    nsamp = t_eval.size
    ys = np.zeros((nsamp, ndim))
    y = y0.copy()
    t = t0
    isamp = 0
    while isamp < nsamp and t_eval[isamp] <= t0:
        ys[isamp] = y
        isamp += 1

    k1 = np.empty(ndim)
    k2 = np.empty(ndim)
    k3 = np.empty(ndim)
    k4 = np.empty(ndim)
    k5 = np.empty(ndim)
    k6 = np.empty(ndim)
    k7 = np.empty(ndim)
    ytmp = np.empty(ndim)
    ynew = np.empty(ndim)
    err = np.empty(ndim)

    mf_rhs_kernel(kind, y, p, v1m, v2m, k1)

    # initial step from the RHS magnitude
    fmax = 0.0
    ymax = 0.0
    for i in range(ndim):
        fmax = max(fmax, abs(k1[i]))
        ymax = max(ymax, abs(y[i]))
    h = 1e-3 * (t1 - t0)
    if fmax > 0.0:
        h = min(h, 0.01 * (ymax + 1.0) / fmax)
    if h <= 0.0:
        h = 1e-6

    n_steps = 0
    while t < t1:
        if n_steps >= max_steps:
            return STATUS_MAXSTEPS, ys, isamp, t, n_steps
        if h < 1e-14 * max(1.0, abs(t)):
            return STATUS_UNDERFLOW, ys, isamp, t, n_steps
        # land exactly on the next sample time and on t1
        t_target = t1
        if isamp < nsamp and t_eval[isamp] < t_target:
            t_target = t_eval[isamp]
        if t + h >= t_target:
            h_use = t_target - t
        else:
            h_use = h

        for i in range(ndim):
            ytmp[i] = y[i] + h_use * _A21 * k1[i]
        mf_rhs_kernel(kind, ytmp, p, v1m, v2m, k2)
        for i in range(ndim):
            ytmp[i] = y[i] + h_use * (_A31 * k1[i] + _A32 * k2[i])
        mf_rhs_kernel(kind, ytmp, p, v1m, v2m, k3)
        for i in range(ndim):
            ytmp[i] = y[i] + h_use * (_A41 * k1[i] + _A42 * k2[i] + _A43 * k3[i])
        mf_rhs_kernel(kind, ytmp, p, v1m, v2m, k4)
        for i in range(ndim):
            ytmp[i] = y[i] + h_use * (_A51 * k1[i] + _A52 * k2[i] + _A53 * k3[i] + _A54 * k4[i])
        mf_rhs_kernel(kind, ytmp, p, v1m, v2m, k5)
        for i in range(ndim):
            ytmp[i] = y[i] + h_use * (
                _A61 * k1[i] + _A62 * k2[i] + _A63 * k3[i] + _A64 * k4[i] + _A65 * k5[i]
            )
        mf_rhs_kernel(kind, ytmp, p, v1m, v2m, k6)
        for i in range(ndim):
            ynew[i] = y[i] + h_use * (
                _B1 * k1[i] + _B3 * k3[i] + _B4 * k4[i] + _B5 * k5[i] + _B6 * k6[i]
            )
        mf_rhs_kernel(kind, ynew, p, v1m, v2m, k7)
        for i in range(ndim):
            err[i] = h_use * (
                _E1 * k1[i] + _E3 * k3[i] + _E4 * k4[i] + _E5 * k5[i] + _E6 * k6[i] + _E7 * k7[i]
            )
        enorm = _err_norm(err, y, ynew, rtol, atol)
        n_steps += 1

        if enorm <= 1.0:
            t = t + h_use
            for i in range(ndim):
                y[i] = ynew[i]
                k1[i] = k7[i]
            while isamp < nsamp and t_eval[isamp] <= t:
                ys[isamp] = y
                isamp += 1
            if steady_tol > 0.0:
                fmax = 0.0
                for i in range(ndim):
                    fmax = max(fmax, abs(k1[i]))
                if fmax < steady_tol:
                    while isamp < nsamp:
                        ys[isamp] = y
                        isamp += 1
                    return STATUS_STEADY, ys, isamp, t, n_steps
            if enorm == 0.0:
                fac = 10.0
            else:
                fac = min(10.0, max(0.2, 0.9 * enorm ** (-0.2)))
            h = h_use * fac
        else:
            h = h_use * max(0.2, 0.9 * enorm ** (-0.2))

    return STATUS_DONE, ys, isamp, t, n_steps
