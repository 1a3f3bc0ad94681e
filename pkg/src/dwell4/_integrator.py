"""Compiled time steppers for the pendulum vector fields.

Two schemes share one driver:

* Dormand-Prince 5(4) with FSAL and a PI step-size controller (default);
* fixed-step 8th-order Runge-Kutta using the DOP853 tableau, for audits.

Steps are shortened to land exactly on the requested sample times, so no
interpolation error enters the recorded states.
"""

import math

import numpy as np
from numba import njit
from scipy.integrate._ivp import dop853_coefficients as _dop853

from .model import eom_full_kernel, eom_averaged_kernel

FULL, AVERAGED = 0, 1
COMPLETED, BOUNDARY_HIT, STEP_FAILURE = 0, 1, 2

# Dormand-Prince 5(4)
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = np.zeros((7, 7))
_A[1, :1] = [1 / 5]
_A[2, :2] = [3 / 40, 9 / 40]
_A[3, :3] = [44 / 45, -56 / 15, 32 / 9]
_A[4, :4] = [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]
_A[5, :5] = [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]
_A[6, :6] = [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]
_B = _A[6].copy()
_E = np.array(
    [71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40]
)  # b - b_hat

_A8 = np.ascontiguousarray(_dop853.A[: _dop853.N_STAGES, : _dop853.N_STAGES])
_B8 = np.ascontiguousarray(_dop853.B)
_C8 = np.ascontiguousarray(_dop853.C[: _dop853.N_STAGES])

# phases are measured absolutely in the error norm: relative error on an
# unbounded angle like theta2 is meaningless.  The norm is the max over
# components rather than RMS; with only six components the RMS lets the
# fast theta2 error run ~2.5x over tolerance, which shows up as energy drift.
_IS_PHASE = np.array([False, True, False, True, False, True])


@njit(cache=True)
def _rhs(model, y, p, out):
    if model == FULL:
        eom_full_kernel(y, p, out)
    else:
        eom_averaged_kernel(y, p, out)


@njit(cache=True)
def _margin(y):
    z0, z1, z2 = y[0], y[2], y[4]
    m = 0.5 * (1.0 + z2) - abs(z0)
    m1 = 0.5 * (1.0 - z2) - abs(z1)
    if m1 < m:
        m = m1
    m2 = 1.0 - abs(z2)
    if m2 < m:
        m = m2
    return m


@njit(cache=True)
def _finite(v):
    for i in range(v.size):
        if not math.isfinite(v[i]):
            return False
    return True


@njit(cache=True)
def integrate_dopri5(model, y0, p, sample_times, rtol, atol, max_step, h0,
                     boundary_eps, max_steps, out):
    """Adaptive DP5(4).  Returns (n_filled, status, n_steps, n_rejected, t_reached)."""
    n = y0.size
    t = sample_times[0]
    y = y0.copy()
    out[0, :] = y
    n_out = sample_times.size
    direction = 1.0
    if n_out > 1 and sample_times[-1] < sample_times[0]:
        direction = -1.0

    k = np.zeros((7, n))
    ytmp = np.empty(n)
    ynew = np.empty(n)
    err = np.empty(n)
    _rhs(model, y, p, k[0])
    if not _finite(k[0]):
        return 1, STEP_FAILURE, 0, 0, t

    h = min(abs(h0), max_step)
    err_old = 1e-4
    beta = 0.04
    expo = 0.2 - 0.75 * beta
    safe = 0.9
    n_steps = 0
    n_rej = 0
    idx = 1
    while idx < n_out:
        target = sample_times[idx]
        remaining = abs(target - t)
        last = False
        if h >= remaining:
            h_use = remaining
            last = True
        else:
            h_use = h
        hs = direction * h_use

        for s in range(1, 7):
            for i in range(n):
                acc = 0.0
                for r in range(s):
                    acc += _A[s, r] * k[r, i]
                ytmp[i] = y[i] + hs * acc
            _rhs(model, ytmp, p, k[s])
        # stage 6 is evaluated at the 5th-order solution (FSAL)
        for i in range(n):
            ynew[i] = ytmp[i]
            e = 0.0
            for r in range(7):
                e += _E[r] * k[r, i]
            err[i] = hs * e

        ok = _finite(ynew) and _finite(k[6])
        if ok:
            acc = 0.0
            for i in range(n):
                if _IS_PHASE[i]:
                    sc = atol + rtol
                else:
                    sc = atol + rtol * max(abs(y[i]), abs(ynew[i]))
                r = abs(err[i]) / sc
                if r > acc:
                    acc = r
            enorm = acc
        else:
            enorm = 1e10

        n_steps += 1
        if n_steps > max_steps:
            return idx, STEP_FAILURE, n_steps, n_rej, t

        if enorm <= 1.0 and _margin(ynew) > 0.0:
            fac = enorm ** expo / err_old ** beta if enorm > 0 else 0.0
            fac = min(5.0, max(0.2, fac / safe))
            err_old = max(enorm, 1e-4)
            t = target if last else t + hs
            for i in range(n):
                y[i] = ynew[i]
                k[0, i] = k[6, i]
            if not last:
                h = min(h_use / fac, max_step)
            if _margin(y) < boundary_eps:
                out[idx, :] = y
                return idx + 1, BOUNDARY_HIT, n_steps, n_rej, t
            if last:
                out[idx, :] = y
                idx += 1
        else:
            n_rej += 1
            if ok and enorm > 1.0:
                fac = min(5.0, max(0.2, enorm ** expo / safe))
                h = h_use / fac
            else:
                h = 0.25 * h_use
            if h < 1e-14 * max(1.0, abs(t)):
                return idx, STEP_FAILURE, n_steps, n_rej, t
    return idx, COMPLETED, n_steps, n_rej, t


@njit(cache=True)
def integrate_rk8_fixed(model, y0, p, sample_times, h, boundary_eps, out, A, B, C):
    """Fixed-step 8th-order RK (DOP853 weights); steps clipped to sample times."""
    n = y0.size
    ns = B.size
    t = sample_times[0]
    y = y0.copy()
    out[0, :] = y
    n_out = sample_times.size
    direction = 1.0
    if n_out > 1 and sample_times[-1] < sample_times[0]:
        direction = -1.0
    k = np.zeros((ns, n))
    ytmp = np.empty(n)
    n_steps = 0
    idx = 1
    while idx < n_out:
        target = sample_times[idx]
        remaining = abs(target - t)
        last = h >= remaining
        hs = direction * (remaining if last else h)
        for s in range(ns):
            for i in range(n):
                acc = 0.0
                for r in range(s):
                    acc += A[s, r] * k[r, i]
                ytmp[i] = y[i] + hs * acc
            _rhs(model, ytmp, p, k[s])
        for i in range(n):
            acc = 0.0
            for r in range(ns):
                acc += B[r] * k[r, i]
            y[i] += hs * acc
        n_steps += 1
        if not _finite(y):
            return idx, STEP_FAILURE, n_steps, 0, t
        t = target if last else t + hs
        if _margin(y) < boundary_eps:
            out[idx, :] = y
            return idx + 1, BOUNDARY_HIT, n_steps, 0, t
        if last:
            out[idx, :] = y
            idx += 1
    return idx, COMPLETED, n_steps, 0, t
