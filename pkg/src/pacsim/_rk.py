"""Numba-compiled adaptive Dormand-Prince 5(4) drivers.

Two hot loops live here: the nonlinear first-moment equations integrated
over up to 20/gamma (~10^7 mechanical radians), and the time-periodic
covariance equation dV/dt = A(t) V + V A(t)^T + D.  Both resolve the
mechanical oscillation explicitly, so step counts reach 10^8; a compiled
stepper keeps that in tens of seconds where a generic Python-loop solver
would take an hour.

Status codes returned by the drivers: 0 = ok, 1 = step-size underflow or
non-finite state (stiffness/divergence), 2 = step budget exhausted.
"""

import numpy as np
from numba import njit

# Dormand-Prince 5(4) tableau (FSAL).
_A21 = 1.0 / 5.0
_A31, _A32 = 3.0 / 40.0, 9.0 / 40.0
_A41, _A42, _A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
_A51, _A52, _A53, _A54 = (19372.0 / 6561.0, -25360.0 / 2187.0,
                          64448.0 / 6561.0, -212.0 / 729.0)
_A61, _A62, _A63, _A64, _A65 = (9017.0 / 3168.0, -355.0 / 33.0,
                                46732.0 / 5247.0, 49.0 / 176.0,
                                -5103.0 / 18656.0)
_B1, _B3, _B4, _B5, _B6 = (35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0,
                           -2187.0 / 6784.0, 11.0 / 84.0)
# 5th-order minus embedded 4th-order weights.
_E1, _E3, _E4, _E5, _E6, _E7 = (71.0 / 57600.0, -71.0 / 16695.0,
                                71.0 / 1920.0, -17253.0 / 339200.0,
                                22.0 / 525.0, -1.0 / 40.0)

_C2, _C3, _C4, _C5 = 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0

_MAX_STEPS = 2_000_000_000


@njit(cache=True)
def _mf_rhs(t, y, dy, pars):
    """First moments (Re<a>, Im<a>, <q>, <p>) in the pump rotating frame."""
    kappa = pars[0]
    delta0 = pars[1]
    gamma = pars[2]
    omega_m = pars[3]
    g = pars[4]
    e0re, e0im = pars[5], pars[6]
    e1re, e1im = pars[7], pars[8]
    delta = pars[9]
    ra, ia, q, p = y[0], y[1], y[2], y[3]
    cd = np.cos(delta * t)
    sd = np.sin(delta * t)
    dy[0] = -kappa * ra + delta0 * ia - g * ia * q + e0re + e1re * cd + e1im * sd
    dy[1] = -kappa * ia - delta0 * ra + g * ra * q + e0im + e1im * cd - e1re * sd
    dy[2] = omega_m * p
    dy[3] = -omega_m * q - gamma * p + g * (ra * ra + ia * ia)


@njit(cache=True)
def integrate_meanfield_kernel(pars, y0, ts, rtol, atol, h0):
    """Integrate the mean-field ODE from t = 0, sampling at times ``ts``.

    ``ts`` must be strictly increasing with ts[-1] = t_end.  Returns
    (status, samples[len(ts), 4], t_reached, n_steps).
    """
    n = 4
    y = y0.copy()
    ynew = np.empty(n)
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    k5 = np.empty(n)
    k6 = np.empty(n)
    k7 = np.empty(n)
    ytmp = np.empty(n)
    out = np.empty((ts.shape[0], n))

    t = 0.0
    t_end = ts[-1]
    isamp = 0
    # Sample requested exactly at t = 0.
    while isamp < ts.shape[0] and ts[isamp] <= 0.0:
        out[isamp] = y
        isamp += 1

    h = h0
    hmin = 1e-14 * t_end
    _mf_rhs(t, y, k1, pars)
    nsteps = 0

    while t < t_end:
        if nsteps >= _MAX_STEPS:
            return 2, out, t, nsteps
        # Hit the next sample time exactly.
        target = ts[isamp] if isamp < ts.shape[0] else t_end
        if t + h >= target:
            h_try = target - t
        else:
            h_try = h
        if h_try < hmin:
            # Forced tiny step onto a sample boundary is fine; a tiny
            # *adaptive* step means trouble, which is caught below.
            h_try = max(h_try, 1e-18 * t_end)

        _stage(t, y, h_try, k1, k2, k3, k4, k5, k6, k7, ytmp, ynew, pars)

        # Embedded error estimate.
        errn = 0.0
        for i in range(n):
            e = h_try * (_E1 * k1[i] + _E3 * k3[i] + _E4 * k4[i]
                         + _E5 * k5[i] + _E6 * k6[i] + _E7 * k7[i])
            sc = atol + rtol * max(abs(y[i]), abs(ynew[i]))
            errn += (e / sc) ** 2
        errn = np.sqrt(errn / n)
        nsteps += 1

        if errn <= 1.0:
            t += h_try
            for i in range(n):
                y[i] = ynew[i]
                k1[i] = k7[i]  # FSAL
            if not np.isfinite(y[0] + y[1] + y[2] + y[3]):
                return 1, out, t, nsteps
            while isamp < ts.shape[0] and ts[isamp] <= t * (1.0 + 1e-15):
                out[isamp] = y
                isamp += 1
            # Step-size update based on the attempted step.
            if errn == 0.0:
                fac = 5.0
            else:
                fac = min(5.0, max(0.2, 0.9 * errn ** -0.2))
            h = h_try * fac
        else:
            h = h_try * max(0.2, 0.9 * errn ** -0.2)
            if h < hmin:
                return 1, out, t, nsteps

    while isamp < ts.shape[0]:
        out[isamp] = y
        isamp += 1
    return 0, out, t, nsteps


@njit(cache=True)
def _stage(t, y, h, k1, k2, k3, k4, k5, k6, k7, ytmp, ynew, pars):
    n = y.shape[0]
    for i in range(n):
        ytmp[i] = y[i] + h * _A21 * k1[i]
    _mf_rhs(t + _C2 * h, ytmp, k2, pars)
    for i in range(n):
        ytmp[i] = y[i] + h * (_A31 * k1[i] + _A32 * k2[i])
    _mf_rhs(t + _C3 * h, ytmp, k3, pars)
    for i in range(n):
        ytmp[i] = y[i] + h * (_A41 * k1[i] + _A42 * k2[i] + _A43 * k3[i])
    _mf_rhs(t + _C4 * h, ytmp, k4, pars)
    for i in range(n):
        ytmp[i] = y[i] + h * (_A51 * k1[i] + _A52 * k2[i] + _A53 * k3[i]
                              + _A54 * k4[i])
    _mf_rhs(t + _C5 * h, ytmp, k5, pars)
    for i in range(n):
        ytmp[i] = y[i] + h * (_A61 * k1[i] + _A62 * k2[i] + _A63 * k3[i]
                              + _A64 * k4[i] + _A65 * k5[i])
    _mf_rhs(t + h, ytmp, k6, pars)
    for i in range(n):
        ynew[i] = y[i] + h * (_B1 * k1[i] + _B3 * k3[i] + _B4 * k4[i]
                              + _B5 * k5[i] + _B6 * k6[i])
    _mf_rhs(t + h, ynew, k7, pars)


@njit(cache=True)
def _cov_rhs(t, y, dy, a0, cm, sm, omega, dmat, awork):
    """dV = A(t) V + V A(t)^T + D with A(t) = A0 + C cos(wt) + S sin(wt)."""
    cw = np.cos(omega * t)
    sw = np.sin(omega * t)
    for i in range(4):
        for j in range(4):
            awork[i, j] = a0[i, j] + cm[i, j] * cw + sm[i, j] * sw
    for i in range(4):
        for j in range(4):
            mij = 0.0
            mji = 0.0
            for k in range(4):
                mij += awork[i, k] * y[4 * k + j]
                mji += awork[j, k] * y[4 * k + i]
            dy[4 * i + j] = mij + mji + dmat[i, j]


@njit(cache=True)
def _cov_step(t, y, h, k1, k2, k3, k4, k5, k6, k7, ytmp, ynew,
              a0, cm, sm, omega, dmat, awork):
    n = y.shape[0]
    for i in range(n):
        ytmp[i] = y[i] + h * _A21 * k1[i]
    _cov_rhs(t + _C2 * h, ytmp, k2, a0, cm, sm, omega, dmat, awork)
    for i in range(n):
        ytmp[i] = y[i] + h * (_A31 * k1[i] + _A32 * k2[i])
    _cov_rhs(t + _C3 * h, ytmp, k3, a0, cm, sm, omega, dmat, awork)
    for i in range(n):
        ytmp[i] = y[i] + h * (_A41 * k1[i] + _A42 * k2[i] + _A43 * k3[i])
    _cov_rhs(t + _C4 * h, ytmp, k4, a0, cm, sm, omega, dmat, awork)
    for i in range(n):
        ytmp[i] = y[i] + h * (_A51 * k1[i] + _A52 * k2[i] + _A53 * k3[i]
                              + _A54 * k4[i])
    _cov_rhs(t + _C5 * h, ytmp, k5, a0, cm, sm, omega, dmat, awork)
    for i in range(n):
        ytmp[i] = y[i] + h * (_A61 * k1[i] + _A62 * k2[i] + _A63 * k3[i]
                              + _A64 * k4[i] + _A65 * k5[i])
    _cov_rhs(t + h, ytmp, k6, a0, cm, sm, omega, dmat, awork)
    for i in range(n):
        ynew[i] = y[i] + h * (_B1 * k1[i] + _B3 * k3[i] + _B4 * k4[i]
                              + _B5 * k5[i] + _B6 * k6[i])
    _cov_rhs(t + h, ynew, k7, a0, cm, sm, omega, dmat, awork)


@njit(cache=True)
def integrate_covariance_periodic_kernel(a0, cm, sm, omega, dmat, v0,
                                         t_max, rtol, atol, h0, lock_tol,
                                         n_store):
    """March the periodic Lyapunov ODE beat-by-beat until it locks.

    One "beat" is the 2*pi/omega modulation period.  After each beat the
    state is compared with the previous beat boundary; when the relative
    change drops below ``lock_tol`` the solution is periodic and one more
    beat is integrated with ``n_store`` evenly spaced samples recorded.
    If lock is not reached by ``t_max`` the last beat before t_max is
    recorded instead (locked flag 0).

    Returns (status, locked, n_beats, samples[n_store, 16], t_end, nsteps).
    """
    n = 16
    period = 2.0 * np.pi / omega
    y = np.empty(n)
    for i in range(4):
        for j in range(4):
            y[4 * i + j] = v0[i, j]
    ynew = np.empty(n)
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    k5 = np.empty(n)
    k6 = np.empty(n)
    k7 = np.empty(n)
    ytmp = np.empty(n)
    awork = np.empty((4, 4))
    yprev = y.copy()
    samples = np.empty((n_store, n))

    n_beats_max = max(1, int(np.ceil(t_max / period)))
    t = 0.0
    h = h0
    hmin = 1e-14 * max(t_max, period)
    _cov_rhs(t, y, k1, a0, cm, sm, omega, dmat, awork)
    nsteps = 0
    locked = 0
    beat = 0

    while beat < n_beats_max:
        t_target = (beat + 1) * period
        status, t, h, nsteps = _advance(t, t_target, y, h, hmin, rtol, atol,
                                        k1, k2, k3, k4, k5, k6, k7, ytmp,
                                        ynew, a0, cm, sm, omega, dmat,
                                        awork, nsteps)
        if status != 0:
            return status, locked, beat, samples, t, nsteps
        beat += 1
        dnum = 0.0
        dden = 0.0
        for i in range(n):
            dnum += (y[i] - yprev[i]) ** 2
            dden += y[i] ** 2
        if dden > 0.0 and np.sqrt(dnum / dden) < lock_tol:
            locked = 1
            break
        for i in range(n):
            yprev[i] = y[i]

    # Record one further beat, sampled evenly.
    t0 = t
    for m in range(n_store):
        t_target = t0 + (m + 1) * period / n_store
        status, t, h, nsteps = _advance(t, t_target, y, h, hmin, rtol, atol,
                                        k1, k2, k3, k4, k5, k6, k7, ytmp,
                                        ynew, a0, cm, sm, omega, dmat,
                                        awork, nsteps)
        if status != 0:
            return status, locked, beat, samples, t, nsteps
        samples[m] = y
    return 0, locked, beat, samples, t, nsteps


@njit(cache=True)
def _advance(t, t_target, y, h, hmin, rtol, atol, k1, k2, k3, k4, k5, k6,
             k7, ytmp, ynew, a0, cm, sm, omega, dmat, awork, nsteps):
    """Advance the covariance state in place up to ``t_target``."""
    n = y.shape[0]
    while t < t_target:
        if nsteps >= _MAX_STEPS:
            return 2, t, h, nsteps
        h_try = min(h, t_target - t)
        if h_try < hmin:
            h_try = max(h_try, 1e-18 * t_target)
        _cov_step(t, y, h_try, k1, k2, k3, k4, k5, k6, k7, ytmp, ynew,
                  a0, cm, sm, omega, dmat, awork)
        errn = 0.0
        for i in range(n):
            e = h_try * (_E1 * k1[i] + _E3 * k3[i] + _E4 * k4[i]
                         + _E5 * k5[i] + _E6 * k6[i] + _E7 * k7[i])
            sc = atol + rtol * max(abs(y[i]), abs(ynew[i]))
            errn += (e / sc) ** 2
        errn = np.sqrt(errn / n)
        nsteps += 1
        if errn <= 1.0:
            t += h_try
            ok = True
            for i in range(n):
                y[i] = ynew[i]
                k1[i] = k7[i]
                if not np.isfinite(y[i]):
                    ok = False
            if not ok:
                return 1, t, h, nsteps
            if errn == 0.0:
                fac = 5.0
            else:
                fac = min(5.0, max(0.2, 0.9 * errn ** -0.2))
            h = h_try * fac
        else:
            h = h_try * max(0.2, 0.9 * errn ** -0.2)
            if h < hmin:
                return 1, t, h, nsteps
    return 0, t, h, nsteps
