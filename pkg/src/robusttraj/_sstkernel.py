"""Compiled ensemble propagator for the SST landing dynamics.

This is the hot loop of the whole toolkit: every chromosome evaluation
integrates M trajectories at dt = 0.1 s with four aerodynamic lookups per
step.  The kernel mirrors ``sst.eom``/``odesim.propagate`` exactly, but
reads the aerodynamic surrogate through a dense trilinear table (built from
the fitted Kriging models, see ``aero.build_table``) and runs under numba.

Members are propagated sequentially in scenario order, so floating-point
results are independent of any outer parallelism.

Status codes: 0 landed, 1 path violation, 2 time expired.
Guard codes: 0 none, 1 Mach low, 2 Mach high, 3 alpha low, 4 alpha high,
5 non-finite state.
"""

from __future__ import annotations

import numpy as np
from numba import njit

STATUS_LANDED = 0
STATUS_PATH_VIOLATION = 1
STATUS_TIME_EXPIRED = 2

GUARD_NONE = 0
GUARD_MA_LOW = 1
GUARD_MA_HIGH = 2
GUARD_ALPHA_LOW = 3
GUARD_ALPHA_HIGH = 4
GUARD_NONFINITE = 5

MODE_VERBATIM = 0
MODE_TEXTBOOK = 1


@njit(cache=True)
def _lookup(axis, v):
    if v < axis[0]:
        v = axis[0]
    elif v > axis[-1]:
        v = axis[-1]
    step = axis[1] - axis[0]
    i = int((v - axis[0]) / step)
    if i > len(axis) - 2:
        i = len(axis) - 2
    return i, (v - axis[i]) / step


@njit(cache=True)
def _aero_table(values, ma_axis, al_axis, de_axis, ma, al_deg, de_deg, out):
    i, fx = _lookup(ma_axis, ma)
    j, fy = _lookup(al_axis, al_deg)
    k, fz = _lookup(de_axis, de_deg)
    for q in range(values.shape[0]):
        c00 = values[q, i, j, k] * (1 - fx) + values[q, i + 1, j, k] * fx
        c01 = values[q, i, j, k + 1] * (1 - fx) + values[q, i + 1, j, k + 1] * fx
        c10 = values[q, i, j + 1, k] * (1 - fx) + values[q, i + 1, j + 1, k] * fx
        c11 = values[q, i, j + 1, k + 1] * (1 - fx) + values[q, i + 1, j + 1, k + 1] * fx
        c0 = c00 * (1 - fy) + c10 * fy
        c1 = c01 * (1 - fy) + c11 * fy
        out[q] = c0 * (1 - fz) + c1 * fz


@njit(cache=True)
def _deriv(state, de_deg, xi, params, mode,
           values, ma_axis, al_axis, de_axis, aero_out, deriv_out):
    mass, s_ref, cbar, iyy, grav, rho, a_snd = (
        params[0], params[1], params[2], params[3], params[4], params[5], params[6])
    u = state[2]
    w = state[3]
    th = state[4]
    q = state[5]
    ct = np.cos(th)
    st = np.sin(th)
    ur = u - xi
    ub = ur * ct + w * st
    wb = ur * st - w * ct
    v_air = np.sqrt(ub * ub + wb * wb)
    ma = v_air / a_snd
    alpha = np.arctan2(wb, ub) if v_air > 0.0 else 0.0
    al_deg = alpha * 180.0 / np.pi
    q_dyn = 0.5 * rho * v_air * v_air

    _aero_table(values, ma_axis, al_axis, de_axis, ma, al_deg, de_deg, aero_out)
    fx = aero_out[0] + q_dyn * s_ref * de_deg * aero_out[3]
    fz = aero_out[1] + q_dyn * s_ref * de_deg * aero_out[4]
    mth = aero_out[2] + q_dyn * s_ref * cbar * de_deg * aero_out[5]

    deriv_out[0] = u
    deriv_out[1] = w
    if mode == MODE_VERBATIM:
        deriv_out[2] = fx / mass - grav * st - q * w
        deriv_out[3] = fz / mass - grav * ct - q * u
        deriv_out[5] = mth / iyy - q
    else:
        deriv_out[2] = (fx * ct - fz * st) / mass
        deriv_out[3] = (fx * st + fz * ct) / mass - grav
        deriv_out[5] = mth / iyy
    deriv_out[4] = q


@njit(cache=True)
def _airdata_scalars(state, xi, a_snd, rho):
    u = state[2]
    w = state[3]
    th = state[4]
    ct = np.cos(th)
    st = np.sin(th)
    ur = u - xi
    ub = ur * ct + w * st
    wb = ur * st - w * ct
    v_air = np.sqrt(ub * ub + wb * wb)
    ma = v_air / a_snd
    alpha = np.arctan2(wb, ub) if v_air > 0.0 else 0.0
    return ma, alpha * 180.0 / np.pi


@njit(cache=True)
def propagate_ensemble(x0, winds, schedule, dt, n_steps, control_every,
                       params, guard_bounds, mode,
                       values, ma_axis, al_axis, de_axis):
    """Propagate all scenario members through the landing dynamics.

    ``guard_bounds`` = (ma_lo, ma_hi, alpha_lo_deg, alpha_hi_deg).
    Returns per-member status/guard codes, interpolated terminals, graded
    stage-2 violations, valid sample counts, and (Ma, alpha, z, x) recordings
    on the shared step grid (sample index i = state after i steps).
    """
    n_members = winds.shape[0]
    horizon = schedule.shape[0] - 1

    statuses = np.full(n_members, STATUS_TIME_EXPIRED, dtype=np.int64)
    guard_codes = np.zeros(n_members, dtype=np.int64)
    t_f = np.full(n_members, np.nan)
    x_f = np.full(n_members, np.nan)
    stage2 = np.zeros(n_members)
    n_valid = np.zeros(n_members, dtype=np.int64)
    ma_series = np.full((n_members, n_steps + 1), np.nan)
    al_series = np.full((n_members, n_steps + 1), np.nan)
    z_series = np.full((n_members, n_steps + 1), np.nan)
    x_series = np.full((n_members, n_steps + 1), np.nan)

    ma_lo, ma_hi, al_lo, al_hi = (guard_bounds[0], guard_bounds[1],
                                  guard_bounds[2], guard_bounds[3])
    z0_ref = x0[1]
    a_snd = params[6]
    rho = params[5]

    state = np.empty(6)
    new = np.empty(6)
    k1 = np.empty(6)
    k2 = np.empty(6)
    k3 = np.empty(6)
    k4 = np.empty(6)
    stage_in = np.empty(6)
    aero_out = np.empty(6)

    for m in range(n_members):
        xi = winds[m]
        for c in range(6):
            state[c] = x0[c]
        ma, al_deg = _airdata_scalars(state, xi, a_snd, rho)
        ma_series[m, 0] = ma
        al_series[m, 0] = al_deg
        z_series[m, 0] = state[1]
        x_series[m, 0] = state[0]
        n_valid[m] = 1

        for i in range(n_steps):
            interval = i // control_every
            if interval > horizon:
                interval = horizon
            de = schedule[interval]

            _deriv(state, de, xi, params, mode, values, ma_axis, al_axis,
                   de_axis, aero_out, k1)
            for c in range(6):
                stage_in[c] = state[c] + 0.5 * dt * k1[c]
            _deriv(stage_in, de, xi, params, mode, values, ma_axis, al_axis,
                   de_axis, aero_out, k2)
            for c in range(6):
                stage_in[c] = state[c] + 0.5 * dt * k2[c]
            _deriv(stage_in, de, xi, params, mode, values, ma_axis, al_axis,
                   de_axis, aero_out, k3)
            for c in range(6):
                stage_in[c] = state[c] + dt * k3[c]
            _deriv(stage_in, de, xi, params, mode, values, ma_axis, al_axis,
                   de_axis, aero_out, k4)
            for c in range(6):
                new[c] = state[c] + (dt / 6.0) * (k1[c] + 2.0 * k2[c]
                                                  + 2.0 * k3[c] + k4[c])
            t_new = (i + 1) * dt

            finite = True
            for c in range(6):
                if not np.isfinite(new[c]):
                    finite = False
            if not finite:
                statuses[m] = STATUS_PATH_VIOLATION
                guard_codes[m] = GUARD_NONFINITE
                z_pen = state[1] / z0_ref if np.isfinite(state[1]) else 1.0
                stage2[m] = 1.0 + max(0.0, z_pen)
                break

            ma, al_deg = _airdata_scalars(new, xi, a_snd, rho)
            ma_series[m, i + 1] = ma
            al_series[m, i + 1] = al_deg
            z_series[m, i + 1] = new[1]
            x_series[m, i + 1] = new[0]
            n_valid[m] = i + 2

            if new[1] <= 0.0:
                frac = state[1] / (state[1] - new[1])
                t_f[m] = i * dt + frac * dt
                x_f[m] = state[0] + frac * (new[0] - state[0])
                statuses[m] = STATUS_LANDED
                break

            excess = 0.0
            code = GUARD_NONE
            if ma < ma_lo:
                excess = (ma_lo - ma) / ma_lo
                code = GUARD_MA_LOW
            elif ma > ma_hi:
                excess = (ma - ma_hi) / ma_hi
                code = GUARD_MA_HIGH
            elif al_deg < al_lo:
                excess = (al_lo - al_deg) / abs(al_lo)
                code = GUARD_ALPHA_LOW
            elif al_deg > al_hi:
                excess = (al_deg - al_hi) / al_hi
                code = GUARD_ALPHA_HIGH
            if code != GUARD_NONE:
                statuses[m] = STATUS_PATH_VIOLATION
                guard_codes[m] = code
                stage2[m] = excess + new[1] / z0_ref
                break

            for c in range(6):
                state[c] = new[c]
        else:
            # horizon exhausted while still airborne
            statuses[m] = STATUS_TIME_EXPIRED
            stage2[m] = state[1] / z0_ref

    return (statuses, guard_codes, t_f, x_f, stage2, n_valid,
            ma_series, al_series, z_series, x_series)
