"""Hot inner loops, numba-compiled with a pure-numpy fallback.

The fallback path is selected by the environment variable NLSLAB_NO_NUMBA=1
(or automatically when numba is unavailable).  Kernels here are the only
places where per-step Python overhead would otherwise dominate: the fused
nonlinear-phase/CAP application inside the split-step integrator and the
fixed-step RK4 loops for the reduced amplitude ODEs.

benchmarks/kernel_bench.py compares the two paths.
"""

from __future__ import annotations

import os

import numpy as np

USE_NUMBA = os.environ.get("NLSLAB_NO_NUMBA", "0") != "1"
if USE_NUMBA:
    try:
        from numba import njit
    except ImportError:   # pragma: no cover
        USE_NUMBA = False

__all__ = [
    "USE_NUMBA",
    "nonlinear_phase",
    "rk4_complex_cubic",
    "rk4_real_cubic",
]


# -- split-step phase kernel -------------------------------------------------

def _nonlinear_phase_py(psi, v_eff, lam, half_dt, cap_decay):
    """psi <- exp(-i half_dt (v_eff + lam |psi|^2)) * cap_decay * psi."""
    amp2 = psi.real**2 + psi.imag**2
    psi *= np.exp(-1j * half_dt * (v_eff + lam * amp2))
    if cap_decay is not None:
        psi *= cap_decay
    return psi


if USE_NUMBA:

    @njit(cache=True)
    def _nonlinear_phase_nb(psi, v_eff, lam, half_dt, cap_decay):
        for j in range(psi.size):
            p = psi[j]
            amp2 = p.real * p.real + p.imag * p.imag
            ang = -half_dt * (v_eff[j] + lam * amp2)
            c, s = np.cos(ang), np.sin(ang)
            psi[j] = complex(p.real * c - p.imag * s, p.real * s + p.imag * c) * cap_decay[j]
        return psi

    _ONES_CACHE: dict = {}

    def nonlinear_phase(psi, v_eff, lam, half_dt, cap_decay=None):
        if cap_decay is None:
            cap_decay = _ONES_CACHE.get(psi.size)
            if cap_decay is None:
                cap_decay = np.ones(psi.size)
                _ONES_CACHE[psi.size] = cap_decay
        return _nonlinear_phase_nb(psi, v_eff, float(lam), float(half_dt), cap_decay)

else:
    nonlinear_phase = _nonlinear_phase_py


# -- reduced amplitude ODE: dq/dt = (-G + i m) |q|^2 q + i d b(t) q + g(t) ----

def _cubic_rhs_py(q, t, gamma, d21_im, d1_im, tb, bv, tg, gv):
    b = np.interp(t, tb, bv) if bv.size else 0.0
    g = (np.interp(t, tg, gv.real) + 1j * np.interp(t, tg, gv.imag)) if gv.size else 0.0
    return (-gamma + 1j * d21_im) * (q.real**2 + q.imag**2) * q + 1j * d1_im * b * q + g


def _rk4_complex_cubic_py(q0, t0, dt, n_steps, out_every,
                          gamma, d21_im, d1_im, tb, bv, tg, gv):
    n_out = n_steps // out_every + 1
    t_out = np.empty(n_out)
    q_out = np.empty(n_out, dtype=np.complex128)
    q = complex(q0)
    t = t0
    t_out[0], q_out[0] = t, q
    idx = 1
    for s in range(1, n_steps + 1):
        k1 = _cubic_rhs_py(q, t, gamma, d21_im, d1_im, tb, bv, tg, gv)
        k2 = _cubic_rhs_py(q + 0.5 * dt * k1, t + 0.5 * dt, gamma, d21_im, d1_im, tb, bv, tg, gv)
        k3 = _cubic_rhs_py(q + 0.5 * dt * k2, t + 0.5 * dt, gamma, d21_im, d1_im, tb, bv, tg, gv)
        k4 = _cubic_rhs_py(q + dt * k3, t + dt, gamma, d21_im, d1_im, tb, bv, tg, gv)
        q = q + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        t = t0 + s * dt
        if s % out_every == 0:
            t_out[idx], q_out[idx] = t, q
            idx += 1
    return t_out[:idx], q_out[:idx]


def _interp_uniform(t, t_arr, v_arr):
    # linear interpolation with end clamping (t_arr ascending)
    n = t_arr.size
    if t <= t_arr[0]:
        return v_arr[0]
    if t >= t_arr[n - 1]:
        return v_arr[n - 1]
    j = int((t - t_arr[0]) / (t_arr[1] - t_arr[0]))
    if j >= n - 1:
        return v_arr[n - 1]
    w = (t - t_arr[j]) / (t_arr[j + 1] - t_arr[j])
    return v_arr[j] * (1.0 - w) + v_arr[j + 1] * w


if USE_NUMBA:
    _interp_uniform_nb = njit(cache=True)(_interp_uniform)

    @njit(cache=True)
    def _rk4_complex_cubic_nb(q0, t0, dt, n_steps, out_every,
                              gamma, d21_im, d1_im, tb, bv, tg, gv):
        def rhs(q, t):
            b = _interp_uniform_nb(t, tb, bv) if bv.size else 0.0
            if gv.size:
                g = _interp_uniform_nb(t, tg, gv)
            else:
                g = 0.0 + 0.0j
            amp2 = q.real * q.real + q.imag * q.imag
            return (complex(-gamma, d21_im)) * amp2 * q + complex(0.0, d1_im) * b * q + g

        n_out = n_steps // out_every + 1
        t_out = np.empty(n_out)
        q_out = np.empty(n_out, dtype=np.complex128)
        q = q0
        t = t0
        t_out[0] = t
        q_out[0] = q
        idx = 1
        for s in range(1, n_steps + 1):
            k1 = rhs(q, t)
            k2 = rhs(q + 0.5 * dt * k1, t + 0.5 * dt)
            k3 = rhs(q + 0.5 * dt * k2, t + 0.5 * dt)
            k4 = rhs(q + dt * k3, t + dt)
            q = q + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            t = t0 + s * dt
            if s % out_every == 0:
                t_out[idx] = t
                q_out[idx] = q
                idx += 1
        return t_out[:idx], q_out[:idx]


def rk4_complex_cubic(q0, t0, dt, n_steps, out_every, gamma, d21_im, d1_im,
                      tb=None, bv=None, tg=None, gv=None):
    """Integrate dq/dt = (-gamma + i d21_im)|q|^2 q + i d1_im b(t) q + g(t).

    b and g are piecewise-linear samples on uniform grids (tb, bv), (tg, gv);
    pass None to disable a term.  Returns (t, q) downsampled by out_every.
    """
    tb = np.empty(0) if tb is None else np.ascontiguousarray(tb, dtype=np.float64)
    bv = np.empty(0) if bv is None else np.ascontiguousarray(bv, dtype=np.float64)
    tg = np.empty(0) if tg is None else np.ascontiguousarray(tg, dtype=np.float64)
    gv = np.empty(0, dtype=np.complex128) if gv is None else np.ascontiguousarray(gv, dtype=np.complex128)
    args = (complex(q0), float(t0), float(dt), int(n_steps), int(out_every),
            float(gamma), float(d21_im), float(d1_im), tb, bv, tg, gv)
    if USE_NUMBA:
        return _rk4_complex_cubic_nb(*args)
    return _rk4_complex_cubic_py(*args)


# -- real cubic ODE: drho/dt = -gamma rho^3 + gtilde(t) ----------------------

def _rk4_real_cubic_py(rho0, t0, dt, n_steps, out_every, gamma, tg, gv, stop_floor):
    n_out = n_steps // out_every + 1
    t_out = np.empty(n_out)
    r_out = np.empty(n_out)
    rho = float(rho0)
    t = t0
    t_out[0], r_out[0] = t, rho
    idx = 1

    def rhs(r, tt):
        g = np.interp(tt, tg, gv) if gv.size else 0.0
        return -gamma * r**3 + g

    for s in range(1, n_steps + 1):
        k1 = rhs(rho, t)
        k2 = rhs(rho + 0.5 * dt * k1, t + 0.5 * dt)
        k3 = rhs(rho + 0.5 * dt * k2, t + 0.5 * dt)
        k4 = rhs(rho + dt * k3, t + dt)
        rho = rho + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        t = t0 + s * dt
        if rho <= stop_floor:
            t_out[idx], r_out[idx] = t, rho
            idx += 1
            return t_out[:idx], r_out[:idx]
        if s % out_every == 0:
            t_out[idx], r_out[idx] = t, rho
            idx += 1
    return t_out[:idx], r_out[:idx]


if USE_NUMBA:

    @njit(cache=True)
    def _rk4_real_cubic_nb(rho0, t0, dt, n_steps, out_every, gamma, tg, gv, stop_floor):
        def rhs(r, tt):
            g = _interp_uniform_nb(tt, tg, gv) if gv.size else 0.0
            return -gamma * r * r * r + g

        n_out = n_steps // out_every + 1
        t_out = np.empty(n_out)
        r_out = np.empty(n_out)
        rho = rho0
        t = t0
        t_out[0] = t
        r_out[0] = rho
        idx = 1
        for s in range(1, n_steps + 1):
            k1 = rhs(rho, t)
            k2 = rhs(rho + 0.5 * dt * k1, t + 0.5 * dt)
            k3 = rhs(rho + 0.5 * dt * k2, t + 0.5 * dt)
            k4 = rhs(rho + dt * k3, t + dt)
            rho = rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            t = t0 + s * dt
            if rho <= stop_floor:
                t_out[idx] = t
                r_out[idx] = rho
                idx += 1
                return t_out[:idx], r_out[:idx]
            if s % out_every == 0:
                t_out[idx] = t
                r_out[idx] = rho
                idx += 1
        return t_out[:idx], r_out[:idx]


def rk4_real_cubic(rho0, t0, dt, n_steps, out_every, gamma, tg=None, gv=None,
                   stop_floor=-np.inf):
    """Integrate drho/dt = -gamma rho^3 + gtilde(t) with optional early stop
    when rho falls through stop_floor (extinction detection)."""
    tg = np.empty(0) if tg is None else np.ascontiguousarray(tg, dtype=np.float64)
    gv = np.empty(0) if gv is None else np.ascontiguousarray(gv, dtype=np.float64)
    args = (float(rho0), float(t0), float(dt), int(n_steps), int(out_every),
            float(gamma), tg, gv, float(stop_floor))
    if USE_NUMBA:
        return _rk4_real_cubic_nb(*args)
    return _rk4_real_cubic_py(*args)
