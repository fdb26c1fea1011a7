"""Hot numeric kernels with a numba backend and a pure-numpy fallback.

The backend is selected once at import time via the ``MAEE_BACKEND``
environment variable: ``numba`` (require JIT), ``numpy`` (force the
vectorized fallback), or ``auto`` (default: numba when importable).
``benchmarks/bench_kernels.py`` compares the two paths.
"""

from __future__ import annotations

import os

import numpy as np

_LN2 = float(np.log(2.0))

_choice = os.environ.get("MAEE_BACKEND", "auto").strip().lower()
if _choice not in ("auto", "numba", "numpy"):
    raise ValueError(f"MAEE_BACKEND must be auto|numba|numpy, got {_choice!r}")

if _choice == "numpy":
    _njit = None
else:
    try:
        from numba import njit as _njit
    except ImportError:
        if _choice == "numba":
            raise
        _njit = None

BACKEND = "numba" if _njit is not None else "numpy"


def gain_profile_numpy(constant, mags, phases, freqs, xs):
    """Evaluate ``constant + sum_t 2*mags[t]*cos(freqs[t]*x + phases[t])`` at each x."""
    xs = np.atleast_1d(np.asarray(xs, dtype=np.float64))
    if mags.size == 0:
        return np.full(xs.shape, constant)
    args = np.multiply.outer(xs, freqs) + phases
    return constant + 2.0 * (np.cos(args) @ mags)


def dinkelbach_scan_numpy(gains, t_comm, motor_energy, eta_c, sigma2,
                          p_max, r_th, eps1, max_iter):
    """Per-center transmit power optimization, vectorized across all centers.

    For each sub-region center s (channel gain ``gains[s]``, communication
    time ``t_comm[s]``, movement energy ``motor_energy[s]``) the power is
    alternately updated with the closed-form clamp and the ratio update
    until the efficiency increase drops below ``eps1``.

    Returns ``(ee, p, iters, feasible)`` arrays; infeasible centers (power
    floor above ``p_max``) carry ``ee = -inf``.
    """
    g = np.asarray(gains, dtype=np.float64)
    tt = np.asarray(t_comm, dtype=np.float64)
    xi = np.asarray(motor_energy, dtype=np.float64)
    n = g.size

    ee = np.full(n, -np.inf)
    p = np.zeros(n)
    iters = np.zeros(n, dtype=np.int64)

    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        snr_floor = np.exp2(r_th / tt) - 1.0
        p_th = np.where(g > 0.0, sigma2 * snr_floor / np.where(g > 0.0, g, 1.0), np.inf)
        p_th = np.where(snr_floor == 0.0, 0.0, p_th)
    feasible = (p_th <= p_max) & (tt > 0.0)
    if not feasible.any():
        return ee, p, iters, feasible

    idx = np.flatnonzero(feasible)
    gf = g[idx]
    ttf = tt[idx]
    xif = xi[idx]
    thf = p_th[idx]

    def _alpha(pw):
        num = ttf * np.log2(1.0 + pw * gf / sigma2)
        den = xif + pw * ttf / eta_c
        return np.where(den > 0.0, num / np.where(den > 0.0, den, 1.0), 0.0)

    pw = np.clip(np.full(idx.size, 0.5 * p_max), thf, p_max)
    alpha = _alpha(pw)
    it = np.zeros(idx.size, dtype=np.int64)
    active = np.ones(idx.size, dtype=bool)
    openp = (alpha > 0.0) & (gf > 0.0)
    for _ in range(max_iter):
        p_unc = np.where(
            openp,
            eta_c / (np.where(openp, alpha, 1.0) * _LN2)
            - sigma2 / np.where(openp, gf, 1.0),
            p_max,
        )
        p_unc = np.maximum(p_unc, 0.0)
        p_new = np.clip(p_unc, thf, p_max)
        alpha_new = _alpha(p_new)
        done = active & (alpha_new - alpha < eps1)
        it[active] += 1
        pw[active] = p_new[active]
        alpha[active] = alpha_new[active]
        openp = (alpha > 0.0) & (gf > 0.0)
        active &= ~done
        if not active.any():
            break

    ee[idx] = alpha
    p[idx] = pw
    iters[idx] = it
    return ee, p, iters, feasible


if _njit is not None:

    @_njit(cache=True)
    def _gain_profile_nb(constant, mags, phases, freqs, xs):  # pragma: no cover
        out = np.empty(xs.size)
        for i in range(xs.size):
            acc = constant
            for t in range(mags.size):
                acc += 2.0 * mags[t] * np.cos(freqs[t] * xs[i] + phases[t])
            out[i] = acc
        return out

    @_njit(cache=True)
    def _dinkelbach_scan_nb(gains, t_comm, motor_energy, eta_c, sigma2,
                            p_max, r_th, eps1, max_iter):  # pragma: no cover
        n = gains.size
        ee = np.full(n, -np.inf)
        p = np.zeros(n)
        iters = np.zeros(n, dtype=np.int64)
        feasible = np.zeros(n, dtype=np.bool_)
        ln2 = 0.6931471805599453
        for s in range(n):
            g = gains[s]
            tt = t_comm[s]
            xi = motor_energy[s]
            if tt <= 0.0:
                continue
            snr_floor = 2.0 ** (r_th / tt) - 1.0
            if snr_floor == 0.0:
                p_th = 0.0
            elif g > 0.0:
                p_th = sigma2 * snr_floor / g
            else:
                continue
            if p_th > p_max:
                continue
            feasible[s] = True
            pw = 0.5 * p_max
            if pw < p_th:
                pw = p_th
            if pw > p_max:
                pw = p_max
            num = tt * np.log2(1.0 + pw * g / sigma2)
            den = xi + pw * tt / eta_c
            alpha = num / den if den > 0.0 else 0.0
            it = 0
            for _ in range(max_iter):
                if alpha > 0.0 and g > 0.0:
                    p_unc = eta_c / (alpha * ln2) - sigma2 / g
                    if p_unc < 0.0:
                        p_unc = 0.0
                else:
                    p_unc = p_max
                p_new = p_unc
                if p_new < p_th:
                    p_new = p_th
                if p_new > p_max:
                    p_new = p_max
                num = tt * np.log2(1.0 + p_new * g / sigma2)
                den = xi + p_new * tt / eta_c
                alpha_new = num / den if den > 0.0 else 0.0
                it += 1
                pw = p_new
                delta = alpha_new - alpha
                alpha = alpha_new
                if delta < eps1:
                    break
            ee[s] = alpha
            p[s] = pw
            iters[s] = it
        return ee, p, iters, feasible

    def gain_profile(constant, mags, phases, freqs, xs):
        xs = np.atleast_1d(np.asarray(xs, dtype=np.float64))
        return _gain_profile_nb(float(constant),
                                np.ascontiguousarray(mags, dtype=np.float64),
                                np.ascontiguousarray(phases, dtype=np.float64),
                                np.ascontiguousarray(freqs, dtype=np.float64),
                                np.ascontiguousarray(xs))

    def dinkelbach_scan(gains, t_comm, motor_energy, eta_c, sigma2,
                        p_max, r_th, eps1, max_iter):
        return _dinkelbach_scan_nb(np.ascontiguousarray(gains, dtype=np.float64),
                                   np.ascontiguousarray(t_comm, dtype=np.float64),
                                   np.ascontiguousarray(motor_energy, dtype=np.float64),
                                   float(eta_c), float(sigma2), float(p_max),
                                   float(r_th), float(eps1), int(max_iter))

    gain_profile.__doc__ = gain_profile_numpy.__doc__
    dinkelbach_scan.__doc__ = dinkelbach_scan_numpy.__doc__
else:
    gain_profile = gain_profile_numpy
    dinkelbach_scan = dinkelbach_scan_numpy
