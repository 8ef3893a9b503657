"""Hot inner loops: cavity mean-field integration, AR(1) recursions and the
direct covariance-to-spectrum sum.

Every kernel has a numba implementation and a vectorised numpy one with an
identical signature. The public names resolve to one of the two at import
time according to :data:`tpp._accel.BACKEND`; both variants stay importable
(``*_numba`` / ``*_numpy``) so tests and the benchmark can compare them.
"""

import math

import numpy as np

from ._accel import HAVE_NUMBA, njit

__all__ = [
    "integrate_cavity",
    "ar1_filter",
    "psd_direct",
    "integrate_cavity_numpy",
    "ar1_filter_numpy",
    "psd_direct_numpy",
]


# --------------------------------------------------------------------------
# Cavity mean field: d(alpha)/dt = -[i(chi - delta) + kappa/2] alpha - i eta u(t)
# --------------------------------------------------------------------------


def integrate_cavity_numpy(jump_times, chis, kappa, delta_da, eta, t_on, t_off, dt, n_t):
    """RK4 integration of the driven, damped cavity field for many shots.

    ``jump_times`` is (n_shots, n_jumps) and padded with ``inf``; ``chis`` is
    (n_shots, n_jumps + 1), the dispersive shift in force before each jump.
    Steps that contain a jump are split at the jump time. The drive
    indicator is held at its value at each sub-interval midpoint.

    Returns alpha sampled at t_i = i*dt, shape (n_shots, n_t), alpha[:, 0] = 0.
    """
    jump_times = np.asarray(jump_times, dtype=np.float64)
    chis = np.asarray(chis, dtype=np.float64)
    n_shots = chis.shape[0]
    rows = np.arange(n_shots)
    alpha = np.zeros(n_shots, dtype=np.complex128)
    out = np.zeros((n_shots, n_t), dtype=np.complex128)
    seg = np.zeros(n_shots, dtype=np.int64)
    # extra +inf column so seg never runs past the jump table
    jt = np.concatenate([jump_times, np.full((n_shots, 1), np.inf)], axis=1)
    half_k = 0.5 * kappa

    for i in range(1, n_t):
        t0 = (i - 1) * dt
        t1 = i * dt
        tcur = np.full(n_shots, t0)
        while True:
            nxt = jt[rows, seg]
            h = np.minimum(nxt, t1) - tcur
            h = np.maximum(h, 0.0)
            mid = tcur + 0.5 * h
            u = ((mid >= t_on) & (mid < t_off)).astype(np.float64)
            z = 1j * (chis[rows, seg] - delta_da) + half_k
            drive = -1j * eta * u
            k1 = -z * alpha + drive
            k2 = -z * (alpha + 0.5 * h * k1) + drive
            k3 = -z * (alpha + 0.5 * h * k2) + drive
            k4 = -z * (alpha + h * k3) + drive
            alpha = alpha + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            tcur = tcur + h
            jumped = nxt <= t1
            if not jumped.any():
                break
            seg = seg + jumped
        out[:, i] = alpha
    return out


@njit(cache=True)
def _rk4_segment(alpha, z, drive, h):
    k1 = -z * alpha + drive
    k2 = -z * (alpha + 0.5 * h * k1) + drive
    k3 = -z * (alpha + 0.5 * h * k2) + drive
    k4 = -z * (alpha + h * k3) + drive
    return alpha + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


@njit(cache=True)
def _integrate_cavity_jit(jump_times, chis, kappa, delta_da, eta, t_on, t_off, dt, n_t):
    n_shots = chis.shape[0]
    n_jumps = jump_times.shape[1]
    out = np.zeros((n_shots, n_t), dtype=np.complex128)
    half_k = 0.5 * kappa
    for s in range(n_shots):
        alpha = 0.0 + 0.0j
        seg = 0
        for i in range(1, n_t):
            t0 = (i - 1) * dt
            t1 = i * dt
            tcur = t0
            while True:
                nxt = jump_times[s, seg] if seg < n_jumps else math.inf
                h = min(nxt, t1) - tcur
                if h < 0.0:
                    h = 0.0
                mid = tcur + 0.5 * h
                u = 1.0 if (mid >= t_on and mid < t_off) else 0.0
                z = 1j * (chis[s, seg] - delta_da) + half_k
                alpha = _rk4_segment(alpha, z, -1j * eta * u, h)
                tcur += h
                if nxt <= t1:
                    seg += 1
                else:
                    break
            out[s, i] = alpha
    return out


def integrate_cavity_numba(jump_times, chis, kappa, delta_da, eta, t_on, t_off, dt, n_t):
    return _integrate_cavity_jit(
        np.ascontiguousarray(jump_times, dtype=np.float64),
        np.ascontiguousarray(chis, dtype=np.float64),
        float(kappa), float(delta_da), float(eta), float(t_on), float(t_off), float(dt), int(n_t),
    )


# --------------------------------------------------------------------------
# AR(1): y[:, 0] = y0, y[:, i] = a * y[:, i - 1] + x[:, i]
# --------------------------------------------------------------------------


def ar1_filter_numpy(x, a, y0):
    x = np.asarray(x, dtype=np.float64)
    y = np.empty_like(x)
    y[:, 0] = y0
    for i in range(1, x.shape[1]):
        y[:, i] = a * y[:, i - 1] + x[:, i]
    return y


@njit(cache=True)
def _ar1_jit(x, a, y0):
    n, m = x.shape
    y = np.empty_like(x)
    for r in range(n):
        acc = y0[r]
        y[r, 0] = acc
        for i in range(1, m):
            acc = a * acc + x[r, i]
            y[r, i] = acc
    return y


def ar1_filter_numba(x, a, y0):
    x = np.ascontiguousarray(x, dtype=np.float64)
    y0 = np.broadcast_to(np.asarray(y0, dtype=np.float64), (x.shape[0],)).copy()
    return _ar1_jit(x, float(a), y0)


# --------------------------------------------------------------------------
# Direct spectrum sum: S[f] = sum_{j >= k} cos(2 pi f dt (j - k)) cov[j, k]
# --------------------------------------------------------------------------


def psd_direct_numpy(cov, freqs, dt):
    cov = np.asarray(cov, dtype=np.float64)
    n = cov.shape[0]
    lag_sums = np.array([np.trace(cov, offset=-m) for m in range(n)])
    lags = np.arange(n) * dt
    return np.cos(2.0 * np.pi * np.outer(freqs, lags)) @ lag_sums


@njit(cache=True)
def _psd_direct_jit(cov, freqs, dt):
    n = cov.shape[0]
    # lag sums first: O(n^2) once, then O(n) per frequency
    lag = np.zeros(n)
    for j in range(n):
        for k in range(j + 1):
            lag[j - k] += cov[j, k]
    out = np.zeros(freqs.shape[0])
    for q in range(freqs.shape[0]):
        w = 2.0 * math.pi * freqs[q] * dt
        acc = 0.0
        for m in range(n):
            acc += math.cos(w * m) * lag[m]
        out[q] = acc
    return out


def psd_direct_numba(cov, freqs, dt):
    return _psd_direct_jit(
        np.ascontiguousarray(cov, dtype=np.float64),
        np.ascontiguousarray(freqs, dtype=np.float64),
        float(dt),
    )


if HAVE_NUMBA:
    integrate_cavity = integrate_cavity_numba
    ar1_filter = ar1_filter_numba
    psd_direct = psd_direct_numba
else:
    integrate_cavity = integrate_cavity_numpy
    ar1_filter = ar1_filter_numpy
    psd_direct = psd_direct_numpy
