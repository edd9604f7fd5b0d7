"""Scalar inner loops: the theta root search and the servo RK4 integrator.

Everything here is written in the numba-compatible subset so the same
source runs compiled or, with ``ROBUST_MPC_NO_JIT=1``, as plain Python.
"""

import math

import numpy as np

from ._accel import njit

# Layout of the packed servo parameter vector used by the plant kernels.
P_L, P_JM, P_BM, P_R, P_KT, P_RHO, P_KTH, P_JL, P_BL = range(9)
P_AL0, P_AL1, P_AL2, P_AM0, P_AM1, P_AM2, P_VSAT = range(9, 16)
N_PARAMS = 16

# status codes returned by theta_bisect
THETA_OK = 0
THETA_NO_BRACKET = 1
THETA_NO_CONVERGENCE = 2


@njit
def gamma_eig(lam, theta):
    """sum_i log(1 - theta lam_i) + 1/(1 - theta lam_i) - 1; inf outside the domain."""
    acc = 0.0
    for i in range(lam.shape[0]):
        s = 1.0 - theta * lam[i]
        if s <= 0.0:
            return np.inf
        acc += math.log(s) + 1.0 / s - 1.0
    return acc


@njit
def theta_bisect(lam, c, tol, max_iter):
    """Root of gamma_eig(lam, .) = c on (0, 1/max(lam)).

    Returns ``(theta, residual, status)``.
    """
    lmax = 0.0
    for i in range(lam.shape[0]):
        if lam[i] > lmax:
            lmax = lam[i]
    if lmax <= 0.0:
        return 0.0, -c, THETA_NO_BRACKET

    # upper end (1 - 2^-k)/lmax walks toward the pole where gamma -> +inf
    hi = 0.5 / lmax
    g_hi = gamma_eig(lam, hi)
    k = 1
    while g_hi <= c:
        k += 1
        if k > 60:
            return hi, g_hi - c, THETA_NO_BRACKET
        hi = (1.0 - 2.0 ** (-k)) / lmax
        g_hi = gamma_eig(lam, hi)
    lo = 0.0

    # bisect until the bracket collapses to adjacent doubles, keeping the
    # midpoint with the smallest residual
    best, best_r = hi, g_hi - c
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        r = gamma_eig(lam, mid) - c
        if abs(r) < abs(best_r):
            best, best_r = mid, r
        if r == 0.0:
            break
        if r < 0.0:
            lo = mid
        else:
            hi = mid
    if abs(best_r) <= tol:
        return best, best_r, THETA_OK
    return best, best_r, THETA_NO_CONVERGENCE


@njit
def sgn(x):
    if x > 0.0:
        return 1.0
    if x < 0.0:
        return -1.0
    return 0.0


@njit
def friction(omega, a0, a1, a2):
    s = sgn(omega)
    return a0 * s + a1 * math.exp(-a2 * abs(omega)) * s


@njit
def servo_rhs(s, volts, prm, out):
    """Time derivative of [theta_l, omega_l, theta_m, omega_m, i_m] into ``out``.

    With zero inductance the current is algebraic and ``out[4]`` is 0.
    """
    th_l = s[0]
    w_l = s[1]
    th_m = s[2]
    w_m = s[3]
    L = prm[P_L]
    R = prm[P_R]
    kt = prm[P_KT]
    rho = prm[P_RHO]

    t_s = prm[P_KTH] / rho * (th_m / rho - th_l)
    if L > 0.0:
        i_m = s[4]
        out[4] = (volts - R * i_m - kt * w_m) / L
    else:
        i_m = (volts - kt * w_m) / R
        out[4] = 0.0

    tf_l = friction(w_l, prm[P_AL0], prm[P_AL1], prm[P_AL2])
    tf_m = friction(w_m, prm[P_AM0], prm[P_AM1], prm[P_AM2])
    out[0] = w_l
    out[1] = (rho * t_s - prm[P_BL] * w_l - tf_l) / prm[P_JL]
    out[2] = w_m
    out[3] = (kt * i_m - t_s - prm[P_BM] * w_m - tf_m) / prm[P_JM]


@njit
def servo_rk4(s0, volts, prm, T, substeps):
    """Classical RK4 over one held-input sample period. Returns a new state array."""
    vsat = prm[P_VSAT]
    if volts > vsat:
        volts = vsat
    elif volts < -vsat:
        volts = -vsat
    n = s0.shape[0]
    h = T / substeps
    s = s0.copy()
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    tmp = np.empty(n)
    for _ in range(substeps):
        servo_rhs(s, volts, prm, k1)
        for j in range(n):
            tmp[j] = s[j] + 0.5 * h * k1[j]
        servo_rhs(tmp, volts, prm, k2)
        for j in range(n):
            tmp[j] = s[j] + 0.5 * h * k2[j]
        servo_rhs(tmp, volts, prm, k3)
        for j in range(n):
            tmp[j] = s[j] + h * k3[j]
        servo_rhs(tmp, volts, prm, k4)
        for j in range(n):
            s[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
    if prm[P_L] <= 0.0:
        s[4] = (volts - prm[P_KT] * s[3]) / prm[P_R]
    return s


@njit
def servo_trajectory(s0, volts_seq, prm, T, substeps):
    """Apply a piecewise-constant voltage sequence; row k of the result is the state at k*T."""
    n_steps = volts_seq.shape[0]
    traj = np.empty((n_steps + 1, s0.shape[0]))
    traj[0] = s0
    s = s0.copy()
    for k in range(n_steps):
        s = servo_rk4(s, volts_seq[k], prm, T, substeps)
        traj[k + 1] = s
    return traj
