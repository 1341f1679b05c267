"""Independent reference computations used by the tests.

Nothing here calls into the package's integral or minimization code: moduli and
derivative bounds are re-typed from their formulas, integrals use fixed
Gauss-Legendre panels and minima use brute-force grids.
"""

import math

import numpy as np

GL_X, GL_W = np.polynomial.legendre.leggauss(8)


def omega_formula(key, s):
    kind, *args = key.split(":")
    s = np.asarray(s, dtype=float)
    L = -np.log(s)
    if kind == "linear":
        return s
    if kind == "holder":
        return s ** float(args[0])
    if kind == "loglip":
        return s * L
    if kind == "logpower":
        return s * L ** float(args[0])
    if kind == "rootexp":
        return s * np.exp(float(args[0]) * np.sqrt(L))
    if kind == "logloglip":
        return s * L * np.log(L)
    raise KeyError(key)


def theta_formula(key, t):
    kind, *args = key.split(":")
    t = np.asarray(t, dtype=float)
    with np.errstate(over="ignore"):
        if kind == "power":
            return float(args[1]) / t ** float(args[0])
        if kind == "logovert":
            return -float(args[0]) * np.log(t) / t
        if kind == "expinv":
            return float(args[0]) * np.exp(1 / t)
        if kind == "powexpinv":
            return float(args[1]) * np.exp(1 / t) / t ** float(args[0])
        if kind == "bounded":
            return np.full_like(t, float(args[0]))
    raise KeyError(key)


def theta_tail_integrals(key, s, T0):
    """int_{s_i}^{T0} theta for an increasing grid s (last point T0), by 8-point panels."""
    a, b = s[:-1], s[1:]
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    nodes = mid[:, None] + half[:, None] * GL_X[None, :]
    panel = half * (theta_formula(key, nodes) @ GL_W)
    return np.concatenate([np.cumsum(panel[::-1])[::-1], [0.0]])


def brute_force_m(omega_key, theta_key, lam, T0=1.0, points=100_000):
    """min over a geometric grid of s in (0, T0] of lambda*omega(1/lambda)*s + int_s^T0 theta."""
    g = lam * float(omega_formula(omega_key, 1.0 / lam))
    exp_kind = "exp" in theta_key
    lo = T0 / 700 if exp_kind else T0 * 1e-16
    s = np.geomspace(lo, T0, points)
    psi = g * s + theta_tail_integrals(theta_key, s, T0)
    i = int(np.argmin(psi))
    return float(psi[i]), float(s[i])


def holder_power1_m(lam, alpha=0.5, K=1.0):
    """Analytic m(lambda) for omega = sigma^alpha, theta = K/t, T0 = 1 (interior minimizer)."""
    g = lam ** (1 - alpha)
    s = K / g
    return g * s - K * math.log(s)


def block_phi_formula(eps, gamma, lam, t, a=0.0):
    x = gamma * lam * (t - a)
    return eps / (4 * gamma * lam) * np.sin(2 * x) + eps**2 / (64 * gamma**4 * lam**2) * np.sin(x) ** 4


def block_w_formula(eps, gamma, lam, t, a=0.0):
    x = gamma * lam * (t - a)
    return np.sin(x) / (gamma * lam) * np.exp(eps / (16 * gamma**3 * lam) * (x - 0.5 * np.sin(2 * x)))
