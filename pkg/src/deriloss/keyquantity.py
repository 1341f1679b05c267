"""The key quantity m(lambda) and the derivative-loss regime it predicts.

    m(lambda) = min_{0 <= s <= T0}  lambda*omega(1/lambda)*s + int_s^T0 theta

The objective is convex in ``s`` (its derivative ``g - theta(s)`` is
nondecreasing), so the minimizer is the crossing point ``theta(s) = g`` and is
found by bisection rather than by a generic minimizer.
"""

from __future__ import annotations

import enum
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DivergentObjective, GridTooSmall, PoorFit
from .moduli import ClassParams


class Branch(str, enum.Enum):
    OMEGA = "OmegaBranch"
    THETA = "ThetaBranch"


class Regime(str, enum.Enum):
    NO_LOSS = "NoLoss"
    ARBITRARILY_SMALL = "ArbitrarilySmall"
    FINITE = "Finite"
    INFINITE = "Infinite"


@dataclass(frozen=True)
class KeyQuantityResult:
    lam: float
    m: float
    s_star: float
    first_term: float
    second_term: float
    branch: Branch
    s_hat: Optional[float] = None

    @property
    def rate(self) -> float:
        """lambda * omega(1/lambda)."""
        return self.first_term / self.s_star if self.s_star > 0 else math.nan


def _bisect_decreasing(f, lo, hi, width):
    """Largest x in [lo, hi] with f(x) >= 0, for f nonincreasing, f(lo) >= 0 > f(hi)."""
    while hi - lo > width:
        mid = math.sqrt(lo * hi) if hi > 4 * lo and lo > 0 else 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if f(mid) >= 0:
            lo = mid
        else:
            hi = mid
    return lo


def compute_m(params: ClassParams, lam: float) -> KeyQuantityResult:
    """Minimum, minimizer and Λω/Λθ branch of the key quantity at ``lam``."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    T0, theta = params.T0, params.theta
    g = lam * params.omega(1.0 / lam)
    width = T0 * 1e-14

    if theta is None or theta(T0) >= g:
        s_star = T0
    else:
        if g <= 0 and theta.integrable is not True:
            raise DivergentObjective("lambda*omega(1/lambda) vanishes and theta is not integrable")
        lo = T0
        while theta(lo) < g and lo > T0 * 1e-300:
            lo *= 0.5
        if theta(lo) < g:
            s_star = 0.0
        else:
            s_star = _bisect_decreasing(lambda s: theta(s) - g, lo, min(2 * lo, T0), width)

    first = g * s_star
    second = 0.0 if theta is None else theta.integral(s_star, T0)
    m = first + second
    if first >= 0.5 * m:
        return KeyQuantityResult(lam, m, s_star, first, second, Branch.OMEGA)
    half = 0.5 * second
    s_hat = _bisect_decreasing(lambda x: theta.integral(x, T0) - half, s_star, T0, width)
    return KeyQuantityResult(lam, m, s_star, first, second, Branch.THETA, s_hat)


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("DERILOSS_THREADS", "1")))
    except ValueError:
        return 1


def m_curve(params: ClassParams, lambdas: Sequence[float]) -> list:
    lambdas = [float(x) for x in lambdas]
    n = _threads()
    if n == 1:
        return [compute_m(params, x) for x in lambdas]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(lambda x: compute_m(params, x), lambdas))


def geometric_grid(lam_min: float, lam_max: float, points: int) -> np.ndarray:
    return np.geomspace(lam_min, lam_max, points)


@dataclass(frozen=True)
class RegimeClassification:
    regime: Regime
    ratio_liminf_est: float
    ratio_limsup_est: float
    loss_bound: Optional[float]
    lambda_grid: tuple
    m_values: tuple
    tail_slope: float
    growth_exponent: Optional[float]

    @property
    def ratios(self):
        return tuple(m / math.log(x) for x, m in zip(self.lambda_grid, self.m_values))


def _check_grid(grid):
    grid = np.asarray(grid, dtype=float)
    if grid.size < 8:
        raise GridTooSmall("need at least 8 lambda values")
    if np.any(grid <= 1) or np.any(np.diff(grid) <= 0):
        raise GridTooSmall("lambda grid must be increasing and > 1")
    q = grid[1:] / grid[:-1]
    if np.max(np.abs(q / q[0] - 1)) > 1e-6:
        raise GridTooSmall("lambda grid must be geometric")
    if grid[-1] / grid[0] < 1e6 * (1 - 1e-12):
        raise GridTooSmall("lambda grid must span at least six decades")
    return grid


# Decision thresholds; see classify_regime.
FLAT_SLOPE = 1e-3
SMALL_SLOPE = 0.01
EXPONENT_TOL = 0.15


def classify_regime(params: ClassParams, lambda_grid, c0_factor: float = 10.0) -> RegimeClassification:
    """Label the growth of m(lambda) on a finite geometric grid.

    On the last third of the grid the local slope dm/dlog(lambda) is measured,
    together with its power-law trend q in log(lambda):

    * m flat (slope < 1e-3) and max m <= c0_factor * m(lambda_min): NoLoss;
    * slope < 0.01 or q <= -0.15 (slope dying out): ArbitrarilySmall;
    * |q| < 0.15 (m proportional to log lambda): Finite, loss_bound = max ratio;
    * q >= 0.15: Infinite.
    """
    grid = _check_grid(lambda_grid)
    results = m_curve(params, grid)
    m = np.array([r.m for r in results])
    L = np.log(grid)
    n_tail = max(3, grid.size // 3)
    tail = slice(grid.size - n_tail, grid.size)
    ratios = m / L
    lo, hi = float(ratios[tail].min()), float(ratios[tail].max())

    dm = np.diff(m)[grid.size - n_tail - 1:] / np.diff(L)[grid.size - n_tail - 1:]
    Lmid = 0.5 * (L[1:] + L[:-1])[grid.size - n_tail - 1:]
    tail_slope = float(dm[-1])
    exponent = None
    bound = None
    scale = max(1.0, float(np.max(np.abs(m))))
    if np.max(np.abs(dm)) < FLAT_SLOPE * scale and m.max() <= c0_factor * max(m[0], 1e-300):
        regime = Regime.NO_LOSS
    else:
        if np.all(dm > 0):
            exponent = float(np.polyfit(np.log(Lmid), np.log(dm), 1)[0])
        if tail_slope < SMALL_SLOPE or (exponent is not None and exponent <= -EXPONENT_TOL):
            regime = Regime.ARBITRARILY_SMALL
        elif exponent is not None and exponent < EXPONENT_TOL:
            regime = Regime.FINITE
            bound = hi
        else:
            regime = Regime.INFINITE
    return RegimeClassification(regime, lo, hi, bound, tuple(grid.tolist()), tuple(m.tolist()),
                                tail_slope, exponent)


@dataclass(frozen=True)
class GrowthFit:
    slope: float
    intercept: float
    r2: float


def fit_growth_exponent(params: ClassParams, lambda_grid, tail_fraction: float = 1 / 3,
                        min_r2: float = 0.99) -> GrowthFit:
    """Least-squares slope of log m against log lambda on the tail of the grid."""
    grid = np.asarray(lambda_grid, dtype=float)
    n_tail = max(3, int(round(grid.size * tail_fraction)))
    g = grid[-n_tail:]
    m = np.array([r.m for r in m_curve(params, g)])
    x, y = np.log(g), np.log(m)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot <= 1e-24 * max(1.0, float(np.sum(y**2))):
        return GrowthFit(0.0, float(y.mean()), 1.0)
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot
    if r2 < min_r2:
        raise PoorFit(f"tail R^2 = {r2:.4f} < {min_r2}", slope=float(slope), r2=r2)
    return GrowthFit(float(slope), float(intercept), r2)
