"""Derivative loss for a diagonal operator, shown with truncated series.

For eigenvalues lambda_n chosen so that the rate phi(lambda) = M3 m(lambda)
reaches n, data with Fourier weights a_n = exp(-phi_n/4) are compared with the
energies of the per-lambda activator solutions. Partial sums are accumulated in
log space. Finite truncation only gives trend evidence, so reports speak of a
divergence trend and never of divergence outright.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .activator import SeedCoefficient, activator_constants, build_activator
from .energy import solve_ode
from .errors import HypothesisViolated, RateTooSlow
from .keyquantity import compute_m
from .moduli import ClassParams, parse_modulus, parse_theta

LAMBDA_CAP = 1e12
DEFAULT_GRID = np.geomspace(1e2, LAMBDA_CAP, 1001)

# Demonstration classes. Small mu makes M3 large enough that M3*m(lambda)
# climbs through many integers below LAMBDA_CAP.
PAIRS = {
    "finite": ("holder:0.5", "power:1:100"),
    "infinite": ("logpower:3", "power:3:0.1"),
}
PAIR_MU = (1e-4, 2e-4)


def demo_class(pair: str, T0: float = 1.0):
    """(params, seed) for a named demonstration pair, with a constant seed."""
    from .activator import constant_seed
    om, th = PAIRS[pair]
    params = ClassParams(T0, *PAIR_MU, parse_modulus(om), parse_theta(th))
    return params, constant_seed(params, T1_frac=0.99, eta=0.99)


@dataclass(frozen=True)
class LambdaSequence:
    lambdas: tuple
    phis: tuple
    truncated_reason: Optional[str] = None

    def __len__(self):
        return len(self.lambdas)


def _rate(params, M3, lam):
    return M3 * compute_m(params, lam).m


def pick_lambda_sequence(params: ClassParams, n_max: int, seed: Optional[SeedCoefficient] = None,
                         grid: Optional[Sequence[float]] = None, strict: bool = False) -> LambdaSequence:
    """For n = 1..n_max, the smallest grid lambda beyond lambda_{n-1} with M3 m(lambda) >= n.

    When ``seed`` is given, each lambda must also admit an activator; failing
    grid points are skipped. If the grid runs out the sequence is truncated
    (``strict`` turns that into RateTooSlow).
    """
    if n_max < 1:
        raise ValueError("n_max must be positive")
    grid = np.asarray(DEFAULT_GRID if grid is None else grid, dtype=float)
    T1 = seed.T1 if seed is not None else 0.5 * params.T0
    M3 = activator_constants(params, T1).M3
    cache = {}

    def phi(i):
        if i not in cache:
            cache[i] = _rate(params, M3, float(grid[i]))
        return cache[i]

    lams, phis = [], []
    start = 0
    reason = None
    for n in range(1, n_max + 1):
        lo, hi = start, grid.size
        while lo < hi:  # phi is nondecreasing in lambda
            mid = (lo + hi) // 2
            if phi(mid) >= n:
                hi = mid
            else:
                lo = mid + 1
        i = lo
        while i < grid.size and seed is not None:
            try:
                build_activator(seed, float(grid[i]))
                break
            except HypothesisViolated:
                i += 1
        if i >= grid.size:
            reason = f"rate M3*m(lambda) does not reach {n} with an admissible lambda <= {grid[-1]:g}"
            break
        lams.append(float(grid[i]))
        phis.append(phi(i))
        start = i + 1
    if reason and strict:
        raise RateTooSlow(reason)
    return LambdaSequence(tuple(lams), tuple(phis), reason)


@dataclass(frozen=True)
class TrendWitness:
    """Acceleration evidence for a partial-sum sequence given by its log terms."""

    first_quartile_max: float
    last_quartile_min: float

    @property
    def holds(self) -> bool:
        return self.last_quartile_min > self.first_quartile_max


def trend_witness(log_terms: np.ndarray) -> TrendWitness:
    n = log_terms.size
    if n < 4:
        return TrendWitness(math.inf, -math.inf)
    q = max(1, n // 4)
    return TrendWitness(float(np.max(log_terms[:q])), float(np.min(log_terms[-q:])))


def converged_from(log_terms: np.ndarray, tol: float = 1e-8) -> Optional[int]:
    """First 1-based N after which every increment is below tol (None if the tail never settles)."""
    big = np.nonzero(log_terms >= math.log(tol))[0]
    N = 1 if big.size == 0 else int(big[-1]) + 2
    return N if N <= log_terms.size - 1 else None


@dataclass(frozen=True)
class SpectralDemo:
    lambdas: tuple
    phi: tuple
    beta: float
    gamma_reg: float
    t_probe: tuple
    log_E: np.ndarray  # (n, probes)
    delta_est: float
    truncated_reason: Optional[str]

    @property
    def log_a(self) -> np.ndarray:
        return -np.asarray(self.phi) / 4

    @property
    def a(self) -> np.ndarray:
        return np.exp(self.log_a)

    @property
    def data_log_terms(self) -> np.ndarray:
        return 4 * self.beta * np.log(self.lambdas) - np.asarray(self.phi) / 2

    @property
    def data_log_partial(self) -> np.ndarray:
        return np.logaddexp.accumulate(self.data_log_terms)

    def solution_log_terms(self, j: int) -> np.ndarray:
        return self.log_E[:, j] - np.asarray(self.phi) / 2 - 4 * self.gamma_reg * np.log(self.lambdas)

    def solution_log_partial(self, j: int) -> np.ndarray:
        return np.logaddexp.accumulate(self.solution_log_terms(j))

    @property
    def data_converged_from(self) -> Optional[int]:
        return converged_from(self.data_log_terms)

    def solution_trend(self, j: int) -> TrendWitness:
        return trend_witness(self.solution_log_terms(j))

    def lines(self):
        out = ["asymptotic demonstration with per-lambda activators (finite truncation: trend evidence only)",
               f"n={len(self.lambdas)} beta={self.beta!r} gamma={self.gamma_reg!r} delta_est={self.delta_est!r}"]
        if self.truncated_reason:
            out.append(f"sequence truncated: {self.truncated_reason}")
        N = self.data_converged_from
        out.append("data sum: increments below 1e-8 from N=" + (str(N) if N else "none (no convergence evidence)"))
        for j, t in enumerate(self.t_probe):
            w = self.solution_trend(j)
            out.append(f"solution sum at t={t!r}: divergence trend {'present' if w.holds else 'absent'} "
                       f"(first-quartile max log term {w.first_quartile_max!r}, "
                       f"last-quartile min log term {w.last_quartile_min!r})")
        return out

    def to_csv(self) -> str:
        head = ["n", "lambda_n", "phi_n", "a_n"]
        head += [f"logE_t{j}" for j in range(len(self.t_probe))]
        head += ["log_data_partial"] + [f"log_solution_partial_t{j}" for j in range(len(self.t_probe))]
        rows = [",".join(head)]
        dp = self.data_log_partial
        sp = [self.solution_log_partial(j) for j in range(len(self.t_probe))]
        for i, lam in enumerate(self.lambdas):
            vals = [str(i + 1), repr(lam), repr(self.phi[i]), repr(float(self.a[i]))]
            vals += [repr(float(x)) for x in self.log_E[i]]
            vals += [repr(float(dp[i]))] + [repr(float(s[i])) for s in sp]
            rows.append(",".join(vals))
        return "\n".join(rows) + "\n"


def probe_log_energy(seed: SeedCoefficient, lam: float, t_probe: Sequence[float]) -> np.ndarray:
    """log E_lambda(t) at the probes for the activator at lam, data (0, 1).

    The data are rescaled by the exact growth factor so that no intermediate
    value overflows; the logarithm is corrected afterwards.
    """
    coef, _, g = build_activator(seed, lam)
    shift = 0.5 * g.log_uprime_b
    tr = solve_ode(coef, lam, 0.0, math.exp(-shift), 100, extra_times=tuple(t_probe))
    idx = [int(np.nonzero(tr.times == t)[0][0]) for t in t_probe]
    return np.log(tr.E[idx]) + 2 * shift


def liminf_estimate(phis, lambdas) -> float:
    """Minimum of phi_n / log(lambda_n) over the last half of the sequence."""
    r = np.asarray(phis) / np.log(np.asarray(lambdas))
    return float(np.min(r[len(r) // 2:]))


def demo_loss(params: ClassParams, seed: SeedCoefficient, n_max: int, beta: Optional[float],
              gamma_reg: Optional[float], t_probe: Sequence[float],
              grid: Optional[Sequence[float]] = None) -> SpectralDemo:
    """Truncated data and solution series; beta or gamma_reg None means delta/16."""
    if not all(0 < t <= params.T0 for t in t_probe):
        raise ValueError("probe times must lie in (0, T0]")
    seq = pick_lambda_sequence(params, n_max, seed=seed, grid=grid)
    if not seq.lambdas:
        raise RateTooSlow(seq.truncated_reason or "empty sequence")
    delta = liminf_estimate(seq.phis, seq.lambdas)
    b = delta / 16 if beta is None else beta
    g = delta / 16 if gamma_reg is None else gamma_reg
    logE = np.array([probe_log_energy(seed, lam, t_probe) for lam in seq.lambdas])
    return SpectralDemo(seq.lambdas, seq.phis, b, g, tuple(float(t) for t in t_probe), logE, delta,
                        seq.truncated_reason)
