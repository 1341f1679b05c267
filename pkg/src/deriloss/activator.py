"""Oscillatory building blocks and the asymptotic-activator coefficients.

A block on ``[a, b]`` replaces the constant ``gamma**2`` by ``gamma**2 - phi``
where ``phi`` oscillates with period ``pi / (gamma*lambda)``; the matching
solution ``w`` grows exponentially in closed form. The omega-construction uses
one long block of fixed amplitude, the theta-construction a train of one-period
blocks whose amplitudes follow theta.

Endpoints are stored as integer multiples of ``2*pi / (gamma*lambda)`` and
reconstructed from the integers, so junctions never drift.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import mpmath
import numpy as np

from .errors import EmptySubdivision, HypothesisViolated, NotClassMember, OutOfInterval
from .keyquantity import Branch, KeyQuantityResult, _bisect_decreasing, compute_m
from .moduli import ClassParams

TWO_PI = 2.0 * math.pi


# ------------------------------------------------------------------ constants


@dataclass(frozen=True)
class ActivatorConstants:
    nu1: float
    nu2: float
    M1: float
    M2: float
    M3: float
    log_M4: float

    @property
    def M4(self) -> float:
        return math.exp(self.log_M4)


def activator_constants(params: ClassParams, T1: float) -> ActivatorConstants:
    mu1, mu2 = params.mu1, params.mu2
    nu1 = min(1.0, math.sqrt(mu1) / math.pi)
    M1 = (max(1.0, mu2) / min(1.0, mu1)) ** 2
    M2 = 1.0 / mu1 + 1.0 / math.sqrt(mu1)
    M3 = nu1 / (128.0 * mu2)
    tail = params.theta.integral(T1, params.T0) if params.theta is not None else 0.0
    log_M4 = (math.log(min(1.0, 1.0 / mu2)) - tail / mu1 - TWO_PI
              - params.omega(1.0) / (8.0 * mu2))
    return ActivatorConstants(nu1, nu1 / 2.0, M1, M2, M3, log_M4)


# ------------------------------------------------------------------ the block


PHASE_EXACT_LIMIT = 1e7  # beyond this many radians, phases are reduced in extended precision


def node_phase(gl: float, t, n):
    """gl*t - 2*pi*n, reduced in extended precision when the phase is large."""
    t = np.asarray(t, dtype=float)
    n = np.asarray(n)
    if t.size == 0 or gl * float(np.max(np.abs(t))) < PHASE_EXACT_LIMIT:
        return gl * t - TWO_PI * n
    with mpmath.workdps(40):
        g, tp = mpmath.mpf(gl), 2 * mpmath.pi
        tb, nb = np.broadcast_arrays(t, n)
        out = [float(g * mpmath.mpf(float(x)) - tp * int(k)) for x, k in zip(tb.ravel().tolist(), nb.ravel().tolist())]
    return np.array(out).reshape(tb.shape)


def offset_phase(k: float, t, t0: float):
    """k*(t - t0) with the same extended-precision rule."""
    t = np.asarray(t, dtype=float)
    if t.size == 0 or k * float(np.max(np.abs(t - t0))) < PHASE_EXACT_LIMIT:
        return k * (t - t0)
    with mpmath.workdps(40):
        kk, z = mpmath.mpf(k), mpmath.mpf(t0)
        out = [float(kk * (mpmath.mpf(x) - z)) for x in t.ravel().tolist()]
    return np.array(out).reshape(t.shape)


def snap_multiplier(t: float, gl: float, tol: float = 1e-9) -> int:
    """Integer n with t = 2*pi*n/gl, or OutOfInterval if t is not such a point."""
    x = t * gl / TWO_PI
    n = round(x)
    if abs(x - n) > tol:
        raise OutOfInterval(f"{t!r} is not a multiple of 2pi/(gamma*lambda) (offset {x - n:.3g})")
    return int(n)


@dataclass(frozen=True)
class BlockParams:
    """Amplitude ``eps``, base speed ``gamma`` and frequency ``lam`` of a block
    living on ``[2*pi*na/(gamma*lam), 2*pi*nb/(gamma*lam)]``."""

    eps: float
    gamma: float
    lam: float
    na: int
    nb: int
    check: bool = field(default=True, compare=False)

    def __post_init__(self):
        if not (self.eps > 0 and self.gamma > 0 and self.lam > 0):
            raise ValueError("eps, gamma, lambda must be positive")
        if not 0 <= self.na < self.nb:
            raise ValueError("need 0 <= a < b")
        if self.check and self.eps > 8 * self.gamma**3 * self.lam:
            raise HypothesisViolated(["eps <= 8 gamma^3 lambda"])

    @classmethod
    def from_endpoints(cls, eps, gamma, lam, a, b, check=True):
        gl = gamma * lam
        return cls(eps, gamma, lam, snap_multiplier(a, gl), snap_multiplier(b, gl), check)

    @property
    def gl(self) -> float:
        return self.gamma * self.lam

    @property
    def a(self) -> float:
        return TWO_PI * self.na / self.gl

    @property
    def b(self) -> float:
        return TWO_PI * self.nb / self.gl

    @property
    def delta(self) -> float:
        """Normalized amplitude eps / (4 gamma^3 lambda), at most 2."""
        return self.eps / (4.0 * self.gamma**3 * self.lam)

    def _tau(self, t):
        t = np.asarray(t, dtype=float)
        a, b = self.a, self.b
        slack = 1e-12 * max(1.0, b)
        if np.any(t < a - slack) or np.any(t > b + slack):
            raise OutOfInterval(f"t outside [{a:.6g}, {b:.6g}]")
        return node_phase(self.gl, t, self.na)


def _phi(eps, gamma, lam, tau):
    q = eps / (4.0 * gamma * lam)
    s = np.sin(tau)
    return q * np.sin(2 * tau) + (q * q / (4 * gamma**2)) * s**4


def _phi_prime(eps, gamma, lam, tau):
    s, c = np.sin(tau), np.cos(tau)
    return 0.5 * eps * np.cos(2 * tau) + eps**2 / (16 * gamma**3 * lam) * s**3 * c


def _phi_integral(eps, gamma, lam, tau):
    """Integral of phi dt from the block start up to local phase tau."""
    q = eps / (4.0 * gamma * lam)
    quart = 3 * tau / 8 - np.sin(2 * tau) / 4 + np.sin(4 * tau) / 32
    return (-0.5 * q * (np.cos(2 * tau) - 1) + q * q / (4 * gamma**2) * quart) / (gamma * lam)


def _w(eps, gamma, lam, tau):
    gl = gamma * lam
    d = eps / (4 * gamma**3 * lam)
    expo = np.exp(0.25 * d * tau - 0.125 * d * np.sin(2 * tau))
    s, c = np.sin(tau), np.cos(tau)
    w = s / gl * expo
    dw = c * expo + s / gl * (eps / (8 * gamma**2)) * s * s * expo
    return w, dw


def _unwrap(x):
    return float(x) if np.ndim(x) == 0 else x


def block_phi(p: BlockParams, t):
    return _unwrap(_phi(p.eps, p.gamma, p.lam, p._tau(t)))


def block_phi_prime(p: BlockParams, t):
    return _unwrap(_phi_prime(p.eps, p.gamma, p.lam, p._tau(t)))


def block_w(p: BlockParams, t):
    """Closed-form solution on the block with data (0, 1) at ``a``: returns (w, w')."""
    w, dw = _w(p.eps, p.gamma, p.lam, p._tau(t))
    return _unwrap(w), _unwrap(dw)


def block_final_log_slope(p: BlockParams) -> float:
    """log w'(b) = eps (b - a) / (16 gamma^2)."""
    return p.eps * (TWO_PI * (p.nb - p.na) / p.gl) / (16 * p.gamma**2)


# ------------------------------------------------------------------ segments


@dataclass(frozen=True)
class ConstantSegment:
    t0: float
    t1: float
    value: float
    aligned_lam: Optional[float] = None  # lambda for which t1 - t0 spans whole periods

    def value_at(self, t):
        return np.full_like(t, self.value)

    def deriv_at(self, t):
        return np.zeros_like(t)

    def integral_at(self, t):
        return self.value * (t - self.t0)


@dataclass(frozen=True)
class BlockSegment:
    block: BlockParams

    @property
    def t0(self):
        return self.block.a

    @property
    def t1(self):
        return self.block.b

    def _tau(self, t):
        return node_phase(self.block.gl, t, self.block.na)

    def value_at(self, t):
        p = self.block
        return p.gamma**2 - _phi(p.eps, p.gamma, p.lam, self._tau(t))

    def deriv_at(self, t):
        p = self.block
        return -_phi_prime(p.eps, p.gamma, p.lam, self._tau(t))

    def integral_at(self, t):
        p = self.block
        return p.gamma**2 * (t - p.a) - _phi_integral(p.eps, p.gamma, p.lam, self._tau(t))


MATERIALIZE_LIMIT = 50_000_000
DIRECT_SUM_LIMIT = 2_000_000
_EM_HEAD = 1000


@dataclass(frozen=True)
class BlockTrain:
    """Consecutive one-period blocks on [t_{i-1}, t_i], t_i = 2*pi*(na + i)/(gamma*lam).

    Block i has amplitude nu * theta(t_i); amplitudes are evaluated on demand so
    that trains with billions of blocks stay cheap.
    """

    gamma: float
    lam: float
    na: int
    nb: int
    nu: float
    theta: object = field(compare=False)

    def __post_init__(self):
        if self.nb <= self.na:
            raise EmptySubdivision(f"k = {self.nb - self.na}")

    @property
    def gl(self):
        return self.gamma * self.lam

    @property
    def k(self) -> int:
        return self.nb - self.na

    @property
    def t0(self):
        return TWO_PI * self.na / self.gl

    @property
    def t1(self):
        return TWO_PI * self.nb / self.gl

    @property
    def spacing(self) -> float:
        return TWO_PI / self.gl

    def node(self, i):
        """t_i for integer (array) i."""
        return TWO_PI * (self.na + np.asarray(i)) / self.gl

    @property
    def nodes(self) -> np.ndarray:
        """t_0, ..., t_k."""
        self._guard()
        return self.node(np.arange(self.k + 1))

    def _guard(self):
        if self.k > MATERIALIZE_LIMIT:
            raise ValueError(f"train of {self.k} blocks is too long to materialize")

    def eps_at(self, idx):
        """Amplitude of block idx+1 (0-based idx)."""
        return self.nu * self.theta(self.node(np.asarray(idx) + 1))

    @property
    def eps(self) -> np.ndarray:
        self._guard()
        return self.eps_at(np.arange(self.k))

    def block(self, i: int) -> BlockParams:
        """Block i (1-based) on [t_{i-1}, t_i]."""
        return BlockParams(float(self.eps_at(i - 1)), self.gamma, self.lam, self.na + i - 1, self.na + i)

    def locate(self, t):
        """Sub-block index (0-based) and local phase for each t."""
        t = np.asarray(t, dtype=float)
        x = (t - self.t0) * self.gl / TWO_PI
        idx = np.clip(np.floor(x).astype(np.int64), 0, self.k - 1)
        tau = node_phase(self.gl, t, self.na + idx)
        # floor may land one block off near a node; the phase tells
        up = tau >= TWO_PI
        down = tau < 0
        idx = np.clip(idx + up - down, 0, self.k - 1)
        if up.any() or down.any():
            tau = node_phase(self.gl, t, self.na + idx)
        return idx, np.clip(tau, 0.0, TWO_PI)

    def theta_sum(self, n):
        """sum_{i=1}^{n} theta(t_i) for each integer n (array)."""
        n = np.asarray(n, dtype=np.int64)
        out = np.empty(n.shape, dtype=float)
        flat = n.ravel()
        res = out.ravel()
        small = flat <= DIRECT_SUM_LIMIT
        if small.any():
            top = int(flat[small].max())
            cs = np.concatenate([[0.0], np.cumsum(self.theta(self.node(np.arange(1, top + 1))))]) if top else np.zeros(1)
            res[small] = cs[flat[small]]
        for j in np.nonzero(~small)[0]:
            res[j] = self._euler_maclaurin(int(flat[j]))
        return out

    def _euler_maclaurin(self, n):
        th, h = self.theta, self.spacing
        head = float(np.sum(th(self.node(np.arange(1, _EM_HEAD + 1)))))
        tp, tq = float(self.node(_EM_HEAD + 1)), float(self.node(n))
        integral = th.integral(tp, tq)
        fp, fq = float(th(tp)), float(th(tq))
        dfp = (float(th(tp + h)) - float(th(tp - h))) / (2 * h)
        dfq = (float(th(tq + h)) - float(th(tq - h))) / (2 * h)
        return head + integral / h + 0.5 * (fp + fq) + h / 12 * (dfq - dfp)

    def riemann_sum(self) -> float:
        """sum_i theta(t_i) (t_i - t_{i-1})."""
        return float(self.theta_sum(self.k)) * self.spacing

    def value_at(self, t):
        idx, tau = self.locate(t)
        return self.gamma**2 - _phi(self.eps_at(idx), self.gamma, self.lam, tau)

    def deriv_at(self, t):
        idx, tau = self.locate(t)
        return -_phi_prime(self.eps_at(idx), self.gamma, self.lam, tau)

    def integral_at(self, t):
        idx, tau = self.locate(t)
        q = self.eps / (4.0 * self.gamma * self.lam)
        full = (q * q / (4 * self.gamma**2)) * (3 * math.pi / 4) / self.gl
        cum = np.concatenate([[0.0], np.cumsum(full)])
        return self.gamma**2 * (t - self.t0) - cum[idx] - _phi_integral(self.eps_at(idx), self.gamma, self.lam, tau)


@dataclass(frozen=True)
class BaselineSegment:
    """The seed's tail on ``[t0, t1]``; functions are vectorized."""

    t0: float
    t1: float
    func: Callable = field(compare=False)
    deriv: Optional[Callable] = field(default=None, compare=False)
    integral: Optional[Callable] = field(default=None, compare=False)  # F(t) = int_t0^t func

    def value_at(self, t):
        return np.asarray(self.func(t), dtype=float) * np.ones_like(t)

    def deriv_at(self, t):
        if self.deriv is None:
            return np.full_like(t, np.nan)
        return np.asarray(self.deriv(t), dtype=float) * np.ones_like(t)

    def integral_at(self, t):
        if self.integral is not None:
            return np.asarray(self.integral(t), dtype=float) * np.ones_like(t)
        from scipy import integrate

        return np.array([integrate.quad(self.func, self.t0, float(x), epsabs=0, epsrel=1e-12, limit=200)[0]
                         for x in np.atleast_1d(t)]).reshape(np.shape(t))


# ------------------------------------------------------------------ coefficients


@dataclass(frozen=True)
class PiecewiseCoefficient:
    """A coefficient on [0, T0] assembled from contiguous typed segments."""

    segments: tuple
    T0: float
    provenance: Optional[Branch] = None
    a_lambda: Optional[float] = None
    b_lambda: Optional[float] = None
    lam: Optional[float] = None
    gamma: Optional[float] = None

    def __post_init__(self):
        if not self.segments:
            raise ValueError("no segments")
        if self.segments[0].t0 != 0.0:
            raise ValueError("segments must start at 0")
        for s0, s1 in zip(self.segments[:-1], self.segments[1:]):
            if abs(s0.t1 - s1.t0) > 1e-13 * max(1.0, self.T0):
                raise ValueError(f"gap or overlap between segments at {s0.t1!r} / {s1.t0!r}")
        if abs(self.segments[-1].t1 - self.T0) > 1e-13 * max(1.0, self.T0):
            raise ValueError("segments must end at T0")

    @property
    def edges(self) -> np.ndarray:
        return np.array([s.t0 for s in self.segments] + [self.T0])

    @property
    def train(self) -> Optional[BlockTrain]:
        for s in self.segments:
            if isinstance(s, BlockTrain):
                return s
        return None

    @property
    def subdivision(self) -> Optional[np.ndarray]:
        tr = self.train
        return None if tr is None else tr.nodes

    def _index(self, t):
        starts = np.array([s.t0 for s in self.segments])
        return np.clip(np.searchsorted(starts, t, side="right") - 1, 0, len(self.segments) - 1)

    def _dispatch(self, t, method):
        scalar = np.ndim(t) == 0
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty_like(t)
        idx = self._index(t)
        for j in np.unique(idx):
            mask = idx == j
            out[mask] = getattr(self.segments[j], method)(t[mask])
        return float(out[0]) if scalar else out

    def __call__(self, t):
        return self._dispatch(t, "value_at")

    def derivative(self, t):
        return self._dispatch(t, "deriv_at")

    def cumulative_integral(self, t):
        """Integral of c over [0, t] for 0 <= t <= T0."""
        scalar = np.ndim(t) == 0
        t = np.atleast_1d(np.asarray(t, dtype=float))
        offsets = [0.0]
        for s in self.segments[:-1]:
            offsets.append(offsets[-1] + float(np.atleast_1d(s.integral_at(np.array([s.t1])))[0]))
        idx = self._index(t)
        out = np.empty_like(t)
        for j in np.unique(idx):
            mask = idx == j
            out[mask] = offsets[j] + self.segments[j].integral_at(t[mask])
        return float(out[0]) if scalar else out

    def to_csv(self, points: int) -> str:
        """Header block of segment metadata (lines starting with '#') then t,c,dc rows."""
        if points < 2:
            raise ValueError("need at least 2 points")
        t = np.linspace(0.0, self.T0, points)
        c, dc = self(t), self.derivative(t)
        out = [f"# {line}" for line in self.describe()]
        out.append("t,c,dc")
        out.extend(f"{a!r},{b!r},{d!r}" for a, b, d in zip(t.tolist(), c.tolist(), dc.tolist()))
        return "\n".join(out) + "\n"

    def describe(self) -> list:
        lines = [f"T0={self.T0!r}", f"provenance={self.provenance.value if self.provenance else 'none'}"]
        if self.lam is not None:
            lines.append(f"lambda={self.lam!r} gamma={self.gamma!r}")
        if self.a_lambda is not None:
            lines.append(f"a_lambda={self.a_lambda!r} b_lambda={self.b_lambda!r}")
        for s in self.segments:
            if isinstance(s, ConstantSegment):
                lines.append(f"segment Constant [{s.t0!r}, {s.t1!r}] value={s.value!r}")
            elif isinstance(s, BlockSegment):
                lines.append(f"segment Block [{s.t0!r}, {s.t1!r}] eps={s.block.eps!r}")
            elif isinstance(s, BlockTrain):
                lines.append(f"segment BlockTrain [{s.t0!r}, {s.t1!r}] k={s.k} "
                             f"eps_first={float(s.eps_at(0))!r} eps_last={float(s.eps_at(s.k - 1))!r}")
            else:
                lines.append(f"segment Baseline [{s.t0!r}, {s.t1!r}]")
        return lines


# ------------------------------------------------------------------ seeds


@dataclass(frozen=True)
class SeedCoefficient:
    """A class member equal to gamma**2 on [0, T1] with (1 - eta) omega-slack.

    ``tail`` (vectorized) describes c on [T1, T0]; None means constant gamma**2.
    """

    params: ClassParams
    T1: float
    gamma: float
    eta: float
    tail: Optional[Callable] = field(default=None, compare=False)
    tail_prime: Optional[Callable] = field(default=None, compare=False)
    tail_integral: Optional[Callable] = field(default=None, compare=False)

    def __post_init__(self):
        p = self.params
        if not 0 < self.T1 < p.T0:
            raise ValueError("T1 must lie in (0, T0)")
        if not p.mu1 < self.gamma**2 < p.mu2:
            raise ValueError("gamma^2 must lie in (mu1, mu2)")
        if not 0 < self.eta < 1:
            raise ValueError("eta must lie in (0, 1)")

    def __call__(self, t):
        scalar = np.ndim(t) == 0
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.full_like(t, self.gamma**2)
        if self.tail is not None:
            m = t > self.T1
            out[m] = self.tail(t[m])
        return float(out[0]) if scalar else out

    def derivative(self, t):
        scalar = np.ndim(t) == 0
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.zeros_like(t)
        if self.tail is not None:
            m = t > self.T1
            out[m] = self.tail_prime(t[m]) if self.tail_prime is not None else np.nan
        return float(out[0]) if scalar else out

    def tail_segment(self, t0: float):
        """Segment describing the seed on [t0, T0], t0 <= T1 in the constant zone."""
        T0, g2 = self.params.T0, self.gamma**2
        if self.tail is None:
            return [ConstantSegment(t0, T0, g2)]
        segs = []
        if t0 < self.T1:
            segs.append(ConstantSegment(t0, self.T1, g2))
        segs.append(BaselineSegment(self.T1, T0, self.tail, self.tail_prime, self.tail_integral))
        return segs

    def as_coefficient(self) -> PiecewiseCoefficient:
        return PiecewiseCoefficient(tuple(self.tail_segment(0.0)), self.params.T0)

    def validate(self, samples: int = 20000) -> "MembershipReport":
        return check_class_membership(self, self.params, samples=samples, omega_factor=1.0 - self.eta)


def constant_seed(params: ClassParams, T1_frac: float = 0.9, eta: float = 0.9,
                  gamma2_frac: float = 0.5) -> SeedCoefficient:
    g2 = params.mu1 + gamma2_frac * (params.mu2 - params.mu1)
    return SeedCoefficient(params, T1_frac * params.T0, math.sqrt(g2), eta)


def smooth_seed(params: ClassParams, T1_frac: float = 0.9, eta: float = 0.5,
                gamma2_frac: float = 0.5, sign: float = 1.0) -> SeedCoefficient:
    """Seed whose tail rises (or falls) along a half cosine on [T1, T0].

    The amplitude is the largest one keeping half of every slack: hyperbolicity,
    (1 - eta) omega-continuity and the theta bound at T0.
    """
    T0 = params.T0
    T1 = T1_frac * T0
    g2 = params.mu1 + gamma2_frac * (params.mu2 - params.mu1)
    D = T0 - T1
    amp = 0.5 * min(g2 - params.mu1, params.mu2 - g2)
    lip_cap = 0.5 * (1 - eta) * params.omega(T0) / T0
    if params.theta is not None:
        lip_cap = min(lip_cap, 0.5 * params.theta(T0))
    amp = min(amp, lip_cap * 2 * D / math.pi) * (1.0 if sign >= 0 else -1.0)
    k = math.pi / D

    def tail(t):
        return g2 + 0.5 * amp * (1 - np.cos(k * (t - T1)))

    def tail_prime(t):
        return 0.5 * amp * k * np.sin(k * (t - T1))

    def tail_integral(t):
        x = t - T1
        return g2 * x + 0.5 * amp * (x - np.sin(k * x) / k)

    return SeedCoefficient(params, T1, math.sqrt(g2), eta, tail, tail_prime, tail_integral)


def seed_from_class_member(c: Callable, params: ClassParams, epsilon: float,
                           derivative: Optional[Callable] = None, samples: int = 20000) -> SeedCoefficient:
    """Flatten c on [0, epsilon] and shrink it toward the middle of [mu1, mu2]."""
    if not 0 < epsilon < min(1.0, params.T0):
        raise ValueError("need 0 < epsilon < min(1, T0)")
    report = check_class_membership(c, params, samples=samples, derivative=derivative)
    if not report.ok:
        raise NotClassMember("; ".join(report.lines()))
    mid = 0.5 * (params.mu1 + params.mu2)
    g2 = (1 - epsilon) * float(c(np.array([epsilon]))[0]) + epsilon * mid

    def tail(t):
        return (1 - epsilon) * np.asarray(c(t), dtype=float) + epsilon * mid

    tail_prime = None if derivative is None else (lambda t: (1 - epsilon) * np.asarray(derivative(t), dtype=float))
    return SeedCoefficient(params, epsilon, math.sqrt(g2), epsilon, tail, tail_prime)


# ------------------------------------------------------------------ constructions


def _common_hypotheses(seed, lam, nu, a, b):
    p = seed.params
    g = seed.gamma
    w = p.omega(1.0 / lam)
    failed = []
    if nu * w > 8 * g**3:
        failed.append("nu*omega(1/lambda) <= 8 gamma^3")
    if nu / (2 * g) * w > min(g**2 - p.mu1, p.mu2 - g**2):
        failed.append("(nu/2gamma)*omega(1/lambda) <= hyperbolicity margin")
    if not 0 < a < b < seed.T1:
        failed.append("0 < a < b < T1")
    elif p.omega(b) > seed.eta * p.omega(seed.T1 - b):
        failed.append("omega(b) <= eta*omega(T1 - b)")
    return failed


def _assemble(seed, lam, middle, provenance, a, b):
    g2 = seed.gamma**2
    segs = [ConstantSegment(0.0, a, g2, aligned_lam=lam), middle]
    segs.extend(seed.tail_segment(b))
    return PiecewiseCoefficient(tuple(segs), seed.params.T0, provenance, a, b, lam, seed.gamma)


def omega_construction(seed: SeedCoefficient, lam: float, na: Optional[int] = None,
                       nb: Optional[int] = None) -> PiecewiseCoefficient:
    """Single block of amplitude nu1*lambda*omega(1/lambda) on [a, b] = 2pi[na, nb]/(gamma lambda).

    Without explicit multipliers the interval comes from the key-quantity minimizer.
    """
    p = seed.params
    if na is None or nb is None:
        na, nb = _default_interval(seed, lam, Branch.OMEGA)
    consts = activator_constants(p, seed.T1)
    gl = seed.gamma * lam
    a, b = TWO_PI * na / gl, TWO_PI * nb / gl
    failed = _common_hypotheses(seed, lam, consts.nu1, a, b)
    rate = lam * p.omega(1.0 / lam)
    if p.theta is not None and b > 0 and consts.nu1 * rate > p.theta(b):
        failed.append("nu1*lambda*omega(1/lambda) <= theta(b)")
    if failed:
        raise HypothesisViolated(failed, f"lambda={lam:g}")
    block = BlockParams(consts.nu1 * rate, seed.gamma, lam, na, nb)
    return _assemble(seed, lam, BlockSegment(block), Branch.OMEGA, a, b)


def theta_construction(seed: SeedCoefficient, lam: float, na: Optional[int] = None,
                       nb: Optional[int] = None) -> PiecewiseCoefficient:
    """Train of one-period blocks with amplitudes nu2*theta(t_i) on [a, b]."""
    p = seed.params
    if p.theta is None:
        raise HypothesisViolated(["theta present"])
    if na is None or nb is None:
        na, nb = _default_interval(seed, lam, Branch.THETA)
    if nb <= na:
        raise EmptySubdivision(f"k = {nb - na}")
    consts = activator_constants(p, seed.T1)
    gl = seed.gamma * lam
    a, b = TWO_PI * na / gl, TWO_PI * nb / gl
    failed = _common_hypotheses(seed, lam, consts.nu2, a, b)
    if lam * p.omega(1.0 / lam) < p.theta(a) * (1 - 1e-12):
        failed.append("lambda*omega(1/lambda) >= theta(a)")
    if failed:
        raise HypothesisViolated(failed, f"lambda={lam:g}")
    train = BlockTrain(seed.gamma, lam, na, nb, consts.nu2, p.theta)
    return _assemble(seed, lam, train, Branch.THETA, a, b)


@dataclass(frozen=True)
class LowerBoundGuarantee:
    lam: float
    branch: Branch
    a_lambda: float
    b_lambda: float
    m: float
    M3: float
    log_M4: float
    log_uprime_b: float  # closed-form log u'(b) for data (0, 1)
    deviation_bound: float  # (nu2/gamma) omega(1/lambda)

    @property
    def log_bound(self) -> float:
        """log of M4 exp(2 M3 m)."""
        return self.log_M4 + 2 * self.M3 * self.m


def activator_interval(seed: SeedCoefficient, kq: KeyQuantityResult):
    """Integer multipliers (na, nb) of the modified interval for this branch."""
    gl = seed.gamma * kq.lam
    if kq.branch is Branch.OMEGA:
        x = gl * kq.s_star / (2 * TWO_PI)
        fx = math.floor(x)
        return fx - 2, 2 * fx
    na = math.ceil(gl * kq.s_star / TWO_PI)
    nb = math.ceil(gl * kq.s_hat / TWO_PI)
    return na, nb


def _default_interval(seed, lam, branch):
    kq = compute_m(seed.params, lam)
    if branch is Branch.THETA and kq.s_hat is None:
        half = 0.5 * kq.second_term
        s_hat = _bisect_decreasing(lambda x: seed.params.theta.integral(x, seed.params.T0) - half,
                                   kq.s_star, seed.params.T0, seed.params.T0 * 1e-14)
        kq = KeyQuantityResult(kq.lam, kq.m, kq.s_star, kq.first_term, kq.second_term, Branch.THETA, s_hat)
    elif branch is Branch.OMEGA:
        kq = KeyQuantityResult(kq.lam, kq.m, kq.s_star, kq.first_term, kq.second_term, Branch.OMEGA)
    return activator_interval(seed, kq)


def theta_riemann_sum(train: BlockTrain) -> float:
    """Sum of theta(t_i) (t_i - t_{i-1}) over the subdivision."""
    return train.riemann_sum()


def build_activator(seed: SeedCoefficient, lam: float):
    """Asymptotic activator at ``lam``: (coefficient, key quantity, guarantee)."""
    p = seed.params
    kq = compute_m(p, lam)
    if not 0 < kq.s_star < p.T0:
        raise HypothesisViolated(["interior minimizer s_lambda"], f"s_lambda={kq.s_star:g}")
    na, nb = activator_interval(seed, kq)
    if na <= 0 or nb <= na:
        raise HypothesisViolated(["0 < a_lambda < b_lambda"], f"na={na}, nb={nb}")
    consts = activator_constants(p, seed.T1)
    if kq.branch is Branch.OMEGA:
        coef = omega_construction(seed, lam, na, nb)
        log_up = block_final_log_slope(coef.segments[1].block)
    else:
        coef = theta_construction(seed, lam, na, nb)
        log_up = consts.nu2 / (16 * seed.gamma**2) * theta_riemann_sum(coef.train)
    guarantee = LowerBoundGuarantee(lam, kq.branch, coef.a_lambda, coef.b_lambda, kq.m, consts.M3,
                                    consts.log_M4, log_up, consts.nu2 / seed.gamma * p.omega(1.0 / lam))
    return coef, kq, guarantee


# ------------------------------------------------------------------ membership


def _weyl(n, alpha):
    return np.modf(np.arange(1, n + 1) * alpha)[0]


_R2_A1 = 0.7548776662466927
_R2_A2 = 0.5698402909980532


@dataclass(frozen=True)
class MembershipReport:
    checks: tuple  # (name, n_checked, n_violations, witness)

    @property
    def ok(self) -> bool:
        return all(v == 0 for _, _, v, _ in self.checks)

    def violations(self, name) -> int:
        for n, _, v, _ in self.checks:
            if n == name:
                return v
        raise KeyError(name)

    def lines(self):
        return [f"{'PASS' if v == 0 else 'FAIL'} {n}: {v}/{c} violations" + (f" witness={w}" if w else "")
                for n, c, v, w in self.checks]


def check_class_membership(c, params: ClassParams, samples: int = 10**6, derivative: Optional[Callable] = None,
                           omega_factor: float = 1.0, min_separation: Optional[float] = None) -> MembershipReport:
    """Sampled hyperbolicity, omega-continuity and theta-bound checks.

    Pairs (s, t) are stratified over log-uniform separations reaching down to an
    eighth of the oscillation period when ``c`` carries one; points and pairs
    come from additive-recurrence sequences, so the check is deterministic.
    """
    if samples < 1000:
        raise ValueError("samples must be at least 1000")
    T0 = params.T0
    if isinstance(c, PiecewiseCoefficient):
        f, df = c, c.derivative
        extra = c.edges
        if c.subdivision is not None:
            extra = np.concatenate([extra, c.subdivision])
        if min_separation is None and c.lam is not None:
            min_separation = TWO_PI / (c.gamma * c.lam) / 8
    elif isinstance(c, SeedCoefficient):
        f, df = c, c.derivative
        extra = np.array([0.0, c.T1, T0])
    else:
        f, df = c, derivative
        extra = np.array([0.0, T0])
    if min_separation is None:
        min_separation = T0 * 2.0**-30
    slack = 1e-9
    checks = []

    n_pts = max(samples, 1000)
    t = np.concatenate([T0 * (np.arange(n_pts) + 0.5) / n_pts, extra])
    cv = np.asarray(f(t), dtype=float)
    floor_abs = 4e-16 * params.mu2
    bad = np.nonzero((cv < params.mu1 - floor_abs) | (cv > params.mu2 + floor_abs) | ~np.isfinite(cv))[0]
    checks.append(("hyperbolicity", t.size, int(bad.size), (float(t[bad[0]]), float(cv[bad[0]])) if bad.size else None))

    lo, hi = math.log(min_separation), math.log(T0)
    d = np.exp(lo + (hi - lo) * _weyl(samples, _R2_A1))
    s = (T0 - d) * _weyl(samples, _R2_A2)
    tt = np.minimum(s + d, T0)
    diff = np.abs(np.asarray(f(tt)) - np.asarray(f(s)))
    allowed = omega_factor * params.omega(tt - s) * (1 + slack) + floor_abs
    bad = np.nonzero(diff > allowed)[0]
    checks.append(("omega-continuity", samples, int(bad.size),
                   (float(s[bad[0]]), float(tt[bad[0]]), float(diff[bad[0]]), float(allowed[bad[0]])) if bad.size else None))

    if params.theta is not None and df is not None:
        tp = t[t > 0]
        dv = np.asarray(df(tp), dtype=float)
        ok = np.isfinite(dv)
        with np.errstate(over="ignore"):
            th = params.theta(tp[ok])
        bad = np.nonzero(np.abs(dv[ok]) > th * (1 + slack) + 1e-300)[0]
        tp = tp[ok]
        checks.append(("theta-bound", int(ok.sum()), int(bad.size),
                       (float(tp[bad[0]]), float(dv[ok][bad[0]]), float(th[bad[0]])) if bad.size else None))
    return MembershipReport(tuple(checks))
