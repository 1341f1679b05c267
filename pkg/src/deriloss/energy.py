"""Solutions of u'' + lambda^2 c(t) u = 0, their energies, and the two bound checks.

Every segment of a piecewise coefficient is turned into a 2x2 transfer matrix
acting on (u, u'):

* constant pieces use the trigonometric propagator;
* a block is periodic with period pi/(gamma*lambda); in the phase variable its
  one-period map is lower triangular with one closed-form column, so only a
  single entry needs numerics and powers of the map are explicit;
* other pieces use a vectorized DOP853 step on transfer matrices with
  embedded-error step splitting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from numpy.polynomial import Chebyshev
from scipy.integrate import DOP853

from .activator import (
    BaselineSegment,
    BlockSegment,
    BlockTrain,
    ConstantSegment,
    PiecewiseCoefficient,
    SeedCoefficient,
    activator_constants,
    block_final_log_slope,
    build_activator,
    node_phase,
    offset_phase,
)
from .errors import BoundViolated, NonFiniteState, StepSizeUnderflow
from .keyquantity import compute_m
from .moduli import ClassParams

_A = np.asarray(DOP853.A, dtype=float)
_B = np.asarray(DOP853.B, dtype=float)
_C = np.asarray(DOP853.C, dtype=float)
_E3 = np.asarray(DOP853.E3, dtype=float)
_E5 = np.asarray(DOP853.E5, dtype=float)
_STAGES = DOP853.n_stages

STEP_TOL = 1e-13
CHUNK = 200_000
PERIOD_STEPS = 256
TRAIN_LOOP_LIMIT = 2_000_000


# ------------------------------------------------------------------ numerics


def _apply(s, c, Y):
    """s * [[0, 1], [-c, 0]] @ Y for stacks Y of shape (n, 2, 2)."""
    out = np.empty_like(Y)
    out[:, 0, :] = s * Y[:, 1, :]
    out[:, 1, :] = -s * c[:, None] * Y[:, 0, :]
    return out


def _rk_step(cfun, s, t0, h):
    """One DOP853 step from the identity for each (t0[i], h[i]); returns (maps, error)."""
    n = t0.size
    eye = np.broadcast_to(np.eye(2), (n, 2, 2))
    K = np.empty((_STAGES + 1, n, 2, 2))
    hh = h[:, None, None]
    for i in range(_STAGES):
        Y = eye + hh * np.tensordot(_A[i, :i], K[:i], axes=(0, 0)) if i else eye.copy()
        K[i] = _apply(s, cfun(t0 + _C[i] * h), Y)
    Ynew = eye + hh * np.tensordot(_B, K[:_STAGES], axes=(0, 0))
    K[_STAGES] = _apply(s, cfun(t0 + h), Ynew)
    e5 = np.tensordot(_E5, K, axes=(0, 0))
    e3 = np.tensordot(_E3, K, axes=(0, 0))
    n5 = np.sum(e5**2, axis=(1, 2))
    n3 = np.sum(e3**2, axis=(1, 2))
    denom = np.sqrt(np.maximum(n5 + 0.01 * n3, 1e-300) * 4)
    err = np.abs(h) * n5 / denom
    if not np.all(np.isfinite(Ynew)):
        raise NonFiniteState("non-finite transfer matrix")
    return Ynew, err


def _ordered_product(mats):
    """M[n-1] @ ... @ M[0]."""
    while mats.shape[0] > 1:
        if mats.shape[0] % 2:
            mats = np.concatenate([mats, np.eye(2)[None]])
        mats = mats[1::2] @ mats[0::2]
    return mats[0]


def _adaptive_transfer(cfun, s, ta, tb, h_max, tol=STEP_TOL, max_rounds=30):
    """Transfer matrix over [ta, tb] with steps <= h_max split until the error estimate is <= tol."""
    if tb <= ta:
        return np.eye(2)
    n = max(1, math.ceil((tb - ta) / h_max))
    if n > CHUNK:
        pieces = np.linspace(ta, tb, math.ceil(n / CHUNK) + 1)
        out = np.eye(2)
        for a, b in zip(pieces[:-1], pieces[1:]):
            out = _adaptive_transfer(cfun, s, a, b, h_max, tol, max_rounds) @ out
        return out
    t0 = ta + (tb - ta) * np.arange(n) / n
    h = np.diff(np.append(t0, tb))
    mats, err = _rk_step(cfun, s, t0, h)
    floor = 1e-15 * max(1.0, abs(tb))
    for _ in range(max_rounds):
        bad = err > tol
        if not bad.any():
            return _ordered_product(mats)
        if np.min(h[bad]) < floor:
            raise StepSizeUnderflow(f"step below {floor:g} near t={t0[bad][0]:g}")
        reps = np.where(bad, 2, 1)
        idx = np.repeat(np.arange(t0.size), reps)
        second = np.zeros(idx.size, dtype=bool)
        starts = np.cumsum(reps) - reps
        second[starts[bad] + 1] = True
        h_new = np.where(bad[idx], 0.5 * h[idx], h[idx])
        t_new = t0[idx] + np.where(second, h_new, 0.0)
        mats_new = mats[idx].copy()
        err_new = err[idx].copy()
        redo = bad[idx]
        mats_new[redo], err_new[redo] = _rk_step(cfun, s, t_new[redo], h_new[redo])
        t0, h, mats, err = t_new, h_new, mats_new, err_new
    raise StepSizeUnderflow("error tolerance not met after repeated step splitting")


def _fixed_transfer(cfun, s, t_end, steps):
    """Per-problem transfer from 0 to t_end[i] with `steps` equal DOP853 steps."""
    n = t_end.size
    h = t_end / steps
    M = np.broadcast_to(np.eye(2), (n, 2, 2)).copy()
    for j in range(steps):
        S, _ = _rk_step(cfun, s, j * h, h)
        M = S @ M
    return M


def _inverse(M):
    """Inverse of stacked 2x2 matrices."""
    det = M[..., 0, 0] * M[..., 1, 1] - M[..., 0, 1] * M[..., 1, 0]
    inv = np.empty_like(M)
    inv[..., 0, 0] = M[..., 1, 1]
    inv[..., 1, 1] = M[..., 0, 0]
    inv[..., 0, 1] = -M[..., 0, 1]
    inv[..., 1, 0] = -M[..., 1, 0]
    return inv / det[..., None, None]


# ------------------------------------------------------------------ normalized block flow
#
# With tau = gamma*lambda*(t - a) and X = (u, u'/(gamma*lambda)) a block becomes
#   U'' + (1 - delta sin(2tau) - delta^2/4 sin^4(tau)) U = 0,  delta = eps/(4 gamma^3 lambda).


def _block_c(delta):
    def c(tau):
        s = np.sin(tau)
        return 1.0 - delta * np.sin(2 * tau) - 0.25 * delta * delta * s**4

    return c


def normalized_w(delta, tau):
    """Closed-form solution with data (0, 1) at tau=0, and its tau-derivative."""
    e = np.exp(0.25 * delta * tau - 0.125 * delta * np.sin(2 * tau))
    s, c = np.sin(tau), np.cos(tau)
    return s * e, c * e + s * (0.5 * delta * s * s) * e


def normalized_fundamental(delta, tau, steps=PERIOD_STEPS):
    """Fundamental matrices at local phases tau in [0, pi] for amplitudes delta (arrays)."""
    delta = np.asarray(delta, dtype=float)
    tau = np.asarray(tau, dtype=float)
    delta, tau = np.broadcast_arrays(delta, tau)
    delta, tau = delta.ravel().copy(), tau.ravel().copy()
    M = _fixed_transfer(_block_c(delta), 1.0, tau, steps)
    w, dw = normalized_w(delta, tau)
    M[:, 0, 1] = w
    M[:, 1, 1] = dw
    return M


def period_entry(delta, steps=PERIOD_STEPS):
    """The single numeric entry p21(delta) of the one-period map."""
    delta = np.atleast_1d(np.asarray(delta, dtype=float))
    return normalized_fundamental(delta, np.full_like(delta, math.pi), steps)[:, 1, 0]


def period_map(delta, p21):
    """[[-exp(-x), 0], [p21, -exp(x)]] with x = delta*pi/4."""
    x = 0.25 * math.pi * np.asarray(delta, dtype=float)
    out = np.zeros(np.shape(x) + (2, 2))
    out[..., 0, 0] = -np.exp(-x)
    out[..., 1, 0] = p21
    out[..., 1, 1] = -np.exp(x)
    return out


def period_map_power(delta, p21, j):
    """Closed-form j-th power of the one-period map."""
    x = 0.25 * math.pi * float(delta)
    j = np.asarray(j)
    sign = np.where(j % 2 == 0, 1.0, -1.0)
    out = np.zeros(j.shape + (2, 2))
    out[..., 0, 0] = sign * np.exp(-j * x)
    out[..., 1, 1] = sign * np.exp(j * x)
    ratio = np.where(j == 0, 0.0, np.sinh(j * x) / math.sinh(x)) if x > 0 else j.astype(float)
    out[..., 1, 0] = -sign * p21 * ratio
    return out


def _p21_interpolant(deltas):
    """Vectorized p21 for the amplitudes of a block train."""
    lo, hi = float(np.min(deltas)), float(np.max(deltas))
    if hi - lo <= 1e-12 * max(hi, 1e-300) or deltas.size <= 64:
        return dict(zip(deltas.tolist(), period_entry(deltas).tolist())).__getitem__, None
    for deg in (24, 48, 96):
        cheb = Chebyshev.interpolate(period_entry, deg, domain=[lo, hi])
        probe = np.linspace(lo, hi, 2 * deg + 3)[1::2]
        if np.max(np.abs(cheb(probe) - period_entry(probe))) <= 1e-13 * max(1.0, np.max(np.abs(cheb(probe)))):
            return None, cheb
    return dict(zip(deltas.tolist(), period_entry(deltas).tolist())).__getitem__, None


# ------------------------------------------------------------------ segment propagation


def _phys(M, gl):
    """Conjugate normalized maps back to (u, u')."""
    out = M.copy()
    out[..., 0, 1] = M[..., 0, 1] / gl
    out[..., 1, 0] = M[..., 1, 0] * gl
    return out


def _constant_maps(seg, lam, t):
    k = lam * math.sqrt(seg.value)
    x = offset_phase(k, t, seg.t0)
    c, s = np.cos(x), np.sin(x)
    M = np.empty((t.size, 2, 2))
    M[:, 0, 0] = c
    M[:, 0, 1] = s / k
    M[:, 1, 0] = -k * s
    M[:, 1, 1] = c
    return M


def _constant_transfer(seg, lam):
    if seg.aligned_lam is not None and seg.aligned_lam == lam:
        return np.eye(2)
    return _constant_maps(seg, lam, np.array([seg.t1]))[0]


def _block_maps(seg, lam, t, include_end=True):
    p = seg.block
    if lam != p.lam:
        return None
    n_per = 2 * (p.nb - p.na)
    delta = p.delta
    p21 = float(period_entry(delta)[0])
    tau = node_phase(p.gl, t, p.na)
    j = np.clip(np.floor(tau / math.pi).astype(np.int64), 0, n_per)
    local = tau - j * math.pi
    at_end = j == n_per
    local[at_end] = 0.0
    local = np.maximum(local, 0.0)
    loc = np.broadcast_to(np.eye(2), (t.size, 2, 2)).copy()
    inner = local > 0
    if inner.any():
        loc[inner] = normalized_fundamental(delta, local[inner])
    M = loc @ period_map_power(delta, p21, j)
    return _phys(M, p.gl)


def _train_prefix(tr, lam):
    """Normalized maps from the train start to each node t_0..t_k (shape (k+1, 2, 2)) and the p21 values."""
    if tr.k > TRAIN_LOOP_LIMIT:
        raise ValueError(f"general data on a train of {tr.k} blocks is not supported; "
                         "only data vanishing at the train entry are")
    deltas = tr.eps / (4 * tr.gamma**3 * tr.lam)
    lookup, cheb = _p21_interpolant(deltas)
    p21 = cheb(deltas) if cheb is not None else np.array([lookup(d) for d in deltas.tolist()])
    P = period_map(deltas, p21)
    blocks = P @ P
    prefix = np.empty((tr.k + 1, 2, 2))
    a, c, d = 1.0, 0.0, 1.0
    prefix[0] = np.eye(2)
    b00, b10, b11 = blocks[:, 0, 0].tolist(), blocks[:, 1, 0].tolist(), blocks[:, 1, 1].tolist()
    for i in range(tr.k):
        # lower-triangular product, exact zero above the diagonal
        a, c, d = b00[i] * a, b10[i] * a + b11[i] * c, b11[i] * d
        prefix[i + 1] = ((a, 0.0), (c, d))
    return prefix, deltas, p21


def _train_maps(seg, lam, t, cache):
    if lam != seg.lam:
        return None
    prefix, deltas, p21 = cache
    idx, tau = seg.locate(t)
    at_node = np.isclose(t, seg.t1, rtol=0, atol=0)
    j = np.clip(np.floor(tau / math.pi).astype(np.int64), 0, 2)
    local = np.maximum(tau - j * math.pi, 0.0)
    out = np.empty((t.size, 2, 2))
    for jj in (0, 1, 2):
        mask = j == jj
        if not mask.any():
            continue
        ii = idx[mask]
        loc = np.broadcast_to(np.eye(2), (ii.size, 2, 2)).copy()
        inner = local[mask] > 0
        if inner.any():
            loc[inner] = normalized_fundamental(deltas[ii[inner]], local[mask][inner])
        Pj = np.broadcast_to(np.eye(2), (ii.size, 2, 2)).copy()
        for _ in range(jj):
            Pj = period_map(deltas[ii], p21[ii]) @ Pj
        out[mask] = loc @ Pj @ prefix[ii]
    out[at_node] = prefix[-1]
    return _phys(out, seg.gl)


def _zero_entry(seg, lam, t, v):
    """States at t and exit state for aligned block pieces entered with data (0, v)."""
    if isinstance(seg, BlockSegment) and seg.block.lam == lam:
        p = seg.block
        tau = node_phase(p.gl, t, p.na)
        w, dw = normalized_w(p.delta, tau)
        states = np.stack([v * w / p.gl, v * dw], axis=1)
        return states, np.array([0.0, v * math.exp(block_final_log_slope(p))])
    if isinstance(seg, BlockTrain) and seg.lam == lam:
        idx, tau = seg.locate(t)
        scale = seg.nu / (16 * seg.gamma**2) * seg.spacing
        logv = scale * seg.theta_sum(idx)
        delta = seg.eps_at(idx) / (4 * seg.gamma**3 * seg.lam)
        w, dw = normalized_w(delta, tau)
        amp = v * np.exp(logv)
        states = np.stack([amp * w / seg.gl, amp * dw], axis=1)
        exit_v = v * math.exp(scale * float(seg.theta_sum(seg.k)))
        return states, np.array([0.0, exit_v])
    return None


def _baseline_h(lam, c_max):
    return (2 * math.pi / (lam * math.sqrt(c_max))) / 20


def _numeric_maps(cfun, lam, c_max, t0, t):
    """Maps from t0 to each sorted t via adaptive steps on scaled variables (u, u'/lambda)."""
    h = _baseline_h(lam, c_max)
    maps = np.empty((t.size, 2, 2))
    cur, prev = np.eye(2), t0
    for i, ti in enumerate(t.tolist()):
        cur = _adaptive_transfer(cfun, lam, prev, ti, h) @ cur
        maps[i] = cur
        prev = ti
    out = maps.copy()
    out[:, 0, 1] = maps[:, 0, 1] / lam
    out[:, 1, 0] = maps[:, 1, 0] * lam
    return out


def _as_piecewise(c, T0):
    if isinstance(c, PiecewiseCoefficient):
        return c
    if isinstance(c, SeedCoefficient):
        return c.as_coefficient()
    T0 = getattr(c, "T0", T0)
    if T0 is None:
        raise ValueError("T0 is required for a plain callable coefficient")
    return PiecewiseCoefficient((BaselineSegment(0.0, T0, c),), T0)


def _numeric_only(coef):
    """Same coefficient, every piece treated as a generic baseline."""
    return PiecewiseCoefficient((BaselineSegment(0.0, coef.T0, coef),), coef.T0)


def _segment_maps(seg, lam, t, c_max, entry_t=None):
    """Maps from the segment start to times t (sorted, inside the segment)."""
    if isinstance(seg, ConstantSegment):
        return _constant_maps(seg, lam, t)
    if isinstance(seg, BlockSegment):
        M = _block_maps(seg, lam, t)
        if M is not None:
            return M
        return _numeric_maps(seg.value_at, lam, c_max, seg.t0, t)
    if isinstance(seg, BlockTrain):
        if lam == seg.lam:
            return _train_maps(seg, lam, t, _train_prefix(seg, lam))
        return _numeric_maps(seg.value_at, lam, c_max, seg.t0, t)
    return _numeric_maps(lambda x: np.asarray(seg.value_at(np.asarray(x, dtype=float)), dtype=float),
                         lam, c_max, seg.t0, t)


# ------------------------------------------------------------------ traces


@dataclass(frozen=True)
class EnergyTrace:
    lam: float
    times: np.ndarray = field(compare=False)
    u: np.ndarray = field(compare=False)
    u_prime: np.ndarray = field(compare=False)
    c: np.ndarray = field(compare=False)
    F_eps: Optional[np.ndarray] = field(default=None, compare=False)
    c_eps: Optional[np.ndarray] = field(default=None, compare=False)

    @property
    def E(self):
        return self.u_prime**2 + self.lam**2 * self.u**2

    @property
    def F(self):
        return self.u_prime**2 + self.lam**2 * self.c * self.u**2

    def at(self, t: float) -> int:
        """Index of the sample closest to t."""
        return int(np.argmin(np.abs(self.times - t)))

    def equivalence_ok(self, mu1, mu2, rtol=1e-12) -> bool:
        E, lo, hi = self.E, min(1.0, mu1), max(1.0, mu2)
        ok = np.all(lo * E * (1 - rtol) <= self.F) and np.all(self.F <= hi * E * (1 + rtol))
        if self.F_eps is not None:
            ok = ok and np.all(lo * E * (1 - rtol) <= self.F_eps) and np.all(self.F_eps <= hi * E * (1 + rtol))
        return bool(ok)

    def to_csv(self) -> str:
        rows = ["t,u,u_prime,E,F"]
        for row in zip(self.times.tolist(), self.u.tolist(), self.u_prime.tolist(), self.E.tolist(), self.F.tolist()):
            rows.append(",".join(repr(x) for x in row))
        return "\n".join(rows) + "\n"


def sample_times(coef: PiecewiseCoefficient, sample_count: int, extra: Sequence[float] = ()) -> np.ndarray:
    t = np.concatenate([np.linspace(0.0, coef.T0, sample_count), coef.edges, np.asarray(extra, dtype=float)])
    t = t[(t >= 0) & (t <= coef.T0)]
    return np.unique(t)


def solve_ode(c, lam: float, u0: float = 0.0, u1: float = 1.0, sample_count: int = 1000, *,
              T0: Optional[float] = None, extra_times: Sequence[float] = (), reverse: bool = False,
              numeric: bool = False, mollify_eps: Optional[float] = None) -> EnergyTrace:
    """Solve with data (u0, u1) at t=0, or at t=T0 when ``reverse`` is set.

    ``numeric`` bypasses every closed form (used for cross-checks).
    """
    if not lam > 0:
        raise ValueError("lambda must be positive")
    if sample_count < 100:
        raise ValueError("sample_count must be at least 100")
    coef = _as_piecewise(c, T0)
    if numeric:
        coef_run = _numeric_only(coef)
    else:
        coef_run = coef
    times = sample_times(coef, sample_count, extra_times)
    c_vals = np.asarray(coef(times), dtype=float)
    c_max = float(np.max(c_vals))
    dense = np.linspace(0.0, coef.T0, 4097)
    c_max = max(c_max, float(np.max(coef(dense))))

    segs = coef_run.segments
    masks = []
    for k, seg in enumerate(segs):
        last = k == len(segs) - 1
        masks.append((times >= seg.t0) & ((times <= seg.t1) if last else (times < seg.t1)))

    def maps_for(seg, mask):
        ts = np.append(times[mask], seg.t1)
        maps = _segment_maps(seg, lam, ts, c_max)
        if isinstance(seg, ConstantSegment) and seg.aligned_lam == lam:
            maps[-1] = np.eye(2)
        return maps[:-1], maps[-1]

    state = np.zeros((times.size, 2))
    if not reverse:
        x = np.array([u0, u1], dtype=float)
        for seg, mask in zip(segs, masks):
            closed = _zero_entry(seg, lam, times[mask], x[1]) if x[0] == 0.0 and not numeric else None
            if closed is not None:
                state[mask], x = closed
            else:
                maps, transfer = maps_for(seg, mask)
                state[mask] = maps @ x
                x = transfer @ x
    else:
        per_seg = [maps_for(seg, mask) for seg, mask in zip(segs, masks)]
        entries = []
        x = np.array([u0, u1], dtype=float)
        for maps, transfer in reversed(per_seg):
            x = _inverse(transfer) @ x
            entries.append(x)
        for mask, (maps, _), x in zip(masks, per_seg, reversed(entries)):
            state[mask] = maps @ x
    if not np.all(np.isfinite(state)):
        raise NonFiniteState("solution overflowed")
    F_eps = c_eps = None
    if mollify_eps is not None:
        mc = mollify(coef, mollify_eps)
        c_eps = mc(times)
        F_eps = state[:, 1] ** 2 + lam**2 * c_eps * state[:, 0] ** 2
    return EnergyTrace(lam, times, state[:, 0].copy(), state[:, 1].copy(), c_vals, F_eps, c_eps)


def wronskian(tr1: EnergyTrace, tr2: EnergyTrace) -> np.ndarray:
    return tr1.u * tr2.u_prime - tr2.u * tr1.u_prime


# ------------------------------------------------------------------ mollification


@dataclass(frozen=True)
class MollifiedCoefficient:
    """Forward average c_eps(t) = (1/eps) int_t^{t+eps} c_hat, c_hat constant past T0."""

    base: PiecewiseCoefficient
    eps: float

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")

    @property
    def T0(self):
        return self.base.T0

    def _hat_integral(self, t):
        T0 = self.base.T0
        inside = np.minimum(t, T0)
        return self.base.cumulative_integral(inside) + self.base(np.array([T0]))[0] * np.maximum(t - T0, 0.0)

    def __call__(self, t):
        scalar = np.ndim(t) == 0
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = (self._hat_integral(t + self.eps) - self._hat_integral(t)) / self.eps
        return float(out[0]) if scalar else out

    def derivative(self, t):
        scalar = np.ndim(t) == 0
        t = np.atleast_1d(np.asarray(t, dtype=float))
        T0 = self.base.T0
        out = (self.base(np.minimum(t + self.eps, T0)) - self.base(np.minimum(t, T0))) / self.eps
        return float(out[0]) if scalar else out

    def check(self, params: ClassParams, samples: int = 10000, rtol: float = 1e-9) -> dict:
        """Sampled counts of violations of the three averaging bounds."""
        t = np.linspace(0.0, self.T0, samples)
        ce, c, dce = self(t), self.base(t), self.derivative(t)
        w = params.omega(self.eps)
        slack = 1e-12 * params.mu2
        return {
            "hyperbolicity": int(np.sum((ce < params.mu1 - slack) | (ce > params.mu2 + slack))),
            "distance": int(np.sum(np.abs(ce - c) > w * (1 + rtol) + slack)),
            "derivative": int(np.sum(np.abs(dce) > w / self.eps * (1 + rtol) + slack / self.eps)),
        }


def mollify(c, eps: float, T0: Optional[float] = None) -> MollifiedCoefficient:
    return MollifiedCoefficient(_as_piecewise(c, T0), eps)


# ------------------------------------------------------------------ bound verification


@dataclass(frozen=True)
class UpperBoundRow:
    lam: float
    m: float
    s_star: float
    data: tuple
    log_ratio: float  # log max_t E(t)/E(0)
    log_bound: float  # log(M1 exp(M2 m))
    t_worst: float
    phase1: tuple  # logs of (measured max F_eps(t)/F_eps(0) on [0, s], predicted factor)
    phase2: tuple  # logs of (measured max of F(t)/F(s) exp(-(1/mu1) int_s^t theta) on [s, T0], 1)

    @property
    def passed(self) -> bool:
        return (self.log_ratio <= self.log_bound + 1e-6
                and self.phase1[0] <= self.phase1[1] + 1e-6
                and self.phase2[0] <= self.phase2[1] + 1e-6)

    def line(self) -> str:
        return (f"{'PASS' if self.passed else 'FAIL'} upper lambda={self.lam!r} data={self.data} "
                f"m={self.m!r} log_ratio={self.log_ratio!r} log_bound={self.log_bound!r} "
                f"log_phase1={self.phase1[0]!r}<={self.phase1[1]!r} "
                f"log_phase2={self.phase2[0]!r}<={self.phase2[1]!r}")


@dataclass(frozen=True)
class UpperBoundReport:
    rows: tuple

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def lines(self):
        return [r.line() for r in self.rows]


def _theta_tail_integrals(theta, s, times, T0):
    """int_s^t theta for each t >= s."""
    if theta is None:
        return np.zeros_like(times)
    I_s = theta.integral(s, T0) if s > 0 else None
    out = np.empty_like(times)
    for i, t in enumerate(times.tolist()):
        out[i] = 0.0 if t <= s else I_s - theta.integral(t, T0)
    return out


def verify_upper_bound(c, params: ClassParams, lambda_grid, eps: Optional[float] = None,
                       sample_count: int = 2000, data=((0.0, 1.0), (1.0, 0.0)),
                       raise_on_fail: bool = False) -> UpperBoundReport:
    """Check E(t) <= M1 E(0) exp(M2 m(lambda)) and the two phase estimates behind it."""
    consts = activator_constants(params, 0.5 * params.T0)
    mu1 = params.mu1
    rows = []
    for lam in [float(x) for x in np.atleast_1d(lambda_grid)]:
        kq = compute_m(params, lam)
        e = 1.0 / lam if eps is None else eps
        s = kq.s_star
        log_bound = math.log(consts.M1) + consts.M2 * kq.m
        w = params.omega(e)
        log_phase1_pred = (w / (mu1 * e) + lam * w / math.sqrt(mu1)) * s
        for u0, u1 in data:
            if u0 == 0 and u1 == 0:
                raise ValueError("zero data give the trivial solution")
            tr = solve_ode(c, lam, u0, u1, sample_count, T0=params.T0, extra_times=(s,), mollify_eps=e)
            E = tr.E
            log_ratios = np.log(E / E[0])
            worst = int(np.argmax(log_ratios))
            before = tr.times <= s
            p1 = float(np.max(np.log(tr.F_eps[before] / tr.F_eps[0])))
            after = tr.times >= s
            F = tr.F
            i_s = tr.at(s)
            tail = _theta_tail_integrals(params.theta, s, tr.times[after], params.T0)
            p2 = float(np.max(np.log(F[after] / F[i_s]) - tail / mu1))
            row = UpperBoundRow(lam, kq.m, s, (u0, u1), float(log_ratios[worst]), log_bound,
                                float(tr.times[worst]), (p1, log_phase1_pred), (p2, 0.0))
            if raise_on_fail and not row.passed:
                raise BoundViolated(lam, row.t_worst, row.log_ratio, row.log_bound)
            rows.append(row)
    return UpperBoundReport(tuple(rows))


@dataclass(frozen=True)
class LowerBoundRow:
    lam: float
    branch: str
    a_lambda: float
    b_lambda: float
    m: float
    log_bound: float
    min_log_E: float  # min of log E(t) over sampled t in [b, T0]
    t_min: float
    log_uprime_b: float  # solver
    log_uprime_b_exact: float  # closed form
    decay_ok: bool
    log_E_by_time: tuple = field(compare=False, default=())  # (t, log E) samples for the predicate

    @property
    def endpoint_ok(self) -> bool:
        return abs(self.log_uprime_b - self.log_uprime_b_exact) <= 1e-8 * max(1.0, abs(self.log_uprime_b_exact))

    @property
    def passed(self) -> bool:
        return self.min_log_E >= self.log_bound - 1e-12 and self.endpoint_ok and self.decay_ok

    def line(self) -> str:
        return (f"{'PASS' if self.passed else 'FAIL'} lower lambda={self.lam!r} branch={self.branch} "
                f"b={self.b_lambda!r} m={self.m!r} log_bound={self.log_bound!r} min_log_E={self.min_log_E!r} "
                f"log_du_b={self.log_uprime_b!r} exact={self.log_uprime_b_exact!r} decay={'ok' if self.decay_ok else 'FAIL'}")


@dataclass(frozen=True)
class ActivatorCertificate:
    delta: float
    lambda_delta: Optional[float]
    log_M_delta: float
    b_below_delta: bool  # every certified lambda also has b_lambda <= delta

    @property
    def certified(self) -> bool:
        return self.lambda_delta is not None

    def line(self) -> str:
        lam = "none" if self.lambda_delta is None else repr(self.lambda_delta)
        return (f"{'PASS' if self.certified else 'FAIL'} predicate delta={self.delta!r} lambda_delta={lam} "
                f"log_M_delta={self.log_M_delta!r} b_below_delta={self.b_below_delta}")


@dataclass(frozen=True)
class LowerBoundReport:
    rows: tuple
    certificates: tuple

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows) and all(c.certified for c in self.certificates)

    def lines(self):
        return [r.line() for r in self.rows] + [c.line() for c in self.certificates]


def verify_lower_bound(seed: SeedCoefficient, lambda_grid, deltas: Optional[Sequence[float]] = None,
                       sample_count: int = 2000, m3_scale: float = 1.0,
                       raise_on_fail: bool = False) -> LowerBoundReport:
    """Build the activator at each lambda and check E(t) >= M4 exp(2 M3 m) on [b_lambda, T0].

    ``m3_scale`` multiplies M3 and exists only to show that a corrupted constant is caught.
    """
    p = seed.params
    T0 = p.T0
    consts = activator_constants(p, seed.T1)
    tail_theta = p.theta.integral(seed.T1, T0) if p.theta is not None else 0.0
    rows = []
    for lam in [float(x) for x in np.atleast_1d(lambda_grid)]:
        coef, kq, g = build_activator(seed, lam)
        tr = solve_ode(coef, lam, 0.0, 1.0, sample_count, extra_times=(coef.b_lambda,))
        logE = np.log(tr.E)
        after = tr.times >= coef.b_lambda
        i_min = int(np.argmin(np.where(after, logE, np.inf)))
        ib = tr.at(coef.b_lambda)
        log_bound = consts.log_M4 + 2 * consts.M3 * m3_scale * kq.m
        F = tr.F
        decay_ok = bool(np.all(F[after] >= F[ib] * math.exp(-tail_theta / p.mu1) * (1 - 1e-10)))
        row = LowerBoundRow(lam, g.branch.value, coef.a_lambda, coef.b_lambda, kq.m, log_bound,
                            float(logE[i_min]), float(tr.times[i_min]), float(math.log(abs(tr.u_prime[ib]))),
                            g.log_uprime_b, decay_ok,
                            tuple(zip(tr.times.tolist(), (logE - 2 * consts.M3 * m3_scale * kq.m).tolist())))
        if raise_on_fail and not row.passed:
            raise BoundViolated(lam, row.t_min, row.min_log_E, row.log_bound)
        rows.append(row)
    if deltas is None:
        deltas = (T0 / 10, T0 / 100)
    certs = tuple(_certify(rows, d, consts.log_M4) for d in deltas)
    return LowerBoundReport(tuple(rows), certs)


def _certify(rows, delta, log_M):
    """Smallest grid lambda from which E >= M exp(2 M3 m) holds on [delta, T0] for every later lambda."""
    ok = []
    for r in rows:
        vals = [v for t, v in r.log_E_by_time if t >= delta]
        ok.append(bool(vals) and min(vals) >= log_M - 1e-12)
    start = None
    for i in range(len(rows) - 1, -1, -1):
        if ok[i]:
            start = i
        else:
            break
    if start is None:
        return ActivatorCertificate(delta, None, log_M, False)
    below = all(r.b_lambda <= delta for r in rows[start:])
    return ActivatorCertificate(delta, rows[start].lam, log_M, below)


def report_text(upper: Optional[UpperBoundReport], lower: Optional[LowerBoundReport]) -> str:
    lines = []
    if upper is not None:
        lines.extend(upper.lines())
    if lower is not None:
        lines.extend(lower.lines())
    ok = (upper is None or upper.passed) and (lower is None or lower.passed)
    lines.append("RESULT " + ("PASS" if ok else "FAIL"))
    return "\n".join(lines) + "\n"
