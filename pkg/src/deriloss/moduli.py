"""Moduli of continuity, derivative bounds and the coefficient class they define.

A modulus ``omega`` controls ``|c(t) - c(s)| <= omega(|t - s|)``; a derivative
bound ``theta`` controls ``|c'(t)| <= theta(t)`` and may blow up at ``t = 0``.
Both are small immutable value objects that evaluate on numpy arrays.

The logarithmic moduli are only monotone close to the origin, so each of them
is frozen to a constant beyond the point where the closed formula stops being
nondecreasing. A constant tail keeps both axioms (``omega`` and
``sigma / omega`` nondecreasing) intact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate, special

from .errors import DivergentIntegral, IntegralMismatch, NonFiniteEvaluation, ConfigError

SIGMA_FLOOR = 1e-300

MODULUS_KINDS = ("linear", "holder", "loglip", "logpower", "rootexp", "logloglip", "constant", "custom")
THETA_KINDS = ("power", "logovert", "expinv", "powexpinv", "bounded", "custom")


def _logabs(sigma):
    return -np.log(sigma)


@dataclass(frozen=True)
class ModulusSpec:
    """A modulus of continuity.

    ``param`` is the Hölder exponent, the log power ``p``, the root-exp ``R``
    or the constant level, depending on ``kind``.
    """

    kind: str
    param: Optional[float] = None
    func: Optional[Callable] = field(default=None, compare=False)
    label: Optional[str] = None

    def __post_init__(self):
        if self.kind not in MODULUS_KINDS:
            raise ValueError(f"unknown modulus kind {self.kind!r}")
        p = self.param
        if self.kind == "holder" and not (p is not None and 0 < p < 1):
            raise ValueError("holder exponent must lie in (0, 1)")
        if self.kind == "logpower" and not (p is not None and p > 1):
            raise ValueError("logpower exponent must exceed 1")
        if self.kind in ("rootexp", "constant") and not (p is not None and p > 0):
            raise ValueError(f"{self.kind} parameter must be positive")
        if self.kind == "custom" and self.func is None:
            raise ValueError("custom modulus needs func")

    @property
    def limit_case(self) -> bool:
        return self.kind == "constant"

    @property
    def knee(self) -> float:
        """Largest sigma where the closed formula is still used."""
        if self.kind == "loglip":
            return math.exp(-1.0)
        if self.kind == "logpower":
            return math.exp(-self.param)
        if self.kind == "rootexp":
            return math.exp(-max(self.param**2 / 4.0, 1.0))
        if self.kind == "logloglip":
            return math.exp(-math.e)
        return math.inf

    def _formula(self, s):
        k = self.kind
        if k == "linear":
            return s
        if k == "holder":
            return s**self.param
        L = _logabs(s)
        if k == "loglip":
            return s * L
        if k == "logpower":
            return s * L**self.param
        if k == "rootexp":
            return s * np.exp(self.param * np.sqrt(L))
        if k == "logloglip":
            return s * L * np.log(L)
        raise AssertionError(k)

    def __call__(self, sigma):
        scalar = np.ndim(sigma) == 0
        s = np.maximum(np.asarray(sigma, dtype=float), SIGMA_FLOOR)
        if self.kind == "constant":
            out = np.full_like(s, self.param)
        elif self.kind == "custom":
            out = np.asarray(self.func(s), dtype=float) * np.ones_like(s)
        else:
            knee = self.knee
            out = self._formula(np.minimum(s, knee))
        return float(out) if scalar else out

    def key(self) -> str:
        if self.label:
            return self.label
        if self.param is None or self.kind in ("linear", "loglip", "logloglip"):
            return self.kind
        return f"{self.kind}:{self.param:g}"


@dataclass(frozen=True)
class ThetaSpec:
    """A positive nonincreasing bound on ``|c'|``.

    ``power``      K / t**beta
    ``logovert``   K |log t| / t        (positive for t < 1)
    ``expinv``     K exp(1/t)
    ``powexpinv``  K exp(1/t) / t**beta
    ``bounded``    K
    ``custom``     ``func``; ``antiderivative(s, T0)`` optional
    """

    kind: str
    K: float = 1.0
    beta: Optional[float] = None
    func: Optional[Callable] = field(default=None, compare=False)
    antiderivative: Optional[Callable] = field(default=None, compare=False)
    label: Optional[str] = None

    def __post_init__(self):
        if self.kind not in THETA_KINDS:
            raise ValueError(f"unknown theta kind {self.kind!r}")
        if not self.K > 0:
            raise ValueError("theta scale K must be positive")
        if self.kind in ("power", "powexpinv") and not (self.beta is not None and self.beta > 0):
            raise ValueError(f"{self.kind} needs beta > 0")
        if self.kind == "custom" and self.func is None:
            raise ValueError("custom theta needs func")

    def __call__(self, t):
        scalar = np.ndim(t) == 0
        t = np.asarray(t, dtype=float)
        k, K = self.kind, self.K
        with np.errstate(over="ignore", divide="ignore"):
            if k == "power":
                out = K * t ** (-self.beta)
            elif k == "logovert":
                out = K * (-np.log(t)) / t
            elif k == "expinv":
                out = K * np.exp(1.0 / t)
            elif k == "powexpinv":
                out = K * np.exp(1.0 / t) * t ** (-self.beta)
            elif k == "bounded":
                out = np.full_like(t, K)
            else:
                out = np.asarray(self.func(t), dtype=float) * np.ones_like(t)
        return float(out) if scalar else out

    @property
    def integrable(self) -> Optional[bool]:
        """Whether the integral of theta over (0, T0) is finite; None if unknown."""
        if self.kind == "power":
            return self.beta < 1
        if self.kind == "bounded":
            return True
        if self.kind == "custom":
            return None
        return False

    @property
    def has_closed_form(self) -> bool:
        if self.kind == "powexpinv":
            return self.beta == 2
        if self.kind == "custom":
            return self.antiderivative is not None
        return True

    def _closed_integral(self, s, T0):
        k, K = self.kind, self.K
        if k == "power":
            b = self.beta
            if b == 1:
                return K * math.log(T0 / s)
            return K * (T0 ** (1 - b) - s ** (1 - b)) / (1 - b)
        if k == "logovert":
            return 0.5 * K * (math.log(s) ** 2 - math.log(T0) ** 2)
        if k == "expinv":
            def prim(t):
                x = 1.0 / t
                return math.exp(x) / x - special.expi(x)
            return K * (prim(T0) - prim(s))
        if k == "powexpinv":  # beta == 2
            return K * (math.exp(1.0 / s) - math.exp(1.0 / T0))
        if k == "bounded":
            return K * (T0 - s)
        return float(self.antiderivative(s, T0))

    def integral(self, s, T0, method="auto"):
        """Integral of theta over [s, T0]."""
        if s > T0:
            raise ValueError("need s <= T0")
        if s == T0:
            return 0.0
        if s <= 0:
            if self.integrable:
                if self.kind == "power":
                    return self.K * T0 ** (1 - self.beta) / (1 - self.beta)
                return self.K * T0
            raise DivergentIntegral(f"integral of {self.key()} diverges at 0")
        if method == "quad" or (method == "auto" and not self.has_closed_form):
            return quad_integral(self, s, T0)
        with np.errstate(over="ignore"):
            return self._closed_integral(s, T0)

    def key(self) -> str:
        if self.label:
            return self.label
        if self.kind in ("power", "powexpinv"):
            return f"{self.kind}:{self.beta:g}:{self.K:g}"
        return f"{self.kind}:{self.K:g}"


def quad_integral(theta: ThetaSpec, s: float, T0: float, rtol: float = 1e-12) -> float:
    """Adaptive quadrature of theta over [s, T0] in the variable y = log t.

    The interval is cut at dyadic points so that each piece sees a bounded
    range of scales; theta may blow up like exp(1/t) at the left end.
    """
    if s == T0:
        return 0.0
    pieces = int(min(400, max(1, math.ceil(math.log2(T0 / s)))))
    ys = np.linspace(math.log(s), math.log(T0), pieces + 1)

    def f(y):
        t = math.exp(y)
        return theta(t) * t

    total = 0.0
    with np.errstate(over="ignore"):
        for y0, y1 in zip(ys[:-1], ys[1:]):
            val, _ = integrate.quad(f, y0, y1, epsabs=0.0, epsrel=rtol, limit=200)
            total += val
    return total


def theta_integral(theta: ThetaSpec, s: float, T0: float) -> float:
    """Value of the integral of theta over [s, T0] (s = 0 allowed when finite)."""
    if not 0 <= s <= T0:
        raise ValueError("need 0 <= s <= T0")
    return theta.integral(s, T0)


@dataclass(frozen=True)
class ClassParams:
    T0: float
    mu1: float
    mu2: float
    omega: ModulusSpec
    theta: Optional[ThetaSpec]

    def __post_init__(self):
        if not self.T0 > 0:
            raise ValueError("T0 must be positive")
        if not 0 < self.mu1 < self.mu2:
            raise ValueError("need 0 < mu1 < mu2")


# ---------------------------------------------------------------- axiom checks


@dataclass(frozen=True)
class AxiomResult:
    name: str
    passed: bool
    witness: Optional[tuple] = None


@dataclass(frozen=True)
class AxiomReport:
    results: tuple

    @property
    def ok(self) -> bool:
        return all(r.passed for r in self.results)

    def __getitem__(self, name):
        for r in self.results:
            if r.name == name:
                return r
        raise KeyError(name)

    def lines(self):
        return [f"{'PASS' if r.passed else 'FAIL'} {r.name}" + (f" witness={r.witness}" if r.witness else "")
                for r in self.results]


_MONO_SLACK = 1e-12


def _first_drop(x, values):
    """First adjacent pair (x increasing) where values decrease beyond round-off."""
    bad = np.nonzero(values[1:] < values[:-1] * (1 - _MONO_SLACK) - 1e-300)[0]
    if bad.size:
        i = int(bad[0])
        return (float(x[i]), float(x[i + 1]))
    return None


def check_modulus_axioms(omega: ModulusSpec, grid_depth: int = 40) -> AxiomReport:
    """Sampled check of the three modulus axioms on sigma = 2**-k, 1 <= k <= depth."""
    if grid_depth < 4:
        raise ValueError("grid_depth must be at least 4")
    sig = 2.0 ** -np.arange(grid_depth, 0, -1, dtype=float)  # increasing
    w = omega(sig)
    if not np.all(np.isfinite(w)):
        raise NonFiniteEvaluation(f"modulus {omega.key()} is not finite on the grid")

    neg = np.nonzero(w <= 0)[0]
    vanish_ok = omega.limit_case or w[0] < w[-1]
    pos = AxiomResult(
        "positive and vanishing",
        neg.size == 0 and vanish_ok,
        (float(sig[neg[0]]),) if neg.size else (None if vanish_ok else (float(sig[0]), float(sig[-1]))),
    )
    drop = _first_drop(sig, w)
    mono = AxiomResult("nondecreasing", drop is None, drop)
    with np.errstate(divide="ignore"):
        ratio = sig / w
    drop = _first_drop(sig, ratio)
    quot = AxiomResult("sigma/omega nondecreasing", drop is None, drop)
    return AxiomReport((pos, mono, quot))


def check_theta_axioms(theta: ThetaSpec, T0: float, grid_depth: int = 30, n_integral: int = 20) -> AxiomReport:
    """Sampled positivity, monotonicity and integral consistency of theta."""
    if not T0 > 0:
        raise ValueError("T0 must be positive")
    t = T0 * 2.0 ** -np.linspace(grid_depth, 0, 8 * grid_depth + 1)[:-1]
    t = t[t > T0 * 2.0**-grid_depth]
    vals = theta(t)
    if not np.all(np.isfinite(vals)):
        raise NonFiniteEvaluation(f"theta {theta.key()} is not finite on the grid")
    neg = np.nonzero(vals <= 0)[0]
    pos = AxiomResult("positive", neg.size == 0, (float(t[neg[0]]),) if neg.size else None)
    rise = np.nonzero(vals[1:] > vals[:-1] * (1 + _MONO_SLACK))[0]
    mono = AxiomResult("nonincreasing", rise.size == 0,
                       (float(t[rise[0]]), float(t[rise[0] + 1])) if rise.size else None)

    s_pts = T0 * 2.0 ** -np.linspace(grid_depth, 0, n_integral + 1)[:-1]
    closed = np.array([theta.integral(float(s), T0) for s in s_pts])
    if not np.all(np.isfinite(closed)):
        raise NonFiniteEvaluation(f"integral of {theta.key()} is not finite on the grid")
    rise = np.nonzero(closed[1:] > closed[:-1] * (1 + _MONO_SLACK))[0]
    end_zero = theta.integral(T0, T0) == 0.0
    integ = AxiomResult("integral nonincreasing, zero at T0", rise.size == 0 and end_zero,
                        (float(s_pts[rise[0]]),) if rise.size else None)
    if theta.has_closed_form:
        quad = np.array([quad_integral(theta, float(s), T0) for s in s_pts])
        scale = np.maximum(np.abs(quad), 1e-300)
        rel = np.abs(closed - quad) / scale
        worst = int(np.argmax(rel))
        if rel[worst] > 1e-6:
            raise IntegralMismatch(
                f"closed form vs quadrature for {theta.key()} at s={s_pts[worst]:.3g}: rel {rel[worst]:.2e}")
    return AxiomReport((pos, mono, integ))


# ---------------------------------------------------------------- string keys


def _num(text, what):
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"bad number {text!r} in {what}") from None


def parse_modulus(key: str) -> ModulusSpec:
    """Parse ``kind[:param]``, e.g. ``holder:0.5``, ``logpower:2``, ``loglip``."""
    parts = key.strip().lower().split(":")
    kind, args = parts[0], parts[1:]
    aliases = {"lip": "linear", "logloglip": "logloglip", "loglog": "logloglip", "const": "constant"}
    kind = aliases.get(kind, kind)
    try:
        if kind in ("linear", "loglip", "logloglip"):
            if args:
                raise ConfigError(f"{kind} takes no parameter")
            return ModulusSpec(kind)
        if kind in ("holder", "logpower", "rootexp", "constant"):
            if len(args) != 1:
                raise ConfigError(f"{kind} takes one parameter")
            return ModulusSpec(kind, _num(args[0], key))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    raise ConfigError(f"unknown modulus {key!r}")


def parse_theta(key: str) -> Optional[ThetaSpec]:
    """Parse ``kind:param:scale`` (``power:1.5:1.0``) or ``kind:scale``; ``none`` means absent."""
    parts = key.strip().lower().split(":")
    kind, args = parts[0], parts[1:]
    if kind in ("none", "absent", "inf"):
        return None
    try:
        if kind in ("power", "powexpinv"):
            if len(args) not in (1, 2):
                raise ConfigError(f"{kind} takes beta[:scale]")
            K = _num(args[1], key) if len(args) == 2 else 1.0
            return ThetaSpec(kind, K=K, beta=_num(args[0], key))
        if kind in ("logovert", "expinv", "bounded"):
            if len(args) > 1:
                raise ConfigError(f"{kind} takes one scale parameter")
            return ThetaSpec(kind, K=_num(args[0], key) if args else 1.0)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    raise ConfigError(f"unknown theta {key!r}")


def weaken(omega: ModulusSpec, power: float = 1.0) -> ModulusSpec:
    """``omega`` times ``|log sigma|**power`` near 0, frozen past sigma = exp(-(power + 2))."""
    knee = min(omega.knee, math.exp(-(power + 2.0)))

    def f(s):
        s = np.minimum(s, knee)
        return omega(s) * _logabs(s) ** power

    return ModulusSpec("custom", func=f, label=f"{omega.key()}*|log|^{power:g}")


# Pairs used for oracle cross-checks; keyed by a short name.
CATALOG_PAIRS = {
    "lipschitz-1/t": ("linear", "power:1:1"),
    "holder0.5-1/t": ("holder:0.5", "power:1:1"),
    "holder0.5-1/t2": ("holder:0.5", "power:2:1"),
    "holder0.25-1/t": ("holder:0.25", "power:1:1"),
    "loglip-1/t3": ("loglip", "power:3:1"),
    "table5-row1": ("rootexp:4", "logovert:1"),
    "table5-row2": ("logpower:2", "power:2:1"),
    "table5-row3": ("logloglip", "expinv:1"),
    "table5-row4": ("logloglip", "powexpinv:1:1"),
    "infinite": ("logpower:3", "power:3:1"),
    "lipschitz-bounded": ("linear", "bounded:1"),
    "holder0.5-bounded": ("holder:0.5", "bounded:1"),
}


def catalog_params(name: str, T0: float = 1.0, mu1: float = 1.0, mu2: float = 2.0) -> ClassParams:
    w, th = CATALOG_PAIRS[name]
    return ClassParams(T0, mu1, mu2, parse_modulus(w), parse_theta(th))
