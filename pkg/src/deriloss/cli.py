"""Command-line front end: ``deriloss {classify,table5,construct,verify,spectral,plot}``.

Settings come from an optional flat ``key=value`` file (``--config``) and are
overridden by flags. Exit codes: 0 pass, 1 verification failure, 2 config or
input error, 3 hypothesis violation.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import tempfile
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import svgplot
from .activator import build_activator, check_class_membership, constant_seed
from .energy import UpperBoundReport, report_text, verify_lower_bound, verify_upper_bound
from .errors import ConfigError, DerilossError, HypothesisViolated, RateTooSlow
from .keyquantity import Regime, classify_regime, geometric_grid, m_curve
from .moduli import CATALOG_PAIRS, ClassParams, parse_modulus, parse_theta, weaken
from .spectral import demo_class, demo_loss

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_HYPOTHESIS = 0, 1, 2, 3

# Grid defaults per command when no lambda range is given.
GRID_DEFAULTS = {
    "classify": (1e2, 1e9, 29),
    "verify": (1e3, 1e6, 4),
}
TABLE5_ROWS = ("table5-row1", "table5-row2", "table5-row3", "table5-row4")
FINITE_VARIATION = 0.25


@dataclass(frozen=True)
class RunConfig:
    omega: str = "holder:0.5"
    theta: str = "power:1:1"
    t0: float = 1.0
    mu1: float = 1.0
    mu2: float = 2.0
    lambda_min: Optional[float] = None
    lambda_max: Optional[float] = None
    lambda_points: Optional[int] = None
    seed_t1_frac: float = 0.9
    eta: float = 0.9
    gamma2_frac: float = 0.5
    out: str = "."

    def params(self) -> ClassParams:
        try:
            return ClassParams(self.t0, self.mu1, self.mu2, parse_modulus(self.omega), parse_theta(self.theta))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def seed(self, params: Optional[ClassParams] = None):
        if not 0 < self.seed_t1_frac < 1 or not 0 < self.eta < 1 or not 0 < self.gamma2_frac < 1:
            raise ConfigError("seed-t1-frac, eta and gamma2-frac must lie in (0, 1)")
        return constant_seed(params or self.params(), self.seed_t1_frac, self.eta, self.gamma2_frac)

    def grid(self, command: str) -> np.ndarray:
        lo, hi, n = GRID_DEFAULTS.get(command, GRID_DEFAULTS["classify"])
        lo = lo if self.lambda_min is None else self.lambda_min
        hi = hi if self.lambda_max is None else self.lambda_max
        n = n if self.lambda_points is None else self.lambda_points
        if not (0 < lo <= hi) or n < 1 or (n > 1 and lo == hi):
            raise ConfigError("need 0 < lambda-min < lambda-max and lambda-points >= 1")
        return geometric_grid(lo, hi, n)


_FIELD_TYPES = {"omega": str, "theta": str, "out": str, "lambda_points": int}


def _coerce(key: str, value: str):
    kind = _FIELD_TYPES.get(key, float)
    try:
        return kind(value)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {value!r}") from None


def read_config_file(path: str) -> dict:
    """Parse ``key = value`` lines; blank lines and ``#`` comments are ignored."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    known = {f.name for f in fields(RunConfig)}
    out = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected key=value")
        key, value = (x.strip() for x in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in known:
            raise ConfigError(f"{path}:{n}: unknown key {key!r}")
        out[key] = _coerce(key, value)
    return out


def build_config(args: argparse.Namespace) -> RunConfig:
    values = read_config_file(args.config) if args.config else {}
    for f in fields(RunConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            values[f.name] = v
    cfg = RunConfig(**values)
    cfg.params()  # validate before any computation
    return cfg


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------- commands


def cmd_classify(cfg: RunConfig, emit=print) -> int:
    params = cfg.params()
    res = classify_regime(params, cfg.grid("classify"))
    curve = m_curve(params, res.lambda_grid)
    rows = ["lambda,m,s_star,first_term,second_term,branch,m_over_loglambda"]
    emit(f"{'lambda':>12} {'m':>14} {'m/log':>10} branch")
    for r in curve:
        ratio = r.m / math.log(r.lam)
        rows.append(f"{r.lam!r},{r.m!r},{r.s_star!r},{r.first_term!r},{r.second_term!r},"
                    f"{r.branch.value},{ratio!r}")
        emit(f"{r.lam:12.4g} {r.m:14.6g} {ratio:10.4f} {r.branch.value}")
    emit(f"tail ratio m/log(lambda) in [{res.ratio_liminf_est:.6g}, {res.ratio_limsup_est:.6g}]")
    emit(f"regime: {res.regime.value}")
    write_atomic(Path(cfg.out) / "classify.csv", "\n".join(rows) + "\n")
    return EXIT_OK


@dataclass(frozen=True)
class Table5Row:
    name: str
    omega: str
    theta: str
    ratio_lo: float
    ratio_hi: float
    regime: Regime

    @property
    def variation(self) -> float:
        return self.ratio_hi / self.ratio_lo - 1.0

    @property
    def finite(self) -> bool:
        return self.regime is Regime.FINITE and self.variation < FINITE_VARIATION

    def line(self) -> str:
        verdict = "Finite" if self.finite else f"not Finite ({self.regime.value})"
        return (f"{self.name:<20} omega={self.omega:<24} theta={self.theta:<14} "
                f"tail m/log(lambda) in [{self.ratio_lo:.5g}, {self.ratio_hi:.5g}] "
                f"variation={self.variation:.3%} -> {verdict}")


def table5_rows(T0=1.0, mu1=1.0, mu2=2.0, lam_max=1e9, points=31):
    """The four finite-loss pairings and each with omega weakened by one log factor."""
    out = []
    last_decade = geometric_grid(lam_max / 10, lam_max, 11)
    full = geometric_grid(lam_max / 1e6, lam_max, points)
    for name in TABLE5_ROWS:
        om_key, th_key = CATALOG_PAIRS[name]
        base = ClassParams(T0, mu1, mu2, parse_modulus(om_key), parse_theta(th_key))
        for label, om in ((name, base.omega), (name + " weakened", weaken(base.omega))):
            p = replace(base, omega=om)
            ratios = [r.m / math.log(r.lam) for r in m_curve(p, last_decade)]
            regime = classify_regime(p, full).regime
            out.append(Table5Row(label, om.key(), th_key, min(ratios), max(ratios), regime))
    return out


def cmd_table5(cfg: RunConfig, emit=print) -> int:
    rows = table5_rows(cfg.t0, cfg.mu1, cfg.mu2)
    text = "\n".join(r.line() for r in rows) + "\n"
    for r in rows:
        emit(r.line())
    write_atomic(Path(cfg.out) / "table5.txt", text)
    return EXIT_OK


def cmd_construct(cfg: RunConfig, lam: float, points: int = 2000, samples: int = 100_000, emit=print) -> int:
    params = cfg.params()
    seed = cfg.seed(params)
    coef, kq, g = build_activator(seed, lam)
    out = Path(cfg.out)
    write_atomic(out / "coefficient.csv", coef.to_csv(points))
    report = check_class_membership(coef, params, samples=samples)
    write_atomic(out / "membership.txt", "\n".join(report.lines()) + "\n")
    guarantee = [
        f"lambda={g.lam!r}", f"branch={g.branch.value}", f"a_lambda={g.a_lambda!r}", f"b_lambda={g.b_lambda!r}",
        f"m={g.m!r}", f"M3={g.M3!r}", f"log_M4={g.log_M4!r}", f"log_uprime_b={g.log_uprime_b!r}",
        f"log_lower_bound={g.log_bound!r}",
    ]
    write_atomic(out / "guarantee.txt", "\n".join(guarantee) + "\n")
    for line in list(coef.describe()) + guarantee:
        emit(line)
    emit("membership: " + ("ok" if report.ok else "VIOLATED"))
    return EXIT_OK if report.ok else EXIT_FAIL


def stress_config() -> RunConfig:
    """Small-mu, large-K class where the lower bound is close to tight in exponent."""
    p, _ = demo_class("finite")
    return RunConfig(omega=p.omega.key(), theta=p.theta.key(), t0=p.T0, mu1=p.mu1, mu2=p.mu2,
                     lambda_min=1e7, lambda_max=1e9, lambda_points=3, seed_t1_frac=0.9999, eta=0.99)


def run_verify(cfg: RunConfig, sample_count: int = 2000, m3_scale: float = 1.0) -> str:
    """Upper and lower energy bounds over the grid, as report text ending in RESULT PASS/FAIL."""
    params = cfg.params()
    seed = cfg.seed(params)
    grid = cfg.grid("verify")
    header = [f"class omega={cfg.omega} theta={cfg.theta} T0={cfg.t0!r} mu1={cfg.mu1!r} mu2={cfg.mu2!r}",
              f"seed T1={seed.T1!r} gamma={seed.gamma!r} eta={seed.eta!r}"]
    if m3_scale != 1.0:
        header.append(f"self-test: M3 multiplied by {m3_scale!r}")
    upper_rows, admissible = [], []
    for lam in grid.tolist():
        try:
            coef = build_activator(seed, lam)[0]
            admissible.append(lam)
        except HypothesisViolated as exc:
            header.append(f"lambda={lam!r}: no activator ({', '.join(exc.failed)}); upper bound on the seed")
            coef = seed.as_coefficient()
        upper_rows.extend(verify_upper_bound(coef, params, [lam], sample_count=sample_count).rows)
    lower = None
    if admissible:
        lower = verify_lower_bound(seed, admissible, sample_count=sample_count, m3_scale=m3_scale)
    else:
        header.append("lower bound: no admissible lambda on the grid")
    return "\n".join(header) + "\n" + report_text(UpperBoundReport(tuple(upper_rows)), lower)


def cmd_verify(cfg: RunConfig, self_test: bool = False, emit=print) -> int:
    text = run_verify(stress_config() if self_test else cfg, m3_scale=10.0 if self_test else 1.0)
    name = "verify-selftest.txt" if self_test else "verify.txt"
    write_atomic(Path(cfg.out) / name, text)
    emit(text.rstrip("\n"))
    return EXIT_OK if text.endswith("RESULT PASS\n") else EXIT_FAIL


def cmd_spectral(cfg: RunConfig, pair: str, n_max: int, gamma: Optional[float], emit=print) -> int:
    params, seed = demo_class(pair, cfg.t0)
    demo = demo_loss(params, seed, n_max, None, gamma, (0.5 * cfg.t0, cfg.t0))
    write_atomic(Path(cfg.out) / f"spectral-{pair}.csv", demo.to_csv())
    for line in demo.lines():
        emit(line)
    return EXIT_OK


def cmd_plot(cfg: RunConfig, input_csv: str, output: Optional[str] = None, emit=print) -> int:
    src = Path(input_csv)
    try:
        text = src.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {input_csv}: {exc.strerror}") from None
    try:
        svg = svgplot.plot_csv(text)
    except ValueError as exc:
        raise ConfigError(f"{input_csv}: {exc}") from None
    dest = Path(output) if output else Path(cfg.out) / (src.stem + ".svg")
    write_atomic(dest, svg)
    emit(f"wrote {dest}")
    return EXIT_OK


# ---------------------------------------------------------------- argument parsing


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value settings file; flags override it")
    p.add_argument("--omega", help="modulus key, e.g. holder:0.5, logpower:2, loglip")
    p.add_argument("--theta", help="derivative bound key, e.g. power:1:1, expinv:1, none")
    p.add_argument("--t0", type=float)
    p.add_argument("--mu1", type=float)
    p.add_argument("--mu2", type=float)
    p.add_argument("--lambda-min", dest="lambda_min", type=float)
    p.add_argument("--lambda-max", dest="lambda_max", type=float)
    p.add_argument("--lambda-points", dest="lambda_points", type=int)
    p.add_argument("--seed-t1-frac", dest="seed_t1_frac", type=float)
    p.add_argument("--eta", type=float)
    p.add_argument("--gamma2-frac", dest="gamma2_frac", type=float)
    p.add_argument("--out", help="output directory")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="deriloss", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (("classify", "m(lambda) curve and regime label"),
                            ("table5", "finite-loss pairings with theta >> 1/t and their weakenings"),
                            ("construct", "build an activator coefficient at one lambda"),
                            ("verify", "check the energy bounds over the lambda grid"),
                            ("spectral", "truncated data/solution series for a demonstration pair"),
                            ("plot", "render a CSV written by another command as SVG")):
        p = sub.add_parser(name, help=help_text)
        _common(p)
        if name == "construct":
            p.add_argument("--lambda", dest="lam", type=float, required=True)
            p.add_argument("--points", type=int, default=2000)
            p.add_argument("--samples", type=int, default=100_000)
        elif name == "verify":
            p.add_argument("--self-test", action="store_true",
                           help="corrupt M3 by a factor 10 on a stress class; expected to fail")
        elif name == "spectral":
            p.add_argument("--pair", choices=("finite", "infinite"), default="finite")
            p.add_argument("--n-max", dest="n_max", type=int, default=400)
            p.add_argument("--gamma", type=float, default=None, help="solution weight exponent (default delta/16)")
        elif name == "plot":
            p.add_argument("input_csv")
            p.add_argument("-o", "--output")
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        cfg = build_config(args)
        if args.command == "classify":
            return cmd_classify(cfg)
        if args.command == "table5":
            return cmd_table5(cfg)
        if args.command == "construct":
            return cmd_construct(cfg, args.lam, args.points, args.samples)
        if args.command == "verify":
            return cmd_verify(cfg, args.self_test)
        if args.command == "spectral":
            return cmd_spectral(cfg, args.pair, args.n_max, args.gamma)
        return cmd_plot(cfg, args.input_csv, args.output)
    except HypothesisViolated as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    except RateTooSlow as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DerilossError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
