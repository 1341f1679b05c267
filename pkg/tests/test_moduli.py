import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from deriloss.errors import ConfigError, DivergentIntegral, NonFiniteEvaluation
from deriloss.moduli import (
    CATALOG_PAIRS,
    ClassParams,
    ModulusSpec,
    ThetaSpec,
    catalog_params,
    check_modulus_axioms,
    check_theta_axioms,
    parse_modulus,
    parse_theta,
    quad_integral,
    theta_integral,
)

MODULUS_KEYS = ["linear", "holder:0.5", "holder:0.25", "loglip", "logpower:2", "logpower:3", "rootexp:4",
                "logloglip"]
THETA_KEYS = ["power:1:1", "power:2:1", "power:0.5:2", "logovert:1", "expinv:1", "powexpinv:1:1",
              "powexpinv:2:1", "bounded:1", "power:3:0.1"]


def mp_theta_integral(key, s, T0=1.0):
    """Independent oracle: mpmath tanh-sinh quadrature of the formula."""
    kind, *args = key.split(":")
    if kind == "power":
        beta, K = float(args[0]), float(args[1])
        f = lambda t: K / t**beta
    elif kind == "logovert":
        K = float(args[0])
        f = lambda t: -K * mpmath.log(t) / t
    elif kind == "expinv":
        K = float(args[0])
        f = lambda t: K * mpmath.exp(1 / t)
    elif kind == "powexpinv":
        beta, K = float(args[0]), float(args[1])
        f = lambda t: K * mpmath.exp(1 / t) / t**beta
    else:
        K = float(args[0])
        f = lambda t: K
    with mpmath.workdps(30):
        pts = [s] + [x for x in np.geomspace(s, T0, 12)[1:-1]] + [T0]
        return float(mpmath.quad(f, pts))


@pytest.mark.parametrize("key", MODULUS_KEYS)
def test_catalog_moduli_satisfy_axioms(key):
    assert check_modulus_axioms(parse_modulus(key), 40).ok


@pytest.mark.parametrize("key", MODULUS_KEYS)
def test_moduli_strictly_decrease_to_zero(key):
    # log-type moduli are frozen above their knee, so strictness is checked below it
    om = parse_modulus(key)
    sig = 2.0 ** -np.arange(1, 41, dtype=float)
    w = om(sig)
    below = sig <= om.knee
    assert np.all(np.diff(w[below]) < 0)
    assert np.all(np.diff(w) <= 0)
    assert w[-1] < 1e-2 * w[0]


def test_holder_passes_and_square_fails_quotient_axiom():
    assert check_modulus_axioms(parse_modulus("holder:0.5"), 20).ok
    sq = ModulusSpec("custom", func=lambda s: np.asarray(s) ** 2, label="sigma^2")
    rep = check_modulus_axioms(sq, 20)
    assert not rep["sigma/omega nondecreasing"].passed
    lo, hi = rep["sigma/omega nondecreasing"].witness
    assert lo < hi


def test_logpower3_monotonicity_by_direct_scan():
    sig = 2.0 ** -np.arange(30, 0, -1, dtype=float)
    w = sig * np.abs(np.log(sig)) ** 3
    om = parse_modulus("logpower:3")
    assert check_modulus_axioms(om, 30).ok
    # below the knee the catalog entry is the bare formula
    small = sig < math.exp(-3)
    np.testing.assert_allclose(om(sig[small]), w[small], rtol=1e-14)


def test_constant_modulus_is_limit_case():
    om = parse_modulus("constant:1")
    assert om.limit_case
    assert check_modulus_axioms(om, 20).ok


def test_nonfinite_modulus_rejected():
    bad = ModulusSpec("custom", func=lambda s: np.full_like(np.asarray(s, dtype=float), np.nan))
    with pytest.raises(NonFiniteEvaluation):
        check_modulus_axioms(bad, 10)


@pytest.mark.parametrize("key", THETA_KEYS)
def test_catalog_theta_axioms(key):
    # exp(1/t) overflows binary64 below t = 1/709
    depth = 9 if "exp" in key else 30
    assert check_theta_axioms(parse_theta(key), 1.0, grid_depth=depth).ok


def test_overflowing_theta_reported():
    with pytest.raises(NonFiniteEvaluation):
        check_theta_axioms(parse_theta("expinv:1"), 1.0, grid_depth=30)


def test_power_theta_closed_forms():
    th1, th2 = parse_theta("power:1:1"), parse_theta("power:2:1")
    for s in (0.5, 0.1, 1e-3):
        assert th1.integral(s, 1.0) == pytest.approx(-math.log(s), rel=1e-14)
        assert th2.integral(s, 1.0) == pytest.approx(1 / s - 1, rel=1e-14)
    assert theta_integral(th1, math.exp(-1), 1.0) == pytest.approx(1.0, rel=1e-14)


def test_logovert_example():
    th = parse_theta("logovert:1")
    expected = 0.5 * math.log(10) ** 2
    assert theta_integral(th, 0.1, 1.0) == pytest.approx(expected, rel=1e-12)
    assert mp_theta_integral("logovert:1", 0.1) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("key", THETA_KEYS)
def test_integral_matches_independent_quadrature(key):
    th = parse_theta(key)
    for s in (0.9, 0.3, 0.05, 0.01):
        assert th.integral(s, 1.0) == pytest.approx(mp_theta_integral(key, s), rel=1e-8)
    assert th.integral(1.0, 1.0) == 0.0


@pytest.mark.parametrize("key", THETA_KEYS)
def test_quadrature_fallback_agrees_with_closed_form(key):
    th = parse_theta(key)
    rng = np.random.default_rng(7)
    for s in np.exp(rng.uniform(math.log(0.02), 0.0, 50)):
        assert quad_integral(th, float(s), 1.0) == pytest.approx(th.integral(float(s), 1.0), rel=1e-8)


@pytest.mark.parametrize("key", ["power:1:1", "power:2:1", "logovert:1", "expinv:1", "powexpinv:1:1"])
def test_nonintegrable_theta_integral_grows(key):
    th = parse_theta(key)
    s = 2.0 ** -np.arange(1, 9, dtype=float)
    vals = [th.integral(float(x), 1.0) for x in s]
    assert np.all(np.diff(vals) > 0)
    with pytest.raises(DivergentIntegral):
        theta_integral(th, 0.0, 1.0)


def test_increasing_custom_theta_fails():
    th = ThetaSpec("custom", func=lambda t: np.asarray(t, dtype=float))
    assert not check_theta_axioms(th, 1.0)["nonincreasing"].passed


def test_parsers_and_errors():
    assert parse_theta("none") is None
    assert parse_theta("power:1.5:2").beta == 1.5
    assert parse_theta("power:1.5:2").K == 2
    for bad in ("holder:2", "nope", "logpower", "holder:x"):
        with pytest.raises(ConfigError):
            parse_modulus(bad)
    with pytest.raises(ConfigError):
        parse_theta("power:1:-1")
    with pytest.raises(ValueError):
        ClassParams(1.0, 2.0, 1.0, parse_modulus("linear"), None)


def test_catalog_pairs_build():
    for name in CATALOG_PAIRS:
        p = catalog_params(name)
        assert p.mu1 < p.mu2


@settings(max_examples=60, deadline=None)
@given(st.floats(0.05, 0.95), st.floats(1e-6, 0.5))
def test_holder_modulus_is_subadditive_scale(alpha, sigma):
    # sigma/omega nondecreasing means omega(2 sigma) <= 2 omega(sigma)
    om = ModulusSpec("holder", alpha)
    assert om(2 * sigma) <= 2 * om(sigma) * (1 + 1e-12)
