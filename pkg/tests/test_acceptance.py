"""The ten acceptance criteria, one test each, at their stated tolerances."""

import dataclasses
import math
import time

import numpy as np
import pytest

from deriloss.activator import (
    BlockParams,
    block_final_log_slope,
    block_phi,
    block_phi_prime,
    block_w,
    build_activator,
    check_class_membership,
    constant_seed,
)
from deriloss.cli import RunConfig, cmd_verify, table5_rows
from deriloss.energy import verify_lower_bound, verify_upper_bound
from deriloss.keyquantity import Branch, compute_m, fit_growth_exponent, geometric_grid
from deriloss.moduli import CATALOG_PAIRS, ClassParams, catalog_params, parse_modulus, parse_theta
from deriloss.spectral import demo_class, demo_loss

from conftest import criterion
from oracles import block_w_formula, brute_force_m

TWO_PI = 2 * math.pi
LAMS = [1e3, 1e4, 1e5, 1e6]
BRANCH_PAIRS = {"holder0.5-1/t": Branch.THETA, "holder0.5-1/t2": Branch.OMEGA}


def random_block(rng):
    gamma = rng.uniform(0.5, 2.0)
    lam = 10 ** rng.uniform(1.0, 4.0)
    eps = rng.uniform(0.01, 1.0) * 8 * gamma**3 * lam
    na = int(rng.integers(0, 50))
    nb = na + int(rng.integers(1, 5))
    return BlockParams(eps, gamma, lam, na, nb)


@pytest.fixture(scope="module")
def activators():
    """Activator coefficients for both branches over the common lambda set."""
    out = {}
    for name, branch in BRANCH_PAIRS.items():
        p = catalog_params(name)
        seed = constant_seed(p)
        for lam in LAMS:
            coef, kq, g = build_activator(seed, lam)
            assert g.branch is branch
            out[name, lam] = (p, seed, coef)
    return out


@criterion(1, "block exactness")
def test_block_exactness():
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    for _ in range(50):
        p = random_block(rng)
        h = 0.01 / p.gl
        t = np.linspace(p.a + 2 * h, p.b - 2 * h, 10_000)
        w = lambda x: block_w_formula(p.eps, p.gamma, p.lam, x, p.a)
        fd = (-w(t + 2 * h) + 16 * w(t + h) - 30 * w(t) + 16 * w(t - h) - w(t - 2 * h)) / (12 * h * h)
        wt = block_w(p, t)[0]
        res = fd + p.lam**2 * (p.gamma**2 - block_phi(p, t)) * wt
        assert np.max(np.abs(res)) <= 1e-6 * p.lam**2 * np.max(np.abs(wt))
        expected = math.exp(p.eps * (p.b - p.a) / (16 * p.gamma**2))
        assert block_w(p, p.b)[1] == pytest.approx(expected, rel=1e-10)
        assert block_final_log_slope(p) == pytest.approx(math.log(expected), rel=1e-10)
    assert time.perf_counter() - start < 10


@criterion(2, "block bound suite")
def test_block_bound_suite():
    rng = np.random.default_rng(77)
    violations = 0
    for key in ("holder:0.5", "loglip", "logpower:2"):
        om = parse_modulus(key)
        for _ in range(4):
            p = random_block(rng)
            t = np.linspace(p.a, p.b, 100_000)
            violations += int(np.sum(np.abs(block_phi(p, t)) > p.eps / (2 * p.gl)))
            violations += int(np.sum(np.abs(block_phi_prime(p, t)) > p.eps * (1 + 1e-12)))
            # separations stratified over log scale from 1/64 of a period to the block length
            factor = p.eps * max(1.0, math.pi / p.gamma) / (p.lam * om(1.0 / p.lam))
            L = p.b - p.a
            strata = np.linspace(math.log(TWO_PI / p.gl / 64), math.log(L), 11)
            d = np.exp(np.concatenate([rng.uniform(lo, hi, 10_000) for lo, hi in zip(strata[:-1], strata[1:])]))
            s = p.a + (L - d) * rng.uniform(0, 1, d.size)
            lhs = np.abs(block_phi(p, s + d) - block_phi(p, s))
            violations += int(np.sum(lhs > factor * om(d) * (1 + 1e-9) + 1e-15 * p.eps / p.gl))
    assert violations == 0


@criterion(3, "m(lambda) brute-force equivalence")
def test_key_quantity_oracle():
    start = time.perf_counter()
    assert len(CATALOG_PAIRS) == 12
    for name, (om, th) in CATALOG_PAIRS.items():
        p = catalog_params(name)
        for lam in (1e2, 1e4, 1e6):
            ref, _ = brute_force_m(om, th, lam)
            assert compute_m(p, lam).m == pytest.approx(ref, rel=1e-6), (name, lam)
    assert time.perf_counter() - start < 30


@criterion(4, "closed-form asymptotics")
def test_closed_form_asymptotics():
    p = ClassParams(1.0, 1.0, 2.0, parse_modulus("holder:0.5"), parse_theta("power:1:1"))
    for lam in np.geomspace(1e2, 1e12, 41):
        assert compute_m(p, float(lam)).m == pytest.approx(1 + 0.5 * math.log(lam), rel=1e-6)
    gevrey = ClassParams(1.0, 1.0, 2.0, parse_modulus("holder:0.5"), parse_theta("power:2:1"))
    slope = fit_growth_exponent(gevrey, geometric_grid(1e3, 1e9, 61)).slope
    assert abs(slope - 0.25) <= 0.01


@criterion(5, "finite-loss pairings for fast-blowing theta and their weakenings")
def test_finite_pairings_and_weakenings():
    start = time.perf_counter()
    rows = {r.name: r for r in table5_rows(1.0, 1.0, 2.0, lam_max=1e9)}
    base = [rows[f"table5-row{k}"] for k in range(1, 5)]
    weak = [rows[f"table5-row{k} weakened"] for k in range(1, 5)]
    assert time.perf_counter() - start < 60
    assert all(r.finite for r in base), [r.line() for r in base]
    flipped = [r for r in weak if not r.finite]
    assert len(flipped) == 4, "still Finite after weakening: " + "; ".join(r.line() for r in weak if r.finite)


@criterion(6, "energy upper bound")
def test_upper_bound(activators):
    failures = []
    for (name, lam), (p, _, coef) in activators.items():
        rep = verify_upper_bound(coef, p, [lam], sample_count=2000)
        failures += [line for line in rep.lines() if line.startswith("FAIL")]
    assert not failures, failures


@criterion(7, "energy lower bound and activator predicate")
def test_lower_bound():
    for name in BRANCH_PAIRS:
        p = catalog_params(name)
        rep = verify_lower_bound(constant_seed(p), LAMS, deltas=(p.T0 / 10, p.T0 / 100), sample_count=2000)
        assert all(r.passed for r in rep.rows), rep.lines()
        assert [c.delta for c in rep.certificates] == [p.T0 / 10, p.T0 / 100]
        assert all(c.certified for c in rep.certificates), rep.lines()


@criterion(8, "class membership of constructed coefficients")
def test_class_membership(activators):
    for (name, lam), (p, _, coef) in activators.items():
        rep = check_class_membership(coef, p, samples=10**6)
        assert rep.ok, (name, lam, rep.lines())


@criterion(9, "spectral demonstration")
def test_spectral_demo():
    params, seed = demo_class("finite")
    fin = demo_loss(params, seed, 400, None, None, [0.5, 1.0])
    assert fin.beta == pytest.approx(fin.delta_est / 16) and fin.gamma_reg == fin.beta
    N = fin.data_converged_from
    assert N is not None
    assert np.all(np.exp(fin.data_log_terms[N:]) < 1e-8)
    for j in range(len(fin.t_probe)):
        assert fin.solution_trend(j).holds

    params, seed = demo_class("infinite")
    inf = demo_loss(params, seed, 400, 1.0, 1.0, [0.5, 1.0])
    for g in (1.0, 2.0, 4.0):
        d = dataclasses.replace(inf, gamma_reg=g)
        for j in range(len(d.t_probe)):
            assert d.solution_trend(j).holds, (g, d.t_probe[j])


@criterion(10, "verify report determinism")
def test_verify_determinism(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    cmd_verify(RunConfig(out=str(a)), emit=lambda s: None)
    cmd_verify(RunConfig(out=str(b)), emit=lambda s: None)
    assert (a / "verify.txt").read_bytes() == (b / "verify.txt").read_bytes()
