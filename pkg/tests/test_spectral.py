import math

import numpy as np
import pytest

from deriloss.errors import RateTooSlow
from deriloss.moduli import ClassParams, catalog_params, parse_modulus, parse_theta
from deriloss.spectral import (
    converged_from,
    demo_class,
    demo_loss,
    pick_lambda_sequence,
    trend_witness,
)


def m3_formula(mu1, mu2):
    nu1 = min(1.0, math.sqrt(mu1) / math.pi)
    return nu1 / (128 * mu2)


@pytest.fixture(scope="module")
def finite_demo():
    params, seed = demo_class("finite")
    return demo_loss(params, seed, 200, None, None, [0.5, 1.0])


def test_holder_sequence_matches_inverted_key_quantity():
    # m = K(1 + log(sqrt(lam)/K)) once the minimizer is interior, so
    # M3 m >= n  <=>  log lam >= 2(n/(M3 K) - 1 + log K)
    K, mu1, mu2 = 100.0, 1e-4, 2e-4
    params = ClassParams(1.0, mu1, mu2, parse_modulus("holder:0.5"), parse_theta(f"power:1:{K:g}"))
    M3 = m3_formula(mu1, mu2)
    grid = np.geomspace(1e5, 1e12, 20_001)
    seq = pick_lambda_sequence(params, 60, grid=grid)
    lams = np.array(seq.lambdas)
    assert np.all(np.diff(lams) > 0)
    prev = -1
    for n, lam in enumerate(lams, start=1):
        target = math.exp(2 * (n / (M3 * K) - 1 + math.log(K)))
        # smallest grid point at or past the target, forced past the previous pick
        i = max(int(np.searchsorted(grid, target * (1 - 1e-9))), prev + 1)
        assert lam == pytest.approx(grid[i], rel=1e-12)
        prev = i
    assert all(p >= n for n, p in enumerate(seq.phis, start=1))


def test_single_term_sequence():
    params, seed = demo_class("finite")
    seq = pick_lambda_sequence(params, 1, seed=seed)
    assert len(seq) == 1 and seq.phis[0] >= 1
    assert seq.truncated_reason is None


def test_bounded_rate_is_too_slow():
    params = catalog_params("lipschitz-bounded")
    seq = pick_lambda_sequence(params, 5)
    assert len(seq) < 5 and seq.truncated_reason
    with pytest.raises(RateTooSlow):
        pick_lambda_sequence(params, 5, strict=True)
    with pytest.raises(ValueError):
        pick_lambda_sequence(params, 0)


def test_default_class_truncates():
    # M3 is about 1.8e-3 for mu = (1, 2), far too small to reach phi = 2 below 1e12
    params = catalog_params("holder0.5-1/t")
    seq = pick_lambda_sequence(params, 3)
    assert len(seq) < 3 and "does not reach" in seq.truncated_reason


def test_demo_invariants(finite_demo):
    d = finite_demo
    assert np.all(np.diff(d.lambdas) > 0)
    assert np.all(np.diff(d.a) < 0)
    assert np.all(np.diff(d.data_log_partial) >= 0)
    for j in range(len(d.t_probe)):
        assert np.all(np.diff(d.solution_log_partial(j)) >= 0)
    assert len(d.lambdas) > 100


@pytest.mark.parametrize("eta,phi_start", [(1.0, 40), (0.5, 40), (0.25, 56)])
def test_eta_series_tail(finite_demo, eta, phi_start):
    # exp(-phi/4) only drops below 1e-6 once phi passes 4 log(1e6) ~ 55.3
    phi = np.array(finite_demo.phi)
    partial = np.cumsum(np.exp(-eta * phi))
    first = int(np.argmax(phi >= phi_start))
    assert phi[first] >= phi_start
    assert np.all(np.diff(partial[first:]) < 1e-6)


def test_eta_quarter_tail_from_forty_is_not_small(finite_demo):
    phi = np.array(finite_demo.phi)
    first = int(np.argmax(phi >= 40))
    assert math.exp(-0.25 * phi[first]) > 1e-6


def test_finite_pair_data_converges_and_solution_trends(finite_demo):
    d = finite_demo
    assert d.beta == pytest.approx(d.delta_est / 16)
    assert d.data_converged_from is not None
    for j in range(len(d.t_probe)):
        assert d.solution_trend(j).holds


def test_zero_exponents():
    params, seed = demo_class("finite")
    zero = demo_loss(params, seed, 60, 0.0, 0.0, [1.0])
    assert zero.data_converged_from is not None
    assert zero.solution_trend(0).holds


def test_report_wording(finite_demo):
    text = "\n".join(finite_demo.lines())
    assert "divergence trend present" in text
    assert "diverges" not in text


def test_csv_layout(finite_demo):
    lines = finite_demo.to_csv().splitlines()
    assert lines[0] == ("n,lambda_n,phi_n,a_n,logE_t0,logE_t1,log_data_partial,"
                        "log_solution_partial_t0,log_solution_partial_t1")
    assert len(lines) == len(finite_demo.lambdas) + 1
    assert lines[1].startswith("1,")


def test_trend_and_convergence_helpers():
    assert trend_witness(np.arange(8.0)).holds
    assert not trend_witness(np.zeros(8)).holds
    assert not trend_witness(np.arange(3.0)).holds
    terms = np.log(np.array([1.0, 0.1, 1e-9, 1e-10, 1e-12]))
    assert converged_from(terms) == 3
    assert converged_from(np.zeros(5)) is None


def test_probe_times_validated():
    params, seed = demo_class("finite")
    with pytest.raises(ValueError):
        demo_loss(params, seed, 3, None, None, [0.0])
