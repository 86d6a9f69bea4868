import math

import numpy as np
import pandas as pd
import pytest
from scipy import integrate, stats

from src.amp_core import (
    AmpParams,
    KnockoffTheory,
    StateEvolution,
    alpha_zero,
    augmented_params,
    exceedance,
    exceedance_slope,
    fdp_tpp_infinity,
    functional_f,
    functional_g,
    lambda_for_target,
    null_risk,
    soft_threshold,
    soft_threshold_risk,
    soft_threshold_risk_slope,
    solve_state_evolution,
    trace_augmented,
    trace_tradeoff,
    tradeoff_q,
    write_curve_csv,
)
from src.errors import (
    DegenerateFixedPointError,
    NoAdmissibleRootError,
    UnattainableTargetError,
)
from src.priors import Exponential, GammaMixture, PointMass, PriorSpec, TabulatedCdf

EXP = PriorSpec(0.2, Exponential(1.0))
PARAMS = AmpParams(0.2, 1.0, 0.5)


def _excess(t, delta):
    return (1 + t * t) * stats.norm.cdf(-t) - t * stats.norm.pdf(t) - delta / 2


def test_soft_threshold():
    assert soft_threshold(2.0, 1.5) == pytest.approx(0.5)
    assert soft_threshold(-2.0, 1.5) == pytest.approx(-0.5)
    assert soft_threshold(0.7, 1.5) == 0.0
    with pytest.raises(ValueError):
        soft_threshold(1.0, -0.1)


def test_alpha_zero_at_delta_one():
    assert abs(alpha_zero(1.0)) < 1e-12


@pytest.mark.parametrize("delta", [0.25, 0.5, 1.0, 1.5, 2.0])
def test_alpha_zero_solves_its_equation(delta):
    assert abs(_excess(alpha_zero(delta), delta)) < 1e-12


def test_alpha_zero_sign():
    assert alpha_zero(0.5) > 0
    assert alpha_zero(1.5) < 0
    with pytest.raises(ValueError):
        alpha_zero(0.0)


def test_null_risk_matches_quadrature():
    for a in (0.3, 1.0, 2.5):
        direct, _ = integrate.quad(lambda w: soft_threshold(w, a) ** 2 * stats.norm.pdf(w), -40, 40, points=[-a, a])
        assert null_risk(a) == pytest.approx(direct, rel=1e-7)


@pytest.mark.parametrize("mu", [-3.0, -0.4, 0.0, 0.8, 2.5, 12.0])
def test_soft_threshold_risk_closed_form(mu):
    alpha, tau = 1.3, 0.7

    def integrand(w):
        return (soft_threshold(mu + tau * w, alpha * tau) - mu) ** 2 * stats.norm.pdf(w)

    direct, _ = integrate.quad(integrand, -40, 40, points=[(alpha * tau - mu) / tau, (-alpha * tau - mu) / tau],
                               limit=200)
    assert soft_threshold_risk(mu, alpha, tau) == pytest.approx(direct, rel=1e-7, abs=1e-10)


@pytest.mark.parametrize("mu", [-2.0, 0.3, 1.7, 6.0])
def test_slopes_match_finite_differences(mu):
    alpha, tau, h = 1.1, 0.6, 1e-6
    fd = (soft_threshold_risk(mu + h, alpha, tau) - soft_threshold_risk(mu - h, alpha, tau)) / (2 * h)
    assert soft_threshold_risk_slope(mu, alpha, tau) == pytest.approx(fd, rel=1e-5, abs=1e-8)
    fd = (exceedance(mu + h, alpha, tau) - exceedance(mu - h, alpha, tau)) / (2 * h)
    assert exceedance_slope(mu, alpha, tau) == pytest.approx(fd, rel=1e-5, abs=1e-8)


def test_functional_g_point_mass():
    prior = PriorSpec(0.2, PointMass(10.0))
    expected = 0.8 * 2 * stats.norm.cdf(-1.0) + 0.2
    assert functional_g(prior, 1.0, 0.5) == pytest.approx(expected, abs=1e-10)
    assert functional_g(prior, 1.0, 0.5) == pytest.approx(0.4539, abs=1e-4)


def test_functional_f_nearly_null_prior():
    prior = PriorSpec(1e-12, Exponential(1.0))
    assert functional_f(prior, 1.0, 1.0) == pytest.approx(null_risk(1.0), rel=1e-9)


def test_functionals_validate_arguments():
    with pytest.raises(ValueError):
        functional_f(EXP, 0.0, 1.0)
    with pytest.raises(ValueError):
        functional_g(EXP, 1.0, 0.0)


@pytest.mark.parametrize("prior, alpha, tau", [
    (PriorSpec(0.2, Exponential(1.0)), 1.2, 0.8),
    (PriorSpec(0.1, PointMass(1.9)), 0.9, 0.6),
    (PriorSpec(0.3, GammaMixture((0.8, 3.6), (0.25, 0.75))), 1.6, 1.1),
    (PriorSpec(0.15, TabulatedCdf((0.5, 1.0, 4.0), (0.2, 0.6, 1.0))), 2.0, 0.4),
])
def test_functionals_agree_with_monte_carlo(prior, alpha, tau):
    n = 400_000
    rng = np.random.default_rng(11)
    pi = prior.sample(n, seed=12)
    x = pi + tau * rng.standard_normal(n)
    loss = (soft_threshold(x, alpha * tau) - pi) ** 2
    hit = np.abs(x) > alpha * tau
    assert abs(functional_f(prior, alpha, tau) - loss.mean()) < 4 * loss.std() / math.sqrt(n)
    se = math.sqrt(hit.mean() * (1 - hit.mean()) / n)
    assert abs(functional_g(prior, alpha, tau) - hit.mean()) < 4 * se


MC_PRIORS = [
    PriorSpec(0.2, Exponential(1.0)),
    PriorSpec(0.1, PointMass(1.9)),
    PriorSpec(0.05, PointMass(0.5)),
    PriorSpec(0.3, GammaMixture((0.8, 3.6), (0.25, 0.75))),
    PriorSpec(0.15, TabulatedCdf((0.5, 1.0, 4.0), (0.2, 0.6, 1.0))),
]


@pytest.mark.slow
@pytest.mark.parametrize("prior", MC_PRIORS)
@pytest.mark.parametrize("alpha, tau", [(0.5, 0.5), (1.0, 1.0), (1.8, 0.7), (3.0, 1.5)])
def test_functionals_agree_with_large_monte_carlo(prior, alpha, tau):
    n, chunk = 10_000_000, 1_000_000
    rng = np.random.default_rng(41)
    loss_sum = loss_sq = hits = 0.0
    for k in range(n // chunk):
        pi = prior.sample(chunk, seed=500 + k)
        x = pi + tau * rng.standard_normal(chunk)
        loss = (soft_threshold(x, alpha * tau) - pi) ** 2
        loss_sum += loss.sum()
        loss_sq += (loss ** 2).sum()
        hits += np.count_nonzero(np.abs(x) > alpha * tau)
    mean = loss_sum / n
    sd = math.sqrt(max(loss_sq / n - mean ** 2, 0.0))
    assert abs(functional_f(prior, alpha, tau) - mean) < 4.5 * sd / math.sqrt(n)
    rate = hits / n
    assert abs(functional_g(prior, alpha, tau) - rate) < 4.5 * math.sqrt(rate * (1 - rate) / n)


def test_fixed_point_residuals_and_risk_identity():
    se = StateEvolution(PARAMS, EXP)
    fp = se.fixed_point(0.5)
    r_tau, r_lam = se.residuals(fp)
    assert abs(r_tau) < 1e-9
    assert abs(r_lam) < 1e-9
    assert PARAMS.delta * (fp.tau_amp ** 2 - PARAMS.sigma ** 2) == pytest.approx(se.f(fp.alpha, fp.tau_amp), abs=1e-9)
    assert fp.tau_amp > PARAMS.sigma


def test_fixed_point_is_cached_and_matches_module_solver():
    se = StateEvolution(PARAMS, EXP)
    assert se.fixed_point(0.3) is se.fixed_point(0.3)
    assert solve_state_evolution(PARAMS, EXP, 0.3).alpha == pytest.approx(se.fixed_point(0.3).alpha, rel=1e-10)


def test_lambda_increases_with_alpha():
    se = StateEvolution(PARAMS, EXP)
    lams = [se.lambda_at(a) for a in np.linspace(0.2, 6.0, 12)]
    assert np.all(np.diff(lams) > 0)


def test_alpha_respects_floor_when_delta_below_one():
    params = AmpParams(0.2, 0.5, 0.5)
    se = StateEvolution(params, EXP)
    fp = se.fixed_point(0.05)
    assert fp.alpha > alpha_zero(0.5)
    with pytest.raises(NoAdmissibleRootError):
        se.tau_at(alpha_zero(0.5) - 0.01)


def test_admissible_alpha_range():
    se = StateEvolution(PARAMS, EXP)
    lo, hi = se.admissible_alpha_range()
    assert lo == pytest.approx(se.smallest_alpha())
    assert hi == max(8.0, lo + 1.0)
    assert se.admissible_alpha_range(9.0) == (9.0, 10.0)
    with pytest.raises(ValueError):
        se.admissible_alpha_range(se.alpha_min)


def test_curves_run_forward_when_smallest_alpha_is_large(monkeypatch):
    monkeypatch.setattr(StateEvolution, "smallest_alpha", lambda self: 9.0)
    rows = trace_tradeoff(PARAMS, EXP, n_points=6)
    assert rows[0].alpha == pytest.approx(9.0)
    assert np.all(np.diff([row.lam for row in rows]) > 0)


def test_zero_limit_hits_selection_boundary():
    params = AmpParams(0.1, 0.5, 0.5)
    se = StateEvolution(params, PriorSpec(0.1, Exponential(1.0)))
    fp = se.zero_limit()
    assert se.g(fp.alpha, fp.tau_amp) / params.delta == pytest.approx(1.0, abs=1e-4)


def test_noiseless_degenerate_fixed_point():
    se = StateEvolution(AmpParams(0.05, 1.0, 0.0), PriorSpec(0.05, PointMass(1.0)))
    with pytest.raises(DegenerateFixedPointError):
        se.tau_at(3.0)


def test_params_validation():
    with pytest.raises(ValueError):
        AmpParams(0.0, 1.0, 0.5)
    with pytest.raises(ValueError):
        AmpParams(0.2, -1.0, 0.5)
    with pytest.raises(ValueError):
        AmpParams(0.2, 1.0, -0.5)


def test_fdp_tpp_infinity_bounds():
    se = StateEvolution(PARAMS, EXP)
    pt = fdp_tpp_infinity(se.fixed_point(1.0), EXP, PARAMS.epsilon)
    assert 0 < pt.fdp_inf < 1
    assert 0 < pt.tpp_inf < 1


def test_tradeoff_curve_is_ordered():
    rows = trace_tradeoff(PARAMS, EXP, n_points=15)
    lams = [r.lam for r in rows]
    tpps = [r.tpp_inf for r in rows]
    assert np.all(np.diff(lams) > 0)
    assert np.all(np.diff(tpps) < 0)
    # q(tpp) reproduces the curve at its own nodes
    mid = rows[7]
    assert tradeoff_q(rows, mid.tpp_inf) == pytest.approx(mid.fdp_inf, rel=1e-8)


def test_tradeoff_at_explicit_lambdas():
    rows = trace_tradeoff(PARAMS, EXP, lambdas=[2.0, 0.5, 1.0])
    assert [r.lam for r in rows] == [0.5, 1.0, 2.0]


def test_augmented_params():
    aug = augmented_params(PARAMS, 1.0)
    assert aug.delta_prime == pytest.approx(0.5)
    assert aug.epsilon_prime == pytest.approx(0.1)
    with pytest.raises(ValueError):
        augmented_params(PARAMS, 0.0)


def test_knockoff_theory_point():
    theory = KnockoffTheory(PARAMS, EXP, rho=1.0, t0=0.1)
    pt = theory.point(0.5)
    assert pt.knockoff_rate == pytest.approx(2 * stats.norm.cdf(-pt.alpha))
    assert pt.null_rate == pytest.approx(0.8 * pt.knockoff_rate)
    assert 0 < theory.pi0_factor() <= 1
    with pytest.raises(ValueError):
        theory.fdp_hat(0.05)
    assert theory.fdp_hat(0.5) > 0


def test_knockoff_estimate_bounds_augmented_fdp():
    # the pi0 factor never drops below 1 - eps
    theory = KnockoffTheory(PARAMS, EXP, rho=1.0, t0=0.1)
    pt = theory.point(1.0)
    assert theory.fdp_hat(1.0) >= pt.fdp_aug * (1 - 1e-9)


def test_augmented_curve_fills_estimate_above_t0(tmp_path):
    rows = trace_augmented(PARAMS, EXP, rho=1.0, t0=0.1, n_points=12)
    for row in rows:
        assert (row.fdp_hat_aug is None) == (row.lam < 0.1)
    df = write_curve_csv(rows, tmp_path / "aug.csv")
    assert "fdp_hat_aug" in df.columns
    plain = write_curve_csv(trace_tradeoff(PARAMS, EXP, n_points=5), tmp_path / "plain.csv")
    assert list(plain.columns) == ["lambda", "alpha", "tau", "fdp_inf", "tpp_inf"]
    assert len(pd.read_csv(tmp_path / "plain.csv")) == 5


def test_target_solution_hits_q():
    sol = lambda_for_target(PARAMS, EXP, 0.2, "oracle")
    assert sol.achieved == pytest.approx(0.2, abs=1e-8)
    assert not sol.boundary


def test_unattainable_targets():
    with pytest.raises(UnattainableTargetError):
        lambda_for_target(PARAMS, EXP, 1e-14, "oracle")
    with pytest.raises(UnattainableTargetError):
        lambda_for_target(PARAMS, EXP, 0.99, "oracle")
    with pytest.raises(ValueError):
        lambda_for_target(PARAMS, EXP, 0.2, "bayes")
    with pytest.raises(ValueError):
        lambda_for_target(PARAMS, EXP, 1.2)


@pytest.mark.slow
def test_power_at_ten_percent():
    oracle = lambda_for_target(PARAMS, EXP, 0.1, "oracle")
    knockoff = lambda_for_target(PARAMS, EXP, 0.1, "knockoff", rho=1.0, t0=0.1)
    assert oracle.tpp == pytest.approx(0.187, abs=0.005)
    assert knockoff.tpp == pytest.approx(0.18, abs=0.005)
