import math

import numpy as np
import pandas as pd
import pytest
from pydantic import ValidationError

from src.knockoff_filter import (
    KnockoffConfig,
    Pi0Mode,
    augment_design,
    filter_from_statistics,
    knockoff_threshold,
    pi0_hat,
    run_filter,
    trajectories,
    write_filter_csv,
)
from src.lasso_path import generate_design, simulate_response


@pytest.fixture
def planted():
    n, p = 100, 50
    design = generate_design(n, p, seed=31)
    beta = np.zeros(p)
    beta[:8] = 5.0
    response = simulate_response(design, beta, 0.5, seed=32)
    return design, response, beta


def test_augment_design_shape_and_independence():
    design = generate_design(100, 100, seed=1)
    aug = augment_design(design, 100, seed=2)
    assert aug.shape == (100, 200)
    assert np.array_equal(aug[:, :100], design)
    assert np.array_equal(aug, augment_design(design, 100, seed=2))
    cross = np.corrcoef(aug[:, :100].T, aug[:, 100:].T)[:100, 100:]
    assert np.mean(np.abs(cross) < 3 / math.sqrt(100)) > 0.99
    with pytest.raises(ValueError):
        augment_design(design, 0, seed=2)


def test_knockoff_count_rounding():
    assert KnockoffConfig(q=0.1, rho=0.1).knockoff_count(30) == 3
    assert KnockoffConfig(q=0.1, rho=1.0).knockoff_count(7) == 7
    assert KnockoffConfig(q=0.1, rho=0.5).knockoff_count(7) == 4


def test_config_validation():
    with pytest.raises(ValidationError):
        KnockoffConfig(q=1.5)
    with pytest.raises(ValidationError):
        KnockoffConfig(q=0.1, rho=0)
    with pytest.raises(ValidationError):
        KnockoffConfig(q=0.1, pi0_mode="sometimes")
    assert KnockoffConfig(q=0.1, pi0_mode="raw_estimate").pi0_mode is Pi0Mode.RAW


def test_t_min_by_mode():
    assert KnockoffConfig(q=0.1, t0=0.2).t_min == 0.0
    assert KnockoffConfig(q=0.1, t0=0.2, pi0_mode=Pi0Mode.TRUNCATED).t_min == 0.2


def test_pi0_without_knockoffs_below_t0():
    stats = np.array([0.0, 0.0, 0.5, 0.6])  # p = 2, r = 2
    assert pi0_hat(stats, 2, 2, 0.1, Pi0Mode.RAW) == math.inf
    assert pi0_hat(stats, 2, 2, 0.1, Pi0Mode.TRUNCATED) == 1.0
    assert pi0_hat(stats, 2, 2, 0.1, Pi0Mode.ONE) == 1.0


def test_pi0_all_below_t0():
    p = r = 40
    stats = np.zeros(p + r)
    raw = pi0_hat(stats, p, r, 0.1, Pi0Mode.RAW)
    assert raw == pytest.approx((r + 1) / p * (1 + p) / r)
    assert pi0_hat(stats, p, r, 0.1, "truncated_estimate") == 1.0


def test_threshold_without_false_selections():
    # originals hold the five largest statistics, knockoffs stay near zero
    p, r = 5, 5
    stats = np.array([5.0, 4.0, 3.0, 2.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0])
    # (1 + 0) * 5 / 6 / R <= 0.2 needs R >= 5, so only t = 1.0 qualifies
    assert knockoff_threshold(stats, p, r, 0.2, 1.0) == 1.0
    # the estimate never drops below 5 / 6 / 5
    assert knockoff_threshold(stats, p, r, 0.15, 1.0) == math.inf


def test_threshold_empty_cases():
    stats = np.array([5.0, 4.0, 0.5, 0.0])
    assert knockoff_threshold(stats, 2, 2, 1e-6, 1.0) == math.inf
    assert knockoff_threshold(stats, 2, 2, 0.5, math.inf) == math.inf
    assert knockoff_threshold(np.zeros(4), 2, 2, 0.5, 1.0) == math.inf
    with pytest.raises(ValueError):
        knockoff_threshold(stats, 2, 2, 0.0, 1.0)


def test_threshold_respects_t_min():
    p, r = 5, 5
    stats = np.array([5.0, 4.0, 3.0, 2.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0])
    assert knockoff_threshold(stats, p, r, 0.5, 1.0, t_min=3.5) == 4.0


def test_rejections_grow_with_q(planted):
    design, response, _ = planted
    cfg = KnockoffConfig(q=0.05)
    base = run_filter(design, response, cfg, seed=3)
    previous = set()
    for q in (0.05, 0.2, 0.5, 0.9):
        result = filter_from_statistics(base.statistics, base.p, base.r, cfg.model_copy(update={"q": q}))
        current = set(result.rejected.tolist())
        assert previous <= current
        previous = current


def test_planted_signal_is_found_deterministically(planted):
    design, response, beta = planted
    cfg = KnockoffConfig(q=0.2)
    first = run_filter(design, response, cfg, seed=4, beta_true=beta)
    second = run_filter(design, response, cfg, seed=4, beta_true=beta)
    assert np.array_equal(first.rejected, second.rejected)
    assert first.r == 50
    assert np.all(first.rejected < 50)
    fdp, tpp = first.fdp_tpp(beta)
    assert tpp >= 0.5
    assert fdp <= 0.5
    assert "V0" in first.trajectories.columns


def test_zero_response_rejects_nothing():
    design = generate_design(30, 10, seed=0)
    result = run_filter(design, np.zeros(30), KnockoffConfig(q=0.2), seed=1)
    assert result.n_rejected == 0
    assert math.isinf(result.threshold)
    assert result.fdp_tpp(np.zeros(10)) == (0.0, 0.0)


def test_run_filter_shape_mismatch():
    design = generate_design(30, 10, seed=0)
    with pytest.raises(ValueError, match=r"\(30, 10\)"):
        run_filter(design, np.zeros(29), KnockoffConfig(q=0.2), seed=1)


def test_trajectories_count_processes():
    stats = np.array([3.0, 2.0, 0.0, 2.5, 1.0, 0.0])  # p = 3, r = 3
    frame = trajectories(stats, 3, 3, 1.0)
    assert frame["t"].tolist() == [3.0, 2.5, 2.0, 1.0]
    assert frame["R"].tolist() == [1, 1, 2, 2]
    assert frame["V1"].tolist() == [0, 1, 1, 2]
    assert frame["fdp_hat"].iloc[0] == pytest.approx(3 / 4)


def test_write_filter_csv(tmp_path, planted):
    design, response, _ = planted
    result = run_filter(design, response, KnockoffConfig(q=0.2), seed=5)
    path, summary_path = write_filter_csv(result, tmp_path / "filter.csv")
    rows = pd.read_csv(path)
    assert list(rows.columns) == ["index", "statistic", "rejected"]
    assert rows["rejected"].sum() == result.n_rejected
    summary = pd.read_csv(summary_path)
    assert summary_path.name == "filter_summary.csv"
    assert int(summary["n_rejected"][0]) == result.n_rejected


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_default_settings_at_moderate_size(seed):
    n = p = 200
    rng = np.random.default_rng(100 + seed)
    beta = np.where(rng.random(p) < 0.2, rng.exponential(1.0, p), 0.0)
    design = generate_design(n, p, seed=200 + seed)
    response = simulate_response(design, beta, 0.5, seed=300 + seed)
    result = run_filter(design, response, KnockoffConfig(q=0.2), seed=400 + seed, beta_true=beta)
    assert result.statistics.shape == (2 * p,)
    assert result.r == p
    fdp, tpp = result.fdp_tpp(beta)
    assert 0 <= fdp <= 1
    assert 0 <= tpp <= 1


@pytest.mark.slow
def test_pure_null_false_rejection_rate():
    n, p, reps, q = 60, 40, 500, 0.2
    cfg = KnockoffConfig(q=q, grid=60)
    any_rejection = []
    for rep in range(reps):
        design = generate_design(n, p, seed=10_000 + rep)
        response = simulate_response(design, np.zeros(p), 1.0, seed=20_000 + rep)
        result = run_filter(design, response, cfg, seed=30_000 + rep, beta_true=np.zeros(p))
        # every rejection is false, so FDP is 1 whenever anything is rejected
        any_rejection.append(result.n_rejected > 0)
    assert np.mean(any_rejection) <= q + 2 * math.sqrt(q * (1 - q) / reps)
