"""Knockoff filter for i.i.d. Gaussian designs.

The design is augmented with r = ceil(rho * p) independent N(0, 1/n) columns,
the Lasso path is run on the augmented problem, and entry times T_j serve as
statistics. With H the original variables and K the knockoffs,

    V1(t) = #{j in K: T_j >= t},   R(t) = #{j in H: T_j >= t},
    threshold = inf{ t >= t_min: (1 + V1(t)) * p * pi0 / (1 + r) / max(1, R(t)) <= q }

and every original variable with T_j >= threshold is rejected.
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field

import config
from src.lasso_path import default_lambda_grid, lasso_path


class Pi0Mode(str, Enum):
    ONE = "one"
    RAW = "raw_estimate"
    TRUNCATED = "truncated_estimate"


class KnockoffConfig(BaseModel):
    q: float = Field(gt=0, lt=1)
    rho: float = Field(default=config.DEFAULT_RHO, gt=0)
    t0: float = Field(default=config.DEFAULT_T0, ge=0)
    pi0_mode: Pi0Mode = Pi0Mode.ONE
    grid: int = Field(default=config.DEFAULT_GRID, ge=2)
    lambda_min_ratio: float = Field(default=config.DEFAULT_LAMBDA_MIN_RATIO, gt=0, lt=1)

    def knockoff_count(self, p):
        # round before ceil so that e.g. 0.1 * 30 gives 3, not 4
        return max(1, math.ceil(round(self.rho * p, 9)))

    @property
    def t_min(self):
        return 0.0 if self.pi0_mode == Pi0Mode.ONE else self.t0


@dataclass
class FilterResult:
    rejected: np.ndarray  # sorted original indices
    threshold: float
    pi0_hat: float
    statistics: np.ndarray  # p + r entry times, originals first
    p: int
    r: int
    trajectories: pd.DataFrame
    grid_step: float = float("nan")

    @property
    def n_rejected(self):
        return int(self.rejected.size)

    def fdp_tpp(self, beta_true):
        """Realized (FDP, TPP) given the true coefficients, with 1 v (.) denominators."""
        signal = np.asarray(beta_true) != 0
        false = int(np.count_nonzero(~signal[self.rejected]))
        true = self.n_rejected - false
        return false / max(1, self.n_rejected), true / max(1, int(signal.sum()))


def augment_design(design, r, seed):
    """Append r knockoff columns with i.i.d. N(0, 1/n) entries."""
    if r < 1:
        raise ValueError(f"need at least one knockoff column, got r={r}")
    design = np.asarray(design, dtype=float)
    n = design.shape[0]
    rng = np.random.default_rng(seed)
    knockoffs = rng.standard_normal((n, r)) / math.sqrt(n)
    return np.hstack([design, knockoffs])


def pi0_hat(stats, p, r, t0, mode=Pi0Mode.TRUNCATED):
    """((r + 1) / p) * (1 + #{H: T <= t0}) / #{K: T <= t0}; +inf when no knockoff sits below t0."""
    mode = Pi0Mode(mode)
    if mode == Pi0Mode.ONE:
        return 1.0
    if t0 < 0:
        raise ValueError(f"t0 must be nonnegative, got {t0}")
    stats = np.asarray(stats, dtype=float)
    originals, knockoffs = stats[:p], stats[p:p + r]
    below = int(np.count_nonzero(knockoffs <= t0))
    if below == 0:
        raw = math.inf
    else:
        raw = (r + 1) / p * (1 + int(np.count_nonzero(originals <= t0))) / below
    if mode == Pi0Mode.TRUNCATED:
        return min(1.0, raw)
    return raw


def _counts(stats, p, r, ts):
    originals = np.sort(np.asarray(stats[:p], dtype=float))
    knockoffs = np.sort(np.asarray(stats[p:p + r], dtype=float))
    selected = p - np.searchsorted(originals, ts, side="left")
    fake = r - np.searchsorted(knockoffs, ts, side="left")
    return fake, selected


def _estimate(fake, selected, p, r, pi0_value):
    return (1 + fake) * (p * pi0_value / (1 + r)) / np.maximum(1, selected)


def knockoff_threshold(stats, p, r, q, pi0_value, t_min=0.0):
    """Smallest observed positive statistic t >= t_min whose FDP estimate is <= q, else +inf."""
    if not 0 < q < 1:
        raise ValueError(f"q must lie in (0, 1), got {q}")
    if not pi0_value > 0:
        raise ValueError(f"pi0 must be positive, got {pi0_value}")
    if math.isinf(pi0_value):
        return math.inf
    stats = np.asarray(stats, dtype=float)
    candidates = np.unique(stats[(stats > 0) & (stats >= t_min)])
    if candidates.size == 0:
        return math.inf
    fake, selected = _counts(stats, p, r, candidates)
    ok = np.flatnonzero(_estimate(fake, selected, p, r, pi0_value) <= q)
    return float(candidates[ok[0]]) if ok.size else math.inf


def trajectories(stats, p, r, pi0_value, beta_true=None):
    """Counting processes evaluated at each observed positive statistic, descending."""
    stats = np.asarray(stats, dtype=float)
    ts = np.unique(stats[stats > 0])[::-1]
    fake, selected = _counts(stats, p, r, ts)
    frame = pd.DataFrame({"t": ts, "V1": fake, "R": selected})
    with np.errstate(invalid="ignore"):
        frame["fdp_hat"] = _estimate(fake, selected, p, r, pi0_value)
    if beta_true is not None:
        nulls = np.sort(stats[:p][np.asarray(beta_true) == 0])
        frame["V0"] = nulls.size - np.searchsorted(nulls, ts, side="left")
    return frame


def filter_from_statistics(stats, p, r, cfg: KnockoffConfig, beta_true=None, grid_step=float("nan")) -> FilterResult:
    stats = np.asarray(stats, dtype=float)
    if stats.shape != (p + r,):
        raise ValueError(f"expected {p + r} statistics, got {stats.shape}")
    pi0_value = pi0_hat(stats, p, r, cfg.t0, cfg.pi0_mode)
    threshold = knockoff_threshold(stats, p, r, cfg.q, pi0_value, cfg.t_min)
    if math.isinf(threshold):
        rejected = np.array([], dtype=int)
    else:
        rejected = np.flatnonzero(stats[:p] >= threshold)
    return FilterResult(
        rejected=rejected,
        threshold=threshold,
        pi0_hat=pi0_value,
        statistics=stats,
        p=p,
        r=r,
        trajectories=trajectories(stats, p, r, pi0_value, beta_true),
        grid_step=grid_step,
    )


def augmented_statistics(design, response, cfg: KnockoffConfig, seed, lambda_grid=None):
    """Entry times on [X, knockoffs]; returns (stats, r, path)."""
    design = np.asarray(design, dtype=float)
    p = design.shape[1]
    r = cfg.knockoff_count(p)
    augmented = augment_design(design, r, seed)
    if lambda_grid is None:
        lambda_grid = default_lambda_grid(augmented, response, cfg.grid, cfg.lambda_min_ratio)
    path = lasso_path(augmented, response, lambda_grid)
    return path.entry_times, r, path


def run_filter(design, response, cfg: KnockoffConfig, seed, beta_true=None, lambda_grid=None) -> FilterResult:
    design = np.asarray(design, dtype=float)
    response = np.asarray(response, dtype=float)
    if design.shape[0] != response.shape[0]:
        raise ValueError(f"design has shape {design.shape} but response has {response.shape[0]} entries")
    p = design.shape[1]
    stats, r, path = augmented_statistics(design, response, cfg, seed, lambda_grid)
    result = filter_from_statistics(stats, p, r, cfg, beta_true, path.grid_step)
    logging.info(
        f"Knockoff filter: p={p}, r={r}, q={cfg.q}, pi0={result.pi0_hat:.4g}, "
        f"threshold={result.threshold:.6g}, rejections={result.n_rejected}"
    )
    return result


def write_filter_csv(result: FilterResult, path):
    """Per-variable rows to ``path`` and the one-row summary next to it."""
    path = Path(path)
    rejected = np.zeros(result.p, dtype=int)
    rejected[result.rejected] = 1
    pd.DataFrame({
        "index": np.arange(result.p),
        "statistic": result.statistics[:result.p],
        "rejected": rejected,
    }).to_csv(path, index=False, float_format=config.FLOAT_FORMAT)

    summary_path = path.with_name(f"{path.stem}_summary.csv")
    pd.DataFrame([{
        "threshold": result.threshold,
        "pi0_hat": result.pi0_hat,
        "n_rejected": result.n_rejected,
        "grid_step": result.grid_step,
    }]).to_csv(summary_path, index=False, float_format=config.FLOAT_FORMAT)
    return path, summary_path
