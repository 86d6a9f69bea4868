"""Monte Carlo experiments: knockoff filter replicates, per-lambda FDP/TPP
curves, power against the theory-calibrated oracle, and exchangeability."""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field
from scipy import stats

import config
from src.amp_core import AmpParams, KnockoffTheory, lambda_for_target, trace_tradeoff
from src.errors import NumericalError, UnattainableTargetError
from src.knockoff_filter import (
    KnockoffConfig,
    Pi0Mode,
    augment_design,
    augmented_statistics,
    filter_from_statistics,
)
from src.lasso_path import (
    DesignProblem,
    default_lambda_grid,
    generate_design,
    lasso_path,
    lasso_solve,
    simulate_response,
)
from src.priors import PriorConfig

STREAMS = ("beta", "design", "noise", "knockoff")


class ExperimentConfig(BaseModel):
    n: int = Field(default=1000, ge=1)
    p: int = Field(default=1000, ge=1)
    prior: PriorConfig = Field(
        default_factory=lambda: PriorConfig(epsilon=0.2, family="exponential", params={"rate": 1.0})
    )
    sigma: float = Field(default=0.5, ge=0)
    knockoff: KnockoffConfig = Field(default_factory=lambda: KnockoffConfig(q=0.2))
    replicates: int = Field(default=20, ge=1)
    master_seed: int = 0
    comparison_mode: Literal["entry_time", "nonzero_at_lambda"] = "entry_time"
    curves: bool = True

    @classmethod
    def from_json(cls, path):
        return cls.model_validate_json(Path(path).read_text())

    def amp_params(self):
        return AmpParams(self.prior.epsilon, self.n / self.p, self.sigma)


@dataclass
class ExperimentResult:
    table: pd.DataFrame  # rep, fdp, tpp, threshold, pi0_hat, ...
    curves: pd.DataFrame  # rep, lambda, fdp_entry, tpp_entry, fdp_nonzero, tpp_nonzero
    failures: int


def replicate_seeds(master_seed, rep):
    """Independent per-stream seeds for one replicate, derived from (master_seed, rep) alone."""
    return {
        name: int(np.random.SeedSequence((master_seed, rep, k)).generate_state(1)[0])
        for k, name in enumerate(STREAMS)
    }


def _fdp_tpp(selected, signal):
    n_sel = int(selected.sum())
    false = int(np.count_nonzero(selected & ~signal))
    return false / max(1, n_sel), (n_sel - false) / max(1, int(signal.sum()))


def draw_problem(cfg: ExperimentConfig, rep):
    seeds = replicate_seeds(cfg.master_seed, rep)
    beta = cfg.prior.build().sample(cfg.p, seeds["beta"])
    design = generate_design(cfg.n, cfg.p, seeds["design"])
    response = simulate_response(design, beta, cfg.sigma, seeds["noise"])
    return DesignProblem(design, response, beta, cfg.sigma), seeds


def _path_curves(design, response, beta, cfg: ExperimentConfig, rep):
    grid = default_lambda_grid(design, response, cfg.knockoff.grid, cfg.knockoff.lambda_min_ratio)
    path = lasso_path(design, response, grid)
    signal = beta != 0
    rows = []
    for i, lam in enumerate(path.lambda_grid):
        fdp_e, tpp_e = _fdp_tpp(path.entry_times >= lam, signal)
        fdp_n, tpp_n = _fdp_tpp(path.nonzero_at(i), signal)
        rows.append({"rep": rep, "lambda": lam, "fdp_entry": fdp_e, "tpp_entry": tpp_e,
                     "fdp_nonzero": fdp_n, "tpp_nonzero": tpp_n})
    return pd.DataFrame(rows)


def run_replicate(cfg: ExperimentConfig, rep):
    problem, seeds = draw_problem(cfg, rep)
    design, response, beta = problem.design, problem.response, problem.beta_true
    statistics, r, path = augmented_statistics(design, response, cfg.knockoff, seeds["knockoff"])
    result = filter_from_statistics(statistics, cfg.p, r, cfg.knockoff, beta, path.grid_step)
    fdp, tpp = result.fdp_tpp(beta)
    row = {
        "rep": rep, "fdp": fdp, "tpp": tpp, "threshold": result.threshold, "pi0_hat": result.pi0_hat,
        "n_rejected": result.n_rejected, "n_signals": int(np.count_nonzero(beta)), "grid_step": result.grid_step,
    }
    curves = _path_curves(design, response, beta, cfg, rep) if cfg.curves else None
    return row, curves


def _map_replicates(fn, reps, workers):
    """Run ``fn(rep)`` over threads; failures are logged and returned as None."""
    def guarded(rep):
        try:
            return rep, fn(rep)
        except (NumericalError, ValueError) as e:
            logging.error(f"Replicate {rep} failed: {type(e).__name__}: {e}")
            return rep, None

    workers = max(1, int(workers or 1))
    if workers == 1:
        results = [guarded(rep) for rep in reps]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(guarded, reps))
    results.sort(key=lambda x: x[0])
    return results


def run_experiment(cfg: ExperimentConfig, workers=config.THREADS) -> ExperimentResult:
    logging.info(
        f"Experiment: n={cfg.n}, p={cfg.p}, eps={cfg.prior.epsilon}, sigma={cfg.sigma}, "
        f"q={cfg.knockoff.q}, reps={cfg.replicates}, seed={cfg.master_seed}"
    )
    results = _map_replicates(lambda rep: run_replicate(cfg, rep), range(cfg.replicates), workers)
    rows = [res[0] for _, res in results if res is not None]
    curves = [res[1] for _, res in results if res is not None and res[1] is not None]
    failures = sum(1 for _, res in results if res is None)
    table = pd.DataFrame(rows, columns=["rep", "fdp", "tpp", "threshold", "pi0_hat", "n_rejected",
                                        "n_signals", "grid_step"])
    curve_table = pd.concat(curves, ignore_index=True) if curves else pd.DataFrame(
        columns=["rep", "lambda", "fdp_entry", "tpp_entry", "fdp_nonzero", "tpp_nonzero"])
    if failures:
        logging.warning(f"Experiment finished with {failures} failed replicates")
    return ExperimentResult(table=table, curves=curve_table, failures=failures)


def summarize(table: pd.DataFrame, failures=0, theory=None):
    """Means and standard errors of FDP and TPP; FDR is the mean FDP."""
    if table.empty:
        raise ValueError("cannot summarize an empty replicate table")
    reps = len(table)

    def se(col):
        return float(table[col].std(ddof=1) / np.sqrt(reps)) if reps > 1 else None

    summary = {
        "replicates": reps,
        "failures": failures,
        "fdr": float(table["fdp"].mean()),
        "fdr_se": se("fdp"),
        "mean_tpp": float(table["tpp"].mean()),
        "tpp_se": se("tpp"),
        "mean_pi0_hat": float(table["pi0_hat"].replace(np.inf, np.nan).mean()),
    }
    if theory is not None:
        summary["fdp_theory"] = theory["fdp"]
        summary["tpp_theory"] = theory["tpp"]
        summary["fdp_delta"] = summary["fdr"] - theory["fdp"]
        summary["tpp_delta"] = summary["mean_tpp"] - theory["tpp"]
    return summary


def theory_overlay(cfg: ExperimentConfig, lambdas=None, n_points=config.DEFAULT_GRID) -> pd.DataFrame:
    """State-evolution FDP/TPP at the given lambdas (or along the whole curve)."""
    params = cfg.amp_params()
    prior = cfg.prior.build()
    rows = trace_tradeoff(params, prior, n_points, lambdas=None if lambdas is None else sorted(set(lambdas)))
    return pd.DataFrame({
        "lambda": [row.lam for row in rows],
        "fdp_inf": [row.fdp_inf for row in rows],
        "tpp_inf": [row.tpp_inf for row in rows],
    })


def curve_overlay(cfg: ExperimentConfig, curves: pd.DataFrame, n_points=config.DEFAULT_GRID) -> pd.DataFrame:
    """Adds the limiting FDP/TPP at each curve lambda, interpolated in log lambda
    along the traced curve; lambdas outside the traced range get NaN."""
    theory = theory_overlay(cfg, n_points=n_points).sort_values("lambda")
    theory = theory[theory["lambda"] > 0]
    out = curves.copy()
    log_lam = np.log(out["lambda"].to_numpy(dtype=float))
    knots = np.log(theory["lambda"].to_numpy())
    for col in ("fdp_inf", "tpp_inf"):
        out[col] = np.interp(log_lam, knots, theory[col].to_numpy(), left=np.nan, right=np.nan)
    out["fdp_dev"] = out["fdp_nonzero"] - out["fdp_inf"]
    out["tpp_dev"] = out["tpp_nonzero"] - out["tpp_inf"]
    return out


def filter_theory(cfg: ExperimentConfig):
    """Limiting FDP/TPP of the filter at its knockoff-calibrated lambda."""
    params = cfg.amp_params()
    prior = cfg.prior.build()
    ko = cfg.knockoff
    factor = 1.0 if ko.pi0_mode == Pi0Mode.ONE else None
    try:
        sol = lambda_for_target(params, prior, ko.q, "knockoff", ko.rho, ko.t0, factor)
    except UnattainableTargetError as e:
        logging.warning(f"Knockoff lambda unattainable at q={ko.q}: {e}; filter selects nothing")
        return {"fdp": 0.0, "tpp": 0.0, "lambda": np.inf}
    point = KnockoffTheory(params, prior, ko.rho, ko.t0, factor).point(sol.lam)
    return {"fdp": point.fdp_aug, "tpp": point.tpp_aug, "lambda": sol.lam}


def power_comparison(cfg: ExperimentConfig, qs=None, workers=config.THREADS) -> pd.DataFrame:
    """Knockoff power against the oracle lambda from theory, applied to the same data."""
    qs = list(qs) if qs is not None else [round(0.05 * k, 10) for k in range(1, 11)]
    params = cfg.amp_params()
    prior = cfg.prior.build()
    oracle = {}
    for q in qs:
        try:
            oracle[q] = lambda_for_target(params, prior, q, "oracle").lam
        except NumericalError as e:
            logging.error(f"Oracle lambda for q={q} unavailable: {e}")

    def one(rep):
        problem, seeds = draw_problem(cfg, rep)
        design, response, beta = problem.design, problem.response, problem.beta_true
        signal = beta != 0
        statistics, r, _ = augmented_statistics(design, response, cfg.knockoff, seeds["knockoff"])
        rows = []
        for q in qs:
            result = filter_from_statistics(statistics, cfg.p, r, cfg.knockoff.model_copy(update={"q": q}))
            ko_fdp, ko_tpp = result.fdp_tpp(beta)
            row = {"rep": rep, "q": q, "knockoff_fdp": ko_fdp, "knockoff_tpp": ko_tpp,
                   "oracle_lambda": oracle.get(q, np.nan), "oracle_fdp": np.nan, "oracle_tpp": np.nan}
            if q in oracle:
                coef = lasso_solve(design, response, oracle[q])
                row["oracle_fdp"], row["oracle_tpp"] = _fdp_tpp(coef != 0, signal)
            rows.append(row)
        return rows

    results = _map_replicates(one, range(cfg.replicates), workers)
    rows = [row for _, res in results if res is not None for row in res]
    return pd.DataFrame(rows)


def exchangeability_check(cfg: ExperimentConfig, reps=None, workers=config.THREADS, alpha=0.01):
    """Rejection counts with and without permuting the null columns (original nulls
    and knockoffs) of the augmented design; a two-sample KS test compares them."""
    reps = reps or cfg.replicates

    def one(rep):
        problem, seeds = draw_problem(cfg, rep)
        design, response, beta = problem.design, problem.response, problem.beta_true
        p = cfg.p
        r = cfg.knockoff.knockoff_count(p)
        augmented = augment_design(design, r, seeds["knockoff"])
        nulls = np.concatenate([np.flatnonzero(beta == 0), np.arange(p, p + r)])
        rng = np.random.default_rng(np.random.SeedSequence((cfg.master_seed, rep, len(STREAMS))))
        permuted = augmented.copy()
        permuted[:, nulls] = augmented[:, rng.permutation(nulls)]
        counts = []
        for mat in (augmented, permuted):
            grid = default_lambda_grid(mat, response, cfg.knockoff.grid, cfg.knockoff.lambda_min_ratio)
            entry = lasso_path(mat, response, grid).entry_times
            counts.append(filter_from_statistics(entry, p, r, cfg.knockoff).n_rejected)
        return counts

    results = [res for _, res in _map_replicates(one, range(reps), workers) if res is not None]
    base = np.array([c[0] for c in results])
    perm = np.array([c[1] for c in results])
    test = stats.ks_2samp(base, perm)
    asymmetric = bool(test.pvalue <= alpha)
    if asymmetric:
        logging.warning(f"Rejection counts change under null permutation (KS p={test.pvalue:.4g})")
    return {"reps": len(results), "ks_statistic": float(test.statistic), "p_value": float(test.pvalue),
            "mean_original": float(base.mean()) if base.size else np.nan,
            "mean_permuted": float(perm.mean()) if perm.size else np.nan,
            "asymmetric": asymmetric}


def write_results_csv(result: ExperimentResult, path):
    path = Path(path)
    result.table.to_csv(path, index=False, float_format=config.FLOAT_FORMAT)
    curve_path = path.with_name(f"{path.stem}_curves.csv")
    result.curves.to_csv(curve_path, index=False, float_format=config.FLOAT_FORMAT)
    return path, curve_path
