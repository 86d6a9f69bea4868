"""Asymptotic estimation risk of the Lasso and the inflation caused by the
knockoff choice of lambda relative to the risk-minimizing one."""
import logging
import math
import multiprocessing as mp
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd
from scipy import optimize

import config
from src.amp_core import AmpParams, StateEvolution, lambda_for_target
from src.data_logger import CheckpointLog
from src.errors import DegenerateFixedPointError, NoAdmissibleRootError, NumericalError, UnattainableTargetError
from src.priors import GammaMixture, PointMass, PriorSpec, enumerate_restricted_mixtures


@dataclass
class RiskCurve:
    lambda_grid: np.ndarray
    risk_values: np.ndarray
    alphas: np.ndarray
    taus: np.ndarray

    def to_frame(self):
        return pd.DataFrame({
            "lambda": self.lambda_grid, "alpha": self.alphas, "tau": self.taus, "risk": self.risk_values,
        })


@dataclass(frozen=True)
class OracleRisk:
    lam: float
    alpha: float
    risk: float
    boundary: bool
    multimodal: bool


@dataclass(frozen=True)
class InflationReport:
    q: float
    rho: float
    t0: float
    ko_lambda: float
    ko_risk: float
    ko_boundary: bool
    oracle_lambda: float
    oracle_risk: float
    oracle_boundary: bool
    ratio: float
    oracle_undercut: bool = False


@dataclass
class InflationCurve:
    table: pd.DataFrame  # location, ratio, ko_lambda, oracle_undercut, oracle_lambda, error
    max_ratio: float
    argmax: float
    failures: int


@dataclass
class SweepResult:
    table: pd.DataFrame  # member_id, w1..wK, ratio
    histogram: pd.DataFrame
    max_ratio: float
    argmax_member: Optional[int]
    failures: int
    family_size: int


def asymptotic_risk(params: AmpParams, prior: PriorSpec, lam, se: Optional[StateEvolution] = None):
    """E(eta_{alpha tau}(Pi + tau W) - Pi)^2 at the fixed point for ``lam``."""
    se = se or StateEvolution(params, prior)
    fp = se.fixed_point(lam)
    return se.f(fp.alpha, fp.tau_amp)


def risk_curve(params: AmpParams, prior: PriorSpec, lambdas=None, n_points=config.DEFAULT_GRID) -> RiskCurve:
    se = StateEvolution(params, prior)
    if lambdas is None:
        alphas = np.linspace(*se.admissible_alpha_range(), n_points)
        taus = np.array([se.tau_at(a) for a in alphas])
        lams = np.array([se.lambda_at(a) for a in alphas])
    else:
        lams = np.sort(np.asarray(lambdas, dtype=float))
        fps = [se.fixed_point(lam) for lam in lams]
        alphas = np.array([fp.alpha for fp in fps])
        taus = np.array([fp.tau_amp for fp in fps])
    risks = np.array([se.f(a, t) for a, t in zip(alphas, taus)])
    return RiskCurve(lambda_grid=lams, risk_values=risks, alphas=alphas, taus=taus)


def _risk_at(se, alpha):
    """Risk at ``alpha``; the tau -> 0+ boundary counts as zero risk."""
    try:
        return se.f(alpha, se.tau_at(alpha)), False
    except DegenerateFixedPointError:
        return 0.0, True


def _local_minima(values):
    idx = []
    for i, v in enumerate(values):
        left = values[i - 1] if i > 0 else math.inf
        right = values[i + 1] if i + 1 < len(values) else math.inf
        if v <= left and v <= right:
            idx.append(i)
    return idx


def oracle_lambda(params: AmpParams, prior: PriorSpec, se: Optional[StateEvolution] = None) -> OracleRisk:
    """Risk-minimizing lambda: scan alpha, then refine around the best grid point.

    lambda is increasing in alpha, so the scan runs over alpha and maps the
    minimizer back to lambda once.
    """
    se = se or StateEvolution(params, prior)
    try:
        a_lo, a_hi = se.admissible_alpha_range()
    except (DegenerateFixedPointError, NoAdmissibleRootError) as e:
        logging.warning(f"Smallest lambda unresolved ({e}); scanning from alpha just above {se.alpha_min:.6g}")
        a_lo, a_hi = se.admissible_alpha_range(se.alpha_min + 1e-6)
    alphas = np.linspace(a_lo, a_hi, config.ORACLE_GRID)
    scanned = [_risk_at(se, a) for a in alphas]
    risks = np.array([r for r, _ in scanned])
    degenerate = any(d for _, d in scanned)

    best = int(np.argmin(risks))
    minima = _local_minima(risks)
    close = [i for i in minima if i != best and risks[i] <= risks[best] * 1.01]
    multimodal = bool(close)
    if multimodal:
        logging.warning(
            f"Risk has several grid minima within 1% (alpha={[round(float(alphas[i]), 4) for i in [best] + close]}); "
            f"refining around the global one"
        )

    boundary = degenerate or best == 0 or best == len(alphas) - 1
    alpha, risk = float(alphas[best]), float(risks[best])
    if not boundary:
        res = optimize.minimize_scalar(
            lambda a: _risk_at(se, a)[0],
            bounds=(alphas[best - 1], alphas[best + 1]),
            method="bounded",
            options={"xatol": 1e-10},
        )
        if res.fun <= risk:
            alpha, risk = float(res.x), float(res.fun)
    else:
        logging.warning(f"Risk minimum sits at the edge of the scanned range (alpha={alpha:.6g})")

    # lambda -> inf zeroes every estimate, with risk E(Pi^2)
    limit = se.prior.second_moment()
    if limit < risk:
        logging.info(f"Risk is smallest in the lambda -> inf limit ({limit:.10g} < {risk:.10g})")
        return OracleRisk(lam=math.inf, alpha=math.inf, risk=limit, boundary=True, multimodal=multimodal)

    try:
        lam = se.lambda_at(alpha)
    except DegenerateFixedPointError:
        lam = math.nan
    return OracleRisk(lam=lam, alpha=alpha, risk=risk, boundary=boundary, multimodal=multimodal)


def evaluate_inflation(params: AmpParams, prior: PriorSpec, q, rho=config.DEFAULT_RHO, t0=config.DEFAULT_T0) -> InflationReport:
    se = StateEvolution(params, prior)
    try:
        ko = lambda_for_target(params, prior, q, "knockoff", rho, t0)
        ko_lambda, ko_boundary = ko.lam, ko.boundary
        ko_risk = asymptotic_risk(params, prior, ko.lam, se)
    except UnattainableTargetError as e:
        if not e.lo > q:
            raise
        # estimate above q at every lambda >= t0: nothing is selected
        logging.warning(f"Knockoff estimate stays above q={q} (min {e.lo:.6g}); lambda_KO = inf")
        ko_lambda, ko_boundary = math.inf, True
        ko_risk = se.prior.second_moment()
    oracle = oracle_lambda(params, prior, se)
    if oracle.risk > 0:
        ratio = ko_risk / oracle.risk
    else:
        ratio = 1.0 if ko_risk == 0 else math.inf
    undercut = ko_risk < oracle.risk * (1.0 - 1e-9)
    if undercut:
        logging.warning(f"Knockoff risk {ko_risk:.10g} is below the oracle minimum {oracle.risk:.10g} "
                        f"(lambda_KO={ko_lambda:.6g}, lambda_OL={oracle.lam:.6g})")
    return InflationReport(
        q=q, rho=rho, t0=t0,
        ko_lambda=ko_lambda, ko_risk=ko_risk, ko_boundary=ko_boundary,
        oracle_lambda=oracle.lam, oracle_risk=oracle.risk, oracle_boundary=oracle.boundary,
        ratio=ratio, oracle_undercut=undercut,
    )


def risk_inflation(params: AmpParams, prior: PriorSpec, q, rho=config.DEFAULT_RHO, t0=config.DEFAULT_T0):
    return evaluate_inflation(params, prior, q, rho, t0).ratio


# Parallel helpers (module level so spawned workers can import them)

def _point_mass_worker(args):
    index, params, location, q, rho, t0 = args
    try:
        report = evaluate_inflation(params, PriorSpec(params.epsilon, PointMass(location)), q, rho, t0)
        return index, report, None
    except (NumericalError, ValueError) as e:
        return index, None, f"{type(e).__name__}: {e}"


def _mixture_worker(args):
    member_id, weights, shapes, params, q, rho, t0 = args
    try:
        active = [(s, w) for s, w in zip(shapes, weights) if w > 0]
        star = GammaMixture(tuple(s for s, _ in active), tuple(w for _, w in active))
        report = evaluate_inflation(params, PriorSpec(params.epsilon, star), q, rho, t0)
        return member_id, report.ratio, None
    except (NumericalError, ValueError) as e:
        return member_id, math.nan, f"{type(e).__name__}: {e}"


def _run_parallel(worker, jobs, workers, on_result=None):
    """Map ``worker`` over ``jobs``; results come back sorted by their leading index."""
    workers = max(1, int(workers or 1))
    results = []
    if workers > 1 and len(jobs) > 1:
        ctx = mp.get_context("spawn")
        with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
            futures = [pool.submit(worker, job) for job in jobs]
            for fut in as_completed(futures):
                res = fut.result()
                if on_result:
                    on_result(res)
                results.append(res)
    else:
        for job in jobs:
            res = worker(job)
            if on_result:
                on_result(res)
            results.append(res)
    results.sort(key=lambda x: x[0])
    return results


def point_mass_inflation_curve(params: AmpParams, q, rho=config.DEFAULT_RHO, t0=config.DEFAULT_T0,
                               locations=None, workers=config.THREADS) -> InflationCurve:
    if locations is None:
        locations = np.round(np.arange(1, 61) * 0.1, 10)
    locations = [float(x) for x in locations]
    if any(x <= 0 for x in locations):
        raise ValueError("point-mass locations must be positive")

    jobs = [(i, params, loc, q, rho, t0) for i, loc in enumerate(locations)]
    rows = []
    failures = 0
    for index, report, error in _run_parallel(_point_mass_worker, jobs, workers):
        loc = locations[index]
        if error:
            failures += 1
            logging.error(f"Inflation at point mass {loc} failed: {error}")
            rows.append({"location": loc, "ratio": math.nan, "ko_lambda": math.nan, "oracle_undercut": False,
                         "oracle_lambda": math.nan, "error": error})
        else:
            rows.append({"location": loc, "ratio": report.ratio, "ko_lambda": report.ko_lambda,
                         "oracle_undercut": report.oracle_undercut,
                         "oracle_lambda": report.oracle_lambda, "error": ""})
    table = pd.DataFrame(rows)
    finite = table["ratio"].dropna()
    if finite.empty:
        return InflationCurve(table, math.nan, math.nan, failures)
    best = finite.idxmax()
    return InflationCurve(table, float(table.at[best, "ratio"]), float(table.at[best, "location"]), failures)


def _histogram(ratios, bins):
    ratios = np.asarray(ratios, dtype=float)
    ratios = ratios[np.isfinite(ratios)]
    if ratios.size == 0:
        return pd.DataFrame(columns=["bin_lo", "bin_hi", "count"])
    counts, edges = np.histogram(ratios, bins=bins)
    return pd.DataFrame({"bin_lo": edges[:-1], "bin_hi": edges[1:], "count": counts})


def select_members(family_size, subsample, seed):
    """Uniform subsample of member ids (sorted); all ids when ``subsample`` is None or too large."""
    if subsample is None or subsample >= family_size:
        return list(range(family_size))
    rng = np.random.default_rng(seed)
    return sorted(int(i) for i in rng.choice(family_size, size=subsample, replace=False))


def mixture_sweep(params: AmpParams, q, rho=config.DEFAULT_RHO, t0=config.DEFAULT_T0,
                  shapes=config.MIXTURE_SHAPES, levels=config.MIXTURE_LEVELS,
                  subsample=config.MIXTURE_SUBSAMPLE, seed=0, workers=config.THREADS,
                  checkpoint=None, bins=50) -> SweepResult:
    """Inflation ratio for members of the restricted Gamma-mixture family.

    With ``checkpoint`` every finished member is appended to that CSV, and
    members already there are not recomputed.
    """
    family = enumerate_restricted_mixtures(shapes, levels)
    ids = select_members(len(family), subsample, seed)
    log = CheckpointLog(checkpoint) if checkpoint else None
    done = log.completed() if log else {}
    todo = [i for i in ids if i not in done]
    logging.info(f"Mixture sweep: {len(ids)} of {len(family)} members, {len(ids) - len(todo)} from checkpoint")

    def record(res):
        member_id, ratio, error = res
        if error:
            logging.error(f"Mixture member {member_id} {family[member_id]} failed: {error}")
        elif log:
            log.append(member_id, family[member_id], ratio)

    jobs = [(i, family[i], tuple(shapes), params, q, rho, t0) for i in todo]
    fresh = {member_id: ratio for member_id, ratio, _ in _run_parallel(_mixture_worker, jobs, workers, record)}
    ratios = {**{i: done[i] for i in ids if i in done}, **fresh}

    weight_cols = [f"w{k + 1}" for k in range(len(shapes))]
    table = pd.DataFrame([family[i] for i in ids], columns=weight_cols)
    table.insert(0, "member_id", ids)
    table["ratio"] = [ratios.get(i, math.nan) for i in ids]

    failures = int(table["ratio"].isna().sum())
    finite = table["ratio"].dropna()
    if finite.empty:
        max_ratio, argmax = math.nan, None
    else:
        top = finite.idxmax()
        max_ratio, argmax = float(table.at[top, "ratio"]), int(table.at[top, "member_id"])
    if failures:
        logging.warning(f"Mixture sweep finished with {failures} failed members")
    return SweepResult(table, _histogram(table["ratio"], bins), max_ratio, argmax, failures, len(family))


def inflation_sensitivity(params: AmpParams, q, rhos=(0.5, 1.0), t0s=(0.05, 0.1, 0.2),
                          prior: Optional[PriorSpec] = None, locations=None, workers=config.THREADS) -> pd.DataFrame:
    """Inflation under alternative (rho, t0) settings.

    With a prior, the ratio for that prior; without one, the maximum over the
    point-mass curve and where it is attained.
    """
    rows = []
    for rho in rhos:
        for t0 in t0s:
            try:
                if prior is not None:
                    rows.append({"rho": rho, "t0": t0, "ratio": risk_inflation(params, prior, q, rho, t0),
                                 "location": math.nan})
                else:
                    curve = point_mass_inflation_curve(params, q, rho, t0, locations, workers)
                    rows.append({"rho": rho, "t0": t0, "ratio": curve.max_ratio, "location": curve.argmax})
            except NumericalError as e:
                logging.error(f"Sensitivity point rho={rho}, t0={t0} failed: {e}")
                rows.append({"rho": rho, "t0": t0, "ratio": math.nan, "location": math.nan})
    return pd.DataFrame(rows)


def write_inflation_curve(curve: InflationCurve, path):
    curve.table[["location", "ratio"]].to_csv(path, index=False, float_format=config.FLOAT_FORMAT)


def write_sweep(result: SweepResult, path):
    path = Path(path)
    result.table.to_csv(path, index=False, float_format=config.FLOAT_FORMAT)
    hist_path = path.with_name(f"{path.stem}_hist.csv")
    result.histogram.to_csv(hist_path, index=False, float_format=config.FLOAT_FORMAT)
    return path, hist_path


def report_row(report: InflationReport):
    return asdict(report)
