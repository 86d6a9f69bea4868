"""Lasso state evolution under i.i.d. Gaussian designs.

For a penalty lambda the pair (alpha, tau) solves

    tau^2  = sigma^2 + E(eta_{alpha tau}(Pi + tau W) - Pi)^2 / delta
    lambda = (1 - P(|Pi + tau W| > alpha tau) / delta) * alpha * tau

with alpha > max(alpha_zero(delta), 0). Expectations over Pi are taken by
integrating by parts against its CDF: atoms are summed exactly and the
continuous remainder goes through adaptive Gauss-Kronrod quadrature.
"""
import logging
import math
from dataclasses import asdict, dataclass
from typing import List, Optional

import numpy as np
import pandas as pd
from scipy import integrate, optimize, special
from scipy.interpolate import PchipInterpolator

import config
from src.errors import (
    DegenerateFixedPointError,
    NoAdmissibleRootError,
    QuadratureError,
    UnattainableTargetError,
    ZeroLimitError,
)
from src.priors import PriorSpec

_SQRT_2PI = math.sqrt(2.0 * math.pi)


def _Phi(x):
    return special.ndtr(x)


def _phi(x):
    return np.exp(-0.5 * np.square(x)) / _SQRT_2PI


@dataclass(frozen=True)
class AmpParams:
    epsilon: float
    delta: float
    sigma: float

    def __post_init__(self):
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if not self.delta > 0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        if not self.sigma >= 0:
            raise ValueError(f"sigma must be nonnegative, got {self.sigma}")


@dataclass(frozen=True)
class AmpFixedPoint:
    alpha: float
    tau_amp: float
    lam: float


@dataclass(frozen=True)
class TradeoffPoint:
    lam: float
    fdp_inf: float
    tpp_inf: float


@dataclass(frozen=True)
class AugmentedParams:
    rho: float
    delta_prime: float
    epsilon_prime: float

    def amp_params(self, sigma):
        return AmpParams(self.epsilon_prime, self.delta_prime, sigma)


@dataclass(frozen=True)
class AugmentedPoint:
    lam: float
    alpha: float
    tau: float
    fdp_aug: float
    tpp_aug: float
    knockoff_rate: float
    null_rate: float  # 2(1 - eps) Phi(-alpha'), original nulls selected per original variable


@dataclass(frozen=True)
class CurveRow:
    lam: float
    alpha: float
    tau: float
    fdp_inf: float
    tpp_inf: float
    fdp_hat_aug: Optional[float] = None


@dataclass(frozen=True)
class TargetSolution:
    lam: float
    alpha: float
    tau: float
    achieved: float
    tpp: float
    boundary: bool
    mode: str


@dataclass(frozen=True)
class PowerPair:
    q: float
    oracle_lambda: float
    oracle_tpp: float
    knockoff_lambda: float
    knockoff_tpp: float


# Scalar building blocks

def soft_threshold(x, t):
    if t < 0:
        raise ValueError(f"threshold must be nonnegative, got {t}")
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def null_risk(alpha):
    """E eta_alpha(W)^2 = 2(1 + a^2) Phi(-a) - 2 a phi(a)."""
    return 2.0 * (1.0 + alpha * alpha) * _Phi(-alpha) - 2.0 * alpha * _phi(alpha)


def alpha_zero(delta):
    """Unique root t of (1 + t^2) Phi(-t) - t phi(t) = delta / 2."""
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    half = 0.5 * delta

    def excess(t):
        return (1.0 + t * t) * _Phi(-t) - t * _phi(t) - half

    lo, hi = -1.0, 1.0
    while excess(lo) < 0:
        lo *= 2.0
    while excess(hi) > 0:
        hi *= 2.0
    return optimize.brentq(excess, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)


def _band(alpha, x):
    # Phi(alpha - x) - Phi(-alpha - x), evaluated on the side without cancellation
    x = np.asarray(x, dtype=float)
    return np.where(
        x >= 0,
        _Phi(alpha - x) - _Phi(-alpha - x),
        _Phi(x + alpha) - _Phi(x - alpha),
    )


def soft_threshold_risk(mu, alpha, tau):
    """R(mu) = E(eta_{alpha tau}(mu + tau W) - mu)^2 in closed form."""
    x = np.asarray(mu, dtype=float) / tau
    a2 = alpha * alpha
    r = (
        1.0 + a2
        + (x * x - 1.0 - a2) * _band(alpha, x)
        - (alpha - x) * _phi(alpha + x)
        - (alpha + x) * _phi(alpha - x)
    )
    return tau * tau * r


def soft_threshold_risk_slope(mu, alpha, tau):
    mu = np.asarray(mu, dtype=float)
    return 2.0 * mu * _band(alpha, mu / tau)


def exceedance(mu, alpha, tau):
    """Q(mu) = P(|mu + tau W| > alpha tau)."""
    x = np.asarray(mu, dtype=float) / tau
    return _Phi(x - alpha) + _Phi(-x - alpha)


def exceedance_slope(mu, alpha, tau):
    x = np.asarray(mu, dtype=float) / tau
    return (_phi(alpha - x) - _phi(alpha + x)) / tau


# Expectations over the prior

def _breakpoints(star, lo, hi, alpha, tau):
    candidates = [0.0, alpha * tau, -alpha * tau]
    candidates.extend(loc for loc, _ in star.atoms())
    grid = getattr(star, "grid", ())
    if len(grid) > config.QUAD_MAX_POINTS:
        step = int(math.ceil(len(grid) / config.QUAD_MAX_POINTS))
        grid = grid[::step]
    candidates.extend(grid)
    inside = sorted({c for c in candidates if lo < c < hi})
    return inside or None


def _expect_star(star, kernel, slope, alpha, tau):
    """E K(Pi*) = sum over atoms + [K C]_lo^hi - int C K' over the continuous part."""
    value = math.fsum(mass * float(kernel(loc, alpha, tau)) for loc, mass in star.atoms())
    ccdf = star.continuous_cdf
    if float(ccdf(np.inf)) <= 0.0:
        return value

    lo, hi = star.quantile_bounds(config.QUAD_TAIL_PROB)
    lo -= config.QUAD_TAIL_WIDTH * tau
    hi += config.QUAD_TAIL_WIDTH * tau

    out = integrate.quad(
        lambda mu: float(ccdf(mu)) * float(slope(mu, alpha, tau)),
        lo, hi,
        points=_breakpoints(star, lo, hi, alpha, tau),
        epsabs=config.QUAD_EPSABS,
        epsrel=config.QUAD_EPSREL,
        limit=config.QUAD_LIMIT,
        full_output=1,
    )
    integral, residual = out[0], out[1]
    if len(out) > 3 and residual > config.QUAD_FAIL_TOL * max(1.0, abs(integral)):
        reason = str(out[3]).strip().splitlines()[0]
        raise QuadratureError(f"quadrature at alpha={alpha:.6g}, tau={tau:.6g} failed: {reason}", residual)

    boundary = float(kernel(hi, alpha, tau)) * float(ccdf(hi)) - float(kernel(lo, alpha, tau)) * float(ccdf(lo))
    return value + boundary - integral


def _check_alpha_tau(alpha, tau):
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")


def functional_f(prior: PriorSpec, alpha, tau):
    """E(eta_{alpha tau}(Pi + tau W) - Pi)^2."""
    _check_alpha_tau(alpha, tau)
    eps = prior.epsilon
    star = _expect_star(prior.star, soft_threshold_risk, soft_threshold_risk_slope, alpha, tau)
    return (1.0 - eps) * tau * tau * null_risk(alpha) + eps * star


def functional_g(prior: PriorSpec, alpha, tau):
    """P(|Pi + tau W| > alpha tau)."""
    _check_alpha_tau(alpha, tau)
    eps = prior.epsilon
    return (1.0 - eps) * 2.0 * _Phi(-alpha) + eps * exceedance_star(prior, alpha, tau)


def exceedance_star(prior: PriorSpec, alpha, tau):
    """P(|Pi* + tau W| > alpha tau), the limiting TPP."""
    _check_alpha_tau(alpha, tau)
    value = _expect_star(prior.star, exceedance, exceedance_slope, alpha, tau)
    return min(max(value, 0.0), 1.0)


# Fixed point

class StateEvolution:
    """Solver for one (params, prior) pair.

    ``params.epsilon`` governs; ``prior`` contributes its nonzero component.
    Inner solves tau given alpha, outer inverts the monotone map alpha -> lambda.
    """

    def __init__(self, params: AmpParams, prior: PriorSpec):
        self.params = params
        self.prior = prior if prior.epsilon == params.epsilon else prior.with_epsilon(params.epsilon)
        self.alpha_min = max(alpha_zero(params.delta), 0.0)
        self.cache = {}  # {alpha: tau}
        self.fixed_points = {}  # {lambda: AmpFixedPoint}
        self._zero_limit = None

    def f(self, alpha, tau):
        return functional_f(self.prior, alpha, tau)

    def g(self, alpha, tau):
        return functional_g(self.prior, alpha, tau)

    def tau_at(self, alpha):
        if alpha in self.cache:
            return self.cache[alpha]
        if not alpha > self.alpha_min:
            raise NoAdmissibleRootError(
                f"alpha={alpha:.6g} violates alpha > max(alpha_zero(delta), 0) = {self.alpha_min:.6g}"
            )
        delta = self.params.delta
        sigma2 = self.params.sigma ** 2

        def excess(s):
            return sigma2 + self.f(alpha, math.sqrt(s)) / delta - s

        # f <= E Pi^2 + tau^2 * null_risk(alpha) bounds the root from above
        s_hi = (sigma2 + self.prior.second_moment() / delta) / (1.0 - null_risk(alpha) / delta)
        s_hi = s_hi * (1.0 + 1e-6) + 1e-300
        for _ in range(60):
            if excess(s_hi) < 0:
                break
            s_hi *= 2.0
        else:
            raise NoAdmissibleRootError(f"tau equation has no upper bracket at alpha={alpha:.6g}")

        if sigma2 > 0:
            s_lo = sigma2
        else:
            s_lo = 1e-12 * s_hi
            if excess(s_lo) <= 0:
                raise DegenerateFixedPointError(
                    f"sigma=0 and no positive tau solves the fixed point at alpha={alpha:.6g}; "
                    f"the solution is the tau -> 0+ boundary"
                )

        s = optimize.brentq(excess, s_lo, s_hi, xtol=config.ROOT_XTOL * min(1.0, s_lo), rtol=config.ROOT_RTOL)
        tau = math.sqrt(s)
        self.cache[alpha] = tau
        return tau

    def lambda_at(self, alpha):
        tau = self.tau_at(alpha)
        return (1.0 - self.g(alpha, tau) / self.params.delta) * alpha * tau

    def fixed_point(self, lam) -> AmpFixedPoint:
        if not lam > 0:
            raise ValueError(f"lambda must be positive, got {lam}")
        if lam in self.fixed_points:
            return self.fixed_points[lam]

        def gap(a):
            return self.lambda_at(a) - lam

        floor = self.alpha_min
        a = floor + 1.0
        if gap(a) < 0:
            a_lo, a_hi = a, floor + 2.0
            for _ in range(60):
                if gap(a_hi) >= 0:
                    break
                a_lo, a_hi = a_hi, floor + 2.0 * (a_hi - floor)
            else:
                raise NoAdmissibleRootError(f"lambda={lam:.6g} exceeds lambda(alpha) over every bracket tried")
        else:
            a_hi = a
            a_lo = floor + 0.5 * (a - floor)
            while gap(a_lo) > 0:
                a_hi = a_lo
                a_lo = floor + 0.5 * (a_lo - floor)
                if a_lo - floor < 1e-12:
                    raise NoAdmissibleRootError(
                        f"lambda={lam:.6g} lies below lambda(alpha) for every alpha > {floor:.6g}"
                    )

        alpha = optimize.brentq(gap, a_lo, a_hi, xtol=config.ROOT_XTOL, rtol=config.ROOT_RTOL)
        fp = AmpFixedPoint(alpha=alpha, tau_amp=self.tau_at(alpha), lam=lam)
        self.fixed_points[lam] = fp
        return fp

    def residuals(self, fp: AmpFixedPoint):
        """Residuals of the tau and lambda equations at ``fp``."""
        p = self.params
        tau = fp.tau_amp
        r_tau = p.sigma ** 2 + self.f(fp.alpha, tau) / p.delta - tau * tau
        r_lam = (1.0 - self.g(fp.alpha, tau) / p.delta) * fp.alpha * tau - fp.lam
        return r_tau, r_lam

    def smallest_alpha(self):
        """alpha at the smallest penalty the solver resolves (the lambda -> 0+ proxy)."""
        return self.fixed_point(config.ZERO_LIMIT_LAMBDAS[-1]).alpha

    def admissible_alpha_range(self, floor=None):
        """(lo, hi) alpha range scanned for curves and targets.

        ``lo`` is ``floor`` when given, else the alpha at the smallest resolved
        penalty; ``hi`` is ALPHA_MAX, kept at least one unit above ``lo``.
        """
        lo = self.smallest_alpha() if floor is None else float(floor)
        if not lo > self.alpha_min:
            raise ValueError(f"alpha range must start above {self.alpha_min:.6g}, got {lo:.6g}")
        return lo, max(config.ALPHA_MAX, lo + 1.0)

    def zero_limit(self) -> AmpFixedPoint:
        """Limit of the fixed point as lambda -> 0+, checked between two small penalties."""
        if self._zero_limit is not None:
            return self._zero_limit
        delta = self.params.delta
        regime = "delta < 1, alpha tends to the root of g = delta" if delta < 1 else "delta >= 1, alpha tends to 0"
        try:
            coarse, fine = (self.fixed_point(lam) for lam in config.ZERO_LIMIT_LAMBDAS)
        except (NoAdmissibleRootError, DegenerateFixedPointError) as e:
            raise ZeroLimitError(f"lambda -> 0+ limit unavailable at delta={delta:.6g} ({regime}): {e}") from e

        def summary(fp):
            tail = _Phi(-fp.alpha)
            return np.array([fp.tau_amp, tail, exceedance_star(self.prior, fp.alpha, fp.tau_amp)])

        a, b = summary(coarse), summary(fine)
        change = np.max(np.abs(a - b) / np.maximum(np.abs(b), 1e-300))
        if change >= config.ZERO_LIMIT_RTOL:
            raise ZeroLimitError(
                f"lambda -> 0+ limit did not settle at delta={delta:.6g} ({regime}): "
                f"relative change {change:.3e} between lambda={config.ZERO_LIMIT_LAMBDAS}"
            )
        self._zero_limit = fine
        return fine

    def tradeoff_at_alpha(self, alpha) -> CurveRow:
        tau = self.tau_at(alpha)
        lam = (1.0 - self.g(alpha, tau) / self.params.delta) * alpha * tau
        point = fdp_tpp_infinity(AmpFixedPoint(alpha, tau, lam), self.prior, self.params.epsilon)
        return CurveRow(lam=lam, alpha=alpha, tau=tau, fdp_inf=point.fdp_inf, tpp_inf=point.tpp_inf)


def solve_state_evolution(params: AmpParams, prior: PriorSpec, lam) -> AmpFixedPoint:
    return StateEvolution(params, prior).fixed_point(lam)


def fdp_tpp_infinity(fp: AmpFixedPoint, prior: PriorSpec, epsilon) -> TradeoffPoint:
    tpp = exceedance_star(prior, fp.alpha, fp.tau_amp)
    null = 2.0 * (1.0 - epsilon) * _Phi(-fp.alpha)
    total = null + epsilon * tpp
    fdp = null / total if total > 0 else 0.0
    return TradeoffPoint(lam=fp.lam, fdp_inf=float(fdp), tpp_inf=float(tpp))


# Augmented design

def augmented_params(params: AmpParams, rho) -> AugmentedParams:
    if not rho > 0:
        raise ValueError(f"rho must be positive, got {rho}")
    return AugmentedParams(
        rho=rho,
        delta_prime=params.delta / (1.0 + rho),
        epsilon_prime=params.epsilon / (1.0 + rho),
    )


class KnockoffTheory:
    """Limits for the Lasso run on [X, knockoffs] with r = ceil(rho p) extra columns."""

    def __init__(self, params: AmpParams, prior: PriorSpec, rho, t0=config.DEFAULT_T0, pi0_factor=None):
        self.params = params
        self.aug = augmented_params(params, rho)
        self.t0 = t0
        self.se = StateEvolution(self.aug.amp_params(params.sigma), prior)
        self._factor = pi0_factor  # fixed factor, e.g. 1 when pi0 is not estimated

    def point_at_alpha(self, alpha) -> AugmentedPoint:
        eps = self.params.epsilon
        tau = self.se.tau_at(alpha)
        lam = (1.0 - self.se.g(alpha, tau) / self.aug.delta_prime) * alpha * tau
        tail = float(_Phi(-alpha))
        tpp = exceedance_star(self.se.prior, alpha, tau)
        null = 2.0 * (1.0 - eps) * tail
        total = null + eps * tpp
        return AugmentedPoint(
            lam=lam,
            alpha=alpha,
            tau=tau,
            fdp_aug=null / total if total > 0 else 0.0,
            tpp_aug=tpp,
            knockoff_rate=2.0 * tail,
            null_rate=null,
        )

    def point(self, lam) -> AugmentedPoint:
        return self.point_at_alpha(self.se.fixed_point(lam).alpha)

    def pi0_factor(self):
        """Limit of the truncated pi0 estimate, from the fixed points at t0 and lambda -> 0+."""
        if self._factor is None:
            if not self.t0 > 0:
                raise ValueError(f"t0 must be positive, got {self.t0}")
            eps = self.params.epsilon
            first = self.point(self.t0)
            zero = self.se.zero_limit()
            second = self.point_at_alpha(zero.alpha)
            spread = 2.0 * (_Phi(-second.alpha) - _Phi(-first.alpha))
            if spread <= 0:
                logging.warning(f"Knockoff selections do not grow below t0={self.t0}; pi0 factor set to 1")
                self._factor = 1.0
            else:
                self._factor = min(1.0, 1.0 - eps + eps * (second.tpp_aug - first.tpp_aug) / spread)
        return self._factor

    def fdp_hat_at_alpha(self, alpha):
        eps = self.params.epsilon
        pt = self.point_at_alpha(alpha)
        selected = pt.null_rate + eps * pt.tpp_aug
        return pt.knockoff_rate / selected * self.pi0_factor()

    def fdp_hat(self, lam):
        if lam < self.t0:
            raise ValueError(f"lambda={lam} lies below t0={self.t0}")
        return self.fdp_hat_at_alpha(self.se.fixed_point(lam).alpha)


def augmented_limits(params: AmpParams, prior: PriorSpec, rho, lam) -> AugmentedPoint:
    return KnockoffTheory(params, prior, rho).point(lam)


def fdp_hat_aug_infinity(params: AmpParams, prior: PriorSpec, rho, lam, t0=config.DEFAULT_T0):
    return KnockoffTheory(params, prior, rho, t0).fdp_hat(lam)


# Targets and curves

def lambda_for_target(params: AmpParams, prior: PriorSpec, target_q, mode="oracle",
                      rho=config.DEFAULT_RHO, t0=config.DEFAULT_T0, pi0_factor=None) -> TargetSolution:
    """Smallest lambda at which the (oracle or knockoff-estimated) limiting FDP reaches ``target_q``.

    In knockoff mode the search starts at lambda = t0; when the estimate there is
    already below the target the procedure stops at t0, flagged as a boundary.
    """
    if not 0.0 < target_q < 1.0:
        raise ValueError(f"target q must lie in (0, 1), got {target_q}")

    if mode == "oracle":
        se = StateEvolution(params, prior)
        a_lo, a_hi = se.admissible_alpha_range()

        def fdp(a):
            return se.tradeoff_at_alpha(a).fdp_inf

        def finish(a):
            row = se.tradeoff_at_alpha(a)
            return row.lam, row.tau, row.tpp_inf
    elif mode == "knockoff":
        theory = KnockoffTheory(params, prior, rho, t0, pi0_factor)
        a_lo, a_hi = theory.se.admissible_alpha_range(theory.se.fixed_point(t0).alpha)
        fdp = theory.fdp_hat_at_alpha

        def finish(a):
            pt = theory.point_at_alpha(a)
            return pt.lam, pt.tau, pt.tpp_aug
    else:
        raise ValueError(f"unknown mode '{mode}', expected 'oracle' or 'knockoff'")

    alphas = np.linspace(a_lo, a_hi, config.TARGET_SCAN)
    values = np.array([fdp(a) for a in alphas])
    lo, hi = float(values.min()), float(values.max())

    below = np.flatnonzero(values <= target_q)
    if below.size == 0:
        raise UnattainableTargetError(target_q, lo, hi)
    first = int(below[0])
    if np.any(values[first:] > target_q + config.TARGET_TOL):
        logging.warning(f"FDP curve ({mode}) is not monotone in alpha around q={target_q}; using the first crossing")

    if first == 0:
        if mode == "oracle" and values[0] < target_q - config.TARGET_TOL:
            raise UnattainableTargetError(target_q, lo, hi)
        lam, tau, tpp = finish(alphas[0])
        logging.warning(f"Target q={target_q} sits at the boundary of the {mode} curve (lambda={lam:.6g})")
        return TargetSolution(lam, float(alphas[0]), tau, float(values[0]), tpp, True, mode)

    alpha = optimize.brentq(lambda a: fdp(a) - target_q, alphas[first - 1], alphas[first],
                            xtol=config.ROOT_XTOL, rtol=config.ROOT_RTOL)
    lam, tau, tpp = finish(alpha)
    return TargetSolution(lam, alpha, tau, float(fdp(alpha)), tpp, False, mode)


def _alpha_grid(se: StateEvolution, n_points):
    return np.linspace(*se.admissible_alpha_range(), n_points)


def trace_tradeoff(params: AmpParams, prior: PriorSpec, n_points=config.DEFAULT_GRID, lambdas=None) -> List[CurveRow]:
    """Oracle tradeoff curve, ordered by increasing lambda.

    Without explicit ``lambdas`` the curve is traced on an alpha grid; each alpha
    gives one lambda directly, so no root finding is needed per point.
    """
    se = StateEvolution(params, prior)
    if lambdas is not None:
        rows = []
        for lam in sorted(lambdas):
            fp = se.fixed_point(lam)
            pt = fdp_tpp_infinity(fp, se.prior, params.epsilon)
            rows.append(CurveRow(lam, fp.alpha, fp.tau_amp, pt.fdp_inf, pt.tpp_inf))
        return rows
    return [se.tradeoff_at_alpha(a) for a in _alpha_grid(se, n_points)]


def trace_augmented(params: AmpParams, prior: PriorSpec, rho=config.DEFAULT_RHO,
                    t0=config.DEFAULT_T0, n_points=config.DEFAULT_GRID) -> List[CurveRow]:
    """Augmented-design curve; ``fdp_hat_aug`` is filled for lambda >= t0 only."""
    theory = KnockoffTheory(params, prior, rho, t0)
    rows = []
    for a in _alpha_grid(theory.se, n_points):
        pt = theory.point_at_alpha(a)
        fdp_hat = theory.fdp_hat_at_alpha(a) if pt.lam >= t0 else None
        rows.append(CurveRow(pt.lam, pt.alpha, pt.tau, pt.fdp_aug, pt.tpp_aug, fdp_hat))
    return rows


def tradeoff_q(curve: List[CurveRow], tpp):
    """q(tpp): FDP attained on the curve at a given TPP, by monotone interpolation."""
    tpps = np.array([row.tpp_inf for row in curve])
    fdps = np.array([row.fdp_inf for row in curve])
    order = np.argsort(tpps)
    tpps, idx = np.unique(tpps[order], return_index=True)
    fdps = fdps[order][idx]
    if tpps.size < 2:
        raise ValueError("need at least two distinct TPP values to interpolate")
    return PchipInterpolator(tpps, fdps, extrapolate=False)(tpp)


def power_pair(params: AmpParams, prior: PriorSpec, q, rho=config.DEFAULT_RHO, t0=config.DEFAULT_T0) -> PowerPair:
    oracle = lambda_for_target(params, prior, q, "oracle")
    knockoff = lambda_for_target(params, prior, q, "knockoff", rho, t0)
    return PowerPair(q, oracle.lam, oracle.tpp, knockoff.lam, knockoff.tpp)


def write_curve_csv(rows: List[CurveRow], path):
    df = pd.DataFrame([asdict(r) for r in rows]).rename(columns={"lam": "lambda"})
    if df["fdp_hat_aug"].isna().all():
        df = df.drop(columns="fdp_hat_aug")
    df.to_csv(path, index=False, float_format=config.FLOAT_FORMAT)
    logging.info(f"Wrote {len(df)} curve rows to {path}")
    return df
