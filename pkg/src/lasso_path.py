"""Gaussian design problems and the Lasso path

    minimize_b  0.5 * ||y - X b||^2 + lambda * ||b||_1

over a descending penalty grid, with per-variable entry times T_j.
"""
import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numba import njit
from scipy import linalg

import config
from src.errors import LassoConvergenceError


@dataclass
class DesignProblem:
    design: np.ndarray
    response: np.ndarray
    beta_true: Optional[np.ndarray] = None
    noise_sd: float = 0.0

    def __post_init__(self):
        self.design = np.asarray(self.design, dtype=float)
        self.response = np.asarray(self.response, dtype=float)
        if self.design.ndim != 2:
            raise ValueError(f"design must be a matrix, got shape {self.design.shape}")
        n, p = self.design.shape
        if self.response.shape != (n,):
            raise ValueError(f"response has shape {self.response.shape}, design needs ({n},)")
        if self.beta_true is not None:
            self.beta_true = np.asarray(self.beta_true, dtype=float)
            if self.beta_true.shape != (p,):
                raise ValueError(f"beta_true has shape {self.beta_true.shape}, design needs ({p},)")
        if self.noise_sd < 0:
            raise ValueError(f"noise_sd must be nonnegative, got {self.noise_sd}")
        _check_columns(self.design)

    @property
    def shape(self):
        return self.design.shape


@dataclass
class LassoPath:
    lambda_grid: np.ndarray
    coef_history: np.ndarray  # (grid, p)
    entry_times: np.ndarray
    grid_step: float  # largest ratio between consecutive grid points, minus one

    def nonzero_at(self, index):
        return self.coef_history[index] != 0


def _check_columns(design):
    norms = np.einsum("ij,ij->j", design, design)
    if np.any(norms == 0):
        raise ValueError(f"design has all-zero columns: {np.flatnonzero(norms == 0)[:10].tolist()}")
    if design.shape[0] > 1:
        constant = np.flatnonzero(np.ptp(design, axis=0) == 0)
        if constant.size:
            raise ValueError(f"design has constant columns: {constant[:10].tolist()}")


def generate_design(n, p, seed):
    """n x p matrix with i.i.d. N(0, 1/n) entries."""
    if n < 1 or p < 1:
        raise ValueError(f"n and p must be at least 1, got n={n}, p={p}")
    rng = np.random.default_rng(seed)
    return rng.standard_normal((n, p)) / math.sqrt(n)


def simulate_response(design, beta, sigma, seed):
    design = np.asarray(design, dtype=float)
    beta = np.asarray(beta, dtype=float)
    if design.shape[1] != beta.shape[0]:
        raise ValueError(f"design {design.shape} and beta {beta.shape} are inconsistent")
    if sigma < 0:
        raise ValueError(f"sigma must be nonnegative, got {sigma}")
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(design.shape[0])
    if sigma == 0:
        return design @ beta
    return design @ beta + sigma * noise


@njit(cache=True, nogil=True)
def _sweep(gram, col_sq, beta, grad, lam, active, full):
    max_change = 0.0
    p = beta.shape[0]
    for j in range(p):
        if not full and not active[j]:
            continue
        old = beta[j]
        z = grad[j] + col_sq[j] * old
        if z > lam:
            new = (z - lam) / col_sq[j]
        elif z < -lam:
            new = (z + lam) / col_sq[j]
        else:
            new = 0.0
        d = new - old
        if d != 0.0:
            for k in range(p):
                grad[k] -= d * gram[k, j]
            beta[j] = new
            if new != 0.0:
                active[j] = True
            if abs(d) > max_change:
                max_change = abs(d)
    return max_change


@njit(cache=True, nogil=True)
def _kkt(beta, grad, lam, active, full):
    worst = 0.0
    for j in range(beta.shape[0]):
        if not full and not active[j]:
            continue
        if beta[j] > 0.0:
            v = abs(grad[j] - lam)
        elif beta[j] < 0.0:
            v = abs(grad[j] + lam)
        else:
            v = abs(grad[j]) - lam
        if v > worst:
            worst = v
    return worst


@njit(cache=True, nogil=True)
def _coordinate_descent(gram, col_sq, beta, grad, lam, tol, kkt_tol, max_sweeps):
    """Cyclic coordinate descent with covariance updates.

    ``grad`` holds X^T (y - X beta) and is kept in sync. Active-set passes run
    until they settle, then a full pass confirms; a full pass ends the solve
    once the step or the KKT residual is below tolerance. Returns the sweep
    count, negated when the budget ran out.
    """
    p = beta.shape[0]
    active = np.zeros(p, dtype=np.bool_)
    for j in range(p):
        active[j] = beta[j] != 0.0
    sweeps = 0
    while sweeps < max_sweeps:
        change = _sweep(gram, col_sq, beta, grad, lam, active, True)
        sweeps += 1
        if change < tol or _kkt(beta, grad, lam, active, True) <= kkt_tol:
            return sweeps
        while sweeps < max_sweeps:
            change = _sweep(gram, col_sq, beta, grad, lam, active, False)
            sweeps += 1
            if change < tol or _kkt(beta, grad, lam, active, False) <= kkt_tol:
                break
    return -sweeps


def duality_gap(design, response, coef, lam):
    residual = response - design @ coef
    primal = 0.5 * residual @ residual + lam * np.abs(coef).sum()
    corr = np.max(np.abs(design.T @ residual)) if coef.size else 0.0
    scale = min(1.0, lam / corr) if corr > 0 else 1.0
    theta = scale * residual
    dual = 0.5 * response @ response - 0.5 * np.sum((response - theta) ** 2)
    return float(primal - dual)


def kkt_violation(design, response, coef, lam):
    """Largest violation of the Lasso optimality conditions."""
    grad = design.T @ (response - design @ coef)
    on = coef != 0
    viol = np.where(on, np.abs(grad - lam * np.sign(coef)), np.maximum(np.abs(grad) - lam, 0.0))
    return float(viol.max()) if viol.size else 0.0


class _Solver:
    """Holds the Gram matrix for one (design, response) so the path reuses it."""

    def __init__(self, design, response):
        self.design = np.ascontiguousarray(design, dtype=float)
        self.response = np.asarray(response, dtype=float)
        if self.design.shape[0] != self.response.shape[0]:
            raise ValueError(f"design {self.design.shape} and response {self.response.shape} are inconsistent")
        self.gram = np.asfortranarray(self.design.T @ self.design)
        self.xty = self.design.T @ self.response
        self.col_sq = np.ascontiguousarray(np.diag(self.gram))
        if np.any(self.col_sq == 0):
            raise ValueError("design has all-zero columns")
        scale = float(np.max(np.abs(self.xty))) if self.xty.size else 0.0
        # margin for drift between the updated and a recomputed gradient
        self.kkt_tol = 0.5 * config.CD_KKT_RTOL * max(scale, 1e-300)

    def polish(self, lam, beta):
        """Exact solution on the current support and signs, or None if it fails KKT."""
        support = np.flatnonzero(beta)
        if support.size == 0 or support.size > self.design.shape[0]:
            return None
        signs = np.sign(beta[support])
        try:
            exact = linalg.solve(self.gram[np.ix_(support, support)], self.xty[support] - lam * signs,
                                 assume_a="pos")
        except (linalg.LinAlgError, ValueError):
            return None
        if np.any(np.sign(exact) != signs):
            return None
        candidate = np.zeros_like(beta)
        candidate[support] = exact
        grad = self.xty - self.gram @ candidate
        if _kkt(candidate, grad, lam, candidate != 0, True) > self.kkt_tol:
            return None
        return candidate

    def solve(self, lam, beta):
        beta = np.array(beta, dtype=float)
        grad = self.xty - self.gram @ beta
        done = 0
        while done < config.CD_MAX_SWEEPS:
            budget = min(config.CD_POLISH_EVERY, config.CD_MAX_SWEEPS - done)
            sweeps = _coordinate_descent(self.gram, self.col_sq, beta, grad, lam,
                                         config.CD_TOL, self.kkt_tol, budget)
            if sweeps > 0:
                return beta
            done -= sweeps
            if budget == config.CD_POLISH_EVERY:
                exact = self.polish(lam, beta)
                if exact is not None:
                    logging.debug(f"lambda={lam:.6g}: active-set solve after {done} sweeps")
                    return exact
        gap = duality_gap(self.design, self.response, beta, lam)
        raise LassoConvergenceError(lam, done, gap)


def lasso_solve(design, response, lam, warm_start=None):
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    solver = _Solver(design, response)
    p = solver.design.shape[1]
    start = np.zeros(p) if warm_start is None else np.asarray(warm_start, dtype=float)
    if start.shape != (p,):
        raise ValueError(f"warm start has shape {start.shape}, expected ({p},)")
    return solver.solve(lam, start)


def default_lambda_grid(design, response, n=config.DEFAULT_GRID, ratio=config.DEFAULT_LAMBDA_MIN_RATIO):
    """``n`` log-spaced points from ||X^T y||_inf down to ``ratio`` times that."""
    if n < 2:
        raise ValueError(f"grid needs at least two points, got {n}")
    if not 0 < ratio < 1:
        raise ValueError(f"ratio must lie in (0, 1), got {ratio}")
    top = float(np.max(np.abs(np.asarray(design).T @ np.asarray(response)))) if np.size(design) else 0.0
    if top == 0:
        top = 1.0
    return np.geomspace(top, top * ratio, n)


def _grid_step(grid):
    if grid.size < 2:
        return 0.0
    return float(np.max(grid[:-1] / grid[1:]) - 1.0)


def lasso_path(design, response, lambda_grid=None):
    design = np.asarray(design, dtype=float)
    response = np.asarray(response, dtype=float)
    if lambda_grid is None:
        lambda_grid = default_lambda_grid(design, response)
    grid = np.asarray(lambda_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0 or np.any(grid <= 0) or np.any(np.diff(grid) >= 0):
        raise ValueError("lambda grid must be strictly decreasing and positive")

    p = design.shape[1]
    history = np.zeros((grid.size, p))
    if not np.any(response != 0):
        logging.warning("Response is identically zero; path is empty")
    else:
        solver = _Solver(design, response)
        beta = np.zeros(p)
        for i, lam in enumerate(grid):
            beta = solver.solve(lam, beta)
            history[i] = beta

    nonzero = history != 0
    ever = nonzero.any(axis=0)
    first = np.argmax(nonzero, axis=0)
    times = np.where(ever, grid[first], 0.0)
    return LassoPath(lambda_grid=grid, coef_history=history, entry_times=times, grid_step=_grid_step(grid))


def entry_times(design, response, lambda_grid):
    """T_j = largest grid lambda at which coefficient j is nonzero, 0 if never."""
    return lasso_path(design, response, lambda_grid).entry_times


def active_counts(path: LassoPath):
    return np.count_nonzero(path.coef_history, axis=1)
