"""Exact hypergeometric expectations and a brute-force oracle for them.

X counts draws from the n0 group when m items are taken without replacement
from n0 + n1. All arithmetic is rational; floats appear only at the API edge.
Binomials follow C(0, 0) = 1 and C(n, k) = 0 for n < 0, k < 0 or k > n.
"""
import logging
import math
from dataclasses import dataclass
from fractions import Fraction

import pandas as pd


def binom(n, k):
    if n < 0 or k < 0 or k > n:
        return 0
    return math.comb(n, k)


@dataclass(frozen=True)
class HyperParams:
    n0: int
    n1: int
    m: int

    def __post_init__(self):
        if self.n0 < 0 or self.n1 < 0:
            raise ValueError(f"group sizes must be nonnegative, got n0={self.n0}, n1={self.n1}")
        if self.m < 1 or self.m > self.n0 + self.n1:
            raise ValueError(f"draws m={self.m} must lie in [1, n0 + n1 = {self.n0 + self.n1}]")

    def support(self):
        return range(max(0, self.m - self.n1), min(self.n0, self.m) + 1)


def pmf_exact(params: HyperParams, k) -> Fraction:
    n0, n1, m = params.n0, params.n1, params.m
    return Fraction(binom(n0, k) * binom(n1, m - k), binom(n0 + n1, m))


def hyper_pmf(params: HyperParams, k) -> float:
    return float(pmf_exact(params, k))


def brute_force_expectation(params: HyperParams, g):
    """sum_k g(k) P(X = k); exact when g returns ints or Fractions."""
    return sum((g(k) * pmf_exact(params, k) for k in params.support()), Fraction(0))


def expected_ratio_exact(params: HyperParams) -> Fraction:
    """E[X / (1 + m - X)] = n0 / (1 + n1) * (1 - C(n0 - 1, m) / C(n0 + n1, m))."""
    n0, n1, m = params.n0, params.n1, params.m
    return Fraction(n0, 1 + n1) * (1 - Fraction(binom(n0 - 1, m), binom(n0 + n1, m)))


def expected_ratio(params: HyperParams) -> float:
    return float(expected_ratio_exact(params))


def expected_product_ratio_exact(m0, r, m) -> Fraction:
    """E[X/(1+m-X) * (r+X-m)/(1+m0-X)] with X drawn from m0 nulls against r knockoffs."""
    HyperParams(m0, r, m)
    top = min(m0, m)
    return 1 - Fraction(binom(m0, top) * binom(r, m - top), binom(m0 + r, m))


def expected_product_ratio(m0, r, m) -> float:
    return float(expected_product_ratio_exact(m0, r, m))


def _ratio(m):
    return lambda k: Fraction(k, 1 + m - k)


def _product_ratio(m0, r, m):
    return lambda k: Fraction(k, 1 + m - k) * Fraction(r + k - m, 1 + m0 - k)


def exhaustive_check(max_population=12) -> pd.DataFrame:
    """Closed forms against brute force for every configuration with population <= max_population."""
    rows = []
    for total in range(1, max_population + 1):
        for n0 in range(total + 1):
            n1 = total - n0
            for m in range(1, total + 1):
                params = HyperParams(n0, n1, m)
                closed = expected_ratio_exact(params)
                brute = brute_force_expectation(params, _ratio(m))
                rows.append({
                    "identity": "ratio", "n0": n0, "n1": n1, "m": m,
                    "closed_form": float(closed), "brute_force": float(brute),
                    "exact_match": closed == brute,
                    "bound_ok": closed <= Fraction(n0, 1 + n1),
                })
                closed = expected_product_ratio_exact(n0, n1, m)
                brute = brute_force_expectation(params, _product_ratio(n0, n1, m))
                rows.append({
                    "identity": "product_ratio", "n0": n0, "n1": n1, "m": m,
                    "closed_form": float(closed), "brute_force": float(brute),
                    "exact_match": closed == brute,
                    "bound_ok": closed <= 1,
                })
    report = pd.DataFrame(rows)
    failed = report[~(report["exact_match"] & report["bound_ok"])]
    if len(failed):
        logging.error(f"Hypergeometric check failed for {len(failed)} configurations")
    else:
        logging.info(f"Hypergeometric check passed for {len(report)} configurations")
    return report
