from fractions import Fraction

import pytest

from src.hypergeom_oracle import (
    HyperParams,
    binom,
    brute_force_expectation,
    exhaustive_check,
    expected_product_ratio,
    expected_product_ratio_exact,
    expected_ratio,
    expected_ratio_exact,
    hyper_pmf,
    pmf_exact,
)


def test_binom_conventions():
    assert binom(0, 0) == 1
    assert binom(-1, 0) == 0
    assert binom(3, 4) == 0
    assert binom(3, -1) == 0
    assert binom(5, 2) == 10


def test_params_validation():
    with pytest.raises(ValueError):
        HyperParams(-1, 2, 1)
    with pytest.raises(ValueError):
        HyperParams(2, 2, 0)
    with pytest.raises(ValueError):
        HyperParams(2, 2, 5)


def test_pmf():
    params = HyperParams(2, 2, 2)
    assert pmf_exact(params, 1) == Fraction(4, 6)
    assert hyper_pmf(params, 1) == pytest.approx(2 / 3)
    assert pmf_exact(params, 3) == 0
    assert sum(pmf_exact(params, k) for k in params.support()) == 1


def test_expected_ratio_examples():
    assert expected_ratio_exact(HyperParams(2, 2, 2)) == Fraction(2, 3)
    assert expected_ratio(HyperParams(2, 2, 2)) == pytest.approx(2 / 3)
    assert expected_ratio_exact(HyperParams(0, 4, 3)) == 0
    assert expected_ratio_exact(HyperParams(5, 0, 3)) == 3


def test_expected_product_ratio_examples():
    assert expected_product_ratio_exact(0, 4, 2) == 0
    assert expected_product_ratio(3, 2, 2) == pytest.approx(
        float(brute_force_expectation(
            HyperParams(3, 2, 2),
            lambda k: Fraction(k, 3 - k) * Fraction(k, 4 - k),
        )),
        abs=1e-15,
    )


def test_brute_force_moments():
    params = HyperParams(4, 3, 3)
    assert brute_force_expectation(params, lambda k: 1) == 1
    assert brute_force_expectation(params, lambda k: k) == Fraction(3 * 4, 7)


def test_exhaustive_check_passes():
    report = exhaustive_check(12)
    assert report["exact_match"].all()
    assert report["bound_ok"].all()
    # two identities per configuration with population 1..12
    configs = sum((total + 1) * total for total in range(1, 13))
    assert len(report) == 2 * configs
