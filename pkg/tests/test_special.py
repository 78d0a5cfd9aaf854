import math

import mpmath
import numpy as np
import pytest
from scipy import stats as sps

from followcast.special import (
    DomainError,
    chi2_sf,
    f_sf,
    normal_cdf,
    regularized_incomplete_beta,
    studentized_range_cdf,
    studentized_range_ppf,
    studentized_range_sf,
)

mpmath.mp.dps = 30


def mp_beta(a, b, x):
    return float(mpmath.betainc(a, b, 0, x, regularized=True))


def mp_chi2_sf(x, k):
    return float(mpmath.gammainc(k / 2.0, x / 2.0, mpmath.inf, regularized=True))


def mp_f_sf(f, d1, d2):
    return float(mpmath.betainc(d2 / 2.0, d1 / 2.0, 0, d2 / (d2 + d1 * f), regularized=True))


def test_beta_identity():
    for x in np.linspace(0, 1, 11):
        assert regularized_incomplete_beta(1, 1, x) == pytest.approx(x, abs=1e-15)


def test_normal_cdf_at_zero():
    assert normal_cdf(0.0) == 0.5


def test_f_sf_hand_value():
    # d1 = 2 gives the closed form (1 + d1 f / d2)^(-d2/2) = 2^-3
    assert f_sf(3.0, 2, 6) == pytest.approx(0.125, abs=1e-12)
    assert abs(f_sf(3.0, 2, 6) - mp_f_sf(3.0, 2, 6)) < 1e-12


@pytest.mark.parametrize(
    "a,b,x",
    [(0.5, 0.5, 0.3), (2, 3, 0.999), (50, 60, 0.45), (1e3, 2e3, 0.33), (0.1, 10, 1e-5), (3.1e6, 1.0, 0.9999999)],
)
def test_beta_spot_values(a, b, x):
    assert abs(regularized_incomplete_beta(a, b, x) - mp_beta(a, b, x)) < 1e-9


def test_large_df_f_tail():
    # the degrees of freedom of a full-scale ANOVA
    assert abs(f_sf(1.2, 2, 6354049) - mp_f_sf(1.2, 2, 6354049)) < 1e-9


@pytest.mark.parametrize("bad", [(-1, 1, 0.5), (1, 0, 0.5), (1, 1, 1.5), (1, 1, -0.1), (1, 1, math.nan)])
def test_beta_domain(bad):
    with pytest.raises(DomainError):
        regularized_incomplete_beta(*bad)


def test_other_domains():
    with pytest.raises(DomainError):
        chi2_sf(-1.0, 2)
    with pytest.raises(DomainError):
        chi2_sf(1.0, 0)
    with pytest.raises(DomainError):
        f_sf(-0.1, 1, 1)
    with pytest.raises(DomainError):
        studentized_range_sf(1.0, 1, 10)
    with pytest.raises(DomainError):
        normal_cdf(math.nan)


@pytest.mark.parametrize("k", [1, 2, 5, 30])
def test_survival_functions_monotone_and_bounded(k):
    xs = np.linspace(0, 60, 200)
    vals = [chi2_sf(x, k) for x in xs]
    assert all(0 <= v <= 1 for v in vals)
    assert all(a >= b for a, b in zip(vals, vals[1:]))
    fv = [f_sf(x, k, 12) for x in xs]
    assert all(a >= b for a, b in zip(fv, fv[1:]))
    qv = [studentized_range_sf(q, 3, k) for q in np.linspace(0, 12, 40)]
    assert all(0 <= v <= 1 for v in qv)
    assert all(a >= b - 1e-12 for a, b in zip(qv, qv[1:]))


def test_studentized_range_table_quantile():
    # q(0.95; k=3, df=12) = 3.77 in published tables
    assert studentized_range_ppf(0.95, 3, 12) == pytest.approx(3.77, abs=0.01)


@pytest.mark.parametrize(
    "q,k,df",
    [(3.77, 3, 12), (1.0, 2, 1), (5.0, 10, 5), (10.0, 3, 2), (4.0, 3, 100), (3.0, 4, 1000), (2.5, 6, 30)],
)
def test_studentized_range_against_scipy(q, k, df):
    assert abs(studentized_range_sf(q, k, df) - sps.studentized_range.sf(q, k, df)) < 1e-4


def test_studentized_range_two_means_reduces_to_normal():
    # For k=2 and large df, Q/sqrt(2) is a |N(0,1)|.
    for q in (0.5, 1.0, 2.0, 3.0, 4.5):
        expected = 2 * (1 - normal_cdf(q / math.sqrt(2)))
        assert abs(studentized_range_sf(q, 2, 1e4) - expected) < 1e-3


def test_studentized_range_infinite_df():
    assert studentized_range_cdf(3.0, 3, math.inf) == pytest.approx(
        sps.studentized_range.cdf(3.0, 3, 1e7), abs=1e-5
    )
