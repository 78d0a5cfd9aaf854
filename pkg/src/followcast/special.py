"""Special functions behind the p-values reported by the statistics modules.

Incomplete beta and gamma use the classic continued-fraction / series
evaluations (modified Lentz). The studentized range distribution is
evaluated by Gauss-Legendre quadrature of its double-integral form.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

_EPS = 1e-16
_TINY = 1e-300
_MAX_ITER = 100_000


class DomainError(ValueError):
    """Raised when a special function is called outside its domain."""


def _check_finite(**kwargs: float) -> None:
    for name, value in kwargs.items():
        if not math.isfinite(value):
            raise DomainError(f"{name} must be finite, got {value!r}")


def _betacf(a: float, b: float, x: float) -> float:
    # Continued fraction for I_x(a, b), modified Lentz.
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_ITER):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function I_x(a, b).

    Raises DomainError unless a > 0, b > 0 and 0 <= x <= 1.
    """
    _check_finite(a=a, b=b, x=x)
    if a <= 0 or b <= 0:
        raise DomainError(f"a and b must be positive, got a={a}, b={b}")
    if x < 0 or x > 1:
        raise DomainError(f"x must lie in [0, 1], got {x}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    log_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return min(1.0, front * _betacf(a, b, x) / a)
    return max(0.0, 1.0 - front * _betacf(b, a, 1.0 - x) / b)


def _gamma_series(a: float, x: float) -> float:
    # Lower regularized gamma P(a, x) by its power series.
    ap = a
    total = 1.0 / a
    term = total
    for _ in range(_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            return total * math.exp(-x + a * math.log(x) - math.lgamma(a))
    raise ArithmeticError(f"incomplete gamma series did not converge (a={a}, x={x})")


def _gamma_cf(a: float, x: float) -> float:
    # Upper regularized gamma Q(a, x) by continued fraction.
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h
    raise ArithmeticError(f"incomplete gamma continued fraction did not converge (a={a}, x={x})")


def regularized_upper_gamma(a: float, x: float) -> float:
    """Upper regularized incomplete gamma Q(a, x) = 1 - P(a, x)."""
    _check_finite(a=a, x=x)
    if a <= 0:
        raise DomainError(f"a must be positive, got {a}")
    if x < 0:
        raise DomainError(f"x must be non-negative, got {x}")
    if x == 0.0:
        return 1.0
    if x < a + 1.0:
        return max(0.0, 1.0 - _gamma_series(a, x))
    return min(1.0, _gamma_cf(a, x))


def normal_cdf(z: float) -> float:
    """Standard normal cumulative distribution function."""
    if math.isnan(z):
        raise DomainError("z must not be NaN")
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def normal_sf(z: float) -> float:
    """Standard normal survival function, accurate in the upper tail."""
    if math.isnan(z):
        raise DomainError("z must not be NaN")
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def chi2_sf(x: float, k: float) -> float:
    """Survival function of the chi-squared distribution with ``k`` degrees of freedom."""
    _check_finite(x=x, k=k)
    if k <= 0:
        raise DomainError(f"degrees of freedom must be positive, got {k}")
    if x < 0:
        raise DomainError(f"x must be non-negative, got {x}")
    return regularized_upper_gamma(k / 2.0, x / 2.0)


def f_sf(f: float, d1: float, d2: float) -> float:
    """Survival function P(F > f) of the F distribution with (d1, d2) degrees of freedom."""
    _check_finite(f=f, d1=d1, d2=d2)
    if d1 <= 0 or d2 <= 0:
        raise DomainError(f"degrees of freedom must be positive, got ({d1}, {d2})")
    if f < 0:
        raise DomainError(f"f must be non-negative, got {f}")
    if f == 0.0:
        return 1.0
    return regularized_incomplete_beta(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f))


# --- studentized range -------------------------------------------------------

_INNER_NODES = 64
_INNER_PANELS = 16
_INNER_HALF_WIDTH = 8.5
_OUTER_NODES = 48
_OUTER_PANELS = 12


@lru_cache(maxsize=None)
def _legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(n)


def _composite_nodes(lo: float, hi: float, panels: int, n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = _legendre(n)
    edges = np.linspace(lo, hi, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def _std_normal_cdf(x: np.ndarray) -> np.ndarray:
    from scipy.special import ndtr

    return ndtr(x)


def _range_cdf(w: np.ndarray, k: int) -> np.ndarray:
    """P(range of k iid standard normals <= w), vectorised over w."""
    z, wz = _composite_nodes(-_INNER_HALF_WIDTH, _INNER_HALF_WIDTH, _INNER_PANELS, _INNER_NODES)
    phi = np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
    upper = _std_normal_cdf(z)
    lower = _std_normal_cdf(z[None, :] - w[:, None])
    diff = np.clip(upper[None, :] - lower, 0.0, 1.0)
    vals = k * (phi * wz)[None, :] * diff ** (k - 1)
    return np.clip(vals.sum(axis=1), 0.0, 1.0)


def _log_scale_bounds(df: float, drop: float = 60.0) -> tuple[float, float]:
    # Interval where the log-density of t is within `drop` nats of its peak.
    def rel(t: float) -> float:
        return df * (t - math.expm1(2.0 * t) / 2.0) + drop

    def bisect(a: float, b: float) -> float:
        for _ in range(200):
            m = 0.5 * (a + b)
            if (rel(m) > 0) == (rel(a) > 0):
                a = m
            else:
                b = m
        return 0.5 * (a + b)

    lo_end = -1.0
    while rel(lo_end) > 0:
        lo_end *= 2.0
    hi_end = 1.0
    while rel(hi_end) > 0:
        hi_end *= 2.0
    return bisect(lo_end, 0.0), bisect(0.0, hi_end)


def studentized_range_cdf(q: float, k: int, df: float) -> float:
    """CDF of the studentized range for ``k`` means and ``df`` error degrees of freedom.

    ``df = inf`` gives the distribution of the range of k standard normals.
    Quadrature accuracy is better than 1e-6 over q in [0, 50], k <= 100, df >= 1.
    """
    _check_finite(q=q, k=k)
    if k < 2:
        raise DomainError(f"k must be >= 2, got {k}")
    if not df > 0:
        raise DomainError(f"df must be positive, got {df}")
    if q <= 0:
        return 0.0
    if math.isinf(df):
        return float(_range_cdf(np.array([q]), int(k))[0])
    # Outer integral over t = ln(s), s ~ sqrt(chi2_df / df):
    #   log density of t relative to its mode at 0 is df * (t - (e^{2t} - 1) / 2)
    lo, hi = _log_scale_bounds(df)
    t, wt = _composite_nodes(lo, hi, _OUTER_PANELS, _OUTER_NODES)
    log_norm = (
        math.log(2.0) + (df / 2.0) * math.log(df / 2.0) - math.lgamma(df / 2.0)
    )
    s = np.exp(t)
    log_dens = log_norm + df * t - df * s * s / 2.0
    dens = np.exp(log_dens) * wt
    keep = dens > 1e-300
    inner = _range_cdf(q * s[keep], int(k))
    return float(np.clip(np.sum(dens[keep] * inner), 0.0, 1.0))


def studentized_range_sf(q: float, k: int, df: float) -> float:
    """Survival function P(Q > q) of the studentized range distribution."""
    if q <= 0:
        _check_finite(q=q)
        return 1.0
    return max(0.0, 1.0 - studentized_range_cdf(q, k, df))


def studentized_range_ppf(p: float, k: int, df: float) -> float:
    """Quantile: the q with studentized_range_cdf(q, k, df) = p."""
    from scipy.optimize import brentq

    if not 0.0 < p < 1.0:
        raise DomainError(f"p must lie in (0, 1), got {p}")
    hi = 10.0
    while studentized_range_cdf(hi, k, df) < p:
        hi *= 2.0
        if hi > 1e6:
            raise ArithmeticError("studentized range quantile bracket failed")
    return brentq(lambda q: studentized_range_cdf(q, k, df) - p, 0.0, hi, xtol=1e-10)
