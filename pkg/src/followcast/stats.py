"""Descriptive statistics, one-way ANOVA and Tukey-Kramer post-hoc comparisons."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Hashable, Sequence

import numpy as np

from .special import f_sf, studentized_range_sf


@dataclass(frozen=True)
class Description:
    n: int
    mean: float
    sd: float
    median: float
    interval_low: float
    interval_high: float
    minimum: float
    maximum: float


@dataclass(frozen=True)
class AnovaResult:
    ss_between: float
    ss_within: float
    ss_total: float
    df_between: int
    df_within: int
    ms_between: float
    ms_within: float
    f_value: float
    p_value: float


@dataclass(frozen=True)
class TukeyComparison:
    group_a: Hashable
    group_b: Hashable
    mean_difference: float
    standard_error: float
    q_statistic: float
    p_value: float


def describe(values: Sequence[float]) -> Description:
    """Mean, sample SD, median, central 95 % interval (2.5th/97.5th percentiles), min, max."""
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        raise ValueError("cannot describe an empty sample")
    sd = float(np.std(x, ddof=1)) if x.size > 1 else 0.0
    lo, med, hi = np.percentile(x, [2.5, 50.0, 97.5])
    return Description(
        n=int(x.size),
        mean=float(np.mean(x)),
        sd=sd,
        median=float(med),
        interval_low=float(lo),
        interval_high=float(hi),
        minimum=float(x.min()),
        maximum=float(x.max()),
    )


def one_way_anova(groups: Sequence[Sequence[float]]) -> AnovaResult:
    """Classic between/within decomposition with an F-test.

    No variance-homogeneity correction is applied.
    """
    arrays = [np.asarray(g, dtype=float) for g in groups]
    k = len(arrays)
    if k < 2:
        raise ValueError("ANOVA needs at least two groups")
    if any(a.size == 0 for a in arrays):
        raise ValueError("ANOVA groups must be non-empty")
    n_total = sum(a.size for a in arrays)
    if n_total <= k:
        raise ValueError("ANOVA needs more observations than groups")

    # Centre on the grand mean first; keeps the sums of squares exact under shifts.
    grand = float(np.mean(np.concatenate(arrays)))
    centred = [a - grand for a in arrays]
    means = [float(np.mean(c)) for c in centred]
    ss_between = float(sum(c.size * m * m for c, m in zip(centred, means)))
    ss_within = float(sum(np.sum((c - m) ** 2) for c, m in zip(centred, means)))
    ss_total = ss_between + ss_within

    df_between = k - 1
    df_within = n_total - k
    ms_between = ss_between / df_between
    ms_within = ss_within / df_within
    if ms_within == 0.0:
        if ms_between == 0.0:
            raise ValueError("F is undefined: no variance within or between groups")
        f_value, p_value = math.inf, 0.0
    else:
        f_value = ms_between / ms_within
        p_value = f_sf(f_value, df_between, df_within)
    return AnovaResult(
        ss_between=ss_between,
        ss_within=ss_within,
        ss_total=ss_total,
        df_between=df_between,
        df_within=df_within,
        ms_between=ms_between,
        ms_within=ms_within,
        f_value=f_value,
        p_value=p_value,
    )


def tukey_kramer(
    groups: Sequence[Sequence[float]],
    anova: AnovaResult,
    labels: Sequence[Hashable] | None = None,
) -> list[TukeyComparison]:
    """All pairwise Tukey-Kramer comparisons, using the ANOVA's within mean square."""
    arrays = [np.asarray(g, dtype=float) for g in groups]
    if labels is None:
        labels = list(range(len(arrays)))
    if len(labels) != len(arrays):
        raise ValueError("one label per group required")
    if len(arrays) < 2 or any(a.size == 0 for a in arrays):
        raise ValueError("Tukey comparisons need at least two non-empty groups")
    if anova.df_between != len(arrays) - 1:
        raise ValueError("ANOVA result was computed from a different number of groups")
    k = len(arrays)
    means = [float(np.mean(a)) for a in arrays]
    out = []
    for i, j in itertools.combinations(range(k), 2):
        diff = means[i] - means[j]
        se = math.sqrt(anova.ms_within / 2.0 * (1.0 / arrays[i].size + 1.0 / arrays[j].size))
        if se == 0.0:
            q = 0.0 if diff == 0.0 else math.inf
        else:
            q = abs(diff) / se
        p = 0.0 if math.isinf(q) else studentized_range_sf(q, k, anova.df_within)
        out.append(TukeyComparison(labels[i], labels[j], diff, se, q, p))
    return out


def format_p(p: float) -> str:
    """Three-decimal p-value; anything below 0.0005 prints as 0.000."""
    return f"{p:.3f}"


def histogram(values: Sequence[float], bins: int = 50, log_scale: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Bin edges and counts; log-spaced edges over (value + 1) for heavy-tailed counts."""
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        raise ValueError("cannot bin an empty sample")
    if log_scale:
        if x.min() < 0:
            raise ValueError("log-scaled histogram needs non-negative values")
        top = math.log10(x.max() + 1.0) if x.max() > 0 else 1.0
        edges = np.logspace(0.0, top, bins + 1) - 1.0
        edges[-1] = max(edges[-1], x.max())
    else:
        edges = np.histogram_bin_edges(x, bins=bins)
    counts, edges = np.histogram(x, bins=edges)
    return edges, counts
