import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from followcast.lexicon import Group
from followcast.special import f_sf
from followcast.stats import describe, format_p, histogram, one_way_anova, tukey_kramer

HAND = [[1, 2, 3], [2, 3, 4], [3, 4, 5]]


def test_describe_single_value():
    d = describe([5])
    assert (d.mean, d.sd, d.median, d.minimum, d.maximum, d.n) == (5, 0, 5, 5, 5, 1)


def test_describe_skewed():
    d = describe([1, 2, 3, 4, 100])
    assert d.median == 3
    assert d.mean == 22


def test_describe_sample_sd():
    assert describe([1, 2, 3, 4, 5]).sd == pytest.approx(1.5811388300841898, abs=1e-12)


def test_describe_interval_is_percentile():
    x = np.arange(1001, dtype=float)
    d = describe(x)
    assert (d.interval_low, d.interval_high) == (25.0, 975.0)


def test_describe_empty():
    with pytest.raises(ValueError):
        describe([])


def test_anova_hand_dataset():
    r = one_way_anova(HAND)
    assert (r.ss_between, r.ss_within, r.df_between, r.df_within) == (6.0, 6.0, 2, 6)
    assert (r.ms_between, r.ms_within, r.f_value) == (3.0, 1.0, 3.0)
    assert r.p_value == pytest.approx(0.125, abs=1e-8)
    assert r.ss_total == pytest.approx(r.ss_between + r.ss_within, rel=1e-6)


def test_anova_identical_groups():
    r = one_way_anova([[1, 2, 3], [1, 2, 3]])
    assert r.f_value == 0.0
    assert r.p_value == 1.0


def test_anova_errors():
    with pytest.raises(ValueError):
        one_way_anova([[1, 2, 3]])
    with pytest.raises(ValueError):
        one_way_anova([[1, 2], []])
    with pytest.raises(ValueError):
        one_way_anova([[2, 2], [2, 2]])
    with pytest.raises(ValueError):
        one_way_anova([[1], [2]])


@settings(max_examples=50, deadline=None)
@given(
    st.lists(st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=2, max_size=20), min_size=2, max_size=4),
    st.floats(-1e4, 1e4),
    st.floats(0.01, 100),
)
def test_anova_shift_and_scale_invariance(groups, shift, scale):
    assume(np.var(np.concatenate(groups)) > 1e-3)
    base = one_way_anova(groups)
    assume(base.ms_within > 1e-6 and base.ms_between > 1e-6)
    shifted = one_way_anova([[v + shift for v in g] for g in groups])
    scaled = one_way_anova([[v * scale for v in g] for g in groups])
    assert shifted.f_value == pytest.approx(base.f_value, rel=1e-7)
    assert scaled.f_value == pytest.approx(base.f_value, rel=1e-9)


def test_tukey_identical_groups():
    g = [[1, 2, 3, 4], [1, 2, 3, 4], [1, 2, 3, 4]]
    for c in tukey_kramer(g, one_way_anova(g)):
        assert c.q_statistic == 0
        assert c.p_value == pytest.approx(1.0, abs=1e-9)


def test_tukey_critical_value_from_table():
    # Three groups of five with MSW = 1: a q of 3.77 sits at p = 0.05 for df = 12.
    base = [-2.0, -1.0, 0.0, 1.0, 2.0]  # SS = 10 per group -> MSW = 30/12 = 2.5
    se = np.sqrt(2.5 / 2 * (2 / 5))
    shift = 3.77 * se
    groups = [base, [v + shift for v in base], [v + shift / 2 for v in base]]
    comps = tukey_kramer(groups, one_way_anova(groups), labels=list(Group))
    extreme = [c for c in comps if c.group_a is Group.CUSTOM_CONTENT and c.group_b is Group.CONTAINS_WORDS][0]
    assert extreme.q_statistic == pytest.approx(3.77, rel=1e-12)
    assert extreme.p_value == pytest.approx(0.05, abs=0.005)
    assert extreme.mean_difference == pytest.approx(-shift)


def test_tukey_kramer_unequal_n_standard_error():
    groups = [[1, 2, 3], [2, 4, 6, 8, 10], [0, 1]]
    a = one_way_anova(groups)
    comps = tukey_kramer(groups, a)
    assert comps[0].standard_error == pytest.approx(np.sqrt(a.ms_within / 2 * (1 / 3 + 1 / 5)))


def test_tukey_p_monotone_in_difference():
    base = [0.0, 1.0, 2.0, 3.0]
    ps = []
    for d in (0.0, 0.5, 1.0, 2.0, 4.0):
        groups = [base, [v + d for v in base], base]
        ps.append(tukey_kramer(groups, one_way_anova(groups))[0].p_value)
    assert all(a > b for a, b in zip(ps, ps[1:]))


def test_format_p():
    assert format_p(0.0004) == "0.000"
    assert format_p(0.0123) == "0.012"


def test_histogram_counts_everything():
    x = np.random.default_rng(0).lognormal(4, 2, 1000).round()
    edges, counts = histogram(x, 20)
    assert counts.sum() == 1000
    assert edges.size == 21


def test_f_oracle_for_acceptance():
    assert f_sf(3, 2, 6) == pytest.approx(0.125, abs=1e-12)
