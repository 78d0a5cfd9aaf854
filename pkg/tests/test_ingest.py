import datetime as dt
import io
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from followcast.ingest import (
    CrawlContext,
    LabeledProfile,
    SnapshotError,
    describe_changes,
    dump_snapshot,
    filter_profiles,
    join_snapshots,
    parse_snapshot,
    read_labeled,
    stratified_split,
    write_snapshot,
)
from helpers import CRAWL, make_labeled, make_profile

CTX = CrawlContext(CRAWL)


def lines_of(profiles, crawl_date=CRAWL):
    return dump_snapshot(profiles, crawl_date).splitlines(keepends=True)


def test_parse_three_valid_lines():
    profiles = [make_profile(user_id=i) for i in range(3)]
    snap = parse_snapshot(lines_of(profiles))
    assert snap.profiles == profiles
    assert snap.malformed == 0
    assert snap.crawl_date == CRAWL


def test_parse_truncated_line_is_counted():
    lines = lines_of([make_profile(user_id=i) for i in range(3)])
    lines[2] = lines[2][: len(lines[2]) // 2] + "\n"
    snap = parse_snapshot(lines)
    assert [p.user_id for p in snap.profiles] == [0, 2]
    assert snap.malformed == 1
    assert snap.malformed_lines == [3]


def test_parse_empty_stream():
    snap = parse_snapshot(io.StringIO(""))
    assert snap.profiles == [] and snap.malformed == 0


@pytest.mark.parametrize(
    "change",
    [
        {"followers_count": -1},
        {"followers_count": 1.5},
        {"protected": "yes"},
        {"utc_offset_hours": 15},
        {"created_at": "2017-01-01"},
        {"created_at": "not a date"},
        {"user_id": True},
    ],
)
def test_invalid_records_are_malformed(change):
    obj = make_profile().to_json()
    obj.update(change)
    snap = parse_snapshot(lines_of([]) + [json.dumps(obj) + "\n"])
    assert snap.malformed == 1 and snap.profiles == []


def test_missing_and_unknown_fields_are_malformed():
    obj = make_profile().to_json()
    del obj["url"]
    extra = make_profile().to_json()
    extra["colour"] = "red"
    snap = parse_snapshot([json.dumps(obj) + "\n", json.dumps(extra) + "\n"])
    assert snap.malformed == 2


def test_crawl_date_override():
    snap = parse_snapshot(lines_of([make_profile()]), crawl_date=dt.date(2020, 1, 1))
    assert snap.crawl_date == dt.date(2020, 1, 1)


def test_bad_header_is_fatal():
    with pytest.raises(SnapshotError):
        parse_snapshot(['{"__snapshot__": {"crawl_date": "soon"}}\n'])


def test_round_trip_preserves_optional_absence():
    p = make_profile(description=None, location=None, url=None, utc_offset_hours=None, last_tweet_at=None,
                     name_field="Ünïcødé ★ 名前")
    assert parse_snapshot(lines_of([p])).profiles == [p]


def test_filter_rules():
    keep = make_profile(user_id=1, last_tweet_at=CRAWL - dt.timedelta(days=365))
    stale = make_profile(user_id=2, last_tweet_at=CRAWL - dt.timedelta(days=366))
    prot = make_profile(user_id=3, protected=True)
    ver = make_profile(user_id=4, verified=True, last_tweet_at=CRAWL - dt.timedelta(days=1))
    never = make_profile(user_id=5, last_tweet_at=None)
    assert filter_profiles([keep, stale, prot, ver, never], CTX) == [keep]


profile_strategy = st.builds(
    lambda uid, prot, ver, days: make_profile(
        user_id=uid, protected=prot, verified=ver,
        last_tweet_at=None if days is None else CRAWL - dt.timedelta(days=days),
    ),
    st.integers(0, 10**6), st.booleans(), st.booleans(), st.one_of(st.none(), st.integers(0, 800)),
)


@settings(max_examples=100, deadline=None)
@given(st.lists(profile_strategy, max_size=30))
def test_filter_idempotent(profiles):
    once = filter_profiles(profiles, CTX)
    assert filter_profiles(once, CTX) == once


def test_join_examples():
    first = [make_profile(user_id=1, followers_count=100), make_profile(user_id=2, followers_count=100),
             make_profile(user_id=3, followers_count=5)]
    second = [make_profile(user_id=1, followers_count=110), make_profile(user_id=2, followers_count=100)]
    res = join_snapshots(first, second)
    a, b = res.labeled
    assert (a.increased, a.absolute_change) == (True, 10)
    assert (b.increased, b.absolute_change) == (False, 0)
    assert res.attrition == 1
    assert res.new_in_second == 0


def test_join_duplicates_rejected():
    with pytest.raises(SnapshotError):
        join_snapshots([make_profile(user_id=1), make_profile(user_id=1)], [])


def test_relative_change_convention():
    assert make_labeled(1, 0, 7).relative_change == 0.0
    assert make_labeled(1, 4, 6).relative_change == 1.5


@settings(max_examples=50, deadline=None)
@given(
    st.dictionaries(st.integers(0, 300), st.integers(0, 50), max_size=200),
    st.dictionaries(st.integers(0, 300), st.integers(0, 50), max_size=200),
)
def test_join_brute_force(first_counts, second_counts):
    first = [make_profile(user_id=u, followers_count=c) for u, c in first_counts.items()]
    second = [make_profile(user_id=u, followers_count=c) for u, c in second_counts.items()]
    res = join_snapshots(first, second)
    assert len(res.labeled) <= min(len(first), len(second))
    expected = sum(1 for u, c in first_counts.items() if u in second_counts and second_counts[u] > c)
    assert sum(r.increased for r in res.labeled) == expected
    assert res.attrition == sum(1 for u in first_counts if u not in second_counts)


def _records(n_pos, n_neg):
    return [make_labeled(i, 10, 11 if i < n_pos else 10) for i in range(n_pos + n_neg)]


def test_split_hundred_records():
    train, ev = stratified_split(_records(44, 56), 0.5, seed=3)
    assert sum(r.increased for r in train) == 22
    assert sum(r.increased for r in ev) == 22
    assert len(train) == 50


def test_split_deterministic():
    recs = _records(30, 70)
    assert stratified_split(recs, 0.5, 9) == stratified_split(recs, 0.5, 9)
    assert stratified_split(recs, 0.5, 9) != stratified_split(recs, 0.5, 10)


def test_split_thousand_records_flag_ratio():
    rng = np.random.default_rng(1)
    recs = [make_labeled(i, 10, 10 + int(rng.random() < 0.439)) for i in range(1000)]
    train, ev = stratified_split(recs, 0.5, seed=0)
    rate = lambda part: sum(r.increased for r in part) / len(part)
    assert abs(rate(train) - rate(ev)) <= 1 / 500


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 60), st.integers(2, 60), st.floats(0.05, 0.95), st.integers(0, 1000))
def test_split_partitions_and_preserves_ratio(n_pos, n_neg, ratio, seed):
    recs = _records(n_pos, n_neg)
    train, ev = stratified_split(recs, ratio, seed)
    ids_t = {r.profile.user_id for r in train}
    ids_e = {r.profile.user_id for r in ev}
    assert not ids_t & ids_e
    assert ids_t | ids_e == {r.profile.user_id for r in recs}
    overall = n_pos / (n_pos + n_neg)
    for part in (train, ev):
        if part:
            assert abs(sum(r.increased for r in part) - overall * len(part)) <= 1.0


def test_split_errors():
    with pytest.raises(ValueError):
        stratified_split(_records(1, 10), 0.5, 0)
    with pytest.raises(ValueError):
        stratified_split(_records(5, 5), 1.0, 0)


def test_describe_changes_examples():
    zero = describe_changes([make_labeled(i, 0, 0) for i in range(3)])
    assert (zero.first.mean, zero.first.sd, zero.first.median) == (0, 0, 0)
    s = describe_changes([make_labeled(i, v, v) for i, v in enumerate([1, 2, 3, 4, 5])])
    assert s.first.mean == 3 and s.first.median == 3
    assert s.first.sd == pytest.approx(1.5811388300841898)
    with pytest.raises(ValueError):
        describe_changes([])


def test_describe_changes_median_matches_sort():
    rng = np.random.default_rng(0)
    vals = rng.integers(0, 10**6, 20_001)
    s = describe_changes([LabeledProfile.from_pair(make_profile(user_id=i, followers_count=int(v)), 0)
                          for i, v in enumerate(vals)])
    assert s.first.median == sorted(vals)[10_000]


def test_labeled_file_round_trip(tmp_path):
    recs = [make_labeled(i, i, 2 * i) for i in range(5)]
    path = tmp_path / "labeled.jsonl"
    with open(path, "w", encoding="utf-8") as fh:
        write_snapshot(fh, recs, CRAWL)
    back, date = read_labeled(path)
    assert back == recs and date == CRAWL
