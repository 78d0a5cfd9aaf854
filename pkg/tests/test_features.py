import datetime as dt
import random
import unicodedata

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from followcast.features import (
    CORE_FEATURES,
    FeatureError,
    Scaler,
    count_hashtags,
    count_urls,
    extract,
    extract_core,
    feature_matrix,
    fit_scaler,
    read_feature_csv,
    schema_for,
    write_feature_csv,
)
from followcast.ingest import CrawlContext
from followcast.lexicon import Group
from helpers import CRAWL, make_labeled, make_profile

CTX = CrawlContext(CRAWL)


def scan_urls(text):
    count, i = 0, 0
    while i < len(text):
        for prefix in ("http://", "https://"):
            j = i + len(prefix)
            if text.startswith(prefix, i) and j < len(text) and not text[j].isspace():
                count += 1
                while j < len(text) and not text[j].isspace():
                    j += 1
                i = j
                break
        else:
            i += 1
    return count


def scan_hashtags(text):
    return sum(
        1 for i in range(len(text) - 1)
        if text[i] == "#" and unicodedata.category(text[i + 1]) in ("Lu", "Ll", "Lt", "Lm", "Lo", "Nd")
    )


PIECES = ["http://", "https://", "x.co/a", "#", "#tag", "##", "# ", "#1", "#é", "#_", " ", "\t", "word",
          "http", "://", "httpss://", "ftp://z", "#火", "#½", "\n", "https://t.co/#x"]


def random_text(rnd):
    return "".join(rnd.choice(PIECES) for _ in range(rnd.randint(0, 12)))


def test_counters_against_scanners():
    rnd = random.Random(2024)
    cases = [random_text(rnd) for _ in range(200)]
    for text in cases:
        assert count_urls(text) == scan_urls(text), text
        assert count_hashtags(text) == scan_hashtags(text), text


@pytest.mark.parametrize(
    "text,urls,tags",
    [
        (None, 0, 0),
        ("", 0, 0),
        ("see https://a.b/c and http://x #news #2016", 2, 2),
        ("#", 0, 0),
        ("a#b # c", 0, 1),
    ],
)
def test_counter_examples(text, urls, tags):
    assert count_urls(text) == urls
    assert count_hashtags(text) == tags


def test_schema_sizes_and_order():
    core, words, names = (schema_for(g) for g in (Group.CUSTOM_CONTENT, Group.CONTAINS_WORDS, Group.CONTAINS_NAME))
    assert len(core) == 15 and len(words) == 16 and len(names) == 46
    assert words.feature_names[:15] == CORE_FEATURES == core.feature_names
    assert names.feature_names[:16] == words.feature_names
    assert names.feature_names[16:18] == ("is_male", "is_female")
    assert len(set(names.feature_names)) == 46
    assert sum(names.indicator_mask) == 6 + 30


def test_core_values(lexicon, words):
    p = make_profile(
        created_at=CRAWL - dt.timedelta(days=2720), last_tweet_at=CRAWL - dt.timedelta(days=7),
        description="  ", location="Here", url="https://x.org", utc_offset_hours=None,
        default_profile_image=True,
    )
    v = dict(zip(CORE_FEATURES, extract_core(p, CTX).values))
    assert v["age_in_days"] == 2720 and v["inactivity_in_days"] == 7
    assert v["has_description"] == 0 and v["has_location"] == 1 and v["has_url"] == 1
    assert v["has_default_profile_image"] == 1
    assert v["utc_offset_hours"] == 0 and v["has_utc_offset"] == 0


def test_never_tweeted_counts_from_creation():
    p = make_profile(created_at=CRAWL - dt.timedelta(days=40), last_tweet_at=None)
    assert extract_core(p, CTX).values[1] == 40


def test_name_group_features(lexicon, words):
    p = make_labeled(5, 10, 20, name_field="Maria love xqzv")
    fv = extract(p, Group.CONTAINS_NAME, CTX, lexicon, words)
    names = schema_for(Group.CONTAINS_NAME).feature_names
    v = dict(zip(names, fv.values))
    assert fv.label is True
    assert v["word_fraction"] == pytest.approx(1 / 3)
    assert (v["is_male"], v["is_female"]) == (0, 1)
    for tag in lexicon["maria"].impressions:
        assert v["impression_" + tag.replace("-", "_")] == 1
    assert sum(v[n] for n in names if n.startswith("impression_")) == len(lexicon["maria"].impressions)


def test_group_mismatch_rejected(lexicon, words):
    with pytest.raises(FeatureError):
        extract(make_profile(name_field="love music"), Group.CONTAINS_NAME, CTX, lexicon, words)


def test_feature_matrix_requires_labels(lexicon, words):
    vecs = [extract_core(make_profile(), CTX)]
    with pytest.raises(FeatureError):
        feature_matrix(vecs)
    X, y = feature_matrix([extract_core(make_labeled(i, 1, 1 + i % 2), CTX) for i in range(4)])
    assert X.shape == (4, 15) and list(y) == [0, 1, 0, 1]


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(2, 40), st.integers(1, 6)), elements=st.floats(-1e6, 1e6)))
def test_scaler_standardises(X):
    s = fit_scaler(X)
    Z = s.apply(X)
    assert np.allclose(Z[:, s.constant], X[:, s.constant])
    varying = ~s.constant
    assert np.allclose(Z[:, varying].mean(axis=0), 0, atol=1e-7)
    assert np.allclose(Z[:, varying].std(axis=0, ddof=1), 1, atol=1e-7)
    r = Scaler.from_dict(s.to_dict())
    assert np.array_equal(r.apply(X), Z)


def test_scaler_shape_check():
    s = fit_scaler(np.array([[1.0, 2.0], [3.0, 5.0]]))
    with pytest.raises(FeatureError):
        s.apply(np.zeros((1, 3)))


def test_feature_csv_round_trip(tmp_path):
    schema = schema_for(Group.CUSTOM_CONTENT)
    X = np.random.default_rng(0).normal(size=(5, 15))
    y = np.array([0, 1, 1, 0, 1])
    write_feature_csv(tmp_path / "f.csv", schema, X, y)
    names, X2, y2 = read_feature_csv(tmp_path / "f.csv")
    assert tuple(names) == schema.feature_names
    assert np.array_equal(X, X2) and np.array_equal(y, y2)
