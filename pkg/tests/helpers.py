"""Shared builders for test fixtures."""

import datetime as dt
from dataclasses import replace

from followcast.ingest import LabeledProfile, RawProfile

CRAWL = dt.date(2016, 10, 10)

_BASE = RawProfile(
    user_id=1,
    name_field="Zxq Vrpl",
    screen_name="zxq",
    description="likes coffee",
    location="Berlin",
    url=None,
    followers_count=100,
    friends_count=50,
    tweet_count=1000,
    favorited_count=10,
    listed_count=2,
    utc_offset_hours=1,
    default_profile=False,
    default_profile_image=False,
    created_at=dt.date(2010, 1, 1),
    last_tweet_at=dt.date(2016, 10, 1),
    protected=False,
    verified=False,
)


def make_profile(**overrides) -> RawProfile:
    return replace(_BASE, **overrides)


def make_labeled(user_id: int, first: int, second: int, **overrides) -> LabeledProfile:
    return LabeledProfile.from_pair(make_profile(user_id=user_id, followers_count=first, **overrides), second)
