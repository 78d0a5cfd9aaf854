"""Snapshot files: parsing, filtering, two-crawl labeling and stratified splits.

A snapshot file is UTF-8 JSON lines. The optional first line is a header
object carrying the reserved key ``__snapshot__``::

    {"__snapshot__": {"crawl_date": "2016-05-10"}}

Every other line is one flat profile object with exactly the fields of
:class:`RawProfile`; dates are ISO ``YYYY-MM-DD``, absent optional fields are
``null``.
"""

from __future__ import annotations

import dataclasses
import datetime as dt
import io
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable, Sequence

import numpy as np

from .stats import Description, describe

log = logging.getLogger(__name__)

HEADER_KEY = "__snapshot__"
MAX_INACTIVITY_DAYS = 365


class SnapshotError(ValueError):
    """Invalid snapshot content that cannot be skipped (e.g. duplicate ids)."""


@dataclass(frozen=True)
class RawProfile:
    user_id: int
    name_field: str
    screen_name: str
    description: str | None
    location: str | None
    url: str | None
    followers_count: int
    friends_count: int
    tweet_count: int
    favorited_count: int
    listed_count: int
    utc_offset_hours: int | None
    default_profile: bool
    default_profile_image: bool
    created_at: dt.date
    last_tweet_at: dt.date | None
    protected: bool
    verified: bool

    def to_json(self) -> dict:
        out = dataclasses.asdict(self)
        out["created_at"] = self.created_at.isoformat()
        out["last_tweet_at"] = self.last_tweet_at.isoformat() if self.last_tweet_at else None
        return out


PROFILE_FIELDS = tuple(f.name for f in dataclasses.fields(RawProfile))
_COUNT_FIELDS = ("followers_count", "friends_count", "tweet_count", "favorited_count", "listed_count")
_BOOL_FIELDS = ("default_profile", "default_profile_image", "protected", "verified")
_OPT_STR_FIELDS = ("description", "location", "url")


@dataclass(frozen=True)
class CrawlContext:
    crawl_date: dt.date


@dataclass(frozen=True)
class LabeledProfile:
    profile: RawProfile
    followers_second: int
    increased: bool
    absolute_change: int
    relative_change: float

    @classmethod
    def from_pair(cls, first: RawProfile, followers_second: int) -> "LabeledProfile":
        before = first.followers_count
        return cls(
            profile=first,
            followers_second=followers_second,
            increased=followers_second > before,
            absolute_change=followers_second - before,
            relative_change=followers_second / before if before > 0 else 0.0,
        )

    def to_json(self) -> dict:
        out = self.profile.to_json()
        out["followers_second"] = self.followers_second
        return out


@dataclass
class Snapshot:
    profiles: list[RawProfile]
    crawl_date: dt.date | None = None
    malformed: int = 0
    malformed_lines: list[int] = dataclasses.field(default_factory=list)


@dataclass
class JoinResult:
    labeled: list[LabeledProfile]
    attrition: int
    new_in_second: int


def _parse_date(value, field: str) -> dt.date:
    if not isinstance(value, str):
        raise ValueError(f"{field}: expected ISO date string")
    return dt.date.fromisoformat(value)


def profile_from_json(obj: dict, crawl_date: dt.date | None = None) -> RawProfile:
    """Build a validated RawProfile from one decoded record; raises ValueError."""
    if not isinstance(obj, dict):
        raise ValueError("record is not an object")
    keys = set(obj)
    missing = set(PROFILE_FIELDS) - keys
    if missing:
        raise ValueError(f"missing fields: {sorted(missing)}")
    extra = keys - set(PROFILE_FIELDS)
    if extra:
        raise ValueError(f"unknown fields: {sorted(extra)}")

    uid = obj["user_id"]
    if not isinstance(uid, int) or isinstance(uid, bool) or uid < 0:
        raise ValueError("user_id must be a non-negative integer")
    for f in ("name_field", "screen_name"):
        if not isinstance(obj[f], str):
            raise ValueError(f"{f} must be a string")
    for f in _OPT_STR_FIELDS:
        if obj[f] is not None and not isinstance(obj[f], str):
            raise ValueError(f"{f} must be a string or null")
    for f in _COUNT_FIELDS:
        v = obj[f]
        if not isinstance(v, int) or isinstance(v, bool) or v < 0:
            raise ValueError(f"{f} must be a non-negative integer")
    for f in _BOOL_FIELDS:
        if not isinstance(obj[f], bool):
            raise ValueError(f"{f} must be a boolean")
    utc = obj["utc_offset_hours"]
    if utc is not None:
        if not isinstance(utc, int) or isinstance(utc, bool) or not -12 <= utc <= 14:
            raise ValueError("utc_offset_hours must be an integer in [-12, 14] or null")
    created = _parse_date(obj["created_at"], "created_at")
    last = obj["last_tweet_at"]
    last = _parse_date(last, "last_tweet_at") if last is not None else None
    if crawl_date is not None and created > crawl_date:
        raise ValueError("created_at lies after the crawl date")

    return RawProfile(
        user_id=uid,
        name_field=obj["name_field"],
        screen_name=obj["screen_name"],
        description=obj["description"],
        location=obj["location"],
        url=obj["url"],
        followers_count=obj["followers_count"],
        friends_count=obj["friends_count"],
        tweet_count=obj["tweet_count"],
        favorited_count=obj["favorited_count"],
        listed_count=obj["listed_count"],
        utc_offset_hours=utc,
        default_profile=obj["default_profile"],
        default_profile_image=obj["default_profile_image"],
        created_at=created,
        last_tweet_at=last,
        protected=obj["protected"],
        verified=obj["verified"],
    )


def parse_snapshot(stream: Iterable[str], crawl_date: dt.date | None = None) -> Snapshot:
    """Parse a snapshot stream, skipping and counting malformed lines.

    ``crawl_date`` overrides the header's date when given.
    """
    snap = Snapshot(profiles=[], crawl_date=crawl_date)
    for lineno, line in enumerate(stream, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError:
            snap.malformed += 1
            snap.malformed_lines.append(lineno)
            continue
        if lineno == 1 and isinstance(obj, dict) and HEADER_KEY in obj:
            try:
                header_date = _parse_date(obj[HEADER_KEY].get("crawl_date"), "crawl_date")
            except (AttributeError, ValueError) as exc:
                raise SnapshotError(f"line 1: invalid snapshot header: {exc}") from None
            if snap.crawl_date is None:
                snap.crawl_date = header_date
            continue
        try:
            snap.profiles.append(profile_from_json(obj, snap.crawl_date))
        except (ValueError, TypeError) as exc:
            log.debug("line %d skipped: %s", lineno, exc)
            snap.malformed += 1
            snap.malformed_lines.append(lineno)
    return snap


def read_snapshot(path: str | Path, crawl_date: dt.date | None = None) -> Snapshot:
    with open(path, encoding="utf-8") as fh:
        return parse_snapshot(fh, crawl_date)


def write_snapshot(
    stream: IO[str],
    profiles: Iterable[RawProfile | LabeledProfile],
    crawl_date: dt.date | None = None,
) -> None:
    if crawl_date is not None:
        stream.write(json.dumps({HEADER_KEY: {"crawl_date": crawl_date.isoformat()}}) + "\n")
    for p in profiles:
        stream.write(json.dumps(p.to_json(), ensure_ascii=False, sort_keys=False) + "\n")


def dump_snapshot(profiles: Iterable[RawProfile], crawl_date: dt.date | None = None) -> str:
    buf = io.StringIO()
    write_snapshot(buf, profiles, crawl_date)
    return buf.getvalue()


def inactivity_days(profile: RawProfile, ctx: CrawlContext) -> float:
    if profile.last_tweet_at is None:
        return math.inf
    return float((ctx.crawl_date - profile.last_tweet_at).days)


def filter_profiles(profiles: Iterable[RawProfile], ctx: CrawlContext) -> list[RawProfile]:
    """Drop protected, verified, and inactive (> 365 days, or never tweeted) accounts."""
    return [
        p for p in profiles
        if not p.protected
        and not p.verified
        and inactivity_days(p, ctx) <= MAX_INACTIVITY_DAYS
    ]


def _index(profiles: Sequence[RawProfile], which: str) -> dict[int, RawProfile]:
    idx: dict[int, RawProfile] = {}
    for p in profiles:
        if p.user_id in idx:
            raise SnapshotError(f"duplicate user_id {p.user_id} in {which} snapshot")
        idx[p.user_id] = p
    return idx


def join_snapshots(first: Sequence[RawProfile], second: Sequence[RawProfile]) -> JoinResult:
    """Label every user present in both crawls; order follows the first snapshot."""
    first_idx = _index(first, "first")
    second_idx = _index(second, "second")
    labeled = [
        LabeledProfile.from_pair(p, second_idx[uid].followers_count)
        for uid, p in first_idx.items()
        if uid in second_idx
    ]
    attrition = len(first_idx) - len(labeled)
    return JoinResult(labeled, attrition, len(second_idx) - len(labeled))


def labeled_from_json(obj: dict, crawl_date: dt.date | None = None) -> LabeledProfile:
    obj = dict(obj)
    if "followers_second" not in obj:
        raise ValueError("missing field followers_second")
    second = obj.pop("followers_second")
    if not isinstance(second, int) or isinstance(second, bool) or second < 0:
        raise ValueError("followers_second must be a non-negative integer")
    return LabeledProfile.from_pair(profile_from_json(obj, crawl_date), second)


def read_labeled(path: str | Path) -> tuple[list[LabeledProfile], dt.date | None]:
    """Read a labeled file (snapshot format plus ``followers_second``); strict."""
    out = []
    crawl_date = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            obj = json.loads(line)
            if lineno == 1 and HEADER_KEY in obj:
                crawl_date = _parse_date(obj[HEADER_KEY]["crawl_date"], "crawl_date")
                continue
            try:
                out.append(labeled_from_json(obj, crawl_date))
            except ValueError as exc:
                raise SnapshotError(f"{path}:{lineno}: {exc}") from None
    return out, crawl_date


def stratified_split(
    labeled: Sequence[LabeledProfile], ratio: float, seed: int
) -> tuple[list[LabeledProfile], list[LabeledProfile]]:
    """Split into (train, eval) preserving the increased-flag ratio.

    Each class contributes round(ratio * n_class) records to train; input
    order is preserved inside both parts.
    """
    if not 0.0 < ratio < 1.0:
        raise ValueError("ratio must lie in (0, 1)")
    flags = np.array([r.increased for r in labeled], dtype=bool)
    pos = np.flatnonzero(flags)
    neg = np.flatnonzero(~flags)
    if pos.size < 2 or neg.size < 2:
        raise ValueError("stratified split needs at least 2 records of each label")
    rng = np.random.default_rng(seed)
    chosen = []
    for members in (pos, neg):
        take = int(math.floor(ratio * members.size + 0.5))
        chosen.append(rng.permutation(members)[:take])
    in_train = np.zeros(len(labeled), dtype=bool)
    in_train[np.concatenate(chosen)] = True
    train = [r for r, t in zip(labeled, in_train) if t]
    evaluation = [r for r, t in zip(labeled, in_train) if not t]
    return train, evaluation


@dataclass(frozen=True)
class ChangeSummary:
    first: Description
    second: Description
    absolute_change: Description
    relative_change: Description
    n: int
    increased: int

    @property
    def increased_percent(self) -> float:
        return 100.0 * self.increased / self.n


def describe_changes(labeled: Sequence[LabeledProfile]) -> ChangeSummary:
    if not labeled:
        raise ValueError("cannot describe an empty labeled set")
    return ChangeSummary(
        first=describe([r.profile.followers_count for r in labeled]),
        second=describe([r.followers_second for r in labeled]),
        absolute_change=describe([r.absolute_change for r in labeled]),
        relative_change=describe([r.relative_change for r in labeled]),
        n=len(labeled),
        increased=sum(r.increased for r in labeled),
    )
