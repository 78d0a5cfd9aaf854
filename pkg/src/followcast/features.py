"""Per-group feature schemas, feature extraction and standardisation."""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .ingest import CrawlContext, LabeledProfile, RawProfile
from .lexicon import (
    IMPRESSIONS,
    Group,
    NameLexicon,
    WordList,
    assign_group,
    name_attributes,
    normalize_name_field,
    word_fraction,
)

CORE_FEATURES: tuple[str, ...] = (
    "age_in_days",
    "inactivity_in_days",
    "tweet_count",
    "favorited_count",
    "friends_count",
    "listed_count",
    "description_url_count",
    "description_hashtag_count",
    "has_default_profile",
    "has_default_profile_image",
    "has_description",
    "has_location",
    "has_url",
    "utc_offset_hours",
    "has_utc_offset",
)
_CORE_INDICATORS = frozenset(
    {"has_default_profile", "has_default_profile_image", "has_description",
     "has_location", "has_url", "has_utc_offset"}
)
IMPRESSION_FEATURES = tuple("impression_" + t.replace("-", "_") for t in IMPRESSIONS)
NAME_FEATURES = ("is_male", "is_female") + IMPRESSION_FEATURES

_URL_RE = re.compile(r"https?://\S+")


class FeatureError(ValueError):
    """Profile and requested group/schema do not agree."""


@dataclass(frozen=True)
class FeatureSchema:
    group: Group
    feature_names: tuple[str, ...]
    indicator_mask: tuple[bool, ...]

    def __len__(self) -> int:
        return len(self.feature_names)

    def index(self, name: str) -> int:
        return self.feature_names.index(name)


def schema_for(group: Group) -> FeatureSchema:
    names = CORE_FEATURES
    if group in (Group.CONTAINS_WORDS, Group.CONTAINS_NAME):
        names = names + ("word_fraction",)
    if group is Group.CONTAINS_NAME:
        names = names + NAME_FEATURES
    mask = tuple(n in _CORE_INDICATORS or n in NAME_FEATURES for n in names)
    return FeatureSchema(group, names, mask)


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    label: bool | None
    schema: FeatureSchema


def count_urls(text: str | None) -> int:
    """Maximal ``http://`` / ``https://`` runs of non-whitespace."""
    return len(_URL_RE.findall(text)) if text else 0


def count_hashtags(text: str | None) -> int:
    """Number of ``#`` immediately followed by a letter or digit."""
    if not text:
        return 0
    return sum(
        1 for ch, nxt in zip(text, text[1:])
        if ch == "#" and (nxt.isalpha() or nxt.isdecimal())
    )


def _present(value: str | None) -> bool:
    return value is not None and value.strip() != ""


def core_values(profile: RawProfile, ctx: CrawlContext) -> list[float]:
    age = (ctx.crawl_date - profile.created_at).days
    # Never tweeted: inactive since account creation.
    last = profile.last_tweet_at or profile.created_at
    return [
        float(age),
        float((ctx.crawl_date - last).days),
        float(profile.tweet_count),
        float(profile.favorited_count),
        float(profile.friends_count),
        float(profile.listed_count),
        float(count_urls(profile.description)),
        float(count_hashtags(profile.description)),
        float(profile.default_profile),
        float(profile.default_profile_image),
        float(_present(profile.description)),
        float(_present(profile.location)),
        float(_present(profile.url)),
        float(profile.utc_offset_hours or 0),
        float(profile.utc_offset_hours is not None),
    ]


def extract(
    profile: LabeledProfile | RawProfile,
    group: Group,
    ctx: CrawlContext,
    lexicon: NameLexicon,
    words: WordList,
) -> FeatureVector:
    """Feature vector of ``profile`` under ``group``'s schema.

    Raises FeatureError if ``group`` is not the group the profile's name field
    is assigned to.
    """
    if isinstance(profile, LabeledProfile):
        raw, label = profile.profile, profile.increased
    else:
        raw, label = profile, None
    tokens = normalize_name_field(raw.name_field)
    actual = assign_group(tokens, lexicon, words)
    if actual is not group:
        raise FeatureError(
            f"user {raw.user_id}: name field belongs to {actual.value}, not {group.value}"
        )
    values = core_values(raw, ctx)
    if group is not Group.CUSTOM_CONTENT:
        values.append(word_fraction(tokens, words))
    if group is Group.CONTAINS_NAME:
        attrs = name_attributes(tokens, lexicon)
        values.append(float(attrs.is_male))
        values.append(float(attrs.is_female))
        values.extend(float(f) for f in attrs.impressions)
    return FeatureVector(np.array(values, dtype=float), label, schema_for(group))


def extract_core(profile: LabeledProfile | RawProfile, ctx: CrawlContext) -> FeatureVector:
    """Core-only vector for any profile regardless of group (global-model schema)."""
    if isinstance(profile, LabeledProfile):
        raw, label = profile.profile, profile.increased
    else:
        raw, label = profile, None
    return FeatureVector(
        np.array(core_values(raw, ctx), dtype=float), label, schema_for(Group.CUSTOM_CONTENT)
    )


def feature_matrix(vectors: Sequence[FeatureVector]) -> tuple[np.ndarray, np.ndarray]:
    """Stack vectors into (X, y); y is 0/1 and requires labeled vectors."""
    if not vectors:
        raise ValueError("no feature vectors")
    schema = vectors[0].schema
    if any(v.schema != schema for v in vectors):
        raise FeatureError("feature vectors use different schemas")
    X = np.vstack([v.values for v in vectors])
    if any(v.label is None for v in vectors):
        raise FeatureError("unlabeled vector in training matrix")
    y = np.array([v.label for v in vectors], dtype=float)
    return X, y


@dataclass(frozen=True)
class Scaler:
    mean: np.ndarray
    sd: np.ndarray
    constant: np.ndarray  # bool mask; constant columns pass through unscaled

    def apply(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != self.mean.size:
            raise FeatureError(f"expected {self.mean.size} features, got {X.shape[-1]}")
        out = X.copy()
        scale = ~self.constant
        out[..., scale] = (X[..., scale] - self.mean[scale]) / self.sd[scale]
        return out

    def apply_vector(self, vector: FeatureVector) -> FeatureVector:
        return FeatureVector(self.apply(vector.values), vector.label, vector.schema)

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "sd": self.sd.tolist(), "constant": self.constant.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Scaler":
        return cls(np.array(d["mean"], dtype=float), np.array(d["sd"], dtype=float),
                   np.array(d["constant"], dtype=bool))


def fit_scaler(X: np.ndarray | Sequence[FeatureVector]) -> Scaler:
    """Column means and sample (n-1) standard deviations."""
    if not isinstance(X, np.ndarray):
        if not X:
            raise ValueError("cannot fit a scaler on no data")
        X = np.vstack([v.values for v in X])
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("cannot fit a scaler on no data")
    mean = X.mean(axis=0)
    if X.shape[0] > 1:
        sd = X.std(axis=0, ddof=1)
    else:
        sd = np.zeros(X.shape[1])
    # rounding can leave a tiny sd on an exactly constant column
    constant = (np.ptp(X, axis=0) == 0) | ~(sd > 0)
    return Scaler(mean, np.where(constant, 1.0, sd), constant)


def write_feature_csv(path: str | Path, schema: FeatureSchema, X: np.ndarray, y: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(schema.feature_names) + ["label"])
        for row, label in zip(X, y):
            w.writerow([repr(float(v)) for v in row] + [int(label)])


def read_feature_csv(path: str | Path) -> tuple[list[str], np.ndarray, np.ndarray]:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    if not header or header[-1] != "label":
        raise FeatureError(f"{path}: last column must be 'label'")
    data = np.array([[float(v) for v in r] for r in body], dtype=float).reshape(len(body), len(header))
    return header[:-1], data[:, :-1], data[:, -1]
