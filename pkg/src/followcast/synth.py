"""Synthetic two-crawl datasets with planted logistic ground truth.

Every profile gets its own generator derived from ``(seed, index)`` so the
output does not depend on how generation is chunked.
"""

from __future__ import annotations

import csv
import datetime as dt
import math
import string
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping

import numpy as np

from .features import extract, schema_for
from .ingest import CrawlContext, RawProfile, write_snapshot
from .lexicon import Group, NameLexicon, WordList, assign_group
from .logreg import sigmoid

# Group shares of the reference population: 1495530, 471312, 4387210 of 6354052.
POPULATION_PROPORTIONS = {
    Group.CUSTOM_CONTENT: 1495530 / 6354052,
    Group.CONTAINS_WORDS: 471312 / 6354052,
    Group.CONTAINS_NAME: 4387210 / 6354052,
}

# Planted effects on the raw (unscaled) features, per group.
_SHARED = {
    "inactivity_in_days": -0.009,
    "listed_count": 0.002,
    "has_default_profile": 0.102,
    "has_default_profile_image": -0.872,
    "has_description": 0.214,
    "has_location": 0.099,
    "has_url": 0.221,
    "description_url_count": 0.036,
    "description_hashtag_count": 0.013,
}
DEFAULT_COEFFICIENTS: dict[Group, dict[str, float]] = {
    Group.CUSTOM_CONTENT: dict(_SHARED),
    Group.CONTAINS_WORDS: {
        **_SHARED,
        "inactivity_in_days": -0.010,
        "listed_count": 0.003,
        "description_url_count": -0.032,
        "description_hashtag_count": -0.010,
        "has_default_profile": 0.098,
        "has_default_profile_image": -0.889,
        "has_description": 0.223,
        "has_location": 0.088,
        "has_url": 0.445,
        "word_fraction": -0.187,
    },
    Group.CONTAINS_NAME: {
        **_SHARED,
        "listed_count": 0.001,
        "description_url_count": 0.055,
        "description_hashtag_count": 0.029,
        "has_default_profile": 0.120,
        "has_default_profile_image": -0.898,
        "has_description": 0.248,
        "has_location": 0.055,
        "has_url": 0.161,
        "is_male": -0.011,
        "is_female": -0.058,
        "impression_bad": -0.027,
        "impression_feminine": -0.058,
        "impression_good": -0.026,
        "impression_masculine": -0.033,
        "impression_modern": -0.032,
        "word_fraction": -0.068,
    },
}
DEFAULT_INTERCEPTS = {g: 0.15 for g in Group}

# (log-median, log-sd) of the heavy-tailed counts
DEFAULT_COUNT_MARGINALS = {
    "followers_count": (math.log(112), 1.8),
    "friends_count": (math.log(194), 1.4),
    "tweet_count": (math.log(599), 2.0),
    "favorited_count": (math.log(36), 2.2),
    "listed_count": (math.log(2), 1.4),
}

# Effects that make ContainsWords profiles respond unlike the pooled population,
# so a group-specific model has something a pooled one cannot learn.
CONTRAST_WORDS_COEFFICIENTS = {
    **DEFAULT_COEFFICIENTS[Group.CONTAINS_WORDS],
    "has_default_profile_image": 0.872,
    "has_description": -0.223,
    "has_url": 0.445,
    "inactivity_in_days": -0.004,
}

SCENARIOS = ("default", "contrast", "identical")


class ConfigError(ValueError):
    pass


def scenario_coefficients(name: str) -> dict[Group, dict[str, float]]:
    """Planted coefficients for a named scenario.

    ``default`` uses the per-group effects, ``contrast`` swaps in
    :data:`CONTRAST_WORDS_COEFFICIENTS` for ContainsWords, and ``identical``
    gives every group the CustomContent effects.
    """
    if name == "default":
        return {g: dict(c) for g, c in DEFAULT_COEFFICIENTS.items()}
    if name == "contrast":
        coefs = scenario_coefficients("default")
        coefs[Group.CONTAINS_WORDS] = dict(CONTRAST_WORDS_COEFFICIENTS)
        return coefs
    if name == "identical":
        return {g: dict(DEFAULT_COEFFICIENTS[Group.CUSTOM_CONTENT]) for g in Group}
    raise ConfigError(f"unknown scenario {name!r}; expected one of {', '.join(SCENARIOS)}")


@dataclass
class GeneratorConfig:
    n_profiles: int = 10_000
    proportions: Mapping[Group, float] = field(default_factory=lambda: dict(POPULATION_PROPORTIONS))
    coefficients: Mapping[Group, Mapping[str, float]] = field(
        default_factory=lambda: {g: dict(c) for g, c in DEFAULT_COEFFICIENTS.items()}
    )
    intercepts: Mapping[Group, float] = field(default_factory=lambda: dict(DEFAULT_INTERCEPTS))
    count_marginals: Mapping[str, tuple[float, float]] = field(
        default_factory=lambda: dict(DEFAULT_COUNT_MARGINALS)
    )
    seed: int = 0
    first_crawl: dt.date = dt.date(2016, 10, 10)
    second_crawl: dt.date = dt.date(2016, 11, 10)
    user_id_offset: int = 1_000_000

    def validate(self) -> None:
        if self.n_profiles < 0:
            raise ConfigError("n_profiles must be >= 0")
        if set(self.proportions) != set(Group):
            raise ConfigError("proportions must name all three groups")
        props = list(self.proportions.values())
        if any(not 0.0 <= v <= 1.0 for v in props) or not math.isclose(sum(props), 1.0, abs_tol=1e-9):
            raise ConfigError("group proportions must lie in [0, 1] and sum to 1")
        for g, coefs in self.coefficients.items():
            names = set(schema_for(g).feature_names)
            unknown = set(coefs) - names
            if unknown:
                raise ConfigError(f"{g.value}: coefficients for features outside its schema: {sorted(unknown)}")
        missing = set(DEFAULT_COUNT_MARGINALS) - set(self.count_marginals)
        if missing:
            raise ConfigError(f"missing count marginals: {sorted(missing)}")
        if self.second_crawl <= self.first_crawl:
            raise ConfigError("second crawl must come after the first")

    def coefficient_vector(self, group: Group) -> np.ndarray:
        schema = schema_for(group)
        coefs = self.coefficients.get(group, {})
        return np.array([coefs.get(name, 0.0) for name in schema.feature_names])


@dataclass(frozen=True)
class TruthRow:
    user_id: int
    group: Group
    linear_predictor: float
    p_true: float
    increased: bool


@dataclass
class SynthData:
    first: list[RawProfile]
    second: list[RawProfile]
    truth: list[TruthRow]
    config: GeneratorConfig

    @property
    def ctx(self) -> CrawlContext:
        return CrawlContext(self.config.first_crawl)


def _gibberish(rng: np.random.Generator, lexicon: NameLexicon, words: WordList) -> str:
    letters = np.array(list("bcdfghjklmnpqrstvwxzaeiouy"))
    for _ in range(100):
        n = int(rng.integers(4, 9))
        tok = "".join(rng.choice(letters, n))
        if tok not in lexicon and tok not in words:
            return tok
    raise RuntimeError("could not draw a token outside lexicon and wordlist")


def _styled(tok: str, rng: np.random.Generator) -> str:
    r = rng.random()
    if r < 0.6:
        return tok.capitalize()
    if r < 0.8:
        return tok
    return tok.upper()


def _name_field(group: Group, rng, names: list[str], word_list: list[str], lexicon, words) -> str:
    if group is Group.CONTAINS_NAME:
        toks = [names[rng.integers(len(names))] for _ in range(1 + (rng.random() < 0.15))]
        if rng.random() < 0.6:
            toks.append(_gibberish(rng, lexicon, words))
        if rng.random() < 0.25:
            toks.append(word_list[rng.integers(len(word_list))])
    elif group is Group.CONTAINS_WORDS:
        toks = [word_list[rng.integers(len(word_list))] for _ in range(int(rng.integers(1, 4)))]
        toks += [_gibberish(rng, lexicon, words) for _ in range(int(rng.integers(0, 3)))]
    else:
        r = rng.random()
        if r < 0.1:
            return "".join(rng.choice(list("★✿火星人🙂_.")) for _ in range(int(rng.integers(1, 5))))
        toks = [_gibberish(rng, lexicon, words) for _ in range(int(rng.integers(1, 3)))]
        if r < 0.3:
            toks.append(str(int(rng.integers(0, 10_000))))
    order = rng.permutation(len(toks))
    sep = " " if rng.random() < 0.8 else "_"
    return sep.join(_styled(toks[i], rng) for i in order)


def _description(rng, word_list: list[str]) -> str | None:
    if rng.random() >= 0.65:
        return None
    parts = [word_list[rng.integers(len(word_list))] for _ in range(int(rng.integers(2, 9)))]
    parts += [f"#{word_list[rng.integers(len(word_list))]}" for _ in range(int(rng.poisson(0.2)))]
    parts += [f"https://t.co/{_token(rng, 8)}" for _ in range(int(rng.poisson(0.06)))]
    return " ".join(parts[i] for i in rng.permutation(len(parts)))


def _token(rng, n: int) -> str:
    alphabet = np.array(list(string.ascii_letters + string.digits))
    return "".join(rng.choice(alphabet, n))


def _lognormal_count(rng, mu: float, sigma: float) -> int:
    return int(min(math.floor(rng.lognormal(mu, sigma)), 10**8))


def generate(config: GeneratorConfig, lexicon: NameLexicon, words: WordList) -> SynthData:
    """Draw profiles, plant increase flags, and build both crawls plus truth rows."""
    config.validate()
    groups = list(Group)
    probs = np.array([config.proportions[g] for g in groups])
    names = sorted(lexicon)
    word_list = sorted(words)
    betas = {g: config.coefficient_vector(g) for g in groups}
    ctx = CrawlContext(config.first_crawl)
    first, second, truth = [], [], []
    for i in range(config.n_profiles):
        rng = np.random.default_rng(np.random.SeedSequence([config.seed, i]))
        group = groups[int(rng.choice(len(groups), p=probs))]
        name_field = _name_field(group, rng, names, word_list, lexicon, words)
        if assign_group(name_field, lexicon, words) is not group:
            raise AssertionError(f"generated name field {name_field!r} misses group {group.value}")
        counts = {k: _lognormal_count(rng, *config.count_marginals[k]) for k in DEFAULT_COUNT_MARGINALS}
        age = int(np.clip(round(rng.normal(2720, 77)), 334, 3817))
        inactivity = int(min(math.floor(rng.exponential(68.0)), 365, age))
        utc = int(rng.integers(-11, 14)) if rng.random() < 0.7 else None
        uid = config.user_id_offset + i
        profile = RawProfile(
            user_id=uid,
            name_field=name_field,
            screen_name=f"user{uid}",
            description=_description(rng, word_list),
            location="Somewhere" if rng.random() < 0.72 else None,
            url=f"https://example.org/{uid}" if rng.random() < 0.35 else None,
            followers_count=counts["followers_count"],
            friends_count=counts["friends_count"],
            tweet_count=counts["tweet_count"],
            favorited_count=counts["favorited_count"],
            listed_count=counts["listed_count"],
            utc_offset_hours=utc,
            default_profile=bool(rng.random() < 0.30),
            default_profile_image=bool(rng.random() < 0.07),
            created_at=config.first_crawl - dt.timedelta(days=age),
            last_tweet_at=config.first_crawl - dt.timedelta(days=inactivity),
            protected=False,
            verified=False,
        )
        x = extract(profile, group, ctx, lexicon, words).values
        eta = float(config.intercepts.get(group, 0.0) + x @ betas[group])
        p = float(sigmoid(np.array([eta]))[0])
        flag = bool(rng.random() < p)
        before = profile.followers_count
        if flag:
            after = before + 1 + int(rng.poisson(max(1.0, 0.02 * before)))
        else:
            after = before - min(before, int(rng.poisson(0.02 * before))) if rng.random() < 0.5 else before
        first.append(profile)
        second.append(_replace_followers(profile, after))
        truth.append(TruthRow(uid, group, eta, p, flag))
    return SynthData(first, second, truth, config)


def _replace_followers(p: RawProfile, followers: int) -> RawProfile:
    return replace(p, followers_count=followers)


def write_synth(data: SynthData, out_dir: str | Path) -> dict[str, Path]:
    """Write ``snapshot_1.jsonl``, ``snapshot_2.jsonl`` and ``truth.csv``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "snapshot_1": out / "snapshot_1.jsonl",
        "snapshot_2": out / "snapshot_2.jsonl",
        "truth": out / "truth.csv",
    }
    with open(paths["snapshot_1"], "w", encoding="utf-8") as fh:
        write_snapshot(fh, data.first, data.config.first_crawl)
    with open(paths["snapshot_2"], "w", encoding="utf-8") as fh:
        write_snapshot(fh, data.second, data.config.second_crawl)
    with open(paths["truth"], "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["user_id", "group", "linear_predictor", "p_true"])
        for t in data.truth:
            w.writerow([t.user_id, t.group.value, repr(t.linear_predictor), repr(t.p_true)])
    return paths


def read_truth(path: str | Path) -> dict[int, tuple[Group, float, float]]:
    with open(path, encoding="utf-8", newline="") as fh:
        return {
            int(r["user_id"]): (Group(r["group"]), float(r["linear_predictor"]), float(r["p_true"]))
            for r in csv.DictReader(fh)
        }


def bayes_auc(p_true: np.ndarray, draws: int = 200, seed: int = 0) -> float:
    """Monte-Carlo AUC of the true probabilities against labels redrawn from them."""
    from .models.metrics import auc

    p = np.asarray(p_true, dtype=float)
    rng = np.random.default_rng(seed)
    vals = []
    for _ in range(draws):
        labels = rng.random(p.size) < p
        if labels.all() or not labels.any():
            continue
        vals.append(auc(p, labels))
    return float(np.mean(vals))
