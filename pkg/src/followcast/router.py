"""Group-routed classifier: one selected and refitted model per name-field group."""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from .features import FeatureSchema, Scaler, extract, extract_core, feature_matrix, fit_scaler, schema_for
from .ingest import CrawlContext, LabeledProfile, RawProfile
from .lexicon import Group, NameLexicon, WordList, assign_group, normalize_name_field
from .models.bayes import NbModel
from .models.cv import FAMILIES, MODEL_TYPES, SearchResult, grid_search
from .models.forest import RfModel
from .models.gbm import GbmModel
from .models.knn import KnnModel
from .models.metrics import auc

log = logging.getLogger(__name__)

MAGIC = "FOLLOWCAST-ROUTER"
FORMAT_VERSION = 1
THRESHOLD = 0.5


class RouterError(ValueError):
    pass


class ModelFileError(RouterError):
    """Model file is corrupt, truncated, or of an unsupported version."""


@dataclass(frozen=True)
class CvConfig:
    k: int = 10
    repeats: int = 5
    threads: int = 1


@dataclass
class RouterEntry:
    group: Group
    schema: FeatureSchema
    scaler: Scaler
    family: str
    model: Any
    parameters: dict
    cv_mean_auc: float
    cv_sd_auc: float
    n_train: int
    row_fingerprint: str
    train_user_ids: tuple[int, ...] = field(default=(), repr=False)  # in memory only

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return self.model.predict_proba(self.scaler.apply(X))


@dataclass
class RouterModel:
    entries: dict[Group, RouterEntry]
    seed: int
    lexicon_fingerprint: str
    wordlist_fingerprint: str
    data_fingerprint: str
    grids: dict

    def __post_init__(self):
        if set(self.entries) != set(Group):
            raise RouterError("router needs exactly one entry per group")
        for g, e in self.entries.items():
            if e.schema != schema_for(g):
                raise RouterError(f"{g.value}: entry schema does not match the group schema")

    def check_resources(self, lexicon: NameLexicon, words: WordList) -> None:
        if lexicon.fingerprint() != self.lexicon_fingerprint:
            raise RouterError("name lexicon differs from the one the router was trained with")
        if words.fingerprint() != self.wordlist_fingerprint:
            raise RouterError("wordlist differs from the one the router was trained with")


@dataclass(frozen=True)
class Classification:
    user_id: int
    group: Group
    probability: float
    label: bool


def fingerprint_rows(records: Sequence[LabeledProfile]) -> str:
    h = hashlib.sha256()
    for uid, flag in sorted((r.profile.user_id, r.increased) for r in records):
        h.update(f"{uid}:{int(flag)}\n".encode())
    return h.hexdigest()


def partition_by_group(
    records: Sequence[LabeledProfile | RawProfile], lexicon: NameLexicon, words: WordList
) -> dict[Group, list]:
    parts: dict[Group, list] = {g: [] for g in Group}
    for r in records:
        raw = r.profile if isinstance(r, LabeledProfile) else r
        parts[assign_group(normalize_name_field(raw.name_field), lexicon, words)].append(r)
    return parts


def _group_matrix(records, group, ctx, lexicon, words):
    return feature_matrix([extract(r, group, ctx, lexicon, words) for r in records])


def _fit_selected(search: SearchResult, X, y, seed_seq):
    best = search.best_overall()
    model = FAMILIES[best.family].learner(best.parameters)(X, y, seed_seq)
    return best, model


def train_router(
    train: Sequence[LabeledProfile],
    lexicon: NameLexicon,
    words: WordList,
    ctx: CrawlContext,
    grids: Mapping[str, Mapping[str, Sequence[Any]]],
    cv: CvConfig = CvConfig(),
    seed: int = 0,
) -> tuple[RouterModel, dict[Group, SearchResult]]:
    """Grid-search and refit one model per group on that group's rows only."""
    parts = partition_by_group(train, lexicon, words)
    entries: dict[Group, RouterEntry] = {}
    searches: dict[Group, SearchResult] = {}
    for gi, group in enumerate(Group):
        rows = parts[group]
        if not rows:
            raise RouterError(f"group {group.value} has no training rows")
        flags = {r.increased for r in rows}
        if len(flags) < 2:
            raise RouterError(f"group {group.value} has a single label in the training data")
        X, y = _group_matrix(rows, group, ctx, lexicon, words)
        scaler = fit_scaler(X)
        Xs = scaler.apply(X)
        log.info("group %s: %d training rows", group.value, len(rows))
        search = grid_search(grids, Xs, y, k=cv.k, repeats=cv.repeats, seed=seed, threads=cv.threads)
        best, model = _fit_selected(search, Xs, y, np.random.SeedSequence([seed, gi, 2]))
        entries[group] = RouterEntry(
            group=group,
            schema=schema_for(group),
            scaler=scaler,
            family=best.family,
            model=model,
            parameters=dict(best.parameters),
            cv_mean_auc=best.mean_auc,
            cv_sd_auc=best.sd_auc,
            n_train=len(rows),
            row_fingerprint=fingerprint_rows(rows),
            train_user_ids=tuple(r.profile.user_id for r in rows),
        )
        searches[group] = search
    router = RouterModel(
        entries=entries,
        seed=seed,
        lexicon_fingerprint=lexicon.fingerprint(),
        wordlist_fingerprint=words.fingerprint(),
        data_fingerprint=fingerprint_rows(train),
        grids={f: {k: list(v) for k, v in g.items()} for f, g in grids.items()},
    )
    return router, searches


def classify(
    router: RouterModel,
    profile: RawProfile | LabeledProfile,
    ctx: CrawlContext,
    lexicon: NameLexicon,
    words: WordList,
    threshold: float = THRESHOLD,
) -> Classification:
    return classify_many(router, [profile], ctx, lexicon, words, threshold)[0]


def classify_many(
    router: RouterModel,
    profiles: Sequence[RawProfile | LabeledProfile],
    ctx: CrawlContext,
    lexicon: NameLexicon,
    words: WordList,
    threshold: float = THRESHOLD,
) -> list[Classification]:
    """Score every profile with the model of the group its name field falls in."""
    router.check_resources(lexicon, words)
    parts = partition_by_group(profiles, lexicon, words)
    probs: dict[int, tuple[Group, float]] = {}
    for group, members in parts.items():
        if not members:
            continue
        X = np.vstack([extract(r, group, ctx, lexicon, words).values for r in members])
        scores = router.entries[group].predict_proba(X)
        log.debug("routed %d profiles to %s", len(members), group.value)
        for r, s in zip(members, scores):
            probs[id(r)] = (group, float(s))
    out = []
    for r in profiles:
        raw = r.profile if isinstance(r, LabeledProfile) else r
        group, p = probs[id(r)]
        out.append(Classification(raw.user_id, group, p, p >= threshold))
    return out


@dataclass
class EvalReport:
    group_auc: dict[Group, float | None]  # None: group absent or single-label
    group_n: dict[Group, int]
    overall_auc: float
    cv_auc: dict[Group, float] = field(default_factory=dict)
    models: dict[Group, str] = field(default_factory=dict)


def _safe_auc(scores, labels) -> float | None:
    labels = np.asarray(labels, dtype=bool)
    if labels.size == 0 or labels.all() or not labels.any():
        return None
    return auc(scores, labels)


def _report(groups: list[Group], scores: np.ndarray, labels: np.ndarray) -> tuple[dict, dict, float]:
    group_auc, group_n = {}, {}
    garr = np.array([g.value for g in groups])
    for g in Group:
        mask = garr == g.value
        group_n[g] = int(mask.sum())
        group_auc[g] = _safe_auc(scores[mask], labels[mask])
    overall = _safe_auc(scores, labels)
    if overall is None:
        raise RouterError("evaluation data needs both labels")
    return group_auc, group_n, overall


def evaluate_router(
    router: RouterModel,
    evaluation: Sequence[LabeledProfile],
    ctx: CrawlContext,
    lexicon: NameLexicon,
    words: WordList,
) -> EvalReport:
    """Held-out AUC per group and pooled over all groups."""
    train_ids = set().union(*(e.train_user_ids for e in router.entries.values()))
    if train_ids & {r.profile.user_id for r in evaluation}:
        raise RouterError("evaluation data overlaps the training data")
    results = classify_many(router, evaluation, ctx, lexicon, words)
    scores = np.array([c.probability for c in results])
    labels = np.array([r.increased for r in evaluation])
    group_auc, group_n, overall = _report([c.group for c in results], scores, labels)
    return EvalReport(
        group_auc, group_n, overall,
        cv_auc={g: e.cv_mean_auc for g, e in router.entries.items()},
        models={g: e.family for g, e in router.entries.items()},
    )


@dataclass
class GlobalBaseline:
    family: str
    parameters: dict
    scaler: Scaler
    model: Any
    cv_mean_auc: float

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return self.model.predict_proba(self.scaler.apply(X))


def train_global_baseline(
    train: Sequence[LabeledProfile],
    ctx: CrawlContext,
    grids: Mapping[str, Mapping[str, Sequence[Any]]],
    cv: CvConfig = CvConfig(),
    seed: int = 0,
) -> GlobalBaseline:
    """Single model on every training row with the core (custom-content) schema."""
    X, y = feature_matrix([extract_core(r, ctx) for r in train])
    scaler = fit_scaler(X)
    Xs = scaler.apply(X)
    search = grid_search(grids, Xs, y, k=cv.k, repeats=cv.repeats, seed=seed, threads=cv.threads)
    best, model = _fit_selected(search, Xs, y, np.random.SeedSequence([seed, 99, 2]))
    return GlobalBaseline(best.family, dict(best.parameters), scaler, model, best.mean_auc)


def evaluate_global_baseline(
    baseline: GlobalBaseline,
    evaluation: Sequence[LabeledProfile],
    ctx: CrawlContext,
    lexicon: NameLexicon,
    words: WordList,
) -> EvalReport:
    X = np.vstack([extract_core(r, ctx).values for r in evaluation])
    scores = baseline.predict_proba(X)
    labels = np.array([r.increased for r in evaluation])
    groups = [assign_group(r.profile.name_field, lexicon, words) for r in evaluation]
    group_auc, group_n, overall = _report(groups, scores, labels)
    return EvalReport(group_auc, group_n, overall, models={g: baseline.family for g in Group})


def evaluate_random_baseline(
    evaluation: Sequence[LabeledProfile], lexicon: NameLexicon, words: WordList, seed: int = 0
) -> EvalReport:
    """Uniform random scores; expected AUC 0.5 everywhere."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 7]))
    scores = rng.random(len(evaluation))
    labels = np.array([r.increased for r in evaluation])
    groups = [assign_group(r.profile.name_field, lexicon, words) for r in evaluation]
    group_auc, group_n, overall = _report(groups, scores, labels)
    return EvalReport(group_auc, group_n, overall, models={g: "random" for g in Group})


# --- persistence -------------------------------------------------------------

def _model_to_dict(model) -> dict:
    for name, cls in MODEL_TYPES.items():
        if isinstance(model, cls):
            return {"family": name, "state": model.to_dict()}
    raise RouterError(f"cannot serialise model of type {type(model).__name__}")


def _model_from_dict(d: dict):
    cls = {"gbm": GbmModel, "rf": RfModel, "knn": KnnModel, "nb": NbModel}.get(d["family"])
    if cls is None:
        raise ModelFileError(f"unknown model family {d['family']!r}")
    return cls.from_dict(d["state"])


def router_to_dict(router: RouterModel) -> dict:
    return {
        "seed": router.seed,
        "lexicon_fingerprint": router.lexicon_fingerprint,
        "wordlist_fingerprint": router.wordlist_fingerprint,
        "data_fingerprint": router.data_fingerprint,
        "grids": router.grids,
        "entries": [
            {
                "group": e.group.value,
                "feature_names": list(e.schema.feature_names),
                "scaler": e.scaler.to_dict(),
                "family": e.family,
                "parameters": e.parameters,
                "cv_mean_auc": e.cv_mean_auc,
                "cv_sd_auc": e.cv_sd_auc,
                "n_train": e.n_train,
                "row_fingerprint": e.row_fingerprint,
                "model": _model_to_dict(e.model),
            }
            for e in (router.entries[g] for g in Group)
        ],
    }


def router_from_dict(d: dict) -> RouterModel:
    entries = {}
    for ed in d["entries"]:
        group = Group(ed["group"])
        schema = schema_for(group)
        if tuple(ed["feature_names"]) != schema.feature_names:
            raise ModelFileError(f"{group.value}: stored feature schema does not match this version")
        entries[group] = RouterEntry(
            group=group,
            schema=schema,
            scaler=Scaler.from_dict(ed["scaler"]),
            family=ed["family"],
            model=_model_from_dict(ed["model"]),
            parameters=ed["parameters"],
            cv_mean_auc=ed["cv_mean_auc"],
            cv_sd_auc=ed["cv_sd_auc"],
            n_train=ed["n_train"],
            row_fingerprint=ed["row_fingerprint"],
        )
    return RouterModel(
        entries=entries,
        seed=d["seed"],
        lexicon_fingerprint=d["lexicon_fingerprint"],
        wordlist_fingerprint=d["wordlist_fingerprint"],
        data_fingerprint=d["data_fingerprint"],
        grids=d["grids"],
    )


def save_router(router: RouterModel, path: str | Path) -> None:
    """Three lines: magic, JSON header (version, payload sha256), JSON payload."""
    payload = json.dumps(router_to_dict(router), sort_keys=True, separators=(",", ":"))
    header = json.dumps({"version": FORMAT_VERSION, "sha256": hashlib.sha256(payload.encode()).hexdigest()},
                        sort_keys=True)
    Path(path).write_text(f"{MAGIC}\n{header}\n{payload}\n", encoding="utf-8")


def load_router(path: str | Path) -> RouterModel:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise ModelFileError(f"{path}: not a router file ({exc})") from None
    lines = text.split("\n")
    if not lines or lines[0] != MAGIC:
        raise ModelFileError(f"{path}: missing {MAGIC} header")
    if len(lines) < 3:
        raise ModelFileError(f"{path}: truncated model file")
    try:
        header = json.loads(lines[1])
    except json.JSONDecodeError:
        raise ModelFileError(f"{path}: unreadable version header") from None
    version = header.get("version")
    if version != FORMAT_VERSION:
        raise ModelFileError(f"{path}: unsupported model file version {version!r} (expected {FORMAT_VERSION})")
    payload = lines[2]
    if hashlib.sha256(payload.encode()).hexdigest() != header.get("sha256"):
        raise ModelFileError(f"{path}: payload checksum mismatch (truncated or edited file)")
    try:
        return router_from_dict(json.loads(payload))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ModelFileError):
            raise
        raise ModelFileError(f"{path}: malformed payload ({exc})") from None
