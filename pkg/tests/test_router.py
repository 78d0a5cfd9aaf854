import dataclasses
import json

import numpy as np
import pytest

from followcast.features import extract
from followcast.ingest import filter_profiles, join_snapshots, stratified_split
from followcast.lexicon import Group, WordList
from followcast.router import (
    MAGIC,
    CvConfig,
    ModelFileError,
    RouterError,
    classify_many,
    evaluate_random_baseline,
    evaluate_router,
    evaluate_global_baseline,
    fingerprint_rows,
    load_router,
    partition_by_group,
    save_router,
    train_global_baseline,
    train_router,
)
from followcast.synth import GeneratorConfig, generate

GRID = {"gbm": {"n_trees": [10, 20], "max_depth": [2]}, "knn": {"k": [15]}}
ALL_FAMILIES = {
    "gbm": {"n_trees": [10], "max_depth": [2]},
    "rf": {"n_trees": [5], "mtry": [2]},
    "knn": {"k": [15]},
    "nb": {"kernel": [False, True]},
}


@pytest.fixture(scope="module")
def dataset(lexicon, words):
    data = generate(GeneratorConfig(n_profiles=1500, seed=21, proportions={g: 1 / 3 for g in Group}), lexicon, words)
    labeled = join_snapshots(filter_profiles(data.first, data.ctx), data.second).labeled
    train, evaluation = stratified_split(labeled, 0.5, seed=0)
    return data.ctx, train, evaluation


@pytest.fixture(scope="module")
def trained(dataset, lexicon, words):
    ctx, train, _ = dataset
    router, searches = train_router(train, lexicon, words, ctx, GRID, CvConfig(3, 1), seed=4)
    return router, searches


def probabilities(router, records, ctx, lexicon, words):
    return np.array([c.probability for c in classify_many(router, records, ctx, lexicon, words)])


def test_routing_uses_the_group_model(trained, dataset, lexicon, words):
    router, _ = trained
    ctx, _, evaluation = dataset
    results = classify_many(router, evaluation, ctx, lexicon, words)
    parts = partition_by_group(evaluation, lexicon, words)
    assert sum(len(v) for v in parts.values()) == len(evaluation)
    by_id = {c.user_id: c for c in results}
    for group, members in parts.items():
        for r in members:
            c = by_id[r.profile.user_id]
            assert c.group is group
            direct = router.entries[group].predict_proba(extract(r, group, ctx, lexicon, words).values[None, :])[0]
            assert abs(c.probability - direct) <= 1e-12
            assert c.label == (c.probability >= 0.5)


def test_entries_trained_on_their_own_group(trained, dataset, lexicon, words):
    router, searches = trained
    ctx, train, _ = dataset
    parts = partition_by_group(train, lexicon, words)
    for group, entry in router.entries.items():
        assert entry.n_train == len(parts[group])
        assert entry.row_fingerprint == fingerprint_rows(parts[group])
        best = searches[group].best_overall()
        assert (entry.family, entry.parameters, entry.cv_mean_auc) == (best.family, best.parameters, best.mean_auc)


def test_no_train_eval_leakage(trained, dataset, lexicon, words):
    router, _ = trained
    ctx, train, evaluation = dataset
    assert fingerprint_rows(train) != fingerprint_rows(evaluation)
    assert not {r.profile.user_id for r in train} & {r.profile.user_id for r in evaluation}
    report = evaluate_router(router, evaluation, ctx, lexicon, words)
    assert sum(report.group_n.values()) == len(evaluation)
    assert 0.5 < report.overall_auc < 1.0
    with pytest.raises(RouterError):
        evaluate_router(router, evaluation + train[:1], ctx, lexicon, words)


def test_threshold_monotonicity(trained, dataset, lexicon, words):
    router, _ = trained
    ctx, _, evaluation = dataset
    counts = [sum(c.label for c in classify_many(router, evaluation, ctx, lexicon, words, threshold=t))
              for t in np.linspace(0, 1, 11)]
    assert counts[0] == len(evaluation)
    assert all(a >= b for a, b in zip(counts, counts[1:]))


def test_save_load_round_trip(trained, dataset, lexicon, words, tmp_path):
    router, _ = trained
    ctx, _, evaluation = dataset
    path = tmp_path / "router.model"
    save_router(router, path)
    loaded = load_router(path)
    a = probabilities(router, evaluation, ctx, lexicon, words)
    b = probabilities(loaded, evaluation, ctx, lexicon, words)
    assert np.array_equal(a, b)
    save_router(loaded, tmp_path / "again.model")
    assert (tmp_path / "again.model").read_bytes() == path.read_bytes()


def test_round_trip_every_family(dataset, lexicon, words, tmp_path):
    ctx, train, evaluation = dataset
    for fam, grid in ALL_FAMILIES.items():
        router, _ = train_router(train, lexicon, words, ctx, {fam: grid}, CvConfig(3, 1), seed=1)
        assert {e.family for e in router.entries.values()} == {fam}
        save_router(router, tmp_path / f"{fam}.model")
        loaded = load_router(tmp_path / f"{fam}.model")
        assert np.array_equal(probabilities(router, evaluation, ctx, lexicon, words),
                              probabilities(loaded, evaluation, ctx, lexicon, words))


def test_corrupt_model_files(trained, tmp_path):
    router, _ = trained
    path = tmp_path / "router.model"
    save_router(router, path)
    text = path.read_text(encoding="utf-8")
    magic, header, payload = text.split("\n")[:3]

    cases = {
        "truncated": text[: len(text) // 2],
        "header_only": f"{magic}\n",
        "wrong_magic": text.replace(MAGIC, "SOMETHING-ELSE", 1),
        "version": "\n".join([magic, json.dumps({**json.loads(header), "version": 99}), payload, ""]),
        "edited": text.replace('"seed":4', '"seed":5', 1),
    }
    for name, body in cases.items():
        bad = tmp_path / f"{name}.model"
        bad.write_text(body, encoding="utf-8")
        with pytest.raises(ModelFileError):
            load_router(bad)
    (tmp_path / "binary.model").write_bytes(b"\xff\xfe\x00garbage")
    with pytest.raises(ModelFileError):
        load_router(tmp_path / "binary.model")


def test_resource_mismatch(trained, dataset, lexicon):
    router, _ = trained
    ctx, _, evaluation = dataset
    with pytest.raises(RouterError):
        classify_many(router, evaluation[:5], ctx, lexicon, WordList(["alpha", "beta"]))


def test_training_errors(dataset, lexicon, words):
    ctx, train, _ = dataset
    parts = partition_by_group(train, lexicon, words)
    without_words = parts[Group.CUSTOM_CONTENT] + parts[Group.CONTAINS_NAME]
    with pytest.raises(RouterError):
        train_router(without_words, lexicon, words, ctx, GRID, CvConfig(3, 1))
    single_label = [r for r in parts[Group.CONTAINS_WORDS] if r.increased]
    with pytest.raises(RouterError):
        train_router(without_words + single_label, lexicon, words, ctx, GRID, CvConfig(3, 1))


def test_router_schema_guard(trained):
    router, _ = trained
    entries = dict(router.entries)
    entries[Group.CUSTOM_CONTENT] = dataclasses.replace(
        entries[Group.CUSTOM_CONTENT], schema=entries[Group.CONTAINS_NAME].schema)
    with pytest.raises(RouterError):
        dataclasses.replace(router, entries=entries)


def test_baselines(dataset, lexicon, words):
    ctx, train, evaluation = dataset
    rand = evaluate_random_baseline(evaluation, lexicon, words, seed=0)
    assert abs(rand.overall_auc - 0.5) < 0.05
    again = evaluate_random_baseline(evaluation, lexicon, words, seed=0)
    assert again.overall_auc == rand.overall_auc
    base = train_global_baseline(train, ctx, GRID, CvConfig(3, 1), seed=0)
    report = evaluate_global_baseline(base, evaluation, ctx, lexicon, words)
    assert report.group_n == rand.group_n
    assert 0.5 < report.overall_auc < 1.0
