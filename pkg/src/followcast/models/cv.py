"""Learner families, repeated stratified cross-validation and grid search.

Randomness is keyed by position, never by execution order: fold assignment
for repeat ``r`` comes from ``SeedSequence([seed, r])`` and a model fitted on
fold ``f`` of repeat ``r`` gets ``SeedSequence([seed, r, f, 1])``. Serial and
threaded runs therefore produce identical results, and every grid point sees
the same folds.
"""

from __future__ import annotations

import itertools
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Protocol, Sequence

import numpy as np

from .bayes import NbModel, fit_nb
from .forest import RfModel, fit_rf
from .gbm import GbmModel, fit_gbm
from .knn import KnnModel, fit_knn
from .metrics import auc

log = logging.getLogger(__name__)


class Classifier(Protocol):
    def predict_proba(self, X: np.ndarray) -> np.ndarray: ...


# A learner maps (X, y, seed sequence) to a fitted classifier.
Learner = Callable[[np.ndarray, np.ndarray, np.random.SeedSequence], Classifier]


@dataclass(frozen=True)
class Family:
    name: str
    defaults: Mapping[str, Any]
    build: Callable[..., Classifier]
    complexity: str | None = None  # parameter preferred smaller on AUC ties
    staged: str | None = None  # parameter whose grid values can share one fit

    def learner(self, params: Mapping[str, Any]) -> Learner:
        merged = {**self.defaults, **params}
        unknown = set(merged) - set(self.defaults)
        if unknown:
            raise ValueError(f"unknown {self.name} parameters: {sorted(unknown)}")

        def fit(X, y, ss):
            return self.build(X, y, ss, **merged)

        return fit


def _build_gbm(X, y, ss, n_trees, max_depth, shrinkage, min_leaf):
    return fit_gbm(X, y, int(n_trees), int(max_depth), float(shrinkage), int(min_leaf))


def _build_rf(X, y, ss, n_trees, mtry, min_leaf, max_depth):
    p = X.shape[1]
    return fit_rf(X, y, int(n_trees), min(int(mtry), p), int(min_leaf),
                  None if max_depth in (None, 0) else int(max_depth), seed=ss)


def _build_knn(X, y, ss, k):
    return fit_knn(X, y, min(int(k), X.shape[0]))


def _build_nb(X, y, ss, kernel, adjust):
    return fit_nb(X, y, bool(kernel), float(adjust))


FAMILIES: dict[str, Family] = {
    "gbm": Family("gbm", {"n_trees": 100, "max_depth": 3, "shrinkage": 0.1, "min_leaf": 10},
                  _build_gbm, complexity="n_trees", staged="n_trees"),
    "rf": Family("rf", {"n_trees": 500, "mtry": 3, "min_leaf": 1, "max_depth": 0}, _build_rf),
    "knn": Family("knn", {"k": 5}, _build_knn, complexity="k"),
    "nb": Family("nb", {"kernel": True, "adjust": 1.0}, _build_nb),
}

MODEL_TYPES = {"gbm": GbmModel, "rf": RfModel, "knn": KnnModel, "nb": NbModel}


def family_of(model: Classifier) -> str:
    for name, cls in MODEL_TYPES.items():
        if isinstance(model, cls):
            return name
    raise TypeError(f"unknown model type {type(model).__name__}")


@dataclass
class CvResult:
    family: str
    parameters: dict
    fold_aucs: list[float]
    error: str | None = None

    @property
    def mean_auc(self) -> float:
        return float(np.mean(self.fold_aucs)) if self.fold_aucs else math.nan

    @property
    def sd_auc(self) -> float:
        return float(np.std(self.fold_aucs, ddof=1)) if len(self.fold_aucs) > 1 else 0.0

    @property
    def ok(self) -> bool:
        return self.error is None


def stratified_folds(y: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Fold id per row; each class is dealt round-robin over a random order."""
    y = np.asarray(y).astype(bool)
    folds = np.empty(y.size, dtype=int)
    offset = 0
    for cls in (True, False):
        members = rng.permutation(np.flatnonzero(y == cls))
        folds[members] = (offset + np.arange(members.size)) % k
        offset = (offset + members.size) % k
    return folds


def fold_plan(y: np.ndarray, k: int, repeats: int, seed: int) -> list[np.ndarray]:
    y = np.asarray(y).astype(bool)
    if k < 2:
        raise ValueError("k must be >= 2")
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    minority = min(int(y.sum()), int((~y).sum()))
    if minority < k:
        raise ValueError(f"minority class has {minority} rows, fewer than k={k} folds")
    return [stratified_folds(y, k, np.random.default_rng(np.random.SeedSequence([seed, r])))
            for r in range(repeats)]


def _fold_seed(seed: int, repeat: int, fold: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([seed, repeat, fold, 1])


def _map(fn, items, threads: int):
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def cross_validate(
    learner: Learner,
    X: np.ndarray,
    y: np.ndarray,
    k: int = 10,
    repeats: int = 5,
    seed: int = 0,
    threads: int = 1,
    family: str = "custom",
    parameters: Mapping[str, Any] | None = None,
) -> CvResult:
    """Repeated stratified k-fold AUC; all fitting happens inside the training folds."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    plan = fold_plan(y, k, repeats, seed)
    units = [(r, f) for r in range(repeats) for f in range(k)]

    def run(unit):
        r, f = unit
        test = plan[r] == f
        model = learner(X[~test], y[~test], _fold_seed(seed, r, f))
        return auc(model.predict_proba(X[test]), y[test])

    return CvResult(family, dict(parameters or {}), _map(run, units, threads))


def expand_grid(grid: Mapping[str, Sequence[Any]]) -> list[dict]:
    keys = list(grid)
    return [dict(zip(keys, combo)) for combo in itertools.product(*(grid[k] for k in keys))]


@dataclass
class SearchResult:
    results: dict[str, list[CvResult]]
    best: dict[str, CvResult] = field(default_factory=dict)
    best_family: str | None = None

    def best_overall(self) -> CvResult:
        if self.best_family is None:
            raise ValueError("no grid point succeeded")
        return self.best[self.best_family]


def _select(results: list[CvResult], family: Family) -> CvResult | None:
    ok = [(i, r) for i, r in enumerate(results) if r.ok]
    if not ok:
        return None

    def key(item):
        i, r = item
        cx = float(r.parameters.get(family.complexity, 0)) if family.complexity else 0.0
        return (-r.mean_auc, cx, i)

    return min(ok, key=key)[1]


def grid_search(
    grids: Mapping[str, Mapping[str, Sequence[Any]]],
    X: np.ndarray,
    y: np.ndarray,
    k: int = 10,
    repeats: int = 5,
    seed: int = 0,
    threads: int = 1,
) -> SearchResult:
    """Cross-validate every grid point of every family on identical folds.

    For boosting, points differing only in tree count share one fit per fold
    and are scored from staged predictions. A failing grid point is recorded
    with its error and the search continues.
    """
    if not grids:
        raise ValueError("empty grid specification")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    plan = fold_plan(y, k, repeats, seed)
    folds = [(r, f) for r in range(repeats) for f in range(k)]

    # Work unit: (family, list of points sharing one fit, fit params, stage values)
    jobs = []
    for fname, grid in grids.items():
        if fname not in FAMILIES:
            raise ValueError(f"unknown model family {fname!r}")
        fam = FAMILIES[fname]
        points = expand_grid(grid)
        if not points:
            raise ValueError(f"empty grid for {fname}")
        if fam.staged and fam.staged in grid:
            groups: dict[str, list[int]] = {}
            for i, pt in enumerate(points):
                rest = {kk: v for kk, v in pt.items() if kk != fam.staged}
                groups.setdefault(json.dumps(rest, sort_keys=True), []).append(i)
            for members in groups.values():
                jobs.append((fname, members, points))
        else:
            for i in range(len(points)):
                jobs.append((fname, [i], points))

    def run(unit):
        (fname, members, points), (r, f) = unit
        fam = FAMILIES[fname]
        test = plan[r] == f
        try:
            if len(members) > 1 or (fam.staged and fam.staged in points[members[0]]):
                stages = [int(points[i][fam.staged]) for i in members]
                fit_params = dict(points[members[0]])
                fit_params[fam.staged] = max(stages)
                model = fam.learner(fit_params)(X[~test], y[~test], _fold_seed(seed, r, f))
                staged = model.staged_predict_proba(X[test], stages)
                return [auc(staged[s], y[test]) for s in stages]
            model = fam.learner(points[members[0]])(X[~test], y[~test], _fold_seed(seed, r, f))
            return [auc(model.predict_proba(X[test]), y[test])]
        except Exception as exc:  # recorded per grid point, search continues
            return exc

    units = [(job, fold) for job in jobs for fold in folds]
    outcomes = _map(run, units, threads)

    results: dict[str, list[CvResult]] = {
        fname: [CvResult(fname, pt, []) for pt in expand_grid(grid)] for fname, grid in grids.items()
    }
    for ((fname, members, _), _fold), out in zip(units, outcomes):
        for pos, i in enumerate(members):
            res = results[fname][i]
            if isinstance(out, Exception):
                if res.error is None:
                    res.error = f"{type(out).__name__}: {out}"
                    log.warning("grid point %s %s failed: %s", fname, res.parameters, res.error)
            elif res.error is None:
                res.fold_aucs.append(out[pos])
    for fname in results:
        for res in results[fname]:
            if res.error is not None:
                res.fold_aucs = []

    search = SearchResult(results)
    for fname, res in results.items():
        chosen = _select(res, FAMILIES[fname])
        if chosen is not None:
            search.best[fname] = chosen
    if search.best:
        order = list(grids)
        search.best_family = min(search.best, key=lambda fn: (-search.best[fn].mean_auc, order.index(fn)))
    return search


def write_cv_report(stream, search: SearchResult, group: str | None = None) -> None:
    """CSV rows: [group,] family, parameters, per-fold AUCs, mean, sd, error."""
    import csv

    w = csv.writer(stream, lineterminator="\n")
    head = ["family", "parameters", "fold_aucs", "mean_auc", "sd_auc", "error"]
    w.writerow((["group"] if group is not None else []) + head)
    for fname, results in search.results.items():
        for r in results:
            row = [
                fname,
                json.dumps(r.parameters, sort_keys=True),
                ";".join(f"{a:.12g}" for a in r.fold_aucs),
                f"{r.mean_auc:.12g}" if r.ok else "",
                f"{r.sd_auc:.12g}" if r.ok else "",
                r.error or "",
            ]
            w.writerow(([group] if group is not None else []) + row)
