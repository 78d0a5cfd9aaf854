"""Gradient boosting with binomial deviance (logistic loss)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..logreg import sigmoid
from .tree import Tree, fit_regression_tree, presort


class DevianceIncrease(AssertionError):
    pass


@dataclass
class GbmModel:
    initial_score: float
    trees: list[Tree]
    shrinkage: float
    train_deviance: list[float] = field(default_factory=list)

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    def decision_function(self, X: np.ndarray, n_trees: int | None = None) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        f = np.full(X.shape[0], self.initial_score)
        for tree in self.trees[: self.n_trees if n_trees is None else n_trees]:
            f += self.shrinkage * tree.predict(X)
        return f

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return sigmoid(self.decision_function(X))

    def staged_predict_proba(self, X: np.ndarray, stages: Sequence[int]) -> dict[int, np.ndarray]:
        """Probabilities after each requested number of trees, in one pass."""
        X = np.asarray(X, dtype=float)
        wanted = sorted(set(stages))
        if wanted and (wanted[0] < 0 or wanted[-1] > self.n_trees):
            raise ValueError(f"stages must lie in [0, {self.n_trees}]")
        out = {}
        f = np.full(X.shape[0], self.initial_score)
        done = 0
        for s in wanted:
            for tree in self.trees[done:s]:
                f += self.shrinkage * tree.predict(X)
            done = s
            out[s] = sigmoid(f)
        return out

    def to_dict(self) -> dict:
        return {
            "initial_score": self.initial_score,
            "shrinkage": self.shrinkage,
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GbmModel":
        return cls(d["initial_score"], [Tree.from_dict(t) for t in d["trees"]], d["shrinkage"])


def binomial_deviance(y: np.ndarray, f: np.ndarray) -> float:
    """Mean deviance -2/n * loglik for log-odds ``f``."""
    return float(2.0 * np.mean(np.logaddexp(0.0, f) - y * f))


def fit_gbm(
    X: np.ndarray,
    y: np.ndarray,
    n_trees: int = 100,
    max_depth: int = 3,
    shrinkage: float = 0.1,
    min_leaf: int = 10,
    check_deviance: bool = True,
) -> GbmModel:
    """Stagewise boosting of regression trees on the residual ``y - p``.

    Each leaf gets one Newton step sum(r) / sum(p(1-p)). A leaf step that
    would raise that leaf's loss is halved until it does not, so training
    deviance never increases; ``check_deviance`` asserts it per iteration.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if n_trees < 0:
        raise ValueError("n_trees must be >= 0")
    if max_depth < 1:
        raise ValueError("max_depth must be >= 1")
    if not 0.0 < shrinkage <= 1.0:
        raise ValueError("shrinkage must lie in (0, 1]")
    if min_leaf < 1:
        raise ValueError("min_leaf must be >= 1")
    prevalence = float(y.mean())
    if not 0.0 < prevalence < 1.0:
        raise ValueError("boosting needs both classes present")

    f0 = math.log(prevalence / (1.0 - prevalence))
    f = np.full(y.size, f0)
    model = GbmModel(f0, [], shrinkage, [binomial_deviance(y, f)])
    sorted_rows = presort(X)
    for _ in range(n_trees):
        p = sigmoid(f)
        resid = y - p
        tree = fit_regression_tree(X, resid, max_depth=max_depth, min_leaf=min_leaf, sorted_rows=sorted_rows)
        leaves = tree.apply(X)
        n_nodes = tree.n_nodes
        num = np.bincount(leaves, resid, n_nodes)
        den = np.bincount(leaves, p * (1.0 - p), n_nodes)
        gamma = np.divide(num, den, out=np.zeros(n_nodes), where=den > 1e-300)
        base = np.bincount(leaves, np.logaddexp(0.0, f) - y * f, n_nodes)
        for _ in range(60):
            g = f + shrinkage * gamma[leaves]
            worse = np.bincount(leaves, np.logaddexp(0.0, g) - y * g, n_nodes) > base
            if not worse.any():
                break
            gamma[worse] *= 0.5
        else:
            gamma[worse] = 0.0
        tree.value[:] = gamma
        f = f + shrinkage * tree.value[leaves]
        dev = binomial_deviance(y, f)
        if check_deviance and dev > model.train_deviance[-1] * (1 + 1e-12) + 1e-15:
            raise DevianceIncrease(f"training deviance rose from {model.train_deviance[-1]} to {dev}")
        model.trees.append(tree)
        model.train_deviance.append(dev)
    return model
