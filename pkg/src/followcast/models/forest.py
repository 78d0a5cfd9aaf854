"""Random forest of bootstrapped regression trees on 0/1 labels."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tree import Tree, fit_regression_tree


@dataclass
class RfModel:
    trees: list[Tree]
    mtry: int

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        """Mean over trees of the positive-class fraction in the reached leaf."""
        X = np.asarray(X, dtype=float)
        return np.mean([t.predict(X) for t in self.trees], axis=0)

    def to_dict(self) -> dict:
        return {"mtry": self.mtry, "trees": [t.to_dict() for t in self.trees]}

    @classmethod
    def from_dict(cls, d: dict) -> "RfModel":
        return cls([Tree.from_dict(t) for t in d["trees"]], d["mtry"])


def fit_rf(
    X: np.ndarray,
    y: np.ndarray,
    n_trees: int = 500,
    mtry: int | None = None,
    min_leaf: int = 1,
    max_depth: int | None = None,
    seed: int | np.random.SeedSequence = 0,
    bootstrap: bool = True,
) -> RfModel:
    """Each tree draws its own bootstrap sample and per-split feature subsets.

    Tree ``i`` uses a generator spawned from ``seed``, so the forest does not
    depend on the order trees are grown in.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    if n_trees < 1:
        raise ValueError("n_trees must be >= 1")
    if mtry is None:
        mtry = max(1, int(np.sqrt(p)))
    if not 1 <= mtry <= p:
        raise ValueError(f"mtry must lie in [1, {p}]")
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    trees = []
    for child in ss.spawn(n_trees):
        rng = np.random.default_rng(child)
        idx = rng.integers(0, n, size=n) if bootstrap else np.arange(n)
        trees.append(
            fit_regression_tree(X[idx], y[idx], max_depth=max_depth, min_leaf=min_leaf, mtry=mtry, rng=rng)
        )
    return RfModel(trees, mtry)
