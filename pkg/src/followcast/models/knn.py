"""k-nearest-neighbour vote on standardised features."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..features import Scaler, fit_scaler

_CHUNK_ELEMENTS = 4_000_000


@dataclass
class KnnModel:
    k: int
    scaler: Scaler
    X: np.ndarray  # scaled training rows
    y: np.ndarray

    def predict_proba(self, Xq: np.ndarray) -> np.ndarray:
        """Fraction of positives among the k nearest rows (Euclidean).

        Among equidistant candidates the lower training-row index wins.
        """
        Q = self.scaler.apply(np.atleast_2d(np.asarray(Xq, dtype=float)))
        n, p = self.X.shape
        k = self.k
        out = np.empty(Q.shape[0])
        step = max(1, _CHUNK_ELEMENTS // max(1, n * p))
        for start in range(0, Q.shape[0], step):
            q = Q[start:start + step]
            d = np.sum((q[:, None, :] - self.X[None, :, :]) ** 2, axis=2)
            kth = np.partition(d, k - 1, axis=1)[:, k - 1:k]
            less = d < kth
            equal = d == kth
            need = k - less.sum(axis=1, keepdims=True)
            take_equal = equal & (np.cumsum(equal, axis=1) <= need)
            chosen = less | take_equal
            out[start:start + step] = (chosen @ self.y) / k
        return out

    def to_dict(self) -> dict:
        return {"k": self.k, "scaler": self.scaler.to_dict(), "X": self.X.tolist(), "y": self.y.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "KnnModel":
        return cls(d["k"], Scaler.from_dict(d["scaler"]), np.array(d["X"], dtype=float).reshape(len(d["y"]), -1),
                   np.array(d["y"], dtype=float))


def fit_knn(X: np.ndarray, y: np.ndarray, k: int) -> KnnModel:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if not 1 <= k <= X.shape[0]:
        raise ValueError(f"k must lie in [1, {X.shape[0]}]")
    scaler = fit_scaler(X)
    return KnnModel(k, scaler, scaler.apply(X), y)
