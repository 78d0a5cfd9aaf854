"""Naive Bayes with Gaussian or kernel-density class-conditional densities."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

SD_FLOOR = 1e-9
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
_CHUNK_ELEMENTS = 2_000_000


def silverman_bandwidth(x: np.ndarray, adjust: float = 1.0) -> float:
    """0.9 * min(sd, IQR/1.34) * n^(-1/5), with fallbacks for degenerate samples."""
    x = np.asarray(x, dtype=float)
    hi = float(np.std(x, ddof=1)) if x.size > 1 else 0.0
    q75, q25 = np.percentile(x, [75.0, 25.0])
    lo = min(hi, float(q75 - q25) / 1.34)
    if lo == 0.0:
        lo = hi or abs(float(x[0])) or 1.0
    return adjust * 0.9 * lo * x.size ** (-0.2)


@dataclass
class NbModel:
    log_priors: np.ndarray  # [class]
    kernel: bool
    means: np.ndarray | None = None  # [class, feature]
    sds: np.ndarray | None = None
    samples: list[np.ndarray] | None = None  # per class: [n_c, feature]
    bandwidths: np.ndarray | None = None  # [class, feature]

    @property
    def priors(self) -> np.ndarray:
        return np.exp(self.log_priors)

    def _log_density(self, X: np.ndarray, c: int) -> np.ndarray:
        if not self.kernel:
            z = (X - self.means[c]) / self.sds[c]
            return np.sum(-0.5 * z * z - np.log(self.sds[c]) - _LOG_SQRT_2PI, axis=1)
        S = self.samples[c]
        h = self.bandwidths[c]
        total = np.zeros(X.shape[0])
        step = max(1, _CHUNK_ELEMENTS // max(1, S.shape[0]))
        for j in range(X.shape[1]):
            for start in range(0, X.shape[0], step):
                z = (X[start:start + step, j, None] - S[None, :, j]) / h[j]
                total[start:start + step] += (
                    logsumexp(-0.5 * z * z, axis=1) - math.log(S.shape[0] * h[j]) - _LOG_SQRT_2PI
                )
        return total

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        """Posterior probability of the positive class."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        scores = np.column_stack([self.log_priors[c] + self._log_density(X, c) for c in (0, 1)])
        return np.exp(scores[:, 1] - logsumexp(scores, axis=1))

    def to_dict(self) -> dict:
        d = {"log_priors": self.log_priors.tolist(), "kernel": self.kernel}
        if self.kernel:
            d["samples"] = [s.tolist() for s in self.samples]
            d["bandwidths"] = self.bandwidths.tolist()
        else:
            d["means"] = self.means.tolist()
            d["sds"] = self.sds.tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "NbModel":
        m = cls(np.array(d["log_priors"]), d["kernel"])
        if m.kernel:
            m.samples = [np.array(s, dtype=float) for s in d["samples"]]
            m.bandwidths = np.array(d["bandwidths"], dtype=float)
        else:
            m.means = np.array(d["means"], dtype=float)
            m.sds = np.array(d["sds"], dtype=float)
        return m


def fit_nb(X: np.ndarray, y: np.ndarray, kernel: bool = True, adjust: float = 1.0) -> NbModel:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    classes = [X[y == 0], X[y == 1]]
    if any(c.shape[0] == 0 for c in classes):
        raise ValueError("naive Bayes needs both classes present")
    if adjust <= 0:
        raise ValueError("bandwidth adjustment must be positive")
    log_priors = np.log(np.array([c.shape[0] for c in classes], dtype=float) / y.size)
    if kernel:
        bw = np.array([[silverman_bandwidth(c[:, j], adjust) for j in range(X.shape[1])] for c in classes])
        return NbModel(log_priors, True, samples=classes, bandwidths=bw)
    means = np.array([c.mean(axis=0) for c in classes])
    sds = np.array([c.std(axis=0, ddof=1) if c.shape[0] > 1 else np.zeros(X.shape[1]) for c in classes])
    return NbModel(log_priors, False, means=means, sds=np.maximum(sds, SD_FLOOR))
