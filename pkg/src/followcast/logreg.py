"""Binary logistic regression by IRLS with Wald inference and Nagelkerke R²."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import qr

from .special import chi2_sf

log = logging.getLogger(__name__)

SEPARATION_LIMIT = 30.0


class LogitError(ValueError):
    pass


@dataclass(frozen=True)
class LogitModel:
    feature_names: tuple[str, ...]
    coefficients: np.ndarray  # intercept first
    covariance: np.ndarray
    log_likelihood: float
    null_log_likelihood: float
    n: int
    converged: bool
    iterations: int
    diagnostics: tuple[str, ...] = field(default=())

    @property
    def standard_errors(self) -> np.ndarray:
        return np.sqrt(np.diag(self.covariance))


@dataclass(frozen=True)
class WaldRow:
    variable: str
    beta: float
    standard_error: float
    wald_statistic: float
    p_value: float
    odds_ratio: float

    @property
    def stars(self) -> str:
        return significance_stars(self.p_value)


def sigmoid(z):
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def log_likelihood(beta: np.ndarray, Xa: np.ndarray, y: np.ndarray) -> float:
    """Binomial log-likelihood; ``Xa`` already carries the intercept column."""
    eta = Xa @ beta
    # log(1 + e^eta) computed stably
    return float(np.sum(y * eta - np.logaddexp(0.0, eta)))


def score(beta: np.ndarray, Xa: np.ndarray, y: np.ndarray) -> np.ndarray:
    return Xa.T @ (y - sigmoid(Xa @ beta))


def _augment(X: np.ndarray) -> np.ndarray:
    return np.hstack([np.ones((X.shape[0], 1)), X])


def _collinear_columns(Xa: np.ndarray, names: Sequence[str]) -> list[str]:
    scale = np.abs(Xa).max(axis=0)
    scale[scale == 0] = 1.0
    _, r, piv = qr(Xa / scale, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    tol = diag[0] * max(Xa.shape) * np.finfo(float).eps * 10
    rank = int(np.sum(diag > tol))
    return [names[i] for i in sorted(piv[rank:])]


def fit_logit(
    X: np.ndarray,
    y: np.ndarray,
    feature_names: Sequence[str] | None = None,
    max_iter: int = 100,
    tol: float = 1e-8,
) -> LogitModel:
    """Maximum-likelihood fit with an implicit intercept.

    Newton/IRLS steps are halved while they lower the likelihood. Stops when
    the largest absolute coefficient update falls below ``tol``. A coefficient
    beyond ±30 is treated as separation: the fit stops with
    ``converged=False`` and a diagnostic.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[0] != y.size:
        raise LogitError("X must be n x p and match y")
    n, p = X.shape
    names = tuple(feature_names) if feature_names is not None else tuple(f"x{j}" for j in range(p))
    if len(names) != p:
        raise LogitError("one feature name per column required")
    if not np.all((y == 0) | (y == 1)):
        raise LogitError("labels must be 0/1")
    prevalence = float(y.mean())
    if prevalence in (0.0, 1.0):
        raise LogitError("labels contain a single class")
    if n < p + 2:
        raise LogitError(f"need more observations ({n}) than coefficients ({p + 1})")
    constant = [names[j] for j in range(p) if np.ptp(X[:, j]) == 0]
    if constant:
        raise LogitError(f"constant feature columns: {constant}")
    Xa = _augment(X)
    collinear = _collinear_columns(Xa, ("(intercept)",) + names)
    if collinear:
        raise LogitError(f"design matrix is rank deficient; collinear columns: {collinear}")

    null_ll = float(n * (prevalence * math.log(prevalence) + (1 - prevalence) * math.log(1 - prevalence)))
    beta = np.zeros(p + 1)
    beta[0] = math.log(prevalence / (1 - prevalence))
    ll = log_likelihood(beta, Xa, y)
    converged = False
    diagnostics: list[str] = []
    it = 0
    for it in range(1, max_iter + 1):
        mu = sigmoid(Xa @ beta)
        w = mu * (1 - mu)
        info = Xa.T @ (Xa * w[:, None])
        grad = Xa.T @ (y - mu)
        try:
            step = np.linalg.solve(info, grad)
        except np.linalg.LinAlgError:
            diagnostics.append("information matrix became singular")
            break
        new_ll = log_likelihood(beta + step, Xa, y)
        halvings = 0
        while new_ll < ll and halvings < 30:
            step /= 2.0
            halvings += 1
            new_ll = log_likelihood(beta + step, Xa, y)
        beta = beta + step
        ll = new_ll
        if np.max(np.abs(beta)) > SEPARATION_LIMIT:
            worst = names[int(np.argmax(np.abs(beta[1:])))] if p else "(intercept)"
            diagnostics.append(f"separation suspected: |beta| exceeded {SEPARATION_LIMIT:g} (largest: {worst})")
            log.warning("logistic fit: %s", diagnostics[-1])
            break
        if np.max(np.abs(step)) < tol:
            converged = True
            break
    else:
        diagnostics.append(f"no convergence after {max_iter} iterations")

    mu = sigmoid(Xa @ beta)
    info = Xa.T @ (Xa * (mu * (1 - mu))[:, None])
    try:
        cov = np.linalg.inv(info)
    except np.linalg.LinAlgError:
        cov = np.full((p + 1, p + 1), np.nan)
    cov = 0.5 * (cov + cov.T)
    return LogitModel(
        feature_names=names,
        coefficients=beta,
        covariance=cov,
        log_likelihood=ll,
        null_log_likelihood=null_ll,
        n=n,
        converged=converged,
        iterations=it,
        diagnostics=tuple(diagnostics),
    )


def significance_stars(p: float) -> str:
    if p < 0.001:
        return "***"
    if p < 0.01:
        return "**"
    if p < 0.05:
        return "*"
    return ""


def wald_test(beta: float, se: float) -> tuple[float, float]:
    """(Wald chi-square statistic, p-value on 1 df)."""
    if not se > 0:
        raise LogitError("standard error must be positive")
    stat = (beta / se) ** 2
    return stat, chi2_sf(stat, 1)


def wald_table(model: LogitModel, include_intercept: bool = False) -> list[WaldRow]:
    if not model.converged:
        raise LogitError("Wald table requested for a model that did not converge: "
                         + "; ".join(model.diagnostics))
    rows = []
    names = ("(intercept)",) + model.feature_names
    for j, (name, b, se) in enumerate(zip(names, model.coefficients, model.standard_errors)):
        if j == 0 and not include_intercept:
            continue
        stat, p = wald_test(float(b), float(se))
        rows.append(WaldRow(name, float(b), float(se), stat, p, math.exp(b)))
    return rows


def nagelkerke_r2(model: LogitModel) -> float:
    """Cox-Snell R² rescaled by its maximum attainable value."""
    if model.n <= 0:
        raise LogitError("model has no observations")
    cox_snell = -math.expm1(2.0 * (model.null_log_likelihood - model.log_likelihood) / model.n)
    max_cs = -math.expm1(2.0 * model.null_log_likelihood / model.n)
    return cox_snell / max_cs


def predict_logit(model: LogitModel, x: np.ndarray) -> np.ndarray | float:
    """Fitted probability for one feature vector or a matrix of them."""
    x = np.asarray(x, dtype=float)
    p = len(model.feature_names)
    if x.shape[-1] != p:
        raise LogitError(f"expected {p} features, got {x.shape[-1]}")
    eta = model.coefficients[0] + x @ model.coefficients[1:]
    probs = sigmoid(np.atleast_1d(eta))
    return float(probs[0]) if x.ndim == 1 else probs
