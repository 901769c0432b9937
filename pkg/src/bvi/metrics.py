"""Experiment metrics: moment-space parameter errors, zero-pattern F1,
and predictive test error by posterior sampling."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InvalidInput
from .expfam import ExponentialFamily, NaturalParams
from .numerics import RngStream
from .targets import RegressionDataset, predict


@dataclass(frozen=True)
class MetricReport:
    mse_mean: float
    mse_cov: float
    f1_zeros: Optional[float] = None
    test_mse_samples: Optional[np.ndarray] = None


def param_mse(fam: ExponentialFamily, theta: NaturalParams,
              mu_bar: np.ndarray, sigma_bar: np.ndarray) -> tuple[float, float]:
    """Squared errors of the moment-space mean (Euclidean) and covariance
    (Frobenius) extracted from theta against the ground truth."""
    mu_bar = np.asarray(mu_bar, dtype=float)
    sigma_bar = np.asarray(sigma_bar, dtype=float)
    mu, cov = fam.mean_cov(theta)
    if mu.shape != mu_bar.shape or cov.shape != sigma_bar.shape:
        raise InvalidInput("ground-truth dimensions do not match the family")
    return float(np.sum((mu_bar - mu) ** 2)), float(np.sum((sigma_bar - cov) ** 2))


def f1_zero_pattern(mu_k: np.ndarray, beta_bar: np.ndarray,
                    zero_tol: float = 0.0) -> float:
    """F1 score of the predicted zero pattern against the true one.

    Index 0 (the bias) is excluded. A component counts as zero when its
    magnitude is at most ``zero_tol``. Conventions for empty patterns: 1.0
    when neither side has zeros, 0.0 whenever precision + recall vanishes.
    """
    mu_k = np.asarray(mu_k, dtype=float)
    beta_bar = np.asarray(beta_bar, dtype=float)
    if mu_k.shape != beta_bar.shape:
        raise InvalidInput("prediction and truth must have equal length")
    pred = np.abs(mu_k[1:]) <= zero_tol
    true = np.abs(beta_bar[1:]) <= zero_tol
    if not true.any() and not pred.any():
        return 1.0
    tp = float(np.sum(pred & true))
    if tp == 0.0:
        return 0.0
    precision = tp / float(np.sum(pred))
    recall = tp / float(np.sum(true))
    return 2.0 * precision * recall / (precision + recall)


def test_mse_distribution(fam: ExponentialFamily, theta: NaturalParams,
                          data: RegressionDataset, n_beta: int,
                          rng: RngStream) -> np.ndarray:
    """Total squared test-set error for ``n_beta`` regression vectors drawn
    from the fitted distribution."""
    betas = fam.sample(theta, n_beta, rng)
    resid = data.y_test[None, :] - predict(betas, data.x_test)
    return np.sum(resid**2, axis=1)
