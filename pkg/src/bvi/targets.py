"""Black-box targets: conditioned Gaussians and the sigmoid-regression
posterior with spike-and-slab ground truth.

A target exposes only an unnormalized log-density; no normalizer is ever
required. Constant rescalings of the target are carried symbolically in
``log_shift`` so that weight normalization cancels them exactly, bit for
bit; only absolute quantities (the variational bound) see the shift.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .errors import InvalidInput
from .expfam import FullGaussian, NaturalParams
from .numerics import RngStream, symmetrize


@dataclass(frozen=True)
class GroundTruth:
    """Whatever is known about the target: moment-space parameters for
    Gaussian targets, a regression vector for posteriors."""

    mu_bar: Optional[np.ndarray] = None
    sigma_bar: Optional[np.ndarray] = None
    theta_pi: Optional[NaturalParams] = None
    family_kind: Optional[str] = None
    beta_bar: Optional[np.ndarray] = None


@dataclass(frozen=True)
class Target:
    """Unnormalized log-density on R^d.

    ``log_unnormalized`` accepts an (n, d) batch and returns length-n
    values; ``log_shift`` is an additive constant tracked separately.
    """

    log_unnormalized: Callable[[np.ndarray], np.ndarray]
    dim: int
    ground_truth: Optional[GroundTruth] = None
    log_shift: float = 0.0

    def log_values(self, xs: np.ndarray) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        if xs.ndim == 1:
            xs = xs[None, :] if self.dim > 1 else xs[:, None]
        if xs.shape[1] != self.dim:
            raise InvalidInput(f"target expects points of dimension {self.dim}")
        return np.asarray(self.log_unnormalized(xs), dtype=float)

    def shifted(self, log_constant: float) -> "Target":
        """The target rescaled by exp(log_constant)."""
        return replace(self, log_shift=self.log_shift + float(log_constant))


# ---------------------------------------------------------------------------
# Conditioned Gaussian targets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GaussianTargetSpec:
    """Gaussian target with prescribed condition number.

    The mean is uniform in the centered box of half-width ``mean_box``;
    covariance eigenvalues are log-spaced in [kappa^-1/2, kappa^1/2] in a
    random orthonormal basis, so the condition number is exactly kappa.
    """

    d: int
    kappa: float = 1.0
    mean_box: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.d < 1:
            raise InvalidInput("dimension must be >= 1")
        if self.kappa < 1.0:
            raise InvalidInput("condition number must be >= 1")


def _random_orthonormal(d: int, rng: RngStream) -> np.ndarray:
    a = rng.standard_normal((d, d))
    q, r = np.linalg.qr(a)
    return q * np.sign(np.diag(r))


def make_gaussian_target(spec: GaussianTargetSpec,
                         rng: RngStream | None = None) -> Target:
    """Unnormalized Gaussian exp(-1/2 (x - mu)^T Sigma^-1 (x - mu)) with
    cond(Sigma) = kappa; carries full in-family ground truth."""
    rng = rng if rng is not None else RngStream(spec.seed, 0)
    d = spec.d
    mu = rng.uniform(-spec.mean_box, spec.mean_box, d)
    lam = np.logspace(-0.5 * np.log10(spec.kappa), 0.5 * np.log10(spec.kappa), d)
    basis = _random_orthonormal(d, rng)
    sigma = symmetrize(basis @ np.diag(lam) @ basis.T)
    prec = symmetrize(basis @ np.diag(1.0 / lam) @ basis.T)

    def log_unnorm(xs: np.ndarray) -> np.ndarray:
        delta = xs - mu
        return -0.5 * np.einsum("ni,ij,nj->n", delta, prec, delta)

    fam = FullGaussian(d)
    truth = GroundTruth(
        mu_bar=mu,
        sigma_bar=sigma,
        theta_pi=fam.from_mean_cov(mu, sigma),
        family_kind=fam.kind,
    )
    return Target(log_unnormalized=log_unnorm, dim=d, ground_truth=truth)


# ---------------------------------------------------------------------------
# Sigmoid regression posterior
# ---------------------------------------------------------------------------


def sigmoid(s: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function."""
    s = np.asarray(s, dtype=float)
    out = np.empty_like(s)
    pos = s >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-s[pos]))
    es = np.exp(s[~pos])
    out[~pos] = es / (1.0 + es)
    return out


@dataclass(frozen=True)
class RegressionDataset:
    """Synthetic one-hidden-unit regression data.

    ``beta_bar`` has d + 1 entries, index 0 being the bias; among indices
    1..d there is at least one exact zero and one non-zero (enforced by
    resampling at generation time).
    """

    x_train: np.ndarray
    y_train: np.ndarray
    x_test: np.ndarray
    y_test: np.ndarray
    beta_bar: np.ndarray
    sigma2: float
    s: float
    rho: float
    seed: int = 0

    @property
    def d(self) -> int:
        return self.x_train.shape[1]

    def to_json(self) -> dict:
        return {
            "x_train": self.x_train.tolist(),
            "y_train": self.y_train.tolist(),
            "x_test": self.x_test.tolist(),
            "y_test": self.y_test.tolist(),
            "beta_bar": self.beta_bar.tolist(),
            "sigma2": self.sigma2,
            "s": self.s,
            "rho": self.rho,
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "RegressionDataset":
        return cls(
            x_train=np.asarray(doc["x_train"], dtype=float),
            y_train=np.asarray(doc["y_train"], dtype=float),
            x_test=np.asarray(doc["x_test"], dtype=float),
            y_test=np.asarray(doc["y_test"], dtype=float),
            beta_bar=np.asarray(doc["beta_bar"], dtype=float),
            sigma2=float(doc["sigma2"]),
            s=float(doc["s"]),
            rho=float(doc["rho"]),
            seed=int(doc.get("seed", 0)),
        )

    def save_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh)

    def save_csv(self, path) -> None:
        """Feature columns, response, and a train/test split tag."""
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([f"x{i + 1}" for i in range(self.d)] + ["y", "split"])
            for xs, ys, tag in ((self.x_train, self.y_train, "train"),
                                (self.x_test, self.y_test, "test")):
                for row, y in zip(xs, ys):
                    writer.writerow([repr(v) for v in row] + [repr(float(y)), tag])


def predict(beta: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """Sigmoid readout phi(beta_0 + x . beta_1:), batched over rows of beta
    (if 2-D) and over rows of xs."""
    beta = np.asarray(beta, dtype=float)
    xs = np.asarray(xs, dtype=float)
    if beta.ndim == 1:
        return sigmoid(beta[0] + xs @ beta[1:])
    return sigmoid(beta[:, :1] + beta[:, 1:] @ xs.T)


def _sample_beta_bar(d: int, rho: float, rng: RngStream) -> np.ndarray:
    beta = np.empty(d + 1)
    beta[0] = rng.standard_normal(())
    zero = rng.uniform(0.0, 1.0, d) < rho
    slab = rng.standard_normal(d)
    beta[1:] = np.where(zero, 0.0, slab)
    return beta


def make_regression_dataset(d: int, n_train: int, n_test: int, sigma2: float,
                            s: float, rho: float, rng: RngStream) -> RegressionDataset:
    """Draw a spike-and-slab regression vector and synthetic observations.

    The regression vector is resampled until indices 1..d hold at least
    one zero and one non-zero, so rho in {0, 1} is rejected.
    """
    if min(d, n_train, n_test) < 1:
        raise InvalidInput("all sizes must be >= 1")
    if sigma2 <= 0.0:
        raise InvalidInput("noise variance must be positive")
    if not 0.0 < rho < 1.0:
        raise InvalidInput("spike probability must lie strictly between 0 and 1")
    while True:
        beta_bar = _sample_beta_bar(d, rho, rng)
        inner_part = beta_bar[1:]
        if np.any(inner_part == 0.0) and np.any(inner_part != 0.0):
            break
    noise_sd = float(np.sqrt(sigma2))
    x_train = rng.uniform(-s, s, (n_train, d))
    y_train = predict(beta_bar, x_train) + noise_sd * rng.standard_normal(n_train)
    x_test = rng.uniform(-s, s, (n_test, d))
    y_test = predict(beta_bar, x_test) + noise_sd * rng.standard_normal(n_test)
    return RegressionDataset(x_train, y_train, x_test, y_test, beta_bar,
                             float(sigma2), float(s), float(rho), rng.seed)


def regression_log_posterior(data: RegressionDataset, beta: np.ndarray) -> np.ndarray:
    """Unnormalized log-posterior of the regression vector: Gaussian
    likelihood of the train responses under the sigmoid readout times a
    standard normal prior, constants dropped."""
    beta = np.asarray(beta, dtype=float)
    single = beta.ndim == 1
    betas = beta[None, :] if single else beta
    if betas.shape[1] != data.d + 1:
        raise InvalidInput(f"regression vector must have {data.d + 1} entries")
    resid = data.y_train[None, :] - predict(betas, data.x_train)
    loglik = -np.sum(resid**2, axis=1) / (2.0 * data.sigma2)
    logprior = -0.5 * np.sum(betas**2, axis=1)
    out = loglik + logprior
    return float(out[0]) if single else out


def make_regression_target(data: RegressionDataset) -> Target:
    """Posterior target over the (d + 1)-dimensional regression vector."""
    truth = GroundTruth(beta_bar=data.beta_bar)
    return Target(
        log_unnormalized=lambda xs: regression_log_posterior(data, xs),
        dim=data.d + 1,
        ground_truth=truth,
    )
