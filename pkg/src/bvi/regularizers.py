"""Closed-form Bregman proximal maps for the supported regularizers.

The proximal map acts on the mean parameters of the half-iterate (the
distribution being projected), so the loop-facing entry point takes
MeanParams directly; ``bregman_prox`` wraps it for callers holding natural
parameters. Supported pairings: the null regularizer with any family, the
eigenvalue box with the full-covariance Gaussian, and the weighted l1 mean
penalty with the diagonal family.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput, UnsupportedRegularizer
from .expfam import (CenteredGaussian1D, DiagGaussian, ExponentialFamily,
                     FullGaussian, MeanParams, NaturalParams, symmetrize)
from .numerics import sym_eigen

_EIGEN_TOL = 1e-10


class Regularizer:
    """Interface: penalty evaluation plus the Bregman proximal map."""

    kind: str

    def supports(self, fam: ExponentialFamily) -> bool:
        raise NotImplementedError

    def evaluate(self, fam: ExponentialFamily, theta: NaturalParams) -> float:
        """Penalty value at theta; +inf outside an indicator's set."""
        raise NotImplementedError

    def prox_from_moments(self, fam: ExponentialFamily, eta_half: MeanParams,
                          tau: float) -> NaturalParams:
        """Proximal step applied to the distribution with mean parameters
        eta_half, returned in natural parameters."""
        raise NotImplementedError

    def to_json(self) -> dict:
        raise NotImplementedError

    def _require_support(self, fam: ExponentialFamily) -> None:
        if not self.supports(fam):
            raise UnsupportedRegularizer(
                f"regularizer {self.kind!r} has no closed-form proximal map "
                f"for family {fam.kind!r}")


@dataclass(frozen=True)
class NullRegularizer(Regularizer):
    """r = 0: the proximal map is the identity on distributions."""

    kind = "null"

    def supports(self, fam: ExponentialFamily) -> bool:
        return True

    def evaluate(self, fam, theta) -> float:
        return 0.0

    def prox_from_moments(self, fam, eta_half, tau) -> NaturalParams:
        return fam.natural_from_moments(eta_half)

    def to_json(self) -> dict:
        return {"kind": self.kind}


@dataclass(frozen=True)
class EigenBox(Regularizer):
    """Indicator of precision matrices with eigenvalues in [b1, b2].

    The proximal map keeps the mean and the eigenbasis and clamps each
    precision eigenvalue into the box, so the output condition number is
    bounded by b2 / b1.
    """

    b1: float
    b2: float
    kind = "eigen_box"

    def __post_init__(self):
        if not (0.0 < self.b1 <= self.b2):
            raise InvalidInput("need 0 < b1 <= b2")

    def supports(self, fam: ExponentialFamily) -> bool:
        return isinstance(fam, FullGaussian)

    def evaluate(self, fam, theta) -> float:
        self._require_support(fam)
        lam = sym_eigen(-2.0 * theta.mat).eigenvalues
        if lam[0] >= self.b1 - _EIGEN_TOL and lam[-1] <= self.b2 + _EIGEN_TOL:
            return 0.0
        return np.inf

    def prox_from_moments(self, fam, eta_half, tau) -> NaturalParams:
        self._require_support(fam)
        mu = eta_half.vec
        cov = symmetrize(eta_half.mat - np.outer(mu, mu))
        svals, basis = sym_eigen(cov)
        with np.errstate(divide="ignore"):
            lam = np.where(svals != 0.0, 1.0 / svals, np.inf)
        clamped = np.clip(lam, self.b1, self.b2)
        cov_out = symmetrize(basis @ np.diag(1.0 / clamped) @ basis.T)
        return fam.from_mean_cov(mu, cov_out)

    def to_json(self) -> dict:
        return {"kind": self.kind, "b1": self.b1, "b2": self.b2}


@dataclass(frozen=True)
class SparseMeanL1(Regularizer):
    """Weighted l1 penalty on the first natural-parameter block of the
    diagonal family.

    The proximal map soft-thresholds each frame-coordinate of the mean at
    tau * eta_i and inflates the matching variance by the squared amount
    removed, which keeps the output strictly interior. With
    ``skip_index_0`` the first coordinate (a bias term) is exempt.
    """

    eta: np.ndarray
    skip_index_0: bool = False
    kind = "sparse_mean_l1"

    def __post_init__(self):
        object.__setattr__(self, "eta", np.atleast_1d(np.asarray(self.eta, dtype=float)))
        if np.any(self.eta < 0.0):
            raise InvalidInput("l1 weights must be nonnegative")
        self.eta.setflags(write=False)

    def supports(self, fam: ExponentialFamily) -> bool:
        return isinstance(fam, DiagGaussian)

    def _weights(self, d: int) -> np.ndarray:
        w = np.broadcast_to(self.eta, (d,)).copy() if self.eta.size in (1, d) else None
        if w is None:
            raise InvalidInput(f"l1 weight vector must have length 1 or {d}")
        if self.skip_index_0:
            w[0] = 0.0
        return w

    def evaluate(self, fam, theta) -> float:
        self._require_support(fam)
        return float(np.sum(self._weights(fam.dim) * np.abs(theta.vec)))

    def prox_from_moments(self, fam, eta_half, tau) -> NaturalParams:
        self._require_support(fam)
        u = eta_half.vec
        level = tau * self._weights(fam.dim)
        u_out = np.sign(u) * np.maximum(np.abs(u) - level, 0.0)
        # The second-moment block is conserved: the variance grows by exactly
        # the squared amount removed from the mean, u^2 - u_out^2.
        return fam.natural_from_moments(MeanParams(u_out, eta_half.mat))

    def to_json(self) -> dict:
        return {"kind": self.kind, "eta": self.eta.tolist(),
                "skip_index_0": self.skip_index_0}


def bregman_prox(reg: Regularizer, fam: ExponentialFamily,
                 theta_half: NaturalParams, tau: float) -> NaturalParams:
    """Proximal map of tau * r in the geometry of the log-partition,
    evaluated at the distribution q_{theta_half}."""
    if not 0.0 < tau <= 1.0:
        raise InvalidInput("step size must lie in (0, 1]")
    return reg.prox_from_moments(fam, fam.moments(theta_half), tau)


def regularizer_from_json(doc: dict) -> Regularizer:
    kind = doc.get("kind", "null")
    if kind == "null":
        return NullRegularizer()
    if kind == "eigen_box":
        return EigenBox(float(doc["b1"]), float(doc["b2"]))
    if kind == "sparse_mean_l1":
        return SparseMeanL1(np.asarray(doc["eta"], dtype=float),
                            bool(doc.get("skip_index_0", False)))
    raise InvalidInput(f"unknown regularizer kind {kind!r}")
