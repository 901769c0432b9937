"""Closed-form divergences within a family, the in-family geometric
average, gradients of the objective, and an independent one-dimensional
Simpson quadrature oracle used as ground truth in tests.

Argument order follows the divergence definitions: ``kl_in_family(a, b)``
is KL(q_a, q_b) and ``renyi_in_family(alpha, pi, theta)`` is the order-alpha
divergence from q_pi to q_theta. Order alpha = 1 dispatches exactly to the
KL branch everywhere; no epsilon-limit evaluation is performed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DomainViolation, InvalidInput, OracleFailure
from .expfam import Blocks, ExponentialFamily, MeanParams, NaturalParams, inner
from .numerics import log_sum_exp


def check_order(alpha: float) -> float:
    alpha = float(alpha)
    if not np.isfinite(alpha) or alpha <= 0.0:
        raise InvalidInput("the divergence order must be a positive real")
    return alpha


def bregman_gap(fam: ExponentialFamily, theta_a: NaturalParams,
                theta_b: NaturalParams) -> float:
    """d_A(theta_a, theta_b): the gap between the log-partition and its
    linearization at theta_b, evaluated at theta_a."""
    return float(
        fam.log_partition(theta_a)
        - fam.log_partition(theta_b)
        - inner(fam.moments(theta_b), theta_a - theta_b)
    )


def kl_in_family(fam: ExponentialFamily, theta_a: NaturalParams,
                 theta_b: NaturalParams) -> float:
    """KL(q_a, q_b), equal to the Bregman gap d_A(theta_b, theta_a)."""
    return bregman_gap(fam, theta_b, theta_a)


def geometric_average_in_family(fam: ExponentialFamily, alpha: float,
                                theta_pi: NaturalParams,
                                theta: NaturalParams) -> NaturalParams:
    """Natural parameters of the geometric average between q_pi and
    q_theta: the blend alpha * theta_pi + (1 - alpha) * theta.

    For alpha > 1 the blend can leave the domain; DomainViolation then.
    alpha = 0 returns theta (boundary convention, used only in tests).
    """
    alpha = float(alpha)
    blend = NaturalParams(
        alpha * theta_pi.vec + (1.0 - alpha) * theta.vec,
        alpha * theta_pi.mat + (1.0 - alpha) * theta.mat,
    )
    if not fam.in_domain(blend):
        raise DomainViolation("geometric-average blend left the domain")
    return blend


def renyi_in_family(fam: ExponentialFamily, alpha: float,
                    theta_pi: NaturalParams, theta: NaturalParams) -> float:
    """Order-alpha divergence from q_pi to q_theta, in closed form through
    the log-partition at the blend."""
    alpha = check_order(alpha)
    if alpha == 1.0:
        return kl_in_family(fam, theta_pi, theta)
    blend = geometric_average_in_family(fam, alpha, theta_pi, theta)
    value = (
        alpha * fam.log_partition(theta_pi)
        + (1.0 - alpha) * fam.log_partition(theta)
        - fam.log_partition(blend)
    ) / (1.0 - alpha)
    return float(value)


def in_family_geo_moments(fam: ExponentialFamily, alpha: float,
                          theta_pi: NaturalParams) -> Callable[[NaturalParams], MeanParams]:
    """Provider of the geometric-average moments for an in-family target."""
    alpha = check_order(alpha)

    def provider(theta: NaturalParams) -> MeanParams:
        if alpha == 1.0:
            return fam.moments(theta_pi)
        return fam.moments(geometric_average_in_family(fam, alpha, theta_pi, theta))

    return provider


def grad_f(fam: ExponentialFamily, alpha: float,
           pi_moments_provider: Callable[[NaturalParams], MeanParams],
           theta: NaturalParams) -> Blocks:
    """Gradient of the order-alpha objective: the moment gap between
    q_theta and the geometric average supplied by the provider."""
    check_order(alpha)
    return fam.moments(theta) - pi_moments_provider(theta)


def hessian_f_1d(alpha: float, theta_pi: float, theta: float) -> float:
    """Second derivative of the objective for the centered 1-D family with
    an in-family target, in closed form. Blows up near 0 and, for
    alpha > 1, near the blend boundary alpha/(alpha-1) * theta_pi."""
    alpha = check_order(alpha)
    theta = float(theta)
    theta_pi = float(theta_pi)
    if theta >= 0.0 or theta_pi >= 0.0:
        raise DomainViolation("parameters must be negative")
    if alpha == 1.0:
        return 1.0 / (2.0 * theta**2)
    if alpha > 1.0 and theta <= alpha / (alpha - 1.0) * theta_pi:
        raise DomainViolation("theta outside the objective domain")
    denom = (alpha - 1.0) * theta - alpha * theta_pi
    return 1.0 / (2.0 * theta**2) + (alpha - 1.0) / (2.0 * denom**2)


# ---------------------------------------------------------------------------
# Quadrature oracle
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuadratureGrid:
    """Uniform grid with Simpson weights on [lower, upper]."""

    lower: float
    upper: float
    n_points: int = 20001

    def __post_init__(self):
        if not (self.lower < self.upper):
            raise InvalidInput("need lower < upper")
        if self.n_points < 3 or self.n_points % 2 == 0:
            raise InvalidInput("n_points must be odd and >= 3")

    @property
    def points(self) -> np.ndarray:
        return np.linspace(self.lower, self.upper, self.n_points)

    @property
    def weights(self) -> np.ndarray:
        h = (self.upper - self.lower) / (self.n_points - 1)
        w = np.full(self.n_points, 2.0)
        w[1::2] = 4.0
        w[0] = w[-1] = 1.0
        return w * (h / 3.0)


def gaussian_grid(means, sigmas, half_width: float = 12.0,
                  n_points: int = 20001) -> QuadratureGrid:
    """Grid covering the union of mu +- half_width * sigma over the given
    one-dimensional Gaussians."""
    means = np.atleast_1d(np.asarray(means, dtype=float))
    sigmas = np.atleast_1d(np.asarray(sigmas, dtype=float))
    lo = float(np.min(means - half_width * sigmas))
    hi = float(np.max(means + half_width * sigmas))
    return QuadratureGrid(lo, hi, n_points)


def _eval_log_integrand(fn, xs: np.ndarray) -> np.ndarray:
    vals = np.asarray(fn(xs), dtype=float)
    if vals.shape != xs.shape:
        vals = np.array([fn(float(x)) for x in xs], dtype=float)
    if np.any(np.isnan(vals)) or np.any(vals == np.inf):
        raise OracleFailure("non-finite log-integrand on the grid")
    return vals


def quadrature_log_integral_exp(log_fn, grid: QuadratureGrid) -> float:
    """log of the Simpson integral of exp(log_fn), reduced in log space."""
    xs = grid.points
    vals = _eval_log_integrand(log_fn, xs)
    return log_sum_exp(np.log(grid.weights) + vals)


def quadrature_renyi(p_logpdf, q_logpdf, alpha: float,
                     grid: QuadratureGrid) -> float:
    """Order-alpha divergence between two one-dimensional densities given
    by their log-pdfs, via Simpson integration. The alpha = 1 branch
    integrates (log p - log q) p directly."""
    alpha = check_order(alpha)
    xs = grid.points
    lp = _eval_log_integrand(p_logpdf, xs)
    lq = _eval_log_integrand(q_logpdf, xs)
    if alpha == 1.0:
        p = np.exp(lp)
        terms = np.where(p > 0.0, (lp - lq) * p, 0.0)
        if np.any(np.isnan(terms)) or np.any(np.isinf(terms)):
            raise OracleFailure("non-finite KL integrand on the grid")
        return float(np.sum(grid.weights * terms))
    g = np.where(lp == -np.inf, -np.inf, alpha * lp + (1.0 - alpha) * lq)
    log_integral = log_sum_exp(np.log(grid.weights) + g)
    return float(log_integral / (alpha - 1.0))
