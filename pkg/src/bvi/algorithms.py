"""The three iterative schemes: exact proximal relaxed moment matching,
its Monte Carlo variant with non-linear importance weights, and the
Euclidean variational-bound baseline.

One run is strictly sequential; independent replicates each own an
RngStream. All weight arithmetic goes through log-space reductions, and a
run never aborts on weight degeneracy: it records a Diverged status
instead. Mean-parameter estimates that leave the dual domain are repaired
by eigenvalue flooring (counted per iteration) unless strict mode is
requested.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, Sequence

import numpy as np

from .divergences import (QuadratureGrid, bregman_gap, check_order,
                          in_family_geo_moments, renyi_in_family)
from .errors import DomainViolation, DualDomainViolation, InvalidInput
from .expfam import (ExponentialFamily, MeanParams, NaturalParams, inner,
                     symmetrize)
from .numerics import RngStream, log_sum_exp, sym_eigen
from .regularizers import NullRegularizer, Regularizer
from .targets import Target

_FLOOR_REL = 1e-8  # dual-domain repair floors eigenvalues at this fraction of the largest


@dataclass(frozen=True)
class Schedule:
    """Step sizes, per-iteration sample sizes, and the stopping rule.

    ``stop_tol`` compares the Bregman gap between consecutive iterates;
    the default 0.0 stops only at exact stationarity, so runs go the full
    ``max_iters`` in practice. None disables stopping entirely.
    """

    tau: float | Sequence[float] = 0.5
    n_samples: int | Sequence[int] = 500
    max_iters: int = 100
    stop_tol: Optional[float] = 0.0

    def __post_init__(self):
        if self.max_iters < 1:
            raise InvalidInput("max_iters must be >= 1")
        if self.stop_tol is not None and self.stop_tol < 0.0:
            raise InvalidInput("stop_tol must be >= 0")

    @staticmethod
    def _as_list(value) -> list:
        if isinstance(value, (int, float, np.integer, np.floating)):
            return [value]
        return list(value)

    def tau_at(self, k: int) -> float:
        taus = self._as_list(self.tau)
        return float(taus[min(k, len(taus) - 1)])

    def n_at(self, k: int) -> int:
        ns = self._as_list(self.n_samples)
        return int(ns[min(k, len(ns) - 1)])

    def validate_tau(self, upper: Optional[float]) -> None:
        for t in self._as_list(self.tau):
            if t <= 0.0 or (upper is not None and t > upper):
                bound = f"(0, {upper}]" if upper is not None else "(0, inf)"
                raise InvalidInput(f"step size {t} outside {bound}")

    def validate_n(self, minimum: int) -> None:
        for n in self._as_list(self.n_samples):
            if n < minimum:
                raise InvalidInput(f"sample size {n} below the minimum {minimum}")


@dataclass(frozen=True)
class WeightedBatch:
    """A weighted sample: draws, log-weights alpha * (log pi - log q),
    their normalized counterparts, and the effective sample size."""

    samples: np.ndarray
    log_weights: np.ndarray
    normalized_weights: np.ndarray
    ess: float

    @classmethod
    def from_log_weights(cls, samples: np.ndarray,
                         log_weights: np.ndarray) -> "WeightedBatch":
        total = log_sum_exp(log_weights)
        if not np.isfinite(total):
            raise InvalidInput("weights do not normalize (all -inf?)")
        normalized = np.exp(log_weights - total)
        ess = 1.0 / float(np.sum(normalized**2))
        return cls(samples, log_weights, normalized, ess)


def renyi_bound_estimate(batch: WeightedBatch, alpha: float) -> float:
    """Sample estimate of the variational bound: the log of the average
    unnormalized weight, divided by alpha."""
    alpha = check_order(alpha)
    n = batch.log_weights.shape[0]
    return float((log_sum_exp(batch.log_weights) - np.log(n)) / alpha)


class Status(str, Enum):
    CONVERGED = "converged"
    MAX_ITERS = "max_iters"
    DIVERGED = "diverged"


@dataclass
class IterationRecord:
    k: int
    theta: NaturalParams
    objective: float = np.nan
    renyi_bound: float = np.nan
    da_gap: float = np.nan
    ess: float = np.nan
    prox_active: bool = False
    dual_domain_repairs: int = 0

    def param_norm(self) -> float:
        return self.theta.norm()


@dataclass
class RunTrace:
    """Per-iteration records plus the terminal status."""

    family: ExponentialFamily
    records: list[IterationRecord] = field(default_factory=list)
    status: Status = Status.MAX_ITERS

    @property
    def thetas(self) -> list[NaturalParams]:
        return [r.theta for r in self.records]

    @property
    def final_theta(self) -> NaturalParams:
        return self.records[-1].theta

    @property
    def total_repairs(self) -> int:
        return sum(r.dual_domain_repairs for r in self.records)

    def to_rows(self) -> list[dict]:
        return [
            {
                "k": r.k,
                "objective": r.objective,
                "renyi_bound": r.renyi_bound,
                "da_gap": r.da_gap,
                "ess": r.ess,
                "prox_active": int(r.prox_active),
                "dual_domain_repairs": r.dual_domain_repairs,
                "param_norm": r.param_norm(),
            }
            for r in self.records
        ]

    def to_json(self, include_params: bool = False) -> dict:
        doc = {"status": self.status.value, "family": self.family.to_json(),
               "iterations": []}
        for r in self.records:
            entry = {
                "k": r.k,
                "objective": _jsonable(r.objective),
                "renyi_bound": _jsonable(r.renyi_bound),
                "da_gap": _jsonable(r.da_gap),
                "ess": _jsonable(r.ess),
                "prox_active": bool(r.prox_active),
                "dual_domain_repairs": r.dual_domain_repairs,
            }
            if include_params:
                entry["theta"] = self.family.params_to_json(r.theta)
                mu, cov = self.family.mean_cov(r.theta)
                entry["mean"] = mu.tolist()
                entry["cov"] = cov.tolist()
            doc["iterations"].append(entry)
        return doc

    def save_json(self, path, include_params: bool = False) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(include_params=include_params), fh)


def _jsonable(x: float):
    x = float(x)
    return x if np.isfinite(x) else None


# ---------------------------------------------------------------------------
# Geometric-average moment providers for the exact algorithm
# ---------------------------------------------------------------------------


class InFamilyGeoAverage:
    """Closed-form provider when the target is q_{theta_pi}: geometric
    averages stay in the family at the parameter blend, and the objective
    is available exactly."""

    def __init__(self, fam: ExponentialFamily, alpha: float, theta_pi: NaturalParams):
        self.fam = fam
        self.alpha = check_order(alpha)
        self.theta_pi = theta_pi
        self._moments = in_family_geo_moments(fam, self.alpha, theta_pi)

    def geo_moments(self, theta: NaturalParams) -> MeanParams:
        return self._moments(theta)

    def objective(self, theta: NaturalParams) -> float:
        return renyi_in_family(self.fam, self.alpha, self.theta_pi, theta)


class QuadratureGeoAverage:
    """Simpson-quadrature provider for one-dimensional black-box targets."""

    def __init__(self, fam: ExponentialFamily, alpha: float, target: Target,
                 grid: QuadratureGrid):
        if fam.dim != 1 or target.dim != 1:
            raise InvalidInput("quadrature provider is one-dimensional only")
        self.fam = fam
        self.alpha = check_order(alpha)
        self.target = target
        self.grid = grid

    def _log_blend(self, theta: NaturalParams, xs: np.ndarray) -> np.ndarray:
        lp = self.target.log_values(xs[:, None])
        lq = self.fam.log_density_batch(theta, xs[:, None])
        return self.alpha * lp + (1.0 - self.alpha) * lq

    def geo_moments(self, theta: NaturalParams) -> MeanParams:
        xs = self.grid.points
        g = self._log_blend(theta, xs)
        c = np.max(g)
        w = self.grid.weights * np.exp(g - c)
        total = float(np.sum(w))
        stats = self.fam.weighted_suff_mean(xs[:, None], w)
        return MeanParams(stats.vec / total, stats.mat / total)

    def objective(self, theta: NaturalParams) -> float:
        # Divergence between the normalized target and q_theta on the grid.
        xs = self.grid.points
        lp = self.target.log_values(xs[:, None])
        log_z = log_sum_exp(np.log(self.grid.weights) + lp)
        lq = self.fam.log_density_batch(theta, xs[:, None])
        if self.alpha == 1.0:
            p = np.exp(lp - log_z)
            terms = np.where(p > 0.0, (lp - log_z - lq) * p, 0.0)
            return float(np.sum(self.grid.weights * terms))
        g = self.alpha * (lp - log_z) + (1.0 - self.alpha) * lq
        return float(log_sum_exp(np.log(self.grid.weights) + g) / (self.alpha - 1.0))


# ---------------------------------------------------------------------------
# Exact algorithm
# ---------------------------------------------------------------------------


def prmm_exact(fam: ExponentialFamily, provider, reg: Regularizer,
               alpha: float, schedule: Schedule,
               theta0: NaturalParams) -> RunTrace:
    """Deterministic proximal relaxed moment matching.

    Each iteration blends the geometric-average moments into the current
    moments with weight tau and applies the closed-form proximal map.
    Requires alpha in (0, 1]; stops at ``max_iters`` or when the Bregman
    gap between consecutive iterates drops to ``stop_tol``.
    """
    alpha = check_order(alpha)
    if alpha > 1.0:
        raise InvalidInput("the exact scheme requires alpha in (0, 1]")
    schedule.validate_tau(upper=1.0)
    if not fam.in_domain(theta0):
        raise InvalidInput("theta0 outside the family domain")

    def objective(theta: NaturalParams) -> float:
        f = provider.objective(theta)
        return f + reg.evaluate(fam, theta)

    trace = RunTrace(family=fam)
    theta = theta0
    for k in range(schedule.max_iters):
        tau = schedule.tau_at(k)
        geo = provider.geo_moments(theta)
        eta_half = tau * geo + (1.0 - tau) * fam.moments(theta)
        theta_next = reg.prox_from_moments(fam, eta_half, tau)
        gap = max(bregman_gap(fam, theta, theta_next), 0.0)
        trace.records.append(IterationRecord(
            k=k, theta=theta, objective=objective(theta), da_gap=gap,
            prox_active=_prox_moved(fam, eta_half, theta_next, reg)))
        if schedule.stop_tol is not None and gap <= schedule.stop_tol:
            trace.status = Status.CONVERGED
            return trace
        theta = theta_next
    trace.records.append(IterationRecord(
        k=schedule.max_iters, theta=theta, objective=objective(theta)))
    trace.status = Status.MAX_ITERS
    return trace


def _prox_moved(fam: ExponentialFamily, eta_half, theta_next: NaturalParams,
                reg: Regularizer) -> bool:
    """Whether the proximal step changed the half-iterate distribution."""
    if isinstance(reg, NullRegularizer):
        return False
    out = fam.moments(theta_next)
    return not (np.allclose(out.vec, eta_half.vec, rtol=1e-8, atol=1e-12)
                and np.allclose(out.mat, eta_half.mat, rtol=1e-8, atol=1e-12))


# ---------------------------------------------------------------------------
# Monte Carlo algorithms
# ---------------------------------------------------------------------------


def _draw_batch(fam: ExponentialFamily, target: Target, alpha: float,
                theta: NaturalParams, n: int, rng: RngStream) -> Optional[WeightedBatch]:
    """Sample from q_theta and weight by the alpha-power importance ratio.
    Returns None when every weight vanishes."""
    xs = fam.sample(theta, n, rng)
    lw = alpha * (target.log_values(xs) - fam.log_density_batch(theta, xs))
    if np.max(lw) == -np.inf:
        return None
    return WeightedBatch.from_log_weights(xs, lw)


def _repair_mean_params(fam: ExponentialFamily, eta: MeanParams) -> MeanParams:
    """Floor the covariance block so the estimate re-enters the dual
    domain: eigenvalues (or per-coordinate variances) are raised to a small
    fraction of the largest one. The floor never drops below the round-off
    scale of the second-moment block, so a fully collapsed estimate still
    repairs to a usable point."""
    noise_scale = 1e-10 * (1.0 + float(np.sum(eta.vec**2)))
    if eta.vec.size and eta.mat.ndim == 2:
        mu = eta.vec
        cov = symmetrize(eta.mat - np.outer(mu, mu))
        svals, basis = sym_eigen(cov)
        floor = max(_FLOOR_REL * float(svals[-1]), noise_scale)
        fixed = np.maximum(svals, floor)
        cov_fixed = symmetrize(basis @ np.diag(fixed) @ basis.T)
        return MeanParams(mu, cov_fixed + np.outer(mu, mu))
    var = eta.mat - eta.vec**2 if eta.vec.size else eta.mat.copy()
    floor = max(_FLOOR_REL * float(np.max(var)), noise_scale)
    var_fixed = np.maximum(var, floor)
    m2 = var_fixed + eta.vec**2 if eta.vec.size else var_fixed
    return MeanParams(eta.vec, m2)


def mc_prmm(fam: ExponentialFamily, target: Target, reg: Regularizer,
            alpha: float, schedule: Schedule, theta0: NaturalParams,
            rng: RngStream, repair: str = "eigen_floor",
            theta_pi: Optional[NaturalParams] = None) -> RunTrace:
    """Monte Carlo proximal relaxed moment matching with non-linear
    importance weights.

    Per iteration: sample the current proposal, weight by the alpha-power
    importance ratio normalized in log space, blend the weighted statistic
    mean into the current moments, then apply the proximal map. Estimates
    leaving the dual domain are repaired (counted) or, with
    ``repair='strict'``, raised as DualDomainViolation. ``theta_pi`` adds
    the exact in-family objective to the trace when the target lies in the
    family. Convergence guarantees cover alpha in (0, 1]; larger orders are
    accepted but come with no such backing.
    """
    alpha = check_order(alpha)
    schedule.validate_tau(upper=1.0)
    schedule.validate_n(minimum=2)
    if repair not in ("eigen_floor", "strict"):
        raise InvalidInput("repair must be 'eigen_floor' or 'strict'")
    if not fam.in_domain(theta0):
        raise InvalidInput("theta0 outside the family domain")

    def objective(theta: NaturalParams) -> float:
        if theta_pi is None:
            return np.nan
        try:
            f = renyi_in_family(fam, alpha, theta_pi, theta)
        except DomainViolation:
            return np.inf
        return f + reg.evaluate(fam, theta)

    trace = RunTrace(family=fam)
    theta = theta0
    for k in range(schedule.max_iters):
        tau = schedule.tau_at(k)
        n = schedule.n_at(k)
        batch = _draw_batch(fam, target, alpha, theta, n, rng)
        if batch is None:
            trace.records.append(IterationRecord(
                k=k, theta=theta, objective=objective(theta),
                renyi_bound=-np.inf))
            trace.status = Status.DIVERGED
            return trace
        bound = renyi_bound_estimate(batch, alpha) + target.log_shift
        stat_mean = fam.weighted_suff_mean(batch.samples, batch.normalized_weights)
        eta_half = tau * stat_mean + (1.0 - tau) * fam.moments(theta)
        repairs = 0
        if not fam.in_dual_domain(eta_half):
            if repair == "strict":
                raise DualDomainViolation(
                    f"moment estimate left the dual domain at iteration {k}")
            eta_half = _repair_mean_params(fam, eta_half)
            repairs = 1
        theta_next = reg.prox_from_moments(fam, eta_half, tau)
        gap = max(bregman_gap(fam, theta, theta_next), 0.0)
        trace.records.append(IterationRecord(
            k=k, theta=theta, objective=objective(theta), renyi_bound=bound,
            da_gap=gap, ess=batch.ess, dual_domain_repairs=repairs,
            prox_active=_prox_moved(fam, eta_half, theta_next, reg)))
        if schedule.stop_tol is not None and gap <= schedule.stop_tol:
            trace.status = Status.CONVERGED
            return trace
        theta = theta_next
    # Diagnostic batch so the final iterate carries bound and ess estimates.
    final_batch = _draw_batch(fam, target, alpha, theta,
                              schedule.n_at(schedule.max_iters - 1), rng)
    final = IterationRecord(k=schedule.max_iters, theta=theta,
                            objective=objective(theta))
    if final_batch is not None:
        final.renyi_bound = renyi_bound_estimate(final_batch, alpha) + target.log_shift
        final.ess = final_batch.ess
    trace.records.append(final)
    trace.status = Status.MAX_ITERS
    return trace


def vrb(fam: ExponentialFamily, target: Target, alpha: float,
        schedule: Schedule, theta0: NaturalParams, rng: RngStream) -> RunTrace:
    """Euclidean ascent on the variational bound: a plain gradient step in
    natural-parameter coordinates using the same weighted-sample gradient
    estimate as the Monte Carlo scheme.

    Steps may leave the parameter domain; the run then stops with a
    Diverged status (recorded, not raised). Step sizes are unrestricted
    above zero. Requires alpha in (0, 1).
    """
    alpha = check_order(alpha)
    if not 0.0 < alpha < 1.0:
        raise InvalidInput("the bound ascent requires alpha in (0, 1)")
    schedule.validate_tau(upper=None)
    schedule.validate_n(minimum=2)
    if not fam.in_domain(theta0):
        raise InvalidInput("theta0 outside the family domain")

    trace = RunTrace(family=fam)
    theta = theta0
    for k in range(schedule.max_iters):
        tau = schedule.tau_at(k)
        n = schedule.n_at(k)
        batch = _draw_batch(fam, target, alpha, theta, n, rng)
        if batch is None:
            trace.records.append(IterationRecord(
                k=k, theta=theta, renyi_bound=-np.inf))
            trace.status = Status.DIVERGED
            return trace
        bound = renyi_bound_estimate(batch, alpha) + target.log_shift
        stat_mean = fam.weighted_suff_mean(batch.samples, batch.normalized_weights)
        step = stat_mean - fam.moments(theta)
        theta_next = NaturalParams(theta.vec + tau * step.vec,
                                   theta.mat + tau * step.mat)
        if not fam.in_domain(theta_next):
            trace.records.append(IterationRecord(
                k=k, theta=theta, renyi_bound=bound, ess=batch.ess))
            trace.status = Status.DIVERGED
            return trace
        gap = max(bregman_gap(fam, theta, theta_next), 0.0)
        trace.records.append(IterationRecord(
            k=k, theta=theta, renyi_bound=bound, da_gap=gap, ess=batch.ess))
        if schedule.stop_tol is not None and gap <= schedule.stop_tol:
            trace.status = Status.CONVERGED
            return trace
        theta = theta_next
    final_batch = _draw_batch(fam, target, alpha, theta,
                              schedule.n_at(schedule.max_iters - 1), rng)
    final = IterationRecord(k=schedule.max_iters, theta=theta)
    if final_batch is not None:
        final.renyi_bound = renyi_bound_estimate(final_batch, alpha) + target.log_shift
        final.ess = final_batch.ess
    trace.records.append(final)
    trace.status = Status.MAX_ITERS
    return trace


def mc_gradient_estimate(fam: ExponentialFamily, target: Target, alpha: float,
                         theta: NaturalParams, n: int, rng: RngStream):
    """One weighted-sample gradient estimate: (moments(theta) - weighted
    statistic mean, batch). Shared by both Monte Carlo schemes, so with a
    common stream the bound-ascent step direction and the moment-matching
    blend direction agree by construction."""
    batch = _draw_batch(fam, target, check_order(alpha), theta, n, rng)
    if batch is None:
        return None, None
    stat_mean = fam.weighted_suff_mean(batch.samples, batch.normalized_weights)
    return fam.moments(theta) - stat_mean, batch
