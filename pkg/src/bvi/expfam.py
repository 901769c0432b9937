"""Exponential families in natural and mean parametrization.

Three Gaussian families are provided: full covariance, diagonal covariance
in a fixed orthonormal frame Q, and one-dimensional centered. Parameters
live in the product space vector-block x matrix-block; the inner product is
the Euclidean one on the vector block plus the Frobenius one on the matrix
block. For the diagonal and centered families the matrix block is stored as
a plain vector, keeping per-coordinate updates O(d).

The natural-to-mean map is the gradient of the log-partition function; its
inverse is implemented in closed form per family. Domain membership of
natural parameters (precision positive definite) and of mean parameters
(second moment minus squared mean positive definite) is probed by Cholesky
or by sign checks for the vector-valued variants.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainViolation, DualDomainViolation, InvalidInput, NotPositiveDefinite
from .numerics import RngStream, cholesky, logdet_from_cholesky, symmetrize

_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True, eq=False)
class Blocks:
    """A point of the parameter space: vector block plus matrix block.

    The matrix block is a (d, d) symmetric array for the full-covariance
    family and a length-d (or length-1) vector for the diagonal variants.
    Arithmetic is blockwise, so instances double as tangent vectors.
    """

    vec: np.ndarray
    mat: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "vec", np.asarray(self.vec, dtype=float))
        object.__setattr__(self, "mat", np.asarray(self.mat, dtype=float))
        self.vec.setflags(write=False)
        self.mat.setflags(write=False)

    def __add__(self, other: "Blocks") -> "Blocks":
        return Blocks(self.vec + other.vec, self.mat + other.mat)

    def __sub__(self, other: "Blocks") -> "Blocks":
        return Blocks(self.vec - other.vec, self.mat - other.mat)

    def __mul__(self, c: float) -> "Blocks":
        return Blocks(c * self.vec, c * self.mat)

    __rmul__ = __mul__

    def norm(self) -> float:
        return float(np.sqrt(np.sum(self.vec**2) + np.sum(self.mat**2)))

    def allfinite(self) -> bool:
        return bool(np.all(np.isfinite(self.vec)) and np.all(np.isfinite(self.mat)))


class NaturalParams(Blocks):
    """Natural parameters theta = (theta1, theta2)."""


class MeanParams(Blocks):
    """Mean parameters eta = (m1, m2), the expected sufficient statistics."""


def inner(a: Blocks, b: Blocks) -> float:
    """Blockwise inner product: dot on the vector block, Frobenius on the
    matrix block."""
    return float(np.sum(a.vec * b.vec) + np.sum(a.mat * b.mat))


class ExponentialFamily:
    """Common interface of the three Gaussian families."""

    kind: str
    dim: int

    # -- parameter constructors (validating) --------------------------------

    def natural(self, theta1, theta2) -> NaturalParams:
        theta = NaturalParams(np.atleast_1d(theta1), theta2)
        self._check_shapes(theta)
        if not self.in_domain(theta):
            raise DomainViolation(f"{self.kind}: natural parameters outside the domain")
        return theta

    def mean(self, m1, m2) -> MeanParams:
        eta = MeanParams(np.atleast_1d(m1), m2)
        self._check_shapes(eta)
        if not self.in_dual_domain(eta):
            raise DualDomainViolation(f"{self.kind}: mean parameters outside the dual domain")
        return eta

    # -- family operations ---------------------------------------------------

    def suff_stats(self, x) -> MeanParams:
        """Sufficient statistics Gamma(x) in mean-parameter block layout."""
        raise NotImplementedError

    def weighted_suff_mean(self, xs: np.ndarray, weights: np.ndarray) -> MeanParams:
        """sum_l weights[l] * Gamma(xs[l]) for an (n, d) sample array."""
        raise NotImplementedError

    def log_partition(self, theta: NaturalParams) -> float:
        raise NotImplementedError

    def moments(self, theta: NaturalParams) -> MeanParams:
        """Gradient of the log-partition: the expected sufficient statistics."""
        raise NotImplementedError

    def natural_from_moments(self, eta: MeanParams) -> NaturalParams:
        """Inverse of :meth:`moments`."""
        raise NotImplementedError

    def log_density(self, theta: NaturalParams, x) -> float:
        x = self._as_point(x)
        return float(inner(theta, self.suff_stats(x)) - self.log_partition(theta))

    def log_density_batch(self, theta: NaturalParams, xs: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def sample(self, theta: NaturalParams, n: int, rng: RngStream) -> np.ndarray:
        """n draws from q_theta as an (n, dim) array."""
        raise NotImplementedError

    def in_domain(self, theta: Blocks) -> bool:
        raise NotImplementedError

    def in_dual_domain(self, eta: Blocks) -> bool:
        raise NotImplementedError

    # -- mean/covariance views -----------------------------------------------

    def mean_cov(self, theta: NaturalParams) -> tuple[np.ndarray, np.ndarray]:
        """(mu, Sigma) of q_theta, Sigma as a dense (d, d) matrix."""
        raise NotImplementedError

    def from_mean_cov(self, mu, cov) -> NaturalParams:
        raise NotImplementedError

    # -- serialization ---------------------------------------------------------

    def params_to_json(self, theta: NaturalParams) -> dict:
        doc = {
            "family": self.kind,
            "d": self.dim,
            "theta1": theta.vec.tolist(),
            "theta2": theta.mat.tolist(),
        }
        q = getattr(self, "frame", None)
        if q is not None:
            doc["Q"] = np.asarray(q).tolist()
        return doc

    def params_from_json(self, doc: dict) -> NaturalParams:
        if doc.get("family") != self.kind:
            raise InvalidInput(f"family mismatch: {doc.get('family')!r} vs {self.kind!r}")
        return self.natural(np.asarray(doc["theta1"]), np.asarray(doc["theta2"]))

    def to_json(self) -> dict:
        doc = {"family": self.kind, "d": self.dim}
        q = getattr(self, "frame", None)
        if q is not None:
            doc["Q"] = np.asarray(q).tolist()
        return doc

    # -- helpers ---------------------------------------------------------------

    def _as_point(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if x.shape != (self.dim,):
            raise InvalidInput(f"{self.kind}: expected a point of dimension {self.dim}")
        return x

    def _as_batch(self, xs) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        if xs.ndim == 1:
            xs = xs[None, :] if self.dim > 1 else xs[:, None]
        if xs.ndim != 2 or xs.shape[1] != self.dim:
            raise InvalidInput(f"{self.kind}: expected an (n, {self.dim}) sample array")
        return xs

    def _check_shapes(self, p: Blocks) -> None:
        raise NotImplementedError


class FullGaussian(ExponentialFamily):
    """Gaussians on R^d with dense covariance.

    theta1 = Sigma^-1 mu and theta2 = -1/2 Sigma^-1; the matrix block of the
    sufficient statistics is x x^T.
    """

    kind = "full_gaussian"

    def __init__(self, d: int):
        if d < 1:
            raise InvalidInput("dimension must be >= 1")
        self.dim = int(d)

    def _check_shapes(self, p: Blocks) -> None:
        d = self.dim
        if p.vec.shape != (d,) or p.mat.shape != (d, d):
            raise InvalidInput(f"full_gaussian(d={d}): bad block shapes "
                               f"{p.vec.shape}, {p.mat.shape}")

    def suff_stats(self, x) -> MeanParams:
        x = self._as_point(x)
        return MeanParams(x, np.outer(x, x))

    def weighted_suff_mean(self, xs, weights) -> MeanParams:
        xs = self._as_batch(xs)
        w = np.asarray(weights, dtype=float)
        m1 = w @ xs
        m2 = xs.T @ (w[:, None] * xs)
        return MeanParams(m1, symmetrize(m2))

    def _precision_chol(self, theta: Blocks) -> np.ndarray:
        return cholesky(-2.0 * theta.mat)

    def in_domain(self, theta: Blocks) -> bool:
        if not theta.allfinite():
            return False
        try:
            self._precision_chol(theta)
        except (NotPositiveDefinite, InvalidInput):
            return False
        return True

    def in_dual_domain(self, eta: Blocks) -> bool:
        if not eta.allfinite():
            return False
        try:
            cholesky(eta.mat - np.outer(eta.vec, eta.vec))
        except (NotPositiveDefinite, InvalidInput):
            return False
        return True

    def log_partition(self, theta: NaturalParams) -> float:
        try:
            lower = self._precision_chol(theta)
        except NotPositiveDefinite as exc:
            raise DomainViolation("log_partition outside the domain") from exc
        z = np.linalg.solve(lower, theta.vec)
        return 0.5 * self.dim * _LOG_2PI + 0.5 * float(z @ z) - 0.5 * logdet_from_cholesky(lower)

    def mean_cov(self, theta: NaturalParams) -> tuple[np.ndarray, np.ndarray]:
        try:
            lower = self._precision_chol(theta)
        except NotPositiveDefinite as exc:
            raise DomainViolation("natural parameters outside the domain") from exc
        eye = np.eye(self.dim)
        linv = np.linalg.solve(lower, eye)
        cov = symmetrize(linv.T @ linv)
        mu = cov @ theta.vec
        return mu, cov

    def from_mean_cov(self, mu, cov) -> NaturalParams:
        mu = np.atleast_1d(np.asarray(mu, dtype=float))
        cov = symmetrize(np.asarray(cov, dtype=float))
        try:
            lower = cholesky(cov)
        except NotPositiveDefinite as exc:
            raise DualDomainViolation("covariance not positive definite") from exc
        linv = np.linalg.solve(lower, np.eye(self.dim))
        prec = symmetrize(linv.T @ linv)
        return NaturalParams(prec @ mu, -0.5 * prec)

    def moments(self, theta: NaturalParams) -> MeanParams:
        mu, cov = self.mean_cov(theta)
        return MeanParams(mu, cov + np.outer(mu, mu))

    def natural_from_moments(self, eta: MeanParams) -> NaturalParams:
        mu = eta.vec
        cov = symmetrize(eta.mat - np.outer(mu, mu))
        return self.from_mean_cov(mu, cov)

    def log_density_batch(self, theta: NaturalParams, xs) -> np.ndarray:
        xs = self._as_batch(xs)
        a = self.log_partition(theta)
        quad = np.einsum("ni,ij,nj->n", xs, theta.mat, xs)
        return xs @ theta.vec + quad - a

    def sample(self, theta: NaturalParams, n: int, rng: RngStream) -> np.ndarray:
        if n < 1:
            raise InvalidInput("sample size must be >= 1")
        mu, cov = self.mean_cov(theta)
        lower = cholesky(cov)
        z = rng.standard_normal((int(n), self.dim))
        return mu + z @ lower.T


class DiagGaussian(ExponentialFamily):
    """Gaussians with covariance Q diag(sigma^2) Q^T in a fixed orthonormal
    frame Q (Q = I gives the plain diagonal family).

    The matrix block is the length-d vector of per-coordinate parameters;
    sufficient statistics are (Q^T x, (Q^T x)^2 entrywise).
    """

    kind = "diag_gaussian"

    def __init__(self, d: int, frame: np.ndarray | None = None):
        if d < 1:
            raise InvalidInput("dimension must be >= 1")
        self.dim = int(d)
        if frame is None:
            self.frame = np.eye(self.dim)
            self._is_identity_frame = True
        else:
            frame = np.asarray(frame, dtype=float)
            if frame.shape != (d, d):
                raise InvalidInput("frame must be a (d, d) matrix")
            if np.linalg.norm(frame.T @ frame - np.eye(d)) > 1e-10 * np.sqrt(d):
                raise InvalidInput("frame is not orthonormal")
            self.frame = frame
            self._is_identity_frame = bool(np.array_equal(frame, np.eye(d)))

    def _check_shapes(self, p: Blocks) -> None:
        d = self.dim
        if p.vec.shape != (d,) or p.mat.shape != (d,):
            raise InvalidInput(f"diag_gaussian(d={d}): bad block shapes "
                               f"{p.vec.shape}, {p.mat.shape}")

    def _to_frame(self, xs: np.ndarray) -> np.ndarray:
        return xs if self._is_identity_frame else xs @ self.frame

    def suff_stats(self, x) -> MeanParams:
        x = self._as_point(x)
        y = x if self._is_identity_frame else self.frame.T @ x
        return MeanParams(y, y**2)

    def weighted_suff_mean(self, xs, weights) -> MeanParams:
        ys = self._to_frame(self._as_batch(xs))
        w = np.asarray(weights, dtype=float)
        return MeanParams(w @ ys, w @ (ys**2))

    def in_domain(self, theta: Blocks) -> bool:
        return theta.allfinite() and bool(np.all(theta.mat < 0.0))

    def in_dual_domain(self, eta: Blocks) -> bool:
        return eta.allfinite() and bool(np.all(eta.mat - eta.vec**2 > 0.0))

    def _require_domain(self, theta: Blocks) -> None:
        if not self.in_domain(theta):
            raise DomainViolation("natural parameters outside the domain")

    def log_partition(self, theta: NaturalParams) -> float:
        self._require_domain(theta)
        return float(
            -0.25 * np.sum(theta.vec**2 / theta.mat)
            + 0.5 * self.dim * _LOG_2PI
            - 0.5 * np.sum(np.log(-2.0 * theta.mat))
        )

    def _frame_mean_var(self, theta: NaturalParams) -> tuple[np.ndarray, np.ndarray]:
        self._require_domain(theta)
        var = -0.5 / theta.mat
        return theta.vec * var, var

    def mean_cov(self, theta: NaturalParams) -> tuple[np.ndarray, np.ndarray]:
        u, var = self._frame_mean_var(theta)
        if self._is_identity_frame:
            return u, np.diag(var)
        return self.frame @ u, symmetrize(self.frame @ np.diag(var) @ self.frame.T)

    def from_mean_cov(self, mu, cov) -> NaturalParams:
        mu = np.atleast_1d(np.asarray(mu, dtype=float))
        cov = np.asarray(cov, dtype=float)
        if cov.ndim == 2:
            var = np.diag(self.frame.T @ cov @ self.frame).copy()
        else:
            var = np.atleast_1d(cov).astype(float)
        if np.any(var <= 0.0):
            raise DualDomainViolation("per-coordinate variances must be positive")
        u = mu if self._is_identity_frame else self.frame.T @ mu
        return NaturalParams(u / var, -0.5 / var)

    def moments(self, theta: NaturalParams) -> MeanParams:
        u, var = self._frame_mean_var(theta)
        return MeanParams(u, u**2 + var)

    def natural_from_moments(self, eta: MeanParams) -> NaturalParams:
        var = eta.mat - eta.vec**2
        if not (eta.allfinite() and np.all(var > 0.0)):
            raise DualDomainViolation("mean parameters outside the dual domain")
        return NaturalParams(eta.vec / var, -0.5 / var)

    def log_density_batch(self, theta: NaturalParams, xs) -> np.ndarray:
        ys = self._to_frame(self._as_batch(xs))
        a = self.log_partition(theta)
        return ys @ theta.vec + (ys**2) @ theta.mat - a

    def sample(self, theta: NaturalParams, n: int, rng: RngStream) -> np.ndarray:
        if n < 1:
            raise InvalidInput("sample size must be >= 1")
        u, var = self._frame_mean_var(theta)
        z = rng.standard_normal((int(n), self.dim))
        ys = u + z * np.sqrt(var)
        return ys if self._is_identity_frame else ys @ self.frame.T


class CenteredGaussian1D(ExponentialFamily):
    """One-dimensional centered Gaussians: a single natural parameter
    theta = -1/(2 sigma^2) on the statistic x^2. The vector block is empty."""

    kind = "centered_gaussian_1d"

    def __init__(self):
        self.dim = 1

    def natural_scalar(self, theta2: float) -> NaturalParams:
        """Convenience constructor from the scalar parameter."""
        return self.natural(np.zeros(0), np.atleast_1d(float(theta2)))

    def _check_shapes(self, p: Blocks) -> None:
        if p.vec.shape != (0,) or p.mat.shape != (1,):
            raise InvalidInput("centered_gaussian_1d: bad block shapes "
                               f"{p.vec.shape}, {p.mat.shape}")

    def suff_stats(self, x) -> MeanParams:
        x = self._as_point(x)
        return MeanParams(np.zeros(0), x**2)

    def weighted_suff_mean(self, xs, weights) -> MeanParams:
        xs = self._as_batch(xs)
        w = np.asarray(weights, dtype=float)
        return MeanParams(np.zeros(0), np.atleast_1d(w @ (xs[:, 0] ** 2)))

    def in_domain(self, theta: Blocks) -> bool:
        return theta.allfinite() and bool(theta.mat[0] < 0.0)

    def in_dual_domain(self, eta: Blocks) -> bool:
        return eta.allfinite() and bool(eta.mat[0] > 0.0)

    def log_partition(self, theta: NaturalParams) -> float:
        if not self.in_domain(theta):
            raise DomainViolation("natural parameter must be negative")
        return float(0.5 * _LOG_2PI - 0.5 * np.log(-2.0 * theta.mat[0]))

    def mean_cov(self, theta: NaturalParams) -> tuple[np.ndarray, np.ndarray]:
        if not self.in_domain(theta):
            raise DomainViolation("natural parameter must be negative")
        var = -0.5 / theta.mat[0]
        return np.zeros(1), np.array([[var]])

    def from_mean_cov(self, mu, cov) -> NaturalParams:
        var = float(np.asarray(cov).reshape(-1)[0])
        if var <= 0.0:
            raise DualDomainViolation("variance must be positive")
        return NaturalParams(np.zeros(0), np.atleast_1d(-0.5 / var))

    def moments(self, theta: NaturalParams) -> MeanParams:
        if not self.in_domain(theta):
            raise DomainViolation("natural parameter must be negative")
        return MeanParams(np.zeros(0), -0.5 / theta.mat)

    def natural_from_moments(self, eta: MeanParams) -> NaturalParams:
        if not (eta.allfinite() and eta.mat[0] > 0.0):
            raise DualDomainViolation("second moment must be positive")
        return NaturalParams(np.zeros(0), -0.5 / eta.mat)

    def log_density_batch(self, theta: NaturalParams, xs) -> np.ndarray:
        xs = self._as_batch(xs)
        return (xs[:, 0] ** 2) * theta.mat[0] - self.log_partition(theta)

    def sample(self, theta: NaturalParams, n: int, rng: RngStream) -> np.ndarray:
        if n < 1:
            raise InvalidInput("sample size must be >= 1")
        sigma = float(np.sqrt(-0.5 / theta.mat[0]))
        return sigma * rng.standard_normal((int(n), 1))


def family_from_json(doc: dict) -> ExponentialFamily:
    """Rebuild a family from its JSON description."""
    kind = doc.get("family")
    if kind == FullGaussian.kind:
        return FullGaussian(int(doc["d"]))
    if kind == DiagGaussian.kind:
        frame = np.asarray(doc["Q"]) if "Q" in doc else None
        return DiagGaussian(int(doc["d"]), frame)
    if kind == CenteredGaussian1D.kind:
        return CenteredGaussian1D()
    raise InvalidInput(f"unknown family kind {kind!r}")
