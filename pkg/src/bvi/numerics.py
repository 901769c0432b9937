"""Dense symmetric linear algebra, stable log-space reductions, and the
deterministic random-number streams used by every stochastic routine.

All matrix inputs are symmetrized on entry by averaging with their
transpose, so callers may pass matrices that are symmetric only up to
round-off.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .errors import InvalidInput, NotPositiveDefinite

# Smallest admissible Cholesky pivot: positive definiteness is decided by
# factorization success with pivots strictly above this floor.
_MIN_PIVOT = 1e-300


class SpectralDecomp(NamedTuple):
    """Eigendecomposition of a symmetric matrix.

    ``basis @ diag(eigenvalues) @ basis.T`` reconstructs the input;
    eigenvalues are sorted ascending and ``basis`` has orthonormal columns.
    """

    eigenvalues: np.ndarray
    basis: np.ndarray


def symmetrize(m: np.ndarray) -> np.ndarray:
    """Return the symmetric average ``(m + m.T) / 2``."""
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InvalidInput(f"expected a square matrix, got shape {m.shape}")
    return 0.5 * (m + m.T)


def sym_eigen(m: np.ndarray) -> SpectralDecomp:
    """Eigendecomposition of a symmetric matrix via a symmetric-QR routine.

    Raises:
        InvalidInput: if the matrix has non-finite entries.
    """
    m = symmetrize(m)
    if not np.all(np.isfinite(m)):
        raise InvalidInput("matrix has non-finite entries")
    w, u = np.linalg.eigh(m)
    return SpectralDecomp(eigenvalues=w, basis=u)


def cholesky(m: np.ndarray) -> np.ndarray:
    """Lower-triangular factor L with ``L @ L.T == m``.

    Success with strictly positive pivots is the positive-definiteness
    probe used for all domain-membership checks.

    Raises:
        InvalidInput: non-finite entries.
        NotPositiveDefinite: factorization fails or a pivot underflows.
    """
    m = symmetrize(m)
    if not np.all(np.isfinite(m)):
        raise InvalidInput("matrix has non-finite entries")
    try:
        lower = np.linalg.cholesky(m)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from exc
    if np.any(np.diag(lower) <= _MIN_PIVOT):
        raise NotPositiveDefinite("pivot underflow")
    return lower


def logdet_from_cholesky(lower: np.ndarray) -> float:
    """log det of ``L @ L.T`` given its Cholesky factor L."""
    return 2.0 * float(np.sum(np.log(np.diag(lower))))


def log_sum_exp(v: np.ndarray) -> float:
    """``log(sum(exp(v)))`` computed with the usual max shift.

    An all ``-inf`` input returns ``-inf``. Raises InvalidInput on an
    empty vector.
    """
    v = np.asarray(v, dtype=float)
    if v.size == 0:
        raise InvalidInput("log_sum_exp of an empty vector")
    m = np.max(v)
    if m == -np.inf:
        return -np.inf
    return float(m + np.log(np.sum(np.exp(v - m))))


class RngStream:
    """Deterministic random stream keyed by ``(seed, stream_id)``.

    Backed by the counter-based Philox generator, so distinct stream ids
    under one seed give independent, reproducible streams; replicate runs
    each own one stream. Normal variates use the generator's ziggurat
    sampler. Instances are stateful and must not be shared across runs.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        key = np.array(
            [self.seed & 0xFFFFFFFFFFFFFFFF, self.stream_id & 0xFFFFFFFFFFFFFFFF],
            dtype=np.uint64,
        )
        self._gen = np.random.Generator(np.random.Philox(key=key))

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def standard_normal(self, shape) -> np.ndarray:
        return self._gen.standard_normal(shape)

    def uniform(self, low: float, high: float, shape) -> np.ndarray:
        return self._gen.uniform(low, high, shape)

    def substream(self, stream_id: int) -> "RngStream":
        """Fresh stream under the same seed; used to key replicates."""
        return RngStream(self.seed, stream_id)

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"
