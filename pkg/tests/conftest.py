"""Shared fixtures and helpers for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from bvi.expfam import (Blocks, CenteredGaussian1D, DiagGaussian, FullGaussian,
                        NaturalParams)
from bvi.numerics import RngStream


@pytest.fixture
def rng():
    return RngStream(12345, 0)


def random_spd(d: int, rng: RngStream, lo: float = 0.4, hi: float = 2.5) -> np.ndarray:
    """Random symmetric positive definite matrix with eigenvalues in [lo, hi]."""
    a = rng.standard_normal((d, d))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    lam = rng.uniform(lo, hi, d)
    return 0.5 * ((q * lam) @ q.T + ((q * lam) @ q.T).T)


def random_interior(fam, rng: RngStream, mean_scale: float = 2.0,
                    var_lo: float = 0.4, var_hi: float = 2.5) -> NaturalParams:
    """Random natural parameters comfortably inside the family domain."""
    if isinstance(fam, FullGaussian):
        mu = mean_scale * rng.standard_normal(fam.dim)
        return fam.from_mean_cov(mu, random_spd(fam.dim, rng, var_lo, var_hi))
    if isinstance(fam, DiagGaussian):
        mu = mean_scale * rng.standard_normal(fam.dim)
        var = rng.uniform(var_lo, var_hi, fam.dim)
        return fam.from_mean_cov(fam.frame @ mu, fam.frame @ np.diag(var) @ fam.frame.T)
    if isinstance(fam, CenteredGaussian1D):
        return fam.from_mean_cov(np.zeros(1), rng.uniform(var_lo, var_hi, ()))
    raise TypeError(fam)


def fd_grad(fn, theta: NaturalParams, h: float = 1e-5) -> Blocks:
    """Central finite differences of a scalar function of natural
    parameters, blockwise; off-diagonal matrix entries are perturbed
    symmetrically so the result lives in the symmetric-matrix block."""
    vec = np.array(theta.vec, dtype=float)
    mat = np.array(theta.mat, dtype=float)
    gvec = np.zeros_like(vec)
    gmat = np.zeros_like(mat)

    def eval_at(v, m):
        return fn(NaturalParams(v, m))

    for i in range(vec.size):
        vp, vm = vec.copy(), vec.copy()
        vp[i] += h
        vm[i] -= h
        gvec[i] = (eval_at(vp, mat) - eval_at(vm, mat)) / (2 * h)
    if mat.ndim == 1:
        for i in range(mat.size):
            mp, mm = mat.copy(), mat.copy()
            mp[i] += h
            mm[i] -= h
            gmat[i] = (eval_at(vec, mp) - eval_at(vec, mm)) / (2 * h)
    else:
        d = mat.shape[0]
        for i in range(d):
            for j in range(i, d):
                mp, mm = mat.copy(), mat.copy()
                mp[i, j] += h
                mm[i, j] -= h
                if i != j:
                    mp[j, i] += h
                    mm[j, i] -= h
                delta = (eval_at(vec, mp) - eval_at(vec, mm)) / (2 * h)
                if i == j:
                    gmat[i, i] = delta
                else:
                    gmat[i, j] = gmat[j, i] = delta / 2.0
    return Blocks(gvec, gmat)


def rel_err(a: float, b: float) -> float:
    return abs(a - b) / max(abs(a), abs(b), 1e-30)
