import numpy as np
import pytest

from bvi.divergences import bregman_gap
from bvi.errors import InvalidInput, UnsupportedRegularizer
from bvi.expfam import DiagGaussian, FullGaussian, MeanParams
from bvi.numerics import RngStream, sym_eigen
from bvi.regularizers import (EigenBox, NullRegularizer, SparseMeanL1,
                              bregman_prox, regularizer_from_json)

from conftest import random_interior, random_spd


def make_full_half(rng, d=2):
    fam = FullGaussian(d)
    theta = random_interior(fam, rng, var_lo=0.05, var_hi=8.0)
    return fam, theta


class TestNull:
    def test_identity_in_distribution(self, rng):
        fam, theta = make_full_half(rng)
        out = bregman_prox(NullRegularizer(), fam, theta, 0.5)
        assert (out - theta).norm() <= 1e-9 * max(1.0, theta.norm())

    def test_evaluate_zero(self, rng):
        fam, theta = make_full_half(rng)
        assert NullRegularizer().evaluate(fam, theta) == 0.0


class TestEigenBox:
    def test_worked_example(self):
        # Precision eigenvalues (0.01, 5) clamp to (0.5, 2); mean and
        # eigenvectors are untouched.
        fam = FullGaussian(2)
        rng = RngStream(21, 0)
        q, r = np.linalg.qr(rng.standard_normal((2, 2)))
        q = q * np.sign(np.diag(r))
        prec = q @ np.diag([0.01, 5.0]) @ q.T
        mu = np.array([0.7, -1.2])
        theta = fam.from_mean_cov(mu, np.linalg.inv(prec))
        out = bregman_prox(EigenBox(0.5, 2.0), fam, theta, 0.5)
        mu_out, cov_out = fam.mean_cov(out)
        assert np.allclose(mu_out, mu, atol=1e-12)
        prec_out = np.linalg.inv(cov_out)
        lam, basis = sym_eigen(prec_out)
        assert np.allclose(np.sort(lam), [0.5, 2.0], atol=1e-12)
        # Same eigenvectors as the input precision (up to sign).
        lam_in, basis_in = sym_eigen(prec)
        overlap = np.abs(basis.T @ basis_in)
        assert np.allclose(overlap, np.eye(2), atol=1e-9)

    def test_noop_inside_box(self, rng):
        fam = FullGaussian(3)
        theta = fam.from_mean_cov(rng.standard_normal(3), np.eye(3))
        out = bregman_prox(EigenBox(0.5, 2.0), fam, theta, 1.0)
        assert (out - theta).norm() <= 1e-9

    def test_evaluate(self):
        fam = FullGaussian(2)
        theta = fam.from_mean_cov(np.zeros(2), np.eye(2))
        assert EigenBox(0.5, 2.0).evaluate(fam, theta) == 0.0
        assert EigenBox(2.0, 3.0).evaluate(fam, theta) == np.inf

    def test_idempotent(self, rng):
        reg = EigenBox(0.5, 2.0)
        fam = FullGaussian(3)
        for _ in range(20):
            theta = random_interior(fam, rng, var_lo=0.02, var_hi=30.0)
            once = bregman_prox(reg, fam, theta, 0.7)
            twice = bregman_prox(reg, fam, once, 0.7)
            assert (twice - once).norm() <= 1e-10 * max(1.0, once.norm())

    def test_condition_number_bounded(self, rng):
        reg = EigenBox(0.25, 4.0)
        fam = FullGaussian(4)
        for _ in range(50):
            theta = random_interior(fam, rng, var_lo=0.01, var_hi=50.0)
            out = bregman_prox(reg, fam, theta, 0.5)
            _, cov = fam.mean_cov(out)
            w = np.linalg.eigvalsh(cov)
            assert w[-1] / w[0] <= 4.0 / 0.25 + 1e-9

    def test_normal_cone_certificate(self, rng):
        # Per clamped eigenvalue: interior means untouched, at b1 the input
        # must sit at or below b1, at b2 at or above.
        reg = EigenBox(0.5, 2.0)
        fam = FullGaussian(3)
        for _ in range(200):
            theta = random_interior(fam, rng, var_lo=0.02, var_hi=30.0)
            mu_in, cov_in = fam.mean_cov(theta)
            out = bregman_prox(reg, fam, theta, 0.5)
            mu_out, cov_out = fam.mean_cov(out)
            assert np.allclose(mu_out, mu_in, atol=1e-10)
            svals, basis = sym_eigen(cov_in)
            lam_in = 1.0 / svals
            lam_out = 1.0 / np.diag(basis.T @ cov_out @ basis)
            for li, lo in zip(lam_in, lam_out):
                if reg.b1 + 1e-9 < lo < reg.b2 - 1e-9:
                    assert lo == pytest.approx(li, rel=1e-9)
                elif lo <= reg.b1 + 1e-9:
                    assert li <= reg.b1 + 1e-9
                else:
                    assert li >= reg.b2 - 1e-9

    def test_unsupported_family(self, rng):
        fam = DiagGaussian(2)
        theta = random_interior(fam, rng)
        with pytest.raises(UnsupportedRegularizer):
            bregman_prox(EigenBox(0.5, 2.0), fam, theta, 0.5)

    def test_invalid_bounds(self):
        with pytest.raises(InvalidInput):
            EigenBox(2.0, 0.5)
        with pytest.raises(InvalidInput):
            EigenBox(0.0, 1.0)


class TestSparseMeanL1:
    def test_worked_example_shrink(self):
        # mu = 2, sigma^2 = 1, threshold 0.5: mean 1.5, variance 2.75.
        fam = DiagGaussian(1)
        theta = fam.from_mean_cov(np.array([2.0]), np.array([[1.0]]))
        reg = SparseMeanL1(np.array([1.0]))
        out = bregman_prox(reg, fam, theta, 0.5)
        mu, cov = fam.mean_cov(out)
        assert mu[0] == pytest.approx(1.5, abs=1e-12)
        assert cov[0, 0] == pytest.approx(2.75, abs=1e-12)

    def test_worked_example_zeroed(self):
        fam = DiagGaussian(1)
        theta = fam.from_mean_cov(np.array([0.3]), np.array([[1.0]]))
        out = bregman_prox(SparseMeanL1(np.array([1.0])), fam, theta, 0.5)
        mu, cov = fam.mean_cov(out)
        assert mu[0] == 0.0
        assert cov[0, 0] == pytest.approx(1.09, abs=1e-12)

    def test_evaluate_weighted_l1(self):
        fam = DiagGaussian(2)
        theta = fam.natural(np.array([2.0, -3.0]), np.array([-0.5, -0.5]))
        assert SparseMeanL1(np.array([1.0, 1.0])).evaluate(fam, theta) == pytest.approx(5.0)

    def test_skip_index_0(self):
        fam = DiagGaussian(2)
        theta = fam.from_mean_cov(np.array([0.3, 0.3]), np.eye(2))
        reg = SparseMeanL1(np.array([1.0, 1.0]), skip_index_0=True)
        out = bregman_prox(reg, fam, theta, 0.5)
        mu, _ = fam.mean_cov(out)
        assert mu[0] == pytest.approx(0.3, abs=1e-12)
        assert mu[1] == 0.0

    def test_second_application_stable(self, rng):
        # Re-applying with the same step leaves zeroed coordinates zeroed
        # and never inflates their variance again.
        fam = DiagGaussian(4)
        reg = SparseMeanL1(np.array([1.0]))
        for _ in range(20):
            theta = random_interior(fam, rng, mean_scale=0.8)
            once = bregman_prox(reg, fam, theta, 0.3)
            mu1, cov1 = fam.mean_cov(once)
            twice = bregman_prox(reg, fam, once, 0.3)
            mu2, cov2 = fam.mean_cov(twice)
            zeroed = mu1 == 0.0
            assert np.array_equal(mu2[zeroed], mu1[zeroed])
            assert np.allclose(np.diag(cov2)[zeroed], np.diag(cov1)[zeroed],
                               rtol=1e-12)

    def test_sign_condition_certificate(self, rng):
        # Soft-threshold optimality: |u - u_out| = tau * eta off zero and
        # |u| <= tau * eta at zero; the second-moment block is conserved.
        fam = DiagGaussian(5)
        eta_w = np.array([0.5, 1.0, 2.0, 0.0, 1.5])
        reg = SparseMeanL1(eta_w)
        tau = 0.4
        for _ in range(200):
            theta = random_interior(fam, rng, mean_scale=1.0)
            half = fam.moments(theta)
            out = bregman_prox(reg, fam, theta, tau)
            m_out = fam.moments(out)
            assert np.allclose(m_out.mat, half.mat, rtol=1e-10)
            for u, uo, w in zip(half.vec, m_out.vec, eta_w):
                if uo == 0.0:
                    assert abs(u) <= tau * w + 1e-12
                else:
                    assert np.sign(uo) == np.sign(u)
                    assert abs(u - uo) == pytest.approx(tau * w, abs=1e-12)

    def test_prox_objective_local_minimality(self, rng):
        # The proximal objective at the output undercuts the half iterate
        # and random interior perturbations.
        fam = DiagGaussian(3)
        reg = SparseMeanL1(np.array([1.0]))
        tau = 0.5

        def prox_objective(candidate, theta_half):
            return (reg.evaluate(fam, candidate)
                    + bregman_gap(fam, candidate, theta_half) / tau)

        for _ in range(10):
            theta_half = random_interior(fam, rng, mean_scale=0.8)
            out = bregman_prox(reg, fam, theta_half, tau)
            best = prox_objective(out, theta_half)
            assert best <= prox_objective(theta_half, theta_half) + 1e-12
            for _ in range(20):
                jitter = random_interior(fam, rng) - random_interior(fam, rng)
                cand = out + 0.05 * jitter
                if not fam.in_domain(cand):
                    continue
                assert best <= prox_objective(cand, theta_half) + 1e-10

    def test_negative_weights_rejected(self):
        with pytest.raises(InvalidInput):
            SparseMeanL1(np.array([-1.0]))

    def test_unsupported_family(self, rng):
        fam = FullGaussian(2)
        theta = random_interior(fam, rng)
        with pytest.raises(UnsupportedRegularizer):
            bregman_prox(SparseMeanL1(np.array([1.0])), fam, theta, 0.5)


class TestSerialization:
    def test_round_trips(self):
        for reg in (NullRegularizer(), EigenBox(0.5, 2.0),
                    SparseMeanL1(np.array([1.0, 0.0]), skip_index_0=True)):
            back = regularizer_from_json(reg.to_json())
            assert back.to_json() == reg.to_json()

    def test_unknown_kind(self):
        with pytest.raises(InvalidInput):
            regularizer_from_json({"kind": "ridge"})
