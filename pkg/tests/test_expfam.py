import numpy as np
import pytest

from bvi.divergences import QuadratureGrid, quadrature_log_integral_exp
from bvi.errors import DomainViolation, DualDomainViolation, InvalidInput
from bvi.expfam import (CenteredGaussian1D, DiagGaussian, FullGaussian,
                        MeanParams, family_from_json, inner)
from bvi.numerics import RngStream

from conftest import fd_grad, random_interior

WIDE = QuadratureGrid(-60.0, 60.0, 40001)


def all_families(d: int):
    fams = [FullGaussian(d), DiagGaussian(d)]
    if d == 1:
        fams.append(CenteredGaussian1D())
    if d >= 2:
        rng = RngStream(99, d)
        q, r = np.linalg.qr(rng.standard_normal((d, d)))
        fams.append(DiagGaussian(d, q * np.sign(np.diag(r))))
    return fams


class TestSufficientStatistics:
    def test_full_gaussian(self):
        fam = FullGaussian(2)
        g = fam.suff_stats(np.array([1.0, 2.0]))
        assert np.allclose(g.vec, [1.0, 2.0])
        assert np.allclose(g.mat, [[1.0, 2.0], [2.0, 4.0]])

    def test_centered_square(self):
        g = CenteredGaussian1D().suff_stats(3.0)
        assert g.mat[0] == 9.0

    def test_diag_identity_frame(self):
        g = DiagGaussian(2).suff_stats(np.array([1.0, -1.0]))
        assert np.allclose(g.vec, [1.0, -1.0])
        assert np.allclose(g.mat, [1.0, 1.0])

    def test_dimension_mismatch(self):
        with pytest.raises(InvalidInput):
            FullGaussian(2).suff_stats(np.array([1.0, 2.0, 3.0]))


class TestLogPartition:
    def test_centered_standard(self):
        # Quadrature oracle for the normalizer of exp(theta * x^2).
        fam = CenteredGaussian1D()
        theta = fam.natural_scalar(-0.5)
        oracle = quadrature_log_integral_exp(lambda x: -0.5 * x**2, WIDE)
        a = fam.log_partition(theta)
        assert a == pytest.approx(oracle, abs=1e-8)
        assert a == pytest.approx(0.9189385332046727, abs=1e-12)

    def test_full_d1_standard(self):
        fam = FullGaussian(1)
        theta = fam.natural(np.array([0.0]), np.array([[-0.5]]))
        oracle = quadrature_log_integral_exp(lambda x: -0.5 * x**2, WIDE)
        assert fam.log_partition(theta) == pytest.approx(oracle, abs=1e-8)

    def test_full_d2_diagonal(self):
        # Separable normalizer: twice the 1-D quadrature for variance 4.
        fam = FullGaussian(2)
        theta = fam.from_mean_cov(np.zeros(2), np.diag([4.0, 4.0]))
        oracle_1d = quadrature_log_integral_exp(lambda x: -x**2 / 8.0, WIDE)
        a = fam.log_partition(theta)
        assert a == pytest.approx(2 * oracle_1d, abs=1e-8)
        assert a == pytest.approx(np.log(2 * np.pi) + np.log(4.0), abs=1e-12)

    def test_outside_domain(self):
        from bvi.expfam import NaturalParams
        fam = FullGaussian(2)
        with pytest.raises(DomainViolation):
            fam.log_partition(NaturalParams(np.zeros(2), np.eye(2)))


class TestMoments:
    def test_standard_normal_d2(self):
        fam = FullGaussian(2)
        eta = fam.moments(fam.from_mean_cov(np.zeros(2), np.eye(2)))
        assert np.allclose(eta.vec, 0.0, atol=1e-12)
        assert np.allclose(eta.mat, np.eye(2), atol=1e-12)

    def test_centered_unit_variance(self):
        fam = CenteredGaussian1D()
        assert fam.moments(fam.natural_scalar(-0.5)).mat[0] == pytest.approx(1.0)

    def test_d1_mean2_var3(self):
        fam = FullGaussian(1)
        theta = fam.natural(np.array([2.0 / 3.0]), np.array([[-1.0 / 6.0]]))
        eta = fam.moments(theta)
        assert eta.vec[0] == pytest.approx(2.0, abs=1e-12)
        assert eta.mat[0, 0] == pytest.approx(7.0, abs=1e-12)

    def test_d1_mean2_var3_monte_carlo(self):
        # Sanity check of the same moments against a large sample.
        fam = FullGaussian(1)
        theta = fam.natural(np.array([2.0 / 3.0]), np.array([[-1.0 / 6.0]]))
        xs = fam.sample(theta, 1_000_000, RngStream(5, 0))
        assert np.mean(xs) == pytest.approx(2.0, abs=0.02)
        assert np.mean(xs**2) == pytest.approx(7.0, abs=0.05)


class TestNaturalFromMoments:
    def test_standard_normal(self):
        fam = FullGaussian(2)
        theta = fam.natural_from_moments(fam.mean(np.zeros(2), np.eye(2)))
        assert np.allclose(theta.vec, 0.0, atol=1e-12)
        assert np.allclose(theta.mat, -0.5 * np.eye(2), atol=1e-12)

    def test_inverse_of_known_example(self):
        fam = FullGaussian(1)
        theta = fam.natural_from_moments(fam.mean(np.array([2.0]), np.array([[7.0]])))
        assert theta.vec[0] == pytest.approx(2.0 / 3.0, abs=1e-12)
        assert theta.mat[0, 0] == pytest.approx(-1.0 / 6.0, abs=1e-12)

    def test_dual_violation(self):
        fam = FullGaussian(1)
        with pytest.raises(DualDomainViolation):
            fam.natural_from_moments(MeanParams(np.array([2.0]), np.array([[4.0]])))

    @pytest.mark.parametrize("d", [1, 2, 5, 20])
    def test_bijection_round_trip(self, d):
        rng = RngStream(17, d)
        n_trials = 1000 // (4 if d == 20 else 1)
        for fam in all_families(d):
            for _ in range(n_trials):
                theta = random_interior(fam, rng)
                back = fam.natural_from_moments(fam.moments(theta))
                err = (back - theta).norm()
                assert err <= 1e-9 * max(theta.norm(), 1.0)


class TestGradientIdentity:
    @pytest.mark.parametrize("d", [1, 2, 3])
    def test_log_partition_gradient_matches_moments(self, d):
        rng = RngStream(23, d)
        for fam in all_families(d):
            for _ in range(5):
                theta = random_interior(fam, rng)
                grad = fd_grad(fam.log_partition, theta, h=1e-5)
                eta = fam.moments(theta)
                assert np.allclose(grad.vec, eta.vec, rtol=1e-4, atol=1e-6)
                assert np.allclose(grad.mat, eta.mat, rtol=1e-4, atol=1e-6)


class TestLogDensity:
    def test_standard_normal_origin(self):
        fam = FullGaussian(1)
        theta = fam.from_mean_cov(np.zeros(1), np.eye(1))
        assert fam.log_density(theta, 0.0) == pytest.approx(-0.5 * np.log(2 * np.pi))

    def test_standard_normal_d2(self):
        fam = FullGaussian(2)
        theta = fam.from_mean_cov(np.zeros(2), np.eye(2))
        expected = -np.log(2 * np.pi) - 1.0
        assert fam.log_density(theta, np.array([1.0, 1.0])) == pytest.approx(expected)

    def test_mean2_var3_at_mode(self):
        fam = FullGaussian(1)
        theta = fam.from_mean_cov(np.array([2.0]), np.array([[3.0]]))
        assert fam.log_density(theta, 2.0) == pytest.approx(-0.5 * np.log(6 * np.pi),
                                                            abs=1e-12)

    def test_integrates_to_one(self):
        for fam, theta in [
            (CenteredGaussian1D(), CenteredGaussian1D().natural_scalar(-0.3)),
            (FullGaussian(1), FullGaussian(1).from_mean_cov(np.array([1.5]),
                                                            np.array([[2.0]]))),
        ]:
            log_norm = quadrature_log_integral_exp(
                lambda x: fam.log_density_batch(theta, np.atleast_2d(x).T), WIDE)
            assert log_norm == pytest.approx(0.0, abs=1e-8)

    def test_batch_matches_scalar(self):
        fam = DiagGaussian(3)
        rng = RngStream(31, 0)
        theta = random_interior(fam, rng)
        xs = rng.standard_normal((8, 3))
        batch = fam.log_density_batch(theta, xs)
        singles = [fam.log_density(theta, x) for x in xs]
        assert np.allclose(batch, singles, atol=1e-12)


class TestSample:
    def test_clt_standard_normal(self):
        fam = FullGaussian(2)
        theta = fam.from_mean_cov(np.zeros(2), np.eye(2))
        xs = fam.sample(theta, 100_000, RngStream(3, 0))
        assert np.linalg.norm(xs.mean(axis=0)) <= 0.02
        assert np.linalg.norm(np.cov(xs.T, bias=True) - np.eye(2)) <= 0.05

    def test_reproducible(self):
        fam = FullGaussian(3)
        theta = fam.from_mean_cov(np.ones(3), 2 * np.eye(3))
        a = fam.sample(theta, 1, RngStream(77, 1))
        b = fam.sample(theta, 1, RngStream(77, 1))
        assert np.array_equal(a, b)

    def test_shifted_wide(self):
        fam = FullGaussian(2)
        theta = fam.from_mean_cov(np.array([5.0, 5.0]), 10 * np.eye(2))
        xs = fam.sample(theta, 100_000, RngStream(4, 0))
        assert np.linalg.norm(xs.mean(axis=0) - 5.0) <= 0.1


class TestSerialization:
    @pytest.mark.parametrize("d", [1, 3])
    def test_round_trip(self, d):
        rng = RngStream(41, d)
        for fam in all_families(d):
            theta = random_interior(fam, rng)
            doc = fam.params_to_json(theta)
            fam2 = family_from_json(doc)
            back = fam2.params_from_json(doc)
            assert fam2.kind == fam.kind
            assert np.allclose(back.vec, theta.vec)
            assert np.allclose(back.mat, theta.mat)

    def test_frame_not_orthonormal(self):
        with pytest.raises(InvalidInput):
            DiagGaussian(2, np.array([[1.0, 1.0], [0.0, 1.0]]))


class TestInner:
    def test_blockwise(self):
        a = MeanParams(np.array([1.0, 2.0]), np.array([[1.0, 0.0], [0.0, 3.0]]))
        b = MeanParams(np.array([2.0, 1.0]), np.array([[2.0, 1.0], [1.0, 1.0]]))
        assert inner(a, b) == pytest.approx(1 * 2 + 2 * 1 + 1 * 2 + 3 * 1)
