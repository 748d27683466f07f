"""Posterior-construction tests.

Oracles: extended-precision direct weight computation, conjugate-Gaussian
closed forms for linear operators, and quadrature cross-checks between the
grid posterior and the linearized mixture.
"""

import numpy as np
import pytest

from memprior import (
    Cubic1DOperator,
    MatrixOperator,
    Pentagon2DOperator,
    STYLIZED_1D_TRAINING,
    empirical_posterior_weights,
    grid_posterior,
    linearized_posterior,
    mixture_moments,
    mixture_sample,
    pentagon_training_set,
    sigma_zero_limit_check,
    total_variation,
)
from memprior.errors import UnsupportedDimensionError
from memprior.posteriors import mixture_grid_masses
from memprior.prior import mixture_log_density
from memprior.posteriors import _trapezoid_weights


def conjugate_gaussian(atom, A, y, sigma, gamma):
    """Posterior of N(atom, sigma^2 I) prior with y = A x + N(0, gamma^2 I)."""
    d = atom.size
    precision = np.eye(d) / sigma**2 + A.T @ A / gamma**2
    cov = np.linalg.inv(precision)
    mean = cov @ (atom / sigma**2 + A.T @ y / gamma**2)
    return mean, cov


class TestEmpiricalWeights:
    def test_extended_precision_oracle(self):
        op = Cubic1DOperator(gamma=0.3)
        y = np.array([0.0])
        w, misfits = empirical_posterior_weights(op, STYLIZED_1D_TRAINING, y)
        f = STYLIZED_1D_TRAINING[:, 0] + 0.3 * STYLIZED_1D_TRAINING[:, 0] ** 3
        expo = np.exp(-np.longdouble(f) ** 2 / (2 * np.longdouble(0.3) ** 2))
        expected = (expo / expo.sum()).astype(float)
        np.testing.assert_allclose(w, expected, rtol=1e-12)
        np.testing.assert_allclose(misfits, np.abs(f), rtol=1e-12)

    def test_zero_misfit_dominates(self):
        op = Pentagon2DOperator(gamma=0.05)
        atoms = pentagon_training_set()
        y = op.evaluate(atoms[2])
        w, _ = empirical_posterior_weights(op, atoms, y)
        assert np.argmax(w) == 2
        assert w[2] > 0.99

    def test_equal_misfits_give_equal_weights(self):
        op = Cubic1DOperator(gamma=0.3)
        atoms = np.array([[-1.0], [1.0]])  # odd F makes misfits match at y=0
        w, _ = empirical_posterior_weights(op, atoms, np.array([0.0]))
        np.testing.assert_allclose(w, [0.5, 0.5], rtol=1e-12)
        np.testing.assert_allclose(w.sum(), 1.0, rtol=1e-12)


class TestGridPosterior:
    def test_integral_is_one(self):
        op = Cubic1DOperator(gamma=0.3)
        post = grid_posterior(op, STYLIZED_1D_TRAINING, np.array([0.0]), sigma=0.3)
        assert abs(post.integral() - 1.0) < 1e-6

    def test_flat_likelihood_recovers_prior(self):
        op = Cubic1DOperator(gamma=1e8)
        atoms = STYLIZED_1D_TRAINING
        post = grid_posterior(op, atoms, np.array([0.0]), sigma=0.3)
        log_prior = mixture_log_density(post.points(), atoms, 0.3)
        prior_mass = np.exp(log_prior) * _trapezoid_weights(post.axes)
        prior_mass /= prior_mass.sum()
        assert total_variation(post.masses(), prior_mass) < 1e-6

    def test_conjugate_moments_linear_case(self):
        rng = np.random.default_rng(5)
        A = rng.normal(size=(2, 1))
        op = MatrixOperator(A, gamma=0.4)
        atom = np.array([[0.7]])
        y = np.array([0.5, -0.2])
        sigma = 0.3
        mean_ref, cov_ref = conjugate_gaussian(atom[0], A, y, sigma, 0.4)
        width = 8 * np.sqrt(cov_ref[0, 0])
        post = grid_posterior(
            op, atom, y, sigma, bounds=[(mean_ref[0] - width, mean_ref[0] + width)]
        )
        mean, cov = post.moments()
        np.testing.assert_allclose(mean, mean_ref, rtol=1e-4)
        np.testing.assert_allclose(cov, cov_ref, rtol=1e-4)

    def test_2d_grid_runs_and_normalizes(self):
        op = Pentagon2DOperator(gamma=0.3)
        atoms = pentagon_training_set()
        y = op.evaluate(0.7 * atoms[0])
        post = grid_posterior(op, atoms, y, sigma=0.3, n_points=201)
        assert post.log_density_values.shape == (201, 201)
        assert abs(post.integral() - 1.0) < 1e-6

    def test_rejects_high_dimension(self):
        op = MatrixOperator(np.eye(3), gamma=1.0)
        with pytest.raises(UnsupportedDimensionError):
            grid_posterior(op, np.zeros((2, 3)), np.zeros(3), sigma=0.1)


class TestLinearizedPosterior:
    def test_conjugate_exactness_single_atom(self):
        rng = np.random.default_rng(7)
        for d in (1, 2, 3):
            A = rng.normal(size=(d + 1, d))
            op = MatrixOperator(A, gamma=0.6)
            atom = rng.normal(size=(1, d))
            y = rng.normal(size=d + 1)
            sigma = 0.4
            post = linearized_posterior(op, atom, y, sigma)
            mean_ref, cov_ref = conjugate_gaussian(atom[0], A, y, sigma, 0.6)
            np.testing.assert_allclose(post.means[0], mean_ref, rtol=1e-8, atol=1e-12)
            np.testing.assert_allclose(post.covariances[0], cov_ref, rtol=1e-8, atol=1e-12)
            np.testing.assert_allclose(post.weights, [1.0], rtol=1e-12)

    def test_matches_grid_for_linear_operator(self):
        rng = np.random.default_rng(11)
        A = rng.normal(size=(2, 1))
        op = MatrixOperator(A, gamma=0.5)
        atoms = rng.normal(scale=1.5, size=(4, 1))
        y = rng.normal(size=2)
        sigma = 0.35
        mix = linearized_posterior(op, atoms, y, sigma)
        post = grid_posterior(op, atoms, y, sigma)
        tv = total_variation(post.masses(), mixture_grid_masses(mix, post.axes))
        assert tv < 1e-3

    def test_data_and_model_paths_agree(self):
        rng = np.random.default_rng(13)
        for trial in range(10):
            d = int(rng.integers(1, 4))
            m = int(rng.integers(1, 5))
            A = rng.normal(size=(m, d))
            op = MatrixOperator(A, gamma=0.7)
            atoms = rng.normal(size=(3, d))
            y = rng.normal(size=m)
            a = linearized_posterior(op, atoms, y, 0.25, weights_path="data")
            b = linearized_posterior(op, atoms, y, 0.25, weights_path="model")
            np.testing.assert_allclose(a.weights, b.weights, rtol=1e-8, atol=1e-12)
            np.testing.assert_allclose(a.log_weights, b.log_weights, rtol=1e-8, atol=1e-8)

    def test_null_jacobian_recovers_misfit_weights(self):
        op = MatrixOperator(np.zeros((2, 2)), gamma=0.4)
        rng = np.random.default_rng(17)
        atoms = rng.normal(size=(5, 2))
        y = rng.normal(size=2)
        sigma = 0.3
        post = linearized_posterior(op, atoms, y, sigma)
        np.testing.assert_allclose(post.means, atoms, rtol=1e-12, atol=1e-12)
        for n in range(5):
            np.testing.assert_allclose(
                post.covariances[n], sigma**2 * np.eye(2), rtol=1e-12
            )
        w_ref, _ = empirical_posterior_weights(op, atoms, y)
        np.testing.assert_allclose(post.weights, w_ref, rtol=1e-10)

    def test_covariance_never_exceeds_prior_width(self):
        rng = np.random.default_rng(19)
        op = Pentagon2DOperator(gamma=0.3)
        atoms = rng.normal(size=(6, 2))
        y = rng.normal(size=2)
        sigma = 0.5
        post = linearized_posterior(op, atoms, y, sigma)
        for n in range(6):
            top = np.linalg.eigvalsh(post.covariances[n]).max()
            assert top <= sigma**2 + 1e-10

    def test_weight_normalization_and_permutation(self):
        op = Cubic1DOperator(gamma=0.3)
        atoms = STYLIZED_1D_TRAINING
        y = np.array([0.0])
        post = linearized_posterior(op, atoms, y, 0.3)
        np.testing.assert_allclose(post.weights.sum(), 1.0, rtol=1e-12)
        perm = np.array([3, 1, 4, 0, 2])
        post_p = linearized_posterior(op, atoms[perm], y, 0.3)
        np.testing.assert_allclose(post.weights[perm], post_p.weights, rtol=1e-10)
        np.testing.assert_allclose(post.means[perm], post_p.means, rtol=1e-10)

    def test_nonlinear_accuracy_improves_with_smaller_sigma(self):
        op = Cubic1DOperator(gamma=0.3)
        atoms = STYLIZED_1D_TRAINING
        y = np.array([0.0])
        tvs = []
        for sigma in (0.5, 0.3, 0.05):
            mix = linearized_posterior(op, atoms, y, sigma)
            post = grid_posterior(op, atoms, y, sigma)
            tvs.append(total_variation(post.masses(), mixture_grid_masses(mix, post.axes)))
        assert tvs[0] > tvs[1] > tvs[2]
        assert tvs[2] < 0.05


class TestSigmaZeroLimit:
    def test_monotone_and_converged(self):
        for op, atoms, y in [
            (Cubic1DOperator(gamma=0.3), STYLIZED_1D_TRAINING, np.array([0.0])),
            (
                Pentagon2DOperator(gamma=0.3),
                pentagon_training_set(),
                Pentagon2DOperator(gamma=0.3).evaluate(0.7 * pentagon_training_set()[0]),
            ),
        ]:
            report = sigma_zero_limit_check(op, atoms, y, [0.5, 0.1, 0.01, 1e-3, 1e-4])
            assert report["monotone_nonincreasing"]
            assert report["final_distance"] < 1e-3

    def test_rejects_nondecreasing_sigmas(self):
        op = Cubic1DOperator(gamma=0.3)
        with pytest.raises(ValueError):
            sigma_zero_limit_check(op, STYLIZED_1D_TRAINING, np.array([0.0]), [0.1, 0.1])


class TestMixtureUtilities:
    def _two_component(self):
        from memprior.posteriors import MixturePosterior

        return MixturePosterior(
            log_weights=np.log([0.25, 0.75]),
            means=np.array([[0.0, 0.0], [2.0, 1.0]]),
            covariances=np.stack([0.04 * np.eye(2), 0.09 * np.eye(2)]),
        )

    def test_moments_closed_form(self):
        post = self._two_component()
        mean, cov = mixture_moments(post)
        np.testing.assert_allclose(mean, [1.5, 0.75])
        expected_cov = (
            0.25 * (0.04 * np.eye(2) + np.zeros((2, 2)))
            + 0.75 * (0.09 * np.eye(2) + np.outer([2, 1], [2, 1]))
            - np.outer([1.5, 0.75], [1.5, 0.75])
        )
        np.testing.assert_allclose(cov, expected_cov, rtol=1e-12)

    def test_sample_moments_match(self):
        post = self._two_component()
        draws = mixture_sample(post, 200_000, seed=23)
        mean, cov = mixture_moments(post)
        np.testing.assert_allclose(draws.mean(axis=0), mean, atol=0.01)
        np.testing.assert_allclose(np.cov(draws.T), cov, atol=0.02)

    def test_sample_deterministic(self):
        post = self._two_component()
        np.testing.assert_array_equal(
            mixture_sample(post, 50, seed=3), mixture_sample(post, 50, seed=3)
        )

    def test_total_variation_basics(self):
        p = np.array([0.5, 0.5])
        q = np.array([1.0, 0.0])
        assert total_variation(p, q) == pytest.approx(0.5)
        assert total_variation(p, p) == 0.0
