"""Posterior constructions for mixture priors on training atoms.

Three objects, in increasing fidelity to the nonlinear problem:

- empirical weights: a discrete posterior over the training examples,
  weighted by data misfit alone (the sigma -> 0 limit);
- linearized mixture: per-atom Gaussian components from a local
  linearization of the forward operator, with marginal-likelihood weights;
- grid posterior: brute-force quadrature oracle for d in {1, 2}.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular
from scipy.special import logsumexp

from .errors import (
    DimensionMismatchError,
    InternalConsistencyError,
    UnsupportedDimensionError,
)
from .operators import resolve_observation
from .prior import mixture_log_density
from .validation import check_positive, check_training_set

_GRID_POINTS_1D = 2001
_GRID_POINTS_2D = 401


def empirical_posterior_weights(operator, atoms, y):
    """Discrete posterior over training examples from data misfit alone.

    w_n propto exp(-||F(x_n) - y||^2 / (2 gamma^2)), normalized in log space.
    Returns (weights, misfits) where misfits[n] = ||F(x_n) - y||.
    """
    atoms = check_training_set(atoms)
    y_vec, gamma = resolve_observation(operator, y)
    residuals = operator.evaluate_batch(atoms) - y_vec
    misfits = np.linalg.norm(residuals, axis=1)
    log_w = -0.5 * misfits**2 / gamma**2
    log_w -= logsumexp(log_w)
    return np.exp(log_w), misfits


@dataclass
class MixturePosterior:
    """Gaussian mixture with full per-component covariances."""

    log_weights: np.ndarray  # (N,)
    means: np.ndarray  # (N, d)
    covariances: np.ndarray  # (N, d, d)
    provenance: str = "linearized"

    @property
    def weights(self):
        return np.exp(self.log_weights)

    @property
    def n_components(self):
        return self.means.shape[0]

    @property
    def dim(self):
        return self.means.shape[1]

    def log_density(self, X):
        """Mixture log density at rows of X; returns (B,) or a scalar."""
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        if X.shape[1] != self.dim:
            raise DimensionMismatchError(
                f"points have dimension {X.shape[1]}, mixture has {self.dim}"
            )
        d = self.dim
        parts = np.empty((X.shape[0], self.n_components))
        for n in range(self.n_components):
            L = np.linalg.cholesky(self.covariances[n])
            diff = X - self.means[n]
            sol = solve_triangular(L, diff.T, lower=True)
            maha = np.einsum("ib,ib->b", sol, sol)
            logdet = 2.0 * np.log(np.diag(L)).sum()
            parts[:, n] = self.log_weights[n] - 0.5 * (
                maha + logdet + d * np.log(2.0 * np.pi)
            )
        out = logsumexp(parts, axis=1)
        return float(out[0]) if single else out


def linearized_posterior(operator, atoms, y, sigma, weights_path="auto"):
    """Gaussian-mixture posterior from a local linearization at each atom.

    Per component n, with J = J(x_n) and r = y - F(x_n):
        Sigma_n = (sigma^-2 I + gamma^-2 J^T J)^-1
        mu_n    = x_n + Sigma_n gamma^-2 J^T r
        log w_n = -1/2 r^T S^-1 r - 1/2 logdet S,   S = sigma^2 J J^T + gamma^2 I
    normalized over n. The weight exponent and determinant are computed either
    directly on the m x m data-space matrix S ("data") or through the model-space
    identities S^-1 = gamma^-2 I - gamma^-4 J Sigma_n J^T and
    logdet S = m log gamma^2 + d log sigma^2 - logdet Sigma_n ("model").
    "auto" picks data space when m <= d.
    """
    atoms = check_training_set(atoms)
    sigma = check_positive(sigma, "sigma")
    y_vec, gamma = resolve_observation(operator, y)
    if atoms.shape[1] != operator.dim_in:
        raise DimensionMismatchError(
            f"atoms have dimension {atoms.shape[1]}, operator expects {operator.dim_in}"
        )
    if weights_path not in ("auto", "data", "model"):
        raise ValueError(f"unknown weights_path {weights_path!r}")
    n, d = atoms.shape
    m = operator.dim_out
    path = weights_path
    if path == "auto":
        path = "data" if m <= d else "model"

    log_w = np.empty(n)
    means = np.empty((n, d))
    covs = np.empty((n, d, d))
    eye_d = np.eye(d)
    for i, x_n in enumerate(atoms):
        J = np.asarray(operator.dense_jacobian(x_n), dtype=float)
        r = y_vec - operator.evaluate(x_n)
        M = eye_d / sigma**2 + (J.T @ J) / gamma**2
        try:
            cho_m = cho_factor((M + M.T) / 2.0, lower=True)
        except np.linalg.LinAlgError as exc:
            raise InternalConsistencyError(
                f"precision matrix for component {i} is not positive definite"
            ) from exc
        cov = cho_solve(cho_m, eye_d)
        covs[i] = (cov + cov.T) / 2.0
        means[i] = x_n + cho_solve(cho_m, J.T @ r) / gamma**2
        logdet_m = 2.0 * np.log(np.diag(cho_m[0])).sum()
        if path == "data":
            S = sigma**2 * (J @ J.T) + gamma**2 * np.eye(m)
            cho_s = cho_factor(S, lower=True)
            maha = r @ cho_solve(cho_s, r)
            logdet_s = 2.0 * np.log(np.diag(cho_s[0])).sum()
        else:
            jtr = J.T @ r
            maha = (r @ r) / gamma**2 - (jtr @ cho_solve(cho_m, jtr)) / gamma**4
            logdet_s = m * np.log(gamma**2) + d * np.log(sigma**2) + logdet_m
        log_w[i] = -0.5 * maha - 0.5 * logdet_s
    log_w -= logsumexp(log_w)
    return MixturePosterior(log_weights=log_w, means=means, covariances=covs)


def mixture_moments(posterior):
    """Exact mean and covariance of a MixturePosterior."""
    w = posterior.weights
    mean = w @ posterior.means
    d = posterior.dim
    cov = np.zeros((d, d))
    for n in range(posterior.n_components):
        mu = posterior.means[n]
        cov += w[n] * (posterior.covariances[n] + np.outer(mu, mu))
    cov -= np.outer(mean, mean)
    return mean, (cov + cov.T) / 2.0


def mixture_sample(posterior, count, seed):
    """Ancestral draw: categorical over components, then the component Gaussian."""
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(seed)
    idx = rng.choice(posterior.n_components, size=count, p=posterior.weights)
    out = np.empty((count, posterior.dim))
    chols = [np.linalg.cholesky(c) for c in posterior.covariances]
    z = rng.standard_normal((count, posterior.dim))
    for row, (n, zi) in enumerate(zip(idx, z)):
        out[row] = posterior.means[n] + chols[n] @ zi
    return out


def _trapezoid_weights(axes):
    parts = []
    for ax in axes:
        w = np.full(ax.size, ax[1] - ax[0])
        w[0] *= 0.5
        w[-1] *= 0.5
        parts.append(w)
    if len(parts) == 1:
        return parts[0]
    return np.multiply.outer(parts[0], parts[1])


@dataclass
class GridPosterior:
    """Brute-force posterior on a tensor grid (d in {1, 2})."""

    axes: Tuple[np.ndarray, ...]
    log_density_values: np.ndarray  # unnormalized, shape (n1,) or (n1, n2)
    log_norm: float  # log of the trapezoidal integral

    @property
    def dim(self):
        return len(self.axes)

    def density(self):
        """Normalized density values on the grid."""
        return np.exp(self.log_density_values - self.log_norm)

    def masses(self):
        """Quadrature-weighted probability masses, renormalized to sum to 1."""
        p = self.density() * _trapezoid_weights(self.axes)
        return p / p.sum()

    def points(self):
        """Grid nodes as a (G, d) array in row-major order."""
        if self.dim == 1:
            return self.axes[0][:, None]
        g1, g2 = np.meshgrid(self.axes[0], self.axes[1], indexing="ij")
        return np.column_stack([g1.ravel(), g2.ravel()])

    def mass_near(self, centers, half_width):
        """Total mass within Euclidean distance half_width of any center."""
        centers = np.atleast_2d(np.asarray(centers, dtype=float))
        pts = self.points()
        dist = np.min(
            np.linalg.norm(pts[:, None, :] - centers[None, :, :], axis=2), axis=1
        )
        return float(self.masses().ravel()[dist <= half_width].sum())

    def moments(self):
        """Mean and covariance under the quadrature masses."""
        p = self.masses().ravel()
        pts = self.points()
        mean = p @ pts
        diff = pts - mean
        cov = (diff * p[:, None]).T @ diff
        return mean, (cov + cov.T) / 2.0

    def integral(self):
        """Trapezoid integral of the normalized density (should be ~1)."""
        return float((self.density() * _trapezoid_weights(self.axes)).sum())


def _likelihood_mode(operator, y_vec, gamma, lo, hi, n_coarse=256):
    """Coarse-grid argmin of the data misfit, used to widen auto bounds."""
    d = operator.dim_in
    axes = [np.linspace(lo[i], hi[i], n_coarse) for i in range(d)]
    if d == 1:
        pts = axes[0][:, None]
    else:
        g1, g2 = np.meshgrid(axes[0], axes[1], indexing="ij")
        pts = np.column_stack([g1.ravel(), g2.ravel()])
    misfit = np.linalg.norm(operator.evaluate_batch(pts) - y_vec, axis=1)
    return pts[np.argmin(misfit)]


def grid_posterior(operator, atoms, y, sigma, bounds=None, n_points=None):
    """Quadrature oracle: exp(log prior + log likelihood) on a tensor grid.

    The prior is the isotropic mixture on atoms at noise width sigma (m = 1);
    the likelihood is N(y | F(x), gamma^2 I). Auto bounds cover the atoms and
    the coarse-grid likelihood mode, each padded by 4 sigma.
    """
    atoms = check_training_set(atoms)
    sigma = check_positive(sigma, "sigma")
    y_vec, gamma = resolve_observation(operator, y)
    d = operator.dim_in
    if d not in (1, 2):
        raise UnsupportedDimensionError(
            f"grid posterior supports d in {{1, 2}}, got d={d}"
        )
    if atoms.shape[1] != d:
        raise DimensionMismatchError(
            f"atoms have dimension {atoms.shape[1]}, operator expects {d}"
        )
    if n_points is None:
        n_points = _GRID_POINTS_1D if d == 1 else _GRID_POINTS_2D
    if bounds is None:
        pad = 4.0 * sigma
        lo = atoms.min(axis=0) - pad
        hi = atoms.max(axis=0) + pad
        mode = _likelihood_mode(operator, y_vec, gamma, lo, hi)
        lo = np.minimum(lo, mode - pad)
        hi = np.maximum(hi, mode + pad)
        bounds = list(zip(lo, hi))
    axes = tuple(np.linspace(b[0], b[1], n_points) for b in bounds)

    if d == 1:
        pts = axes[0][:, None]
        shape = (n_points,)
    else:
        g1, g2 = np.meshgrid(axes[0], axes[1], indexing="ij")
        pts = np.column_stack([g1.ravel(), g2.ravel()])
        shape = (n_points, n_points)

    log_prior = np.asarray(mixture_log_density(pts, atoms, sigma)).reshape(shape)
    residual = operator.evaluate_batch(pts) - y_vec
    log_lik = (
        -0.5 * np.einsum("bm,bm->b", residual, residual) / gamma**2
        - 0.5 * operator.dim_out * np.log(2.0 * np.pi * gamma**2)
    ).reshape(shape)

    log_post = log_prior + log_lik
    w = _trapezoid_weights(axes)
    log_norm = float(logsumexp(log_post + np.log(w)))
    return GridPosterior(axes=axes, log_density_values=log_post, log_norm=log_norm)


def mixture_grid_masses(posterior, axes):
    """Evaluate a MixturePosterior's density on a tensor grid, as masses.

    Used for total-variation comparisons against a GridPosterior built on the
    same axes.
    """
    axes = tuple(np.asarray(a, dtype=float) for a in axes)
    if len(axes) == 1:
        pts = axes[0][:, None]
        shape = (axes[0].size,)
    else:
        g1, g2 = np.meshgrid(axes[0], axes[1], indexing="ij")
        pts = np.column_stack([g1.ravel(), g2.ravel()])
        shape = (axes[0].size, axes[1].size)
    dens = np.exp(posterior.log_density(pts)).reshape(shape)
    p = dens * _trapezoid_weights(axes)
    return p / p.sum()


def total_variation(p, q):
    """TV distance 0.5 * sum |p - q| between two aligned mass arrays."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise DimensionMismatchError(f"mass arrays differ in shape: {p.shape} vs {q.shape}")
    return 0.5 * float(np.abs(p - q).sum())


def sigma_zero_limit_check(operator, atoms, y, sigmas):
    """L1 distance between linearized and misfit-only weights along a sigma path.

    sigmas must be in strictly decreasing order; the distances should shrink
    toward zero as the mixture components collapse onto the atoms.
    """
    sigmas = [check_positive(s, "sigma") for s in sigmas]
    if any(b >= a for a, b in zip(sigmas, sigmas[1:])):
        raise ValueError("sigmas must be strictly decreasing")
    w_ref, _ = empirical_posterior_weights(operator, atoms, y)
    distances = []
    for s in sigmas:
        post = linearized_posterior(operator, atoms, y, s)
        distances.append(float(np.abs(post.weights - w_ref).sum()))
    return {
        "sigmas": list(map(float, sigmas)),
        "l1_distances": distances,
        "monotone_nonincreasing": all(
            b <= a + 1e-12 for a, b in zip(distances, distances[1:])
        ),
        "final_distance": distances[-1],
    }
