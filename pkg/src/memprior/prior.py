"""Isotropic Gaussian-mixture prior centered on a training set.

This is the density a perfectly trained (memorized) denoising score model
represents at every noise level: uniform weights 1/N over the training
examples, component means m(t) * x_n, shared isotropic covariance
sigma(t)^2 * I.
"""

import numpy as np
from scipy.special import logsumexp
from sklearn.base import BaseEstimator

from .errors import DegenerateScheduleError
from .schedules import NoiseSchedule
from .validation import check_time, check_training_set

# cap on B*N*d elements per chunk when forming explicit differences
_CHUNK_ELEMENTS = 4_000_000


def mixture_log_density(x, atoms, sigma, m=1.0):
    """Log density of the uniform isotropic mixture sum_n N(x | m*atoms_n, sigma^2 I) / N.

    x may be (d,) or (B, d); returns a scalar or (B,) accordingly.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    atoms = np.asarray(atoms, dtype=float)
    n, d = atoms.shape
    exponents = _component_exponents(x, atoms, sigma, m)
    out = (
        logsumexp(exponents, axis=1)
        - np.log(n)
        - 0.5 * d * np.log(2.0 * np.pi * sigma**2)
    )
    return out if out.shape[0] > 1 else float(out[0])


def mixture_responsibilities(x, atoms, sigma, m=1.0):
    """Posterior component probabilities r_n(x), computed with max subtraction."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    exponents = _component_exponents(x, atoms, sigma, m)
    exponents -= exponents.max(axis=1, keepdims=True)
    r = np.exp(exponents)
    r /= r.sum(axis=1, keepdims=True)
    return r


def mixture_score(x, atoms, sigma, m=1.0):
    """Gradient of the mixture log density with respect to x."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    xb = np.atleast_2d(x)
    r = mixture_responsibilities(xb, atoms, sigma, m)
    score = (r @ (m * np.asarray(atoms, dtype=float)) - xb) / sigma**2
    return score[0] if single else score


def _component_exponents(xb, atoms, sigma, m):
    """-(||x - m*x_n||^2) / (2 sigma^2) as a (B, N) array, chunked over B."""
    if sigma <= 0:
        raise DegenerateScheduleError(f"sigma must be positive, got {sigma}")
    n, d = atoms.shape
    b = xb.shape[0]
    centers = m * atoms
    out = np.empty((b, n))
    step = max(1, _CHUNK_ELEMENTS // max(1, n * d))
    for lo in range(0, b, step):
        hi = min(b, lo + step)
        diff = xb[lo:hi, None, :] - centers[None, :, :]
        out[lo:hi] = -0.5 * np.einsum("bnd,bnd->bn", diff, diff) / sigma**2
    return out


class GaussianMixturePrior(BaseEstimator):
    """Memorized diffusion prior: the mixture an exact score-matching minimizer encodes.

    Parameters
    ----------
    schedule : NoiseSchedule, optional
        Forward-process schedule supplying m(t) and sigma(t). Defaults to the
        variance-exploding schedule (sigma_min=0.01, sigma_max=10).

    After ``fit(X)`` the training examples are stored in ``training_`` and the
    component index n in every output refers to their row order.
    """

    def __init__(self, schedule=None):
        self.schedule = schedule

    def fit(self, X, y=None):
        self.training_ = check_training_set(X).copy()
        self.n_examples_, self.n_features_ = self.training_.shape
        self.schedule_ = (
            self.schedule if self.schedule is not None else NoiseSchedule.variance_exploding()
        )
        return self

    def _check_x(self, x):
        x = np.asarray(x, dtype=float)
        d = x.shape[-1] if x.ndim else None
        if x.ndim not in (1, 2) or d != self.n_features_:
            from .errors import DimensionMismatchError

            raise DimensionMismatchError(
                f"x must have trailing dimension {self.n_features_}, got shape {x.shape}"
            )
        return x

    def log_density(self, x, t):
        """log p(x, t) of the noised mixture; finite for all finite x."""
        t = check_time(t)
        x = self._check_x(x)
        return mixture_log_density(
            x, self.training_, self.schedule_.sigma(t), self.schedule_.m(t)
        )

    def score(self, x, t):
        """grad_x log p(x, t), via numerically stable responsibilities."""
        t = check_time(t)
        x = self._check_x(x)
        return mixture_score(
            x, self.training_, self.schedule_.sigma(t), self.schedule_.m(t)
        )

    def responsibilities(self, x, t):
        t = check_time(t)
        x = self._check_x(x)
        return mixture_responsibilities(
            x, self.training_, self.schedule_.sigma(t), self.schedule_.m(t)
        )

    def sample(self, t, n_samples, random_state):
        """Ancestral draw: pick a component uniformly, add N(0, sigma(t)^2 I)."""
        t = check_time(t)
        if n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        rng = np.random.default_rng(random_state)
        idx = rng.integers(0, self.n_examples_, size=n_samples)
        noise = rng.standard_normal((n_samples, self.n_features_))
        m = self.schedule_.m(t)
        return m * self.training_[idx] + self.schedule_.sigma(t) * noise
