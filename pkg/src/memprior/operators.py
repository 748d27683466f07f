"""Forward operators: a uniform contract plus small nonlinear maps and linear operators.

Every operator exposes evaluate / jvp / vjp (and a dense Jacobian when the
model dimension is small enough to afford one column per basis vector), so
posterior construction and guided sampling can stay operator-agnostic.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DimensionMismatchError
from .validation import check_positive, check_vector

# default 1D training locations: five separated atoms spanning both signs,
# one close enough to the origin that zero data singles it out cleanly
STYLIZED_1D_TRAINING = np.array([[-2.0], [-1.0], [0.4], [1.5], [2.2]])


def pentagon_training_set():
    """Vertices of the unit-circumradius regular pentagon, first vertex at angle
    pi/2, ordered counterclockwise. Row k is vertex k."""
    angles = np.pi / 2 + 2.0 * np.pi * np.arange(5) / 5.0
    return np.column_stack([np.cos(angles), np.sin(angles)])


@dataclass(frozen=True)
class Observation:
    """Observed data vector with its noise level and provenance."""

    y: np.ndarray
    gamma: float
    provenance: str = "loaded"
    seed: Optional[int] = None
    true_model: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "y", np.asarray(self.y, dtype=float).ravel())
        check_positive(self.gamma, "gamma")


class ForwardOperator:
    """Base contract: F: R^dim_in -> R^dim_out with Jacobian products.

    Subclasses implement evaluate, jvp, vjp. dense_jacobian and
    evaluate_batch have generic fallbacks.
    """

    dim_in: int
    dim_out: int

    def __init__(self, gamma):
        self.gamma = check_positive(gamma, "gamma")

    def evaluate(self, x):
        raise NotImplementedError

    def jvp(self, x, u):
        raise NotImplementedError

    def vjp(self, x, v):
        raise NotImplementedError

    def dense_jacobian(self, x):
        """J(x) as a dim_out x dim_in matrix, one jvp per basis vector."""
        x = self._check_model(x)
        cols = [self.jvp(x, e) for e in np.eye(self.dim_in)]
        return np.column_stack(cols)

    def evaluate_batch(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.dim_in:
            raise DimensionMismatchError(
                f"expected batch of shape (*, {self.dim_in}), got {X.shape}"
            )
        return np.stack([self.evaluate(x) for x in X])

    def _check_model(self, x):
        return check_vector(x, self.dim_in, "x")

    def _check_data(self, v):
        return check_vector(v, self.dim_out, "v")


class Cubic1DOperator(ForwardOperator):
    """F(x) = x + 0.3 x^3 on R^1."""

    dim_in = 1
    dim_out = 1

    def evaluate(self, x):
        x = self._check_model(x)
        return x + 0.3 * x**3

    def jvp(self, x, u):
        x = self._check_model(x)
        u = self._check_model(u)
        return (1.0 + 0.9 * x**2) * u

    def vjp(self, x, v):
        x = self._check_model(x)
        v = self._check_data(v)
        return (1.0 + 0.9 * x**2) * v

    def evaluate_batch(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != 1:
            raise DimensionMismatchError(f"expected batch of shape (*, 1), got {X.shape}")
        return X + 0.3 * X**3


class Pentagon2DOperator(ForwardOperator):
    """F(x) = (x1 + 0.3 x1 x2, x2 + 0.2 x1^2) on R^2."""

    dim_in = 2
    dim_out = 2

    def evaluate(self, x):
        x = self._check_model(x)
        x1, x2 = x
        return np.array([x1 + 0.3 * x1 * x2, x2 + 0.2 * x1**2])

    def _jacobian(self, x):
        x1, x2 = x
        return np.array([[1.0 + 0.3 * x2, 0.3 * x1], [0.4 * x1, 1.0]])

    def jvp(self, x, u):
        x = self._check_model(x)
        u = self._check_model(u)
        return self._jacobian(x) @ u

    def vjp(self, x, v):
        x = self._check_model(x)
        v = self._check_data(v)
        return self._jacobian(x).T @ v

    def dense_jacobian(self, x):
        return self._jacobian(self._check_model(x))

    def evaluate_batch(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != 2:
            raise DimensionMismatchError(f"expected batch of shape (*, 2), got {X.shape}")
        x1, x2 = X[:, 0], X[:, 1]
        return np.column_stack([x1 + 0.3 * x1 * x2, x2 + 0.2 * x1**2])


class MatrixOperator(ForwardOperator):
    """F(x) = A x for a fixed dense matrix A."""

    def __init__(self, A, gamma):
        super().__init__(gamma)
        self.A = np.asarray(A, dtype=float)
        if self.A.ndim != 2:
            raise DimensionMismatchError(f"A must be a matrix, got shape {self.A.shape}")
        self.dim_out, self.dim_in = self.A.shape

    def evaluate(self, x):
        return self.A @ self._check_model(x)

    def jvp(self, x, u):
        self._check_model(x)
        return self.A @ self._check_model(u)

    def vjp(self, x, v):
        self._check_model(x)
        return self.A.T @ self._check_data(v)

    def dense_jacobian(self, x):
        self._check_model(x)
        return self.A.copy()

    def evaluate_batch(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.dim_in:
            raise DimensionMismatchError(
                f"expected batch of shape (*, {self.dim_in}), got {X.shape}"
            )
        return X @ self.A.T


def synthesize_observation(operator, x_true, seed=0, noiseless=False):
    """y = F(x_true) + gamma * eta with eta ~ N(0, I); gamma from the operator."""
    x_true = np.asarray(x_true, dtype=float).ravel()
    clean = operator.evaluate(x_true)
    if noiseless:
        y = clean
    else:
        rng = np.random.default_rng(seed)
        y = clean + operator.gamma * rng.standard_normal(clean.shape)
    return Observation(
        y=y,
        gamma=operator.gamma,
        provenance="synthetic",
        seed=None if noiseless else seed,
        true_model=x_true.copy(),
    )


def resolve_observation(operator, y):
    """Accept an Observation or a raw vector; return (y, gamma)."""
    if isinstance(y, Observation):
        vec = y.y
        gamma = y.gamma
    else:
        vec = np.asarray(y, dtype=float).ravel()
        gamma = operator.gamma
    if vec.shape != (operator.dim_out,):
        raise DimensionMismatchError(
            f"observation has shape {vec.shape}, operator produces ({operator.dim_out},)"
        )
    return vec, gamma
