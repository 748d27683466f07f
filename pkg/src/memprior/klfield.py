"""Karhunen-Loeve parameterization of Gaussian random fields on the unit square.

Covariance operator (tau^2 I - Laplacian)^(-alpha) with Neumann boundary
conditions. Eigenpairs are closed-form cosine products; on the tensor node
grid the trapezoid-weighted inner product reproduces their orthonormality
exactly (cosine-sum identities), so round trips hold to machine precision.

Whitened coefficients xi ~ N(0, I) are the model space; the sqrt(lambda)
weighting lives inside the synthesis map field = s0 + sum_i sqrt(lambda_i)
xi_i phi_i.
"""

import json
import os

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import DimensionMismatchError
from .io import read_matrix, write_matrix
from .validation import check_positive


class KarhunenLoeveBasis(BaseEstimator, TransformerMixin):
    """Truncated KL basis on an nx-by-nz node grid over the unit square.

    Parameters
    ----------
    nx, nz : grid nodes per axis (fields are flattened row-major, z-major).
    alpha : covariance smoothness exponent.
    tau : inverse correlation length.
    n_terms : number of leading eigenpairs kept (sorted by descending
        eigenvalue, ties broken by (j, k) lexicographic order).
    s0 : constant field baseline added by synthesis.
    """

    def __init__(self, nx=200, nz=200, alpha=3.0, tau=5.0, n_terms=100, s0=0.25):
        self.nx = nx
        self.nz = nz
        self.alpha = alpha
        self.tau = tau
        self.n_terms = n_terms
        self.s0 = s0

    def fit(self, X=None, y=None):
        if self.nx < 2 or self.nz < 2:
            raise ValueError("grid must have at least 2 nodes per axis")
        check_positive(self.tau, "tau")
        check_positive(self.alpha, "alpha")
        if self.n_terms < 1:
            raise ValueError("n_terms must be >= 1")

        cap = int(np.ceil(2.5 * np.sqrt(self.n_terms))) + 2
        jj, kk = np.meshgrid(np.arange(cap), np.arange(cap), indexing="ij")
        lam = (self.tau**2 + np.pi**2 * (jj**2 + kk**2)) ** (-self.alpha)
        order = np.lexsort((kk.ravel(), jj.ravel(), -lam.ravel()))
        take = order[: self.n_terms]
        if take.size < self.n_terms:
            raise ValueError(f"only {take.size} modes available, need {self.n_terms}")
        j_sel = jj.ravel()[take]
        k_sel = kk.ravel()[take]
        # cosine-sum orthogonality on the node grid needs j <= nx-2, k <= nz-2
        if j_sel.max() > self.nx - 2 or k_sel.max() > self.nz - 2:
            raise ValueError(
                f"n_terms={self.n_terms} needs mode indices up to "
                f"({j_sel.max()}, {k_sel.max()}), too high for a "
                f"{self.nx}x{self.nz} grid"
            )

        xi1 = np.linspace(0.0, 1.0, self.nx)
        xi2 = np.linspace(0.0, 1.0, self.nz)
        amp = lambda idx: np.where(idx == 0, 1.0, 2.0)  # noqa: E731
        modes = np.empty((self.n_terms, self.nz * self.nx))
        for i in range(self.n_terms):
            cj = np.cos(j_sel[i] * np.pi * xi1)
            ck = np.cos(k_sel[i] * np.pi * xi2)
            scale = np.sqrt(amp(j_sel[i]) * amp(k_sel[i]))
            modes[i] = scale * np.outer(ck, cj).ravel()

        wx = np.full(self.nx, 1.0 / (self.nx - 1))
        wx[[0, -1]] *= 0.5
        wz = np.full(self.nz, 1.0 / (self.nz - 1))
        wz[[0, -1]] *= 0.5

        self.mode_indices_ = np.column_stack([j_sel, k_sel])
        self.eigenvalues_ = lam.ravel()[take]
        self.modes_ = modes
        self.weights_ = np.outer(wz, wx).ravel()
        self.synthesis_ = np.sqrt(self.eigenvalues_)[:, None] * modes
        self.n_grid_ = self.nz * self.nx
        return self

    # --- linear maps -----------------------------------------------------

    def synthesize(self, xi):
        """field = s0 + sum_i sqrt(lambda_i) xi_i phi_i, flattened (n_grid,)."""
        xi = self._check_coeffs(xi)
        return self.s0 + xi @ self.synthesis_

    def project(self, field):
        """Whitened coefficients of a field: the inverse of synthesize on its range."""
        field = self._check_field(field)
        inner = self.modes_ @ (self.weights_ * (field - self.s0))
        return inner / np.sqrt(self.eigenvalues_)

    def synthesize_vjp(self, field_bar):
        """Adjoint of the linear part of synthesize under plain dot products.

        Distinct from project: no quadrature weights and no 1/sqrt(lambda),
        because operator chain rules pair gradients with the plain synthesis
        matrix, not with the weighted analysis map.
        """
        field_bar = np.asarray(field_bar, dtype=float).ravel()
        if field_bar.size != self.n_grid_:
            raise DimensionMismatchError(
                f"field gradient has {field_bar.size} entries, grid has {self.n_grid_}"
            )
        return self.synthesis_ @ field_bar

    # --- sklearn-style batch interface ------------------------------------

    def transform(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n_grid_:
            raise DimensionMismatchError(
                f"fields have {X.shape[1]} entries, grid has {self.n_grid_}"
            )
        return ((X - self.s0) * self.weights_) @ self.modes_.T / np.sqrt(self.eigenvalues_)

    def inverse_transform(self, C):
        C = np.atleast_2d(np.asarray(C, dtype=float))
        if C.shape[1] != self.n_terms:
            raise DimensionMismatchError(
                f"coefficients have {C.shape[1]} entries, basis has {self.n_terms}"
            )
        return self.s0 + C @ self.synthesis_

    def sample(self, count, random_state):
        """Draw whitened coefficients and their synthesized fields."""
        if count < 1:
            raise ValueError("count must be >= 1")
        rng = np.random.default_rng(random_state)
        xi = rng.standard_normal((count, self.n_terms))
        return xi, self.inverse_transform(xi)

    # --- persistence -------------------------------------------------------

    def save(self, out_dir):
        os.makedirs(out_dir, exist_ok=True)
        write_matrix(os.path.join(out_dir, "kl_eigenvalues.mpst"), self.eigenvalues_)
        write_matrix(os.path.join(out_dir, "kl_modes.mpst"), self.modes_)
        meta = {
            "nx": self.nx,
            "nz": self.nz,
            "alpha": self.alpha,
            "tau": self.tau,
            "n_terms": self.n_terms,
            "s0": self.s0,
            "mode_indices": self.mode_indices_.tolist(),
        }
        with open(os.path.join(out_dir, "kl_meta.json"), "w") as fh:
            json.dump(meta, fh, indent=2)

    @classmethod
    def load(cls, out_dir):
        with open(os.path.join(out_dir, "kl_meta.json")) as fh:
            meta = json.load(fh)
        basis = cls(
            nx=meta["nx"],
            nz=meta["nz"],
            alpha=meta["alpha"],
            tau=meta["tau"],
            n_terms=meta["n_terms"],
            s0=meta["s0"],
        ).fit()
        # loaded arrays must agree with the rebuilt analytic basis
        lam = read_matrix(os.path.join(out_dir, "kl_eigenvalues.mpst"))
        if not np.allclose(lam, basis.eigenvalues_, rtol=1e-12):
            raise ValueError(f"stored eigenvalues in {out_dir} do not match metadata")
        return basis

    # --- helpers -----------------------------------------------------------

    def _check_coeffs(self, xi):
        xi = np.asarray(xi, dtype=float).ravel()
        if xi.size != self.n_terms:
            raise DimensionMismatchError(
                f"coefficient vector has {xi.size} entries, basis has {self.n_terms}"
            )
        return xi

    def _check_field(self, field):
        field = np.asarray(field, dtype=float).ravel()
        if field.size != self.n_grid_:
            raise DimensionMismatchError(
                f"field has {field.size} entries, grid has {self.n_grid_}"
            )
        return field

    def field_shape(self):
        return (self.nz, self.nx)
