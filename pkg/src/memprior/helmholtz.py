"""2D frequency-domain Helmholtz solver with PML absorbing boundaries.

Discretization: standard second-order 5-point stencil in the symmetrized
stretched form

    d/dx((ez/ex) du/dx) + d/dz((ex/ez) du/dz) + omega^2 s ex ez u = ex ez q

with complex stretch e = 1 + i sigma/omega and a quadratic sigma profile in
the PML pad. The resulting matrix is complex symmetric (A^T = A), which
buys two things at once: source-receiver reciprocity holds exactly, and the
adjoint solves of the adjoint-state gradient reuse the forward
factorization (A^{-T} = A^{-1}).

The PML pad lies outside the physical grid; squared slowness is extended
into the pad by edge replication. Sources are unit-amplitude node deltas on
the top interior row; receivers sample the bottom interior row; the data
vector interleaves real and imaginary parts, so m = 2 * n_sources *
n_receivers.
"""

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import (
    DimensionMismatchError,
    InvalidModelError,
    SolverFailureError,
)
from .operators import ForwardOperator
from .validation import check_positive

_SPLU_OPTIONS = {"SymmetricMode": True, "DiagPivotThresh": 0.01}
_RESIDUAL_TOL = 1e-10
# velocity clamp for KL-perturbed models, km/s
_V_MIN, _V_MAX = 1.5, 3.5


@dataclass
class HelmholtzConfig:
    nx: int = 200
    nz: int = 200
    extent_km: float = 2.0
    freq_hz: float = 6.0
    pml_cells: int = 20
    pml_reflection: float = 1e-4  # target boundary reflection coefficient R0
    n_sources: int = 15
    n_receivers: int = 196
    background_slowness_sq: float = 0.25  # s^2/km^2

    def __post_init__(self):
        if self.nx < 8 or self.nz < 8:
            raise ValueError("grid must have at least 8 nodes per axis")
        check_positive(self.extent_km, "extent_km")
        check_positive(self.freq_hz, "freq_hz")
        check_positive(self.background_slowness_sq, "background_slowness_sq")
        if self.pml_cells < 0:
            raise ValueError("pml_cells must be >= 0")
        if not 0 < self.pml_reflection < 1:
            raise ValueError("pml_reflection must lie in (0, 1)")
        if self.n_sources > self.nx - 2 or self.n_receivers > self.nx - 2:
            raise ValueError(
                "sources/receivers must fit on interior nodes with spacing >= 1"
            )
        wavelength = 1.0 / (self.freq_hz * np.sqrt(self.background_slowness_sq))
        h = max(self.extent_km / (self.nx - 1), self.extent_km / (self.nz - 1))
        if wavelength / h < 8.0:
            warnings.warn(
                f"only {wavelength / h:.1f} points per wavelength (< 8); "
                "expect visible dispersion",
                stacklevel=2,
            )


def _stretch(n_phys, p, h, omega, sigma0):
    """Complex stretch e = 1 + i sigma/omega at integer and half-integer nodes."""
    n_ext = n_phys + 2 * p
    idx = np.arange(n_ext, dtype=float)
    half = idx[:-1] + 0.5

    def profile(pos):
        if p == 0:
            return np.zeros_like(pos)
        depth = np.maximum(0.0, np.maximum(p - pos, pos - (p + n_phys - 1))) * h
        return sigma0 * (depth / (p * h)) ** 2

    return 1.0 + 1j * profile(idx) / omega, 1.0 + 1j * profile(half) / omega


class HelmholtzSolver:
    """Assembles, factorizes, and differentiates the acquisition map F(s).

    The last-used model's factorization and wavefields are cached, so an
    evaluate followed by a vjp or Born jvp at the same model pays for one
    factorization only.
    """

    def __init__(self, config):
        self.config = config
        cfg = config
        p = cfg.pml_cells
        self.n1 = cfg.nx + 2 * p  # extended x nodes
        self.n2 = cfg.nz + 2 * p  # extended z nodes
        self.n_ext = self.n1 * self.n2
        self.n_phys = cfg.nx * cfg.nz
        self.hx = cfg.extent_km / (cfg.nx - 1)
        self.hz = cfg.extent_km / (cfg.nz - 1)
        self.omega = 2.0 * np.pi * cfg.freq_hz

        c_ref = 1.0 / np.sqrt(cfg.background_slowness_sq)
        if p > 0:
            sig0_x = 3.0 * c_ref * np.log(1.0 / cfg.pml_reflection) / (2.0 * p * self.hx)
            sig0_z = 3.0 * c_ref * np.log(1.0 / cfg.pml_reflection) / (2.0 * p * self.hz)
        else:
            sig0_x = sig0_z = 0.0
        ex_n, ex_h = _stretch(cfg.nx, p, self.hx, self.omega, sig0_x)
        ez_n, ez_h = _stretch(cfg.nz, p, self.hz, self.omega, sig0_z)

        # edge coefficients of the symmetrized 5-point stencil
        cx = np.outer(ez_n, 1.0 / ex_h) / self.hx**2  # (n2, n1-1)
        cz = np.outer(1.0 / ez_h, ex_n) / self.hz**2  # (n2-1, n1)
        grid = np.arange(self.n_ext).reshape(self.n2, self.n1)
        rows_x, cols_x = grid[:, :-1].ravel(), grid[:, 1:].ravel()
        rows_z, cols_z = grid[:-1, :].ravel(), grid[1:, :].ravel()
        vals_x, vals_z = cx.ravel(), cz.ravel()

        self._off_rows = np.concatenate([rows_x, cols_x, rows_z, cols_z])
        self._off_cols = np.concatenate([cols_x, rows_x, cols_z, rows_z])
        self._off_vals = np.concatenate([vals_x, vals_x, vals_z, vals_z])
        diag_base = np.zeros(self.n_ext, dtype=complex)
        np.add.at(diag_base, rows_x, -vals_x)
        np.add.at(diag_base, cols_x, -vals_x)
        np.add.at(diag_base, rows_z, -vals_z)
        np.add.at(diag_base, cols_z, -vals_z)
        self._diag_base = diag_base
        self.w_node = np.outer(ez_n, ex_n).ravel()  # ex*ez weight per node

        # edge-replication extension: physical index feeding each extended node
        ix_phys = np.clip(np.arange(self.n1) - p, 0, cfg.nx - 1)
        iz_phys = np.clip(np.arange(self.n2) - p, 0, cfg.nz - 1)
        self.ext_phys_idx = (iz_phys[:, None] * cfg.nx + ix_phys[None, :]).ravel()

        self.src_ix = self._spread_indices(cfg.n_sources)
        self.rcv_ix = self._spread_indices(cfg.n_receivers)
        self.src_iz = 1
        self.rcv_iz = cfg.nz - 2
        self.src_idx = self._ext_index(self.src_iz, self.src_ix)
        self.rcv_idx = self._ext_index(self.rcv_iz, self.rcv_ix)
        self.n_data = 2 * cfg.n_sources * cfg.n_receivers
        self._cache = None

    def _spread_indices(self, count):
        ix = np.round(np.linspace(1, self.config.nx - 2, count)).astype(int)
        if np.unique(ix).size != count:
            raise ValueError(f"cannot place {count} distinct interior nodes")
        return ix

    def _ext_index(self, iz, ix):
        p = self.config.pml_cells
        return (iz + p) * self.n1 + (np.asarray(ix) + p)

    # --- assembly and factorization ---------------------------------------

    def _check_model(self, s):
        s = np.asarray(s, dtype=float).ravel()
        if s.size != self.n_phys:
            raise DimensionMismatchError(
                f"model has {s.size} cells, grid has {self.n_phys}"
            )
        if not np.isfinite(s).all() or (s <= 0).any():
            raise InvalidModelError("squared slowness must be finite and positive")
        return s

    def _assemble(self, s_phys):
        s_ext = s_phys[self.ext_phys_idx]
        diag = self._diag_base + self.omega**2 * s_ext * self.w_node
        n = self.n_ext
        rows = np.concatenate([self._off_rows, np.arange(n)])
        cols = np.concatenate([self._off_cols, np.arange(n)])
        vals = np.concatenate([self._off_vals, diag])
        return sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsc()

    def _factorized(self, s_phys):
        key = s_phys.tobytes()
        if self._cache is not None and self._cache["key"] == key:
            return self._cache
        matrix = self._assemble(s_phys)
        try:
            lu = splu(matrix, permc_spec="MMD_AT_PLUS_A", options=dict(_SPLU_OPTIONS))
        except RuntimeError as exc:
            raise SolverFailureError(f"factorization failed: {exc}") from exc
        self._cache = {"key": key, "matrix": matrix, "lu": lu, "fields": None}
        return self._cache

    def _solve_checked(self, cache, rhs):
        sol = cache["lu"].solve(rhs)
        residual = cache["matrix"] @ sol - rhs
        rhs_norm = np.linalg.norm(rhs, axis=0)
        bad = rhs_norm > 0
        rel = np.zeros_like(rhs_norm)
        rel[bad] = np.linalg.norm(residual[:, bad], axis=0) / rhs_norm[bad]
        if rel.max(initial=0.0) > _RESIDUAL_TOL:
            raise SolverFailureError(
                f"solve residual {rel.max():.2e} exceeds {_RESIDUAL_TOL:.0e}; "
                "the system is near-singular at this model"
            )
        return sol

    def _fields(self, s_phys):
        cache = self._factorized(s_phys)
        if cache["fields"] is None:
            k = self.config.n_sources
            rhs = np.zeros((self.n_ext, k), dtype=complex)
            rhs[self.src_idx, np.arange(k)] = 1.0
            cache["fields"] = self._solve_checked(cache, rhs)
        return cache

    # --- operator actions ---------------------------------------------------

    def _interleave(self, d_complex):
        out = np.empty(self.n_data)
        flat = d_complex.ravel()
        out[0::2] = flat.real
        out[1::2] = flat.imag
        return out

    def forward(self, s):
        """Data vector of all source-receiver pairs, Re/Im interleaved."""
        s = self._check_model(s)
        cache = self._fields(s)
        d = cache["fields"][self.rcv_idx, :].T  # (n_sources, n_receivers)
        return self._interleave(d)

    def vjp(self, s, v):
        """Adjoint-state J^T v in physical model space."""
        s = self._check_model(s)
        v = np.asarray(v, dtype=float).ravel()
        if v.size != self.n_data:
            raise DimensionMismatchError(f"data vector has {v.size} != {self.n_data}")
        cache = self._fields(s)
        u = cache["fields"]
        k = self.config.n_sources
        vc = (v[0::2] + 1j * v[1::2]).reshape(k, self.config.n_receivers)
        rhs = np.zeros((self.n_ext, k), dtype=complex)
        rhs[self.rcv_idx, :] = np.conj(vc).T
        lam = self._solve_checked(cache, rhs)
        g_ext = -self.omega**2 * np.real(
            self.w_node * np.einsum("nk,nk->n", lam, u)
        )
        g_phys = np.zeros(self.n_phys)
        np.add.at(g_phys, self.ext_phys_idx, g_ext)
        return g_phys

    def born_jvp(self, s, ds):
        """Linearized (Born) data perturbation for a model perturbation ds."""
        s = self._check_model(s)
        ds = np.asarray(ds, dtype=float).ravel()
        if ds.size != self.n_phys:
            raise DimensionMismatchError(f"perturbation has {ds.size} != {self.n_phys}")
        cache = self._fields(s)
        u = cache["fields"]
        ds_ext = ds[self.ext_phys_idx]
        rhs = -self.omega**2 * (self.w_node * ds_ext)[:, None] * u
        du = self._solve_checked(cache, rhs) if np.any(rhs) else np.zeros_like(u)
        return self._interleave(du[self.rcv_idx, :].T)

    def wavefield(self, s, source):
        """Extended-grid complex wavefield of one source index (for validation)."""
        s = self._check_model(s)
        u = self._fields(s)["fields"][:, source]
        return u.reshape(self.n2, self.n1)

    def greens_solution(self, s, iz, ix):
        """Wavefield of a unit node delta at physical node (iz, ix)."""
        s = self._check_model(s)
        cache = self._factorized(s)
        rhs = np.zeros((self.n_ext, 1), dtype=complex)
        rhs[self._ext_index(iz, np.array([ix]))[0], 0] = 1.0
        return self._solve_checked(cache, rhs)[:, 0].reshape(self.n2, self.n1)

    def physical_part(self, field_ext):
        """Restrict an extended-grid field to the physical region."""
        p = self.config.pml_cells
        return field_ext.reshape(self.n2, self.n1)[
            p : p + self.config.nz, p : p + self.config.nx
        ]

    def node_coordinates(self):
        """Physical (z, x) coordinates in km of the physical grid nodes."""
        x = np.arange(self.config.nx) * self.hx
        z = np.arange(self.config.nz) * self.hz
        return z, x


def relative_noise_gamma(clean_data, rel=0.055):
    """Per-component noise level gamma = rel * ||d|| / sqrt(m)."""
    clean_data = np.asarray(clean_data, dtype=float).ravel()
    return float(rel * np.linalg.norm(clean_data) / np.sqrt(clean_data.size))


class HelmholtzKLOperator(ForwardOperator):
    """F(xi) = helmholtz_forward(clamp(s0 + amplitude * synthesize(xi))).

    Model space is the whitened KL coefficient vector. The velocity clamp
    (1.5 to 3.5 km/s) zeroes the Jacobian over clamped cells consistently in
    jvp and vjp, preserving the adjoint identity.
    """

    def __init__(self, solver, basis, gamma, amplitude=2.5):
        super().__init__(gamma)
        if (basis.nz, basis.nx) != (solver.config.nz, solver.config.nx):
            raise DimensionMismatchError(
                f"basis grid {basis.nz}x{basis.nx} does not match solver grid "
                f"{solver.config.nz}x{solver.config.nx}"
            )
        self.solver = solver
        self.basis = basis
        self.amplitude = check_positive(amplitude, "amplitude")
        self.dim_in = basis.n_terms
        self.dim_out = solver.n_data
        self.s_lo = 1.0 / _V_MAX**2
        self.s_hi = 1.0 / _V_MIN**2

    def field_and_mask(self, xi):
        xi = self._check_model(xi)
        raw = self.basis.s0 + self.amplitude * (xi @ self.basis.synthesis_)
        mask = (raw > self.s_lo) & (raw < self.s_hi)
        if not mask.all():
            warnings.warn(
                "KL field clipped to the velocity box [1.5, 3.5] km/s",
                stacklevel=2,
            )
        return np.clip(raw, self.s_lo, self.s_hi), mask

    def evaluate(self, xi):
        s, _ = self.field_and_mask(xi)
        return self.solver.forward(s)

    def jvp(self, xi, u):
        u = self._check_model(np.asarray(u, dtype=float))
        s, mask = self.field_and_mask(xi)
        ds = self.amplitude * (u @ self.basis.synthesis_) * mask
        return self.solver.born_jvp(s, ds)

    def vjp(self, xi, v):
        s, mask = self.field_and_mask(xi)
        g = self.solver.vjp(s, np.asarray(v, dtype=float))
        return self.amplitude * (self.basis.synthesis_ @ (g * mask))
