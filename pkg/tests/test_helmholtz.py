"""Solver checks against closed-form acoustics: the free-space Green's
function, reciprocity of the symmetric system, mesh-refinement order,
adjoint consistency, and PML absorption."""

import numpy as np
import pytest
from scipy.special import hankel1

from memprior.errors import DimensionMismatchError, InvalidModelError
from memprior.helmholtz import (
    HelmholtzConfig,
    HelmholtzKLOperator,
    HelmholtzSolver,
    relative_noise_gamma,
)
from memprior.klfield import KarhunenLoeveBasis

# small grids keep the unit suite fast; freq 4 Hz keeps > 8 points/wavelength
# down to 40 nodes per axis. TINY drops to 2.5 Hz for the 32-node grids.
SMALL = dict(extent_km=2.0, freq_hz=4.0, background_slowness_sq=0.25)
TINY = dict(SMALL, freq_hz=2.5)


def homogeneous(solver):
    return np.full(solver.n_phys, solver.config.background_slowness_sq)


def greens_exact(solver, s0, radii_nodes):
    """Analytic -i/4 H0^(1)(kr) scaled by h^2 for a unit node source."""
    k = solver.omega * np.sqrt(s0)
    r = radii_nodes * solver.hx
    return -0.25j * solver.hx**2 * hankel1(0, k * r)


class TestGreensFunction:
    def test_matches_free_space_solution(self):
        cfg = HelmholtzConfig(nx=161, nz=161, pml_cells=20, pml_reflection=1e-5,
                              n_sources=3, n_receivers=5, **SMALL)
        solver = HelmholtzSolver(cfg)
        s = homogeneous(solver)
        c = 80  # center node
        field = solver.physical_part(solver.greens_solution(s, c, c))

        k = solver.omega * np.sqrt(cfg.background_slowness_sq)
        # sample nodes 0.2 to 0.6 km from the source, well clear of the PML
        iz, ix = np.mgrid[0:161, 0:161]
        r_nodes = np.hypot(iz - c, ix - c)
        ring = (r_nodes * solver.hx >= 0.2) & (r_nodes * solver.hx <= 0.6)
        exact = -0.25j * solver.hx**2 * hankel1(0, k * r_nodes[ring] * solver.hx)
        rel = np.linalg.norm(field[ring] - exact) / np.linalg.norm(exact)
        assert rel < 0.05

    def test_second_order_refinement(self):
        # same physical extent, h halving; compare at aligned nodes
        errors = []
        for nx, scale in [(81, 1), (161, 2), (321, 4)]:
            cfg = HelmholtzConfig(nx=nx, nz=nx, pml_cells=20, pml_reflection=1e-5,
                                  n_sources=3, n_receivers=5, **SMALL)
            solver = HelmholtzSolver(cfg)
            s = homogeneous(solver)
            c = 40 * scale
            field = solver.physical_part(solver.greens_solution(s, c, c))
            k = solver.omega * np.sqrt(cfg.background_slowness_sq)
            # fixed physical sample points: node offsets on the coarsest grid
            offs = [(dz, dx) for dz in range(-20, 21, 2) for dx in range(-20, 21, 2)
                    if 0.2 <= np.hypot(dz, dx) * 0.025 <= 0.5]
            vals = np.array([field[c + dz * scale, c + dx * scale]
                             for dz, dx in offs])
            r = np.array([np.hypot(dz, dx) * 0.025 for dz, dx in offs])
            exact = -0.25j * solver.hx**2 * hankel1(0, k * r)
            # compare Green's values, i.e. field / h^2
            errors.append(np.linalg.norm(vals / solver.hx**2 - exact / solver.hx**2)
                          / np.linalg.norm(exact / solver.hx**2))
        orders = [np.log2(errors[i] / errors[i + 1]) for i in range(2)]
        assert all(1.7 <= o <= 2.2 for o in orders), (errors, orders)


class TestReciprocity:
    def test_swapping_source_and_receiver(self):
        cfg = HelmholtzConfig(nx=61, nz=61, pml_cells=12, n_sources=3,
                              n_receivers=5, **SMALL)
        solver = HelmholtzSolver(cfg)
        rng = np.random.default_rng(3)
        s = homogeneous(solver) * (1.0 + 0.1 * rng.standard_normal(solver.n_phys))
        a, b = (10, 17), (45, 38)
        u_ab = solver.physical_part(solver.greens_solution(s, *a))[b]
        u_ba = solver.physical_part(solver.greens_solution(s, *b))[a]
        assert abs(u_ab - u_ba) <= 1e-6 * abs(u_ab)


class TestAdjointConsistency:
    def test_vjp_matches_born_jvp(self):
        cfg = HelmholtzConfig(nx=40, nz=40, pml_cells=10, n_sources=5,
                              n_receivers=9, **SMALL)
        solver = HelmholtzSolver(cfg)
        rng = np.random.default_rng(11)
        for _ in range(20):
            s = 0.25 * (1.0 + 0.15 * rng.uniform(-1, 1, solver.n_phys))
            ds = rng.standard_normal(solver.n_phys)
            v = rng.standard_normal(solver.n_data)
            lhs = solver.born_jvp(s, ds) @ v
            rhs = ds @ solver.vjp(s, v)
            assert abs(lhs - rhs) <= 1e-8 * max(abs(lhs), abs(rhs))

    def test_born_matches_finite_differences(self):
        cfg = HelmholtzConfig(nx=32, nz=32, pml_cells=10, n_sources=3,
                              n_receivers=5, **TINY)
        solver = HelmholtzSolver(cfg)
        rng = np.random.default_rng(5)
        s = homogeneous(solver)
        ds = rng.standard_normal(solver.n_phys)
        eps = 1e-6
        fd = (solver.forward(s + eps * ds) - solver.forward(s - eps * ds)) / (2 * eps)
        born = solver.born_jvp(s, ds)
        assert np.linalg.norm(fd - born) <= 1e-6 * np.linalg.norm(born)

    def test_zero_perturbation_gives_zero_data(self):
        cfg = HelmholtzConfig(nx=32, nz=32, pml_cells=10, n_sources=3,
                              n_receivers=5, **TINY)
        solver = HelmholtzSolver(cfg)
        out = solver.born_jvp(homogeneous(solver), np.zeros(solver.n_phys))
        assert np.all(out == 0.0)


class TestPml:
    def test_boundary_reflection_below_one_percent(self):
        nx = 96
        cfg = HelmholtzConfig(nx=nx, nz=nx, pml_cells=20, n_sources=3,
                              n_receivers=5, **SMALL)
        solver = HelmholtzSolver(cfg)
        src = nx // 2
        u = solver.physical_part(solver.greens_solution(homogeneous(solver), src, src))

        pad = nx // 2  # reference doubles the physical extent at the same h
        nref = nx + 2 * pad
        cfg_ref = HelmholtzConfig(
            nx=nref, nz=nref, pml_cells=20, n_sources=3, n_receivers=5,
            extent_km=cfg.extent_km * (nref - 1) / (nx - 1),
            freq_hz=cfg.freq_hz,
            background_slowness_sq=cfg.background_slowness_sq,
        )
        ref_solver = HelmholtzSolver(cfg_ref)
        u_ref_full = ref_solver.physical_part(
            ref_solver.greens_solution(homogeneous(ref_solver), src + pad, src + pad)
        )
        u_ref = u_ref_full[pad : pad + nx, pad : pad + nx]
        rel = np.linalg.norm(u - u_ref) / np.linalg.norm(u_ref)
        assert rel < 0.01

    def test_field_decays_inside_pad(self):
        cfg = HelmholtzConfig(nx=61, nz=61, pml_cells=16, n_sources=3,
                              n_receivers=5, **SMALL)
        solver = HelmholtzSolver(cfg)
        ext = solver.wavefield(homogeneous(solver), source=1)
        interior_amp = np.abs(solver.physical_part(ext.ravel())).max()
        outer_ring = np.concatenate(
            [np.abs(ext[0, :]), np.abs(ext[-1, :]), np.abs(ext[:, 0]), np.abs(ext[:, -1])]
        )
        # one-way traversal of the pad attenuates by ~sqrt(pml_reflection)
        assert outer_ring.max() < 0.05 * interior_amp


@pytest.fixture(scope="module")
def solver():
    cfg = HelmholtzConfig(nx=32, nz=32, pml_cells=8, n_sources=4,
                          n_receivers=6, **TINY)
    return HelmholtzSolver(cfg)


class TestSolverMechanics:
    def test_data_layout(self, solver):
        d = solver.forward(homogeneous(solver))
        assert d.shape == (2 * 4 * 6,)
        u = solver.wavefield(homogeneous(solver), source=2)
        p = solver.config.pml_cells
        node = u[solver.rcv_iz + p, solver.rcv_ix[3] + p]
        pair = 2 * (2 * 6 + 3)
        assert d[pair] == pytest.approx(node.real, abs=0.0)
        assert d[pair + 1] == pytest.approx(node.imag, abs=0.0)

    def test_factorization_reused_across_calls(self, solver):
        s = homogeneous(solver)
        solver.forward(s)
        lu = solver._cache["lu"]
        solver.vjp(s, np.ones(solver.n_data))
        solver.born_jvp(s, np.ones(solver.n_phys))
        assert solver._cache["lu"] is lu
        solver.forward(s * 1.01)
        assert solver._cache["lu"] is not lu

    def test_model_validation(self, solver):
        bad = homogeneous(solver)
        bad[3] = 0.0
        with pytest.raises(InvalidModelError):
            solver.forward(bad)
        with pytest.raises(InvalidModelError):
            solver.forward(np.full(solver.n_phys, np.nan))
        with pytest.raises(DimensionMismatchError):
            solver.forward(np.ones(7))
        with pytest.raises(DimensionMismatchError):
            solver.vjp(homogeneous(solver), np.ones(3))

    def test_config_validation(self):
        with pytest.raises(ValueError):
            HelmholtzConfig(nx=32, nz=32, n_receivers=31, **SMALL)
        with pytest.raises(ValueError):
            HelmholtzConfig(nx=32, nz=32, n_sources=3, n_receivers=5,
                            pml_reflection=2.0, **SMALL)
        with pytest.warns(UserWarning, match="points per wavelength"):
            HelmholtzConfig(nx=32, nz=32, n_sources=3, n_receivers=5,
                            extent_km=2.0, freq_hz=20.0,
                            background_slowness_sq=0.25)


@pytest.fixture(scope="module")
def pieces():
    cfg = HelmholtzConfig(nx=48, nz=48, pml_cells=12, n_sources=4,
                          n_receivers=7, **SMALL)
    kl_solver = HelmholtzSolver(cfg)
    basis = KarhunenLoeveBasis(nx=48, nz=48, n_terms=12, s0=0.25).fit()
    return kl_solver, basis


class TestKlComposition:
    def test_grid_mismatch_rejected(self, pieces):
        solver, _ = pieces
        other = KarhunenLoeveBasis(nx=20, nz=20, n_terms=5).fit()
        with pytest.raises(DimensionMismatchError):
            HelmholtzKLOperator(solver, other, gamma=0.1)

    def test_evaluate_matches_manual_composition(self, pieces):
        solver, basis = pieces
        op = HelmholtzKLOperator(solver, basis, gamma=0.1, amplitude=2.5)
        rng = np.random.default_rng(0)
        xi = rng.standard_normal(basis.n_terms)
        s = np.clip(0.25 + 2.5 * (xi @ basis.synthesis_), op.s_lo, op.s_hi)
        assert np.array_equal(op.evaluate(xi), solver.forward(s))
        assert op.dim_in == 12 and op.dim_out == solver.n_data

    def test_adjoint_identity_through_composition(self, pieces):
        solver, basis = pieces
        op = HelmholtzKLOperator(solver, basis, gamma=0.1, amplitude=2.5)
        rng = np.random.default_rng(7)
        for _ in range(5):
            xi = rng.standard_normal(op.dim_in)
            u = rng.standard_normal(op.dim_in)
            v = rng.standard_normal(op.dim_out)
            lhs = op.jvp(xi, u) @ v
            rhs = u @ op.vjp(xi, v)
            assert abs(lhs - rhs) <= 1e-8 * max(abs(lhs), abs(rhs))

    def test_clamping_is_consistent_and_warns(self, pieces):
        solver, basis = pieces
        op = HelmholtzKLOperator(solver, basis, gamma=0.1, amplitude=1e4)
        rng = np.random.default_rng(2)
        xi = rng.standard_normal(op.dim_in)
        with pytest.warns(UserWarning, match="clipped"):
            s, mask = op.field_and_mask(xi)
        assert not mask.all()
        assert s.min() >= op.s_lo and s.max() <= op.s_hi
        u = rng.standard_normal(op.dim_in)
        v = rng.standard_normal(op.dim_out)
        with pytest.warns(UserWarning):
            lhs = op.jvp(xi, u) @ v
        with pytest.warns(UserWarning):
            rhs = u @ op.vjp(xi, v)
        assert abs(lhs - rhs) <= 1e-8 * max(abs(lhs), abs(rhs))


def test_relative_noise_gamma():
    gamma = relative_noise_gamma(np.array([3.0, 4.0]), rel=0.1)
    assert gamma == pytest.approx(0.1 * 5.0 / np.sqrt(2.0), rel=1e-12)
