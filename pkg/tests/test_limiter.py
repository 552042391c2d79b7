import numpy as np
import pytest

from mclfem import limiter as lim
from mclfem.assembly import SolverContext
from mclfem.flux_models import Burgers, LinearAdvection, velocity_field
from mclfem.mesh import build_mesh


def random_valid_tuples(n, rng):
    """Random limiter inputs with bar states inside the nodal bounds."""
    d = rng.uniform(0.05, 2.0, n)
    ui_min = rng.uniform(-2, 0, n)
    ui_max = ui_min + rng.uniform(0.0, 2.0, n)
    uj_min = rng.uniform(-2, 0, n)
    uj_max = uj_min + rng.uniform(0.0, 2.0, n)
    ubar_ij = rng.uniform(ui_min, ui_max)
    ubar_ji = rng.uniform(uj_min, uj_max)
    wij = 2 * d * ubar_ij
    wji = 2 * d * ubar_ji
    f = rng.normal(scale=2.0, size=n)
    return f, wij, wji, d, ui_min, ui_max, uj_min, uj_max


class TestLocalBounds:
    def test_constant(self):
        mesh = build_mesh(2, 2, 3)
        ctx = SolverContext(mesh, Burgers((1.0, 1.0)))
        u = np.full(mesh.num_nodes, 4.2)
        lo, hi = lim.local_bounds(ctx, u)
        assert np.allclose(lo, 4.2) and np.allclose(hi, 4.2)

    def test_single_spike_1d(self):
        mesh = build_mesh(1, 2, 3)
        ctx = SolverContext(mesh, Burgers((1.0,)))
        u = np.zeros(mesh.num_nodes)
        u[1] = 1.0
        lo, hi = lim.local_bounds(ctx, u)
        assert lo[0] == 0.0 and hi[0] == 1.0

    def test_contains_value(self):
        rng = np.random.default_rng(8)
        mesh = build_mesh(2, 2, 4)
        ctx = SolverContext(mesh, Burgers((1.0, 1.0)))
        u = rng.normal(size=mesh.num_nodes)
        for mode in ("subcell", "full"):
            lo, hi = lim.local_bounds(ctx, u, mode)
            assert np.all(lo <= u) and np.all(u <= hi)


class TestMclLimit:
    def test_zero_flux(self):
        assert lim.mcl_limit(0.0, 0.3, -0.1, 1.0, -1, 1, -1, 1, "gms") == 0.0
        assert lim.mcl_limit(0.0, 0.3, -0.1, 1.0, -1, 1, -1, 1, "linear") == 0.0

    def test_saturated_bound_blocks_positive_flux(self):
        """Bar state at the upper bound: the positive target is fully
        rejected (gms may go negative, linear clamps at zero)."""
        d, ui_max = 1.0, 1.0
        wij = 2 * d * ui_max
        f = 0.7
        out_gms = lim.mcl_limit(f, wij, 0.5, d, -1, ui_max, -1, 1, "gms")
        assert out_gms <= 0.0
        out_lin = lim.mcl_limit(f, wij, 0.5, d, -1, ui_max, -1, 1, "linear")
        assert out_lin == 0.0

    def test_zero_viscosity_kills_flux(self):
        assert lim.mcl_limit(0.5, 0.0, 0.0, 0.0, -1, 1, -1, 1, "gms") == 0.0
        assert lim.mcl_limit(-0.5, 0.2, 0.1, 0.0, -1, 1, -1, 1, "linear") == 0.0

    def test_corrected_bar_states_contained(self):
        """Randomized oracle: corrected bar states stay inside the nodal
        bounds whenever the input bar states do (gms variant)."""
        rng = np.random.default_rng(17)
        f, wij, wji, d, ui_min, ui_max, uj_min, uj_max = random_valid_tuples(
            100_000, rng
        )
        fstar = lim.mcl_limit(f, wij, wji, d, ui_min, ui_max, uj_min, uj_max, "gms")
        ubar_ij_star = (wij + fstar) / (2 * d)
        ubar_ji_star = (wji - fstar) / (2 * d)
        tol = 1e-12
        assert np.all(ubar_ij_star >= ui_min - tol)
        assert np.all(ubar_ij_star <= ui_max + tol)
        assert np.all(ubar_ji_star >= uj_min - tol)
        assert np.all(ubar_ji_star <= uj_max + tol)

    def test_linear_variant_sign_and_magnitude(self):
        rng = np.random.default_rng(18)
        n = 100_000
        f = rng.normal(scale=2, size=n)
        wij = rng.normal(size=n)
        wji = rng.normal(size=n)
        d = rng.uniform(0, 1, n)
        lo_i = rng.uniform(-2, 0, n)
        hi_i = lo_i + rng.uniform(0, 2, n)
        lo_j = rng.uniform(-2, 0, n)
        hi_j = lo_j + rng.uniform(0, 2, n)
        fstar = lim.mcl_limit(f, wij, wji, d, lo_i, hi_i, lo_j, hi_j, "linear")
        assert np.all(np.abs(fstar) <= np.abs(f) + 1e-15)
        assert np.all(fstar * f >= -1e-15)

    def test_monotone_in_upper_bound(self):
        """For positive targets, raising u_i^max never decreases f*."""
        rng = np.random.default_rng(19)
        f, wij, wji, d, ui_min, ui_max, uj_min, uj_max = random_valid_tuples(
            20_000, rng
        )
        f = np.abs(f)
        for variant in ("gms", "linear"):
            f1 = lim.mcl_limit(f, wij, wji, d, ui_min, ui_max, uj_min, uj_max, variant)
            f2 = lim.mcl_limit(
                f, wij, wji, d, ui_min, ui_max + 0.5, uj_min, uj_max, variant
            )
            assert np.all(f2 >= f1 - 1e-14)


class TestSiLimit:
    def test_gamma_one_passes_through(self):
        rng = np.random.default_rng(20)
        f, wij, wji, d, ui_min, ui_max, uj_min, uj_max = random_valid_tuples(
            1000, rng
        )
        out = lim.si_limit(f, wij, wji, d, ui_min, ui_max, uj_min, uj_max, 1.0, 1.0)
        assert np.allclose(out, f)

    def test_gamma_zero_equals_linear_variant(self):
        rng = np.random.default_rng(21)
        f, wij, wji, d, ui_min, ui_max, uj_min, uj_max = random_valid_tuples(
            50_000, rng
        )
        out = lim.si_limit(f, wij, wji, d, ui_min, ui_max, uj_min, uj_max, 0.0, 0.0)
        ref = lim.mcl_limit(f, wij, wji, d, ui_min, ui_max, uj_min, uj_max, "linear")
        assert np.allclose(out, ref, atol=1e-14)

    def test_magnitude_bound(self):
        rng = np.random.default_rng(22)
        f, wij, wji, d, ui_min, ui_max, uj_min, uj_max = random_valid_tuples(
            50_000, rng
        )
        gi = rng.uniform(0, 1, f.shape)
        gj = rng.uniform(0, 1, f.shape)
        out = lim.si_limit(f, wij, wji, d, ui_min, ui_max, uj_min, uj_max, gi, gj)
        assert np.all(np.abs(out) <= np.abs(f) + 1e-14)


class TestSmoothnessGamma:
    def _gamma_for(self, fn, cells=16):
        mesh = build_mesh(1, 2, cells, ((-1.0, 1.0),))
        model = LinearAdvection(velocity_field("constant", (1.0,), dim=1))
        ctx = SolverContext(mesh, model)
        u = fn(mesh.node_coords[:, 0])
        return mesh, lim.smoothness_gamma(ctx, u)

    def test_constant_gives_one(self):
        _, g = self._gamma_for(lambda x: np.full_like(x, 2.0))
        assert np.allclose(g, 1.0)

    def test_smooth_parabola_gives_one(self):
        """Constant-sign curvature is recognized as smooth away from the
        boundary (the boundary Laplacian rows carry the boundary flux and
        pollute their immediate neighbors' stencils)."""
        mesh, g = self._gamma_for(lambda x: 1.0 - x**2)
        assert np.all(g[2:-2] > 0.99)

    def test_kink_gives_zero(self):
        mesh, g = self._gamma_for(lambda x: np.abs(x - 0.0078125))
        x = mesh.node_coords[:, 0]
        near = np.abs(x - 0.0078125) < 0.08
        assert g[near].min() < 1e-6

    def test_boundary_is_one(self):
        mesh, g = self._gamma_for(lambda x: np.abs(x))
        assert g[0] == 1.0 and g[-1] == 1.0

    def test_scale_invariance(self):
        mesh = build_mesh(2, 2, 4)
        ctx = SolverContext(mesh, Burgers((1.0, 1.0)))
        rng = np.random.default_rng(23)
        u = rng.normal(size=mesh.num_nodes)
        g1 = lim.smoothness_gamma(ctx, u)
        g2 = lim.smoothness_gamma(ctx, 1e6 * u)
        assert np.allclose(g1, g2, atol=1e-9)
