import numpy as np
import pytest

from mclfem.mesh import build_mesh, local_subcell_neighbors


class TestBuildMesh:
    def test_1d_p2_counts(self):
        mesh = build_mesh(1, 2, 5)
        assert mesh.num_nodes == 11
        assert np.allclose(np.diff(mesh.node_coords[:, 0]), 0.1)

    def test_2d_p2_counts(self):
        mesh = build_mesh(2, 2, 64)
        assert mesh.num_nodes == 129**2
        assert mesh.num_elements == 64**2

    def test_single_cell_stencils(self):
        mesh = build_mesh(1, 1, 1)
        assert mesh.subcell_stencil(0) == {0, 1}
        assert mesh.full_stencil(0) == {0, 1}

    def test_zero_cells_raises(self):
        with pytest.raises(ValueError):
            build_mesh(1, 2, 0)

    def test_lattice_spacing(self):
        mesh = build_mesh(2, 2, 4, ((0.0, 2.0), (0.0, 1.0)))
        # control points on a uniform lattice with spacing h/p per axis
        assert np.allclose(mesh.fine_spacing, (0.25, 0.125))
        x = np.unique(mesh.node_coords[:, 0])
        assert np.allclose(np.diff(x), 0.25)

    def test_elem_nodes_shape(self):
        mesh = build_mesh(2, 2, 3)
        assert mesh.elem_nodes.shape == (9, 9)
        # element 0 lower-left corner is node 0
        assert mesh.elem_nodes[0, 0] == 0

    def test_lumped_mass_positive(self):
        from mclfem.assembly import SolverContext
        from mclfem.flux_models import Burgers

        mesh = build_mesh(2, 2, 3)
        ctx = SolverContext(mesh, Burgers((1.0, 1.0)))
        assert np.all(ctx.lumped_mass > 0)
        assert abs(ctx.lumped_mass.sum() - 1.0) < 1e-12


class TestLocalSubcellNeighbors:
    def test_1d_p2_middle(self):
        assert local_subcell_neighbors(2, 1, 1) == {0, 1, 2}

    def test_2d_p2_center(self):
        center = 4  # multi-index (1, 1) of the 3x3 lattice
        assert local_subcell_neighbors(2, 2, center) == set(range(9))

    def test_2d_p2_corner(self):
        # corner (0,0): its single subcell holds corner, two edge
        # midpoints, and the center
        assert local_subcell_neighbors(2, 2, 0) == {0, 1, 3, 4}

    def test_symmetry(self):
        for p, d in [(1, 1), (2, 1), (1, 2), (2, 2)]:
            N = (p + 1) ** d
            for a in range(N):
                for b in local_subcell_neighbors(p, d, a):
                    assert a in local_subcell_neighbors(p, d, b)

    def test_bad_index(self):
        with pytest.raises(ValueError):
            local_subcell_neighbors(2, 2, 9)


class TestGlobalStencils:
    def test_subcell_subset_of_full(self):
        mesh = build_mesh(2, 2, 3)
        for i in range(0, mesh.num_nodes, 7):
            sub = mesh.subcell_stencil(i)
            full = mesh.full_stencil(i)
            assert i in sub
            assert sub <= full

    def test_stencil_symmetry(self):
        mesh = build_mesh(2, 2, 3)
        for i in range(mesh.num_nodes):
            for j in mesh.subcell_stencil(i):
                assert i in mesh.subcell_stencil(j)

    def test_interior_counts_q2(self):
        mesh = build_mesh(2, 2, 4)
        # subcell-interior lattice node away from boundaries: 9 neighbors
        idx = mesh.node_index_grid()
        center_elem_node = idx[3, 3]  # odd/odd lattice coords = cell center
        assert len(mesh.subcell_stencil(center_elem_node)) == 9
        # shared macro-vertex sees up to 25 nodes
        vertex = idx[4, 4]
        assert len(mesh.full_stencil(vertex)) == 25

    def test_window_bounds_match_stencil(self):
        """Vectorized window bounds agree with the set-based stencil."""
        from mclfem.assembly import SolverContext
        from mclfem.flux_models import Burgers

        rng = np.random.default_rng(7)
        mesh = build_mesh(2, 2, 3)
        ctx = SolverContext(mesh, Burgers((1.0, 1.0)))
        u = rng.normal(size=mesh.num_nodes)
        lo, hi = ctx.local_bounds(u, "subcell")
        for i in range(mesh.num_nodes):
            st = sorted(mesh.subcell_stencil(i))
            assert lo[i] == min(u[j] for j in st)
            assert hi[i] == max(u[j] for j in st)
        lof, hif = ctx.local_bounds(u, "full")
        for i in range(0, mesh.num_nodes, 5):
            st = sorted(mesh.full_stencil(i))
            assert lof[i] == min(u[j] for j in st)
            assert hif[i] == max(u[j] for j in st)

    def test_pair_arrays_structural(self):
        """Assembled pair lists cover exactly the subcell-stencil pairs."""
        from mclfem.assembly import SolverContext
        from mclfem.flux_models import Burgers

        mesh = build_mesh(2, 2, 2)
        ctx = SolverContext(mesh, Burgers((1.0, 1.0)))
        stored = set()
        for e in range(mesh.num_elements):
            for i, j in zip(ctx.I[e], ctx.J[e]):
                stored.add((min(i, j), max(i, j)))
        expected = set()
        for i in range(mesh.num_nodes):
            for j in mesh.subcell_stencil(i):
                if j != i:
                    expected.add((min(i, j), max(i, j)))
        assert stored == expected
