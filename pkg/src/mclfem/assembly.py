"""Precomputed global assembly structures for one (mesh, model) pair.

Uniform meshes share a single reference element, so every element-local
operation becomes a batched contraction against small fixed matrices, and
global operators (consistent mass, gradient, lumped gradient) are exact
tensor products of assembled 1D matrices.  All hot-path reductions use
np.einsum without BLAS dispatch and np.bincount, which keeps results
bitwise reproducible regardless of BLAS threading.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded
from scipy.sparse import coo_matrix, csr_matrix, diags, identity, kron as spkron
from scipy.sparse.linalg import splu

from .flux_models import FluxModel
from .mesh import FaceBlock, Mesh
from .reference_element import (
    ReferenceElement,
    bernstein_1d,
    gauss_rule_01,
    reference_element,
)


def _assemble_1d(cells: int, p: int, block: np.ndarray) -> csr_matrix:
    """Assemble a global 1D matrix from identical per-cell blocks with
    shared endpoint nodes."""
    n1 = p + 1
    M = p * cells + 1
    starts = p * np.arange(cells)
    ii, jj = np.meshgrid(np.arange(n1), np.arange(n1), indexing="ij")
    rows = (starts[:, None] + ii.ravel()[None, :]).ravel()
    cols = (starts[:, None] + jj.ravel()[None, :]).ravel()
    vals = np.tile(block.ravel(), cells)
    return coo_matrix((vals, (rows, cols)), shape=(M, M)).tocsr()


def _assemble_1d_diag(cells: int, p: int, diag_block: np.ndarray) -> np.ndarray:
    M = p * cells + 1
    out = np.zeros(M)
    starts = p * np.arange(cells)
    for a in range(p + 1):
        np.add.at(out, starts + a, diag_block[a])
    return out


@dataclass
class FaceTables:
    """Boundary faces on one side, with trace quadrature tables."""

    block: FaceBlock
    elements: np.ndarray   # (Eb,)
    gnodes: np.ndarray     # (Eb, Nf) global ids of the face nodes
    Bf: np.ndarray         # (Nf, Qf) trace basis values at face quad points
    wq: np.ndarray         # (Qf,) weights including face measure
    xq: np.ndarray         # (Eb, Qf, dim) physical quad coordinates
    normal: np.ndarray     # (dim,)
    vdotn: np.ndarray | None = None  # static f'(u).n for linear advection


class SolverContext:
    """Topology- and model-dependent precomputation for the assembly loops.

    variant selects the gradient operator of the transport term:
    'compact' uses the sparse lumped gradient (subcell stencil),
    'full' the unlumped gradient (full element stencil, low-order only).
    """

    def __init__(self, mesh: Mesh, model: FluxModel, variant: str = "compact"):
        if variant not in ("compact", "full"):
            raise ValueError(f"unknown stencil variant {variant!r}")
        self.mesh = mesh
        self.model = model
        self.variant = variant
        self.ref = reference_element(mesh.degree, mesh.dim, mesh.h)

        ref = self.ref
        d = mesh.dim
        self.elem_nodes = mesh.elem_nodes
        self.elem_flat = mesh.elem_nodes.ravel()
        self.num_nodes = mesh.num_nodes

        # ---- pair topology -------------------------------------------------
        pairs = ref.pairs_subcell if variant == "compact" else ref.pairs_full
        self.pa = pairs[:, 0]
        self.pb = pairs[:, 1]
        grad = ref.Ct if variant == "compact" else ref.C
        self.c_ab = np.stack([grad[k][self.pa, self.pb] for k in range(d)], axis=1)
        self.c_ba = np.stack([grad[k][self.pb, self.pa] for k in range(d)], axis=1)
        self.cn_ab = np.sqrt((self.c_ab**2).sum(axis=1))
        self.cn_ba = np.sqrt((self.c_ba**2).sum(axis=1))
        with np.errstate(invalid="ignore", divide="ignore"):
            self.n_ab = np.where(
                self.cn_ab[:, None] > 0, self.c_ab / self.cn_ab[:, None], 0.0
            )
            self.n_ba = np.where(
                self.cn_ba[:, None] > 0, self.c_ba / self.cn_ba[:, None], 0.0
            )
        self.mhat_ab = np.asarray(
            ref.mhat_C[self.pa, self.pb]
        ).ravel() if variant == "compact" else None

        self.I = mesh.elem_nodes[:, self.pa].astype(np.int32)
        self.J = mesh.elem_nodes[:, self.pb].astype(np.int32)
        self.pair_flat = np.concatenate([self.I.ravel(), self.J.ravel()])

        # ---- global operators (tensor products of 1D assemblies) ----------
        p = mesh.degree
        from .reference_element import (
            _frac_to_array,
            _grad_1d_frac,
            _mass_1d_frac,
            _deriv_coeff_1d_frac,
        )

        M1 = _frac_to_array(_mass_1d_frac(p))
        C1 = _frac_to_array(_grad_1d_frac(p))
        D1 = _frac_to_array(_deriv_coeff_1d_frac(p))

        mass1, ct1, c1, lump1 = [], [], [], []
        for k in range(d):
            hk = mesh.h[k]
            mass1.append(_assemble_1d(mesh.cells[k], p, hk * M1))
            c1.append(_assemble_1d(mesh.cells[k], p, C1))
            ct1.append(_assemble_1d(mesh.cells[k], p, D1 / (p + 1)))
            lump1.append(
                _assemble_1d_diag(mesh.cells[k], p, np.full(p + 1, hk / (p + 1)))
            )

        def tensor(mats):
            out = mats[0]
            for A in mats[1:]:
                out = spkron(A, out, format="csr")
            return out.tocsr()

        if d == 1:
            self.mass_glob = mass1[0]
            self.grad_full_glob = [c1[0]]
            self.grad_lumped_glob = [ct1[0]]
            self.lumped_mass = lump1[0]
        else:
            self.mass_glob = tensor([mass1[0], mass1[1]])
            self.grad_full_glob = [
                tensor([c1[0], mass1[1]]),
                tensor([mass1[0], c1[1]]),
            ]
            self.grad_lumped_glob = [
                tensor([ct1[0], diags(lump1[1]).tocsr()]),
                tensor([diags(lump1[0]).tocsr(), ct1[1]]),
            ]
            self.lumped_mass = np.kron(lump1[1], lump1[0])
        self.grad_glob = (
            self.grad_lumped_glob if variant == "compact" else self.grad_full_glob
        )

        # banded forms of the 1D mass factors: the global consistent mass is
        # their tensor product, so solves reduce to per-axis banded solves
        self._mass_bands = []
        for k in range(d):
            A = mass1[k].toarray()
            n = A.shape[0]
            ab = np.zeros((2 * p + 1, n))
            for i in range(n):
                for j in range(max(0, i - p), min(n, i + p + 1)):
                    ab[p + i - j, j] = A[i, j]
            self._mass_bands.append(ab)
        self._mass_lu = None

        # ---- volume quadrature --------------------------------------------
        self.elem_origin = mesh.node_coords[mesh.elem_nodes[:, 0]]
        self.xq = (
            self.elem_origin[:, None, :]
            + ref.quad_pts[None, :, :] * np.asarray(mesh.h)[None, None, :]
        )
        # gradient table premultiplied by quadrature weights
        self.Gw = ref.G * ref.quad_w[None, :, None]
        self.Bw = ref.B * ref.quad_w[None, :]

        # fused matrix of the element-contribution assembly
        self.q_fmat = ref.Ct_minus_C - ref.CT

        # flux dispatch for the fused kernels (None falls back to numpy)
        from .flux_models import Burgers as _Burgers, KPP as _KPP

        if model.is_linear:
            self.flux_mode = 0
            self.vconst = np.zeros(d)
        elif isinstance(model, _Burgers):
            self.flux_mode = 1
            self.vconst = model.v
        elif isinstance(model, _KPP):
            self.flux_mode = 2
            self.vconst = np.zeros(d)
        else:
            self.flux_mode = None
            self.vconst = np.zeros(d)

        # ---- model-dependent static fields ---------------------------------
        if model.is_linear:
            self.v_nodes = model.velocity.at(mesh.node_coords)
            vq = model.velocity.at(self.xq)
            v_elem_nodes = self.v_nodes[mesh.elem_nodes]
            speeds = np.concatenate(
                [
                    np.sqrt((vq**2).sum(-1)),
                    np.sqrt((v_elem_nodes**2).sum(-1)),
                ],
                axis=1,
            )
            self.vmax_elem = speeds.max(axis=1)
            self.vq = vq
        else:
            self.v_nodes = None
            self.vq = None
            self.vmax_elem = None

        # ---- boundary faces -------------------------------------------------
        self.faces = [self._build_face_tables(b) for b in mesh.faces]

        self._err_quad = None
        self._fine_ops = None

    # ------------------------------------------------------------------
    def _build_face_tables(self, block: FaceBlock) -> FaceTables:
        mesh, ref = self.mesh, self.ref
        p, d = mesh.degree, mesh.dim
        gnodes = mesh.elem_nodes[block.elements][:, block.local_nodes]
        if d == 1:
            Bf = np.ones((1, 1))
            wq = np.ones(1)
            xval = mesh.bounds[0][1] if block.upper else mesh.bounds[0][0]
            xq = np.full((1, 1, 1), xval)
        else:
            t_axis = 1 - block.axis
            xi, w = gauss_rule_01(p + 1)
            Bf = bernstein_1d(p, xi).T  # (Nf, Qf)
            wq = w * mesh.h[t_axis]
            origins = self.elem_origin[block.elements]
            xq = np.empty((len(block.elements), p + 1, 2))
            fixed = mesh.bounds[block.axis][1 if block.upper else 0]
            xq[:, :, block.axis] = fixed
            xq[:, :, t_axis] = origins[:, None, t_axis] + xi[None, :] * mesh.h[t_axis]
        vdotn = None
        if self.model.is_linear:
            v = self.model.velocity.at(xq)
            vdotn = np.einsum("eqk,k->eq", v, block.normal)
        return FaceTables(
            block=block,
            elements=block.elements,
            gnodes=gnodes,
            Bf=Bf,
            wq=wq,
            xq=xq,
            normal=block.normal,
            vdotn=vdotn,
        )

    # ------------------------------------------------------------------
    # scatter/gather helpers
    # ------------------------------------------------------------------
    def scatter_elements(self, arr_en: np.ndarray) -> np.ndarray:
        return np.bincount(
            self.elem_flat, weights=arr_en.ravel(), minlength=self.num_nodes
        )

    def scatter_pairs(self, to_i: np.ndarray, to_j: np.ndarray) -> np.ndarray:
        vals = np.concatenate([to_i.ravel(), to_j.ravel()])
        return np.bincount(self.pair_flat, weights=vals, minlength=self.num_nodes)

    # ------------------------------------------------------------------
    # consistent-mass solves
    # ------------------------------------------------------------------
    def mass_solve_lu(self, rhs: np.ndarray) -> np.ndarray:
        """Direct solve with the consistent mass through its tensor
        factorization: one banded solve per axis."""
        p = self.mesh.degree
        if self.mesh.dim == 1:
            return solve_banded((p, p), self._mass_bands[0], rhs)
        My, Mx = self.mesh.grid_shape()
        R = rhs.reshape(My, Mx)
        X = solve_banded((p, p), self._mass_bands[1], R)        # along y
        X = solve_banded((p, p), self._mass_bands[0], X.T).T    # along x
        return np.ascontiguousarray(X).ravel()

    def mass_solve_cg(self, rhs: np.ndarray, rtol: float = 1e-10, maxiter: int = 500):
        """Lumped-mass preconditioned conjugate gradients."""
        A = self.mass_glob
        Minv = 1.0 / self.lumped_mass
        x = np.zeros_like(rhs)
        r = rhs.copy()
        z = Minv * r
        q = z.copy()
        rz = r @ z
        norm0 = np.sqrt(rhs @ rhs)
        if norm0 == 0.0:
            return x, 0
        for it in range(1, maxiter + 1):
            Aq = A @ q
            alpha = rz / (q @ Aq)
            x += alpha * q
            r -= alpha * Aq
            if np.sqrt(r @ r) <= rtol * norm0:
                return x, it
            z = Minv * r
            rz_new = r @ z
            q = z + (rz_new / rz) * q
            rz = rz_new
        res = np.sqrt(r @ r) / norm0
        raise RuntimeError(
            f"consistent-mass CG failed to converge in {maxiter} iterations "
            f"(relative residual {res:.3e})"
        )

    # ------------------------------------------------------------------
    # nodal flux and quadrature-point evaluation
    # ------------------------------------------------------------------
    def nodal_flux(self, u: np.ndarray) -> np.ndarray:
        if self.model.is_linear:
            return self.v_nodes * u[:, None]
        return self.model.flux(u)

    def quad_values(self, u: np.ndarray) -> np.ndarray:
        """u_h at the volume quadrature points, shape (E, Q)."""
        ue = u[self.elem_nodes]
        return np.einsum("nq,en->eq", self.ref.B, ue)

    def quad_flux(self, uq: np.ndarray) -> np.ndarray:
        if self.model.is_linear:
            return self.vq * uq[..., None]
        return self.model.flux(uq)

    # ------------------------------------------------------------------
    # local bounds
    # ------------------------------------------------------------------
    def window_bounds(self, u: np.ndarray):
        """Min/max over the nearest-neighbor (subcell) stencil: a width-3
        window per axis on the control lattice."""
        shape = self.mesh.grid_shape()
        lo = u.reshape(shape)
        hi = lo
        for ax in range(len(shape)):
            lo = _axis_window(lo, ax, np.minimum)
            hi = _axis_window(hi, ax, np.maximum)
        return lo.ravel(), hi.ravel()

    def full_stencil_bounds(self, u: np.ndarray):
        ue = u[self.elem_nodes]
        emin = ue.min(axis=1)
        emax = ue.max(axis=1)
        N = self.elem_nodes.shape[1]
        lo = np.full(self.num_nodes, np.inf)
        hi = np.full(self.num_nodes, -np.inf)
        np.minimum.at(lo, self.elem_flat, np.repeat(emin, N))
        np.maximum.at(hi, self.elem_flat, np.repeat(emax, N))
        return lo, hi

    def local_bounds(self, u: np.ndarray, mode: str = "subcell"):
        if mode == "subcell":
            return self.window_bounds(u)
        if mode == "full":
            return self.full_stencil_bounds(u)
        raise ValueError(f"unknown bounds mode {mode!r}")

    # ------------------------------------------------------------------
    # error-norm quadrature (over-integration for |u_h - u|)
    # ------------------------------------------------------------------
    def error_quadrature(self):
        if self._err_quad is None:
            from .reference_element import basis_tables, volume_quadrature

            pts, w = volume_quadrature(
                self.ref.basis, self.mesh.h, self.mesh.degree + 3
            )
            B, _ = basis_tables(self.ref.basis, self.mesh.h, pts)
            xq = (
                self.elem_origin[:, None, :]
                + pts[None, :, :] * np.asarray(self.mesh.h)[None, None, :]
            )
            self._err_quad = (B, w, xq)
        return self._err_quad

    # ------------------------------------------------------------------
    # fine control-net operators (smoothness indicator)
    # ------------------------------------------------------------------
    def fine_operators(self):
        """(T, K, m) with T the control-point evaluation operator,
        K the P1/Q1 stiffness matrix on the control net, m its lumped mass."""
        if self._fine_ops is None:
            mesh = self.mesh
            p, d = mesh.degree, mesh.dim
            T1, K1, M1, m1 = [], [], [], []
            for k in range(d):
                M = mesh.npts[k]
                hf = mesh.h[k] / p
                ncell = mesh.cells[k] * p
                K1.append(
                    _assemble_1d(ncell, 1, (1.0 / hf) * np.array([[1.0, -1.0], [-1.0, 1.0]]))
                )
                M1.append(
                    _assemble_1d(ncell, 1, (hf / 6.0) * np.array([[2.0, 1.0], [1.0, 2.0]]))
                )
                m1.append(_assemble_1d_diag(ncell, 1, np.full(2, hf / 2.0)))
                # Bernstein evaluation at the control lattice per macro cell
                lattice = np.arange(p + 1) / p
                V = bernstein_1d(p, lattice)  # (p+1, p+1): rows lattice points
                rows, cols, vals = [], [], []
                for c in range(mesh.cells[k]):
                    base = p * c
                    for a in range(p + 1):
                        if a == 0 and c > 0:
                            continue  # shared vertex row already emitted
                        for bcol in range(p + 1):
                            val = V[a, bcol]
                            if val != 0.0:
                                rows.append(base + a)
                                cols.append(base + bcol)
                                vals.append(val)
                T1.append(coo_matrix((vals, (rows, cols)), shape=(M, M)).tocsr())
            if d == 1:
                T = T1[0]
                K = K1[0]
                m = m1[0]
            else:
                T = spkron(T1[1], T1[0], format="csr")
                K = (
                    spkron(M1[1], K1[0], format="csr")
                    + spkron(K1[1], M1[0], format="csr")
                ).tocsr()
                m = np.kron(m1[1], m1[0])
            self._fine_ops = (T, K, m)
        return self._fine_ops


def _axis_window(a: np.ndarray, axis: int, op) -> np.ndarray:
    """Width-3 sliding window reduction along one axis with edge clamping."""
    out = a.copy()
    lo = [slice(None)] * a.ndim
    hi = [slice(None)] * a.ndim
    lo[axis] = slice(None, -1)
    hi[axis] = slice(1, None)
    lo_t, hi_t = tuple(lo), tuple(hi)
    out[lo_t] = op(out[lo_t], a[hi_t])
    out[hi_t] = op(out[hi_t], a[lo_t])
    return out
