"""Bernstein finite elements on axis-aligned box cells.

Builds all per-element matrices needed by the solver for tensor-product
Bernstein bases of degree 1 and 2 in one and two space dimensions:

* consistent and lumped mass matrices,
* discrete gradient matrices C_k with entries int(phi_i * dphi_j/dx_k),
* the lumped discrete gradient Ct_k = M_L M_C^{-1} C_k, constructed in
  closed form from the 1D Bernstein degree-elevation identity so that its
  sparsity (nearest neighbors on a grid line of the control net) is exact,
* consistent/lumped mass matrices of the piecewise-multilinear control-net
  (subcell) approximation used for subcell flux decomposition.

All small matrices are assembled in exact rational arithmetic and converted
to floats once.  Matrices depend only on (degree, dim, cell extents), so a
process-wide cache keeps one copy per signature; uniform meshes hit a single
entry.
"""

from __future__ import annotations

import csv
import math
import threading
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.sparse import csr_matrix


def _comb(n: int, k: int) -> int:
    if k < 0 or k > n:
        return 0
    return math.comb(n, k)


@dataclass(frozen=True)
class BernsteinBasis:
    """Tensor-product Bernstein basis of given degree on the unit box."""

    degree: int
    dim: int

    def __post_init__(self):
        if self.degree not in (1, 2):
            raise ValueError(f"unsupported degree {self.degree}; only 1 and 2")
        if self.dim not in (1, 2):
            raise ValueError(f"unsupported dimension {self.dim}; only 1 and 2")

    @property
    def num_nodes(self) -> int:
        return (self.degree + 1) ** self.dim

    @property
    def nodes_per_axis(self) -> int:
        return self.degree + 1

    @property
    def node_coords(self) -> np.ndarray:
        """Control-point lattice i/p on the unit box, shape (N, dim)."""
        axis = np.arange(self.degree + 1) / self.degree
        if self.dim == 1:
            return axis[:, None]
        xx, yy = np.meshgrid(axis, axis, indexing="xy")
        return np.column_stack([xx.ravel(), yy.ravel()])

    def local_index(self, multi: tuple[int, ...]) -> int:
        """Lexicographic local index (first axis fastest)."""
        idx = 0
        for k in reversed(range(self.dim)):
            idx = idx * (self.degree + 1) + multi[k]
        return idx

    def local_multi(self, index: int) -> tuple[int, ...]:
        m = []
        for _ in range(self.dim):
            m.append(index % (self.degree + 1))
            index //= self.degree + 1
        return tuple(m)


def bernstein_1d(p: int, x: np.ndarray) -> np.ndarray:
    """Values of the p+1 Bernstein polynomials of degree p, shape (..., p+1)."""
    x = np.asarray(x, dtype=float)
    out = np.empty(x.shape + (p + 1,))
    for a in range(p + 1):
        out[..., a] = _comb(p, a) * x**a * (1.0 - x) ** (p - a)
    return out


def bernstein_1d_deriv(p: int, x: np.ndarray) -> np.ndarray:
    """First derivatives of the degree-p Bernstein polynomials."""
    x = np.asarray(x, dtype=float)
    lower = bernstein_1d(p - 1, x) if p >= 1 else None
    out = np.zeros(x.shape + (p + 1,))
    for a in range(p + 1):
        term = np.zeros_like(x)
        if 0 <= a - 1 <= p - 1:
            term = term + lower[..., a - 1]
        if 0 <= a <= p - 1:
            term = term - lower[..., a]
        out[..., a] = p * term
    return out


def eval_basis(basis: BernsteinBasis, point) -> np.ndarray:
    """All N basis values at one reference point in [0,1]^dim.

    Raises ValueError if the point lies outside the reference cell.
    """
    pt = np.atleast_1d(np.asarray(point, dtype=float))
    if pt.shape != (basis.dim,):
        raise ValueError(f"expected point of dimension {basis.dim}, got {pt.shape}")
    if np.any(pt < -1e-14) or np.any(pt > 1.0 + 1e-14):
        raise ValueError(f"point {pt} outside reference cell [0,1]^{basis.dim}")
    vals = bernstein_1d(basis.degree, pt[0])
    for k in range(1, basis.dim):
        vals = np.kron(bernstein_1d(basis.degree, pt[k]), vals)
    return vals


# ---------------------------------------------------------------------------
# exact 1D building blocks (rational arithmetic)
# ---------------------------------------------------------------------------

def _mass_1d_frac(p: int) -> list[list[Fraction]]:
    """Exact 1D mass matrix on the unit interval:
    int B_a B_b = C(p,a) C(p,b) / ((2p+1) C(2p,a+b))."""
    return [
        [
            Fraction(_comb(p, a) * _comb(p, b), (2 * p + 1) * _comb(2 * p, a + b))
            for b in range(p + 1)
        ]
        for a in range(p + 1)
    ]


def _deriv_coeff_1d_frac(p: int) -> list[list[Fraction]]:
    """Exact coefficients of dB_a/dx in the degree-p basis (column a).

    From the derivative/degree-elevation identities:
        dB_a/dx = (p-a+1) B_{a-1} + (2a-p) B_a - (a+1) B_{a+1}.
    Tridiagonal, which is what makes the lumped gradient sparse.
    """
    D = [[Fraction(0)] * (p + 1) for _ in range(p + 1)]
    for a in range(p + 1):
        if a - 1 >= 0:
            D[a - 1][a] = Fraction(p - a + 1)
        D[a][a] = Fraction(2 * a - p)
        if a + 1 <= p:
            D[a + 1][a] = Fraction(-(a + 1))
    return D


def _grad_1d_frac(p: int) -> list[list[Fraction]]:
    """Exact 1D gradient matrix int B_a B_b' = (M D)_{ab}."""
    M = _mass_1d_frac(p)
    D = _deriv_coeff_1d_frac(p)
    n = p + 1
    return [
        [sum((M[a][c] * D[c][b] for c in range(n)), Fraction(0)) for b in range(n)]
        for a in range(n)
    ]


def _subcell_mass_1d_frac(p: int) -> list[list[Fraction]]:
    """Exact mass matrix of the piecewise-linear control net on the unit
    interval: p subcells of length 1/p with P1 hat functions."""
    n = p + 1
    M = [[Fraction(0)] * n for _ in range(n)]
    h = Fraction(1, p)
    for s in range(p):
        M[s][s] += h / 3
        M[s][s + 1] += h / 6
        M[s + 1][s] += h / 6
        M[s + 1][s + 1] += h / 3
    return M


def _frac_to_array(M) -> np.ndarray:
    return np.array([[float(x) for x in row] for row in M])


def _kron_all(mats: list[np.ndarray]) -> np.ndarray:
    """Tensor product with the first axis fastest: kron(A_last, ..., A_0)."""
    out = mats[0]
    for A in mats[1:]:
        out = np.kron(A, out)
    return out


# ---------------------------------------------------------------------------
# element matrices
# ---------------------------------------------------------------------------

@dataclass
class ElementMatrices:
    """Per-element matrices of one Bernstein box element."""

    basis: BernsteinBasis
    extents: tuple[float, ...]
    mass_consistent: np.ndarray          # (N, N)
    mass_lumped: np.ndarray              # (N,)   |K|/N for every node
    gradient: list[np.ndarray]           # dim dense (N, N) matrices C_k
    gradient_lumped: list[csr_matrix]    # dim sparse matrices Ct_k
    subcell_mass_consistent: csr_matrix  # (N, N) control-net mass
    subcell_mass_lumped: np.ndarray      # (N,)

    @property
    def volume(self) -> float:
        return float(np.prod(self.extents))


def build_element_matrices(basis: BernsteinBasis, cell_extents) -> ElementMatrices:
    """Assemble all matrices for a box cell with the given edge lengths."""
    extents = tuple(float(h) for h in np.atleast_1d(cell_extents))
    if len(extents) != basis.dim:
        raise ValueError(f"expected {basis.dim} extents, got {len(extents)}")
    if any(h <= 0 for h in extents):
        raise ValueError(f"cell extents must be positive, got {extents}")

    p, d = basis.degree, basis.dim
    M1 = _frac_to_array(_mass_1d_frac(p))
    C1 = _frac_to_array(_grad_1d_frac(p))

    # consistent mass: tensor product of scaled 1D mass matrices
    MC = _kron_all([extents[k] * M1 for k in range(d)])
    mL = np.full(basis.num_nodes, np.prod(extents) / basis.num_nodes)

    # gradient component k: 1D gradient (length-free) along axis k,
    # scaled 1D mass along the others
    Ck = []
    for k in range(d):
        mats = [extents[a] * M1 for a in range(d)]
        mats[k] = C1
        Ck.append(_kron_all(mats))

    Ct = build_lumped_gradient(basis, extents)
    Mhat_C, Mhat_L = build_subcell_q1_matrices(basis, extents)

    return ElementMatrices(
        basis=basis,
        extents=extents,
        mass_consistent=MC,
        mass_lumped=mL,
        gradient=Ck,
        gradient_lumped=Ct,
        subcell_mass_consistent=Mhat_C,
        subcell_mass_lumped=Mhat_L,
    )


def build_lumped_gradient(basis: BernsteinBasis, cell_extents) -> list[csr_matrix]:
    """Lumped gradient Ct_k = M_L M_C^{-1} C_k built in closed form.

    Column j holds |K|/N times the Bernstein coefficients of dphi_j/dx_k
    (the derivative re-expanded at degree p).  Entries outside the
    tridiagonal-per-grid-line pattern are structural zeros; nothing outside
    that pattern is ever stored, so sparsity is exact by construction.  The
    dense product M_L M_C^{-1} C_k serves as a test oracle only.
    """
    extents = tuple(float(h) for h in np.atleast_1d(cell_extents))
    p, d = basis.degree, basis.dim
    n1 = p + 1
    D = _deriv_coeff_1d_frac(p)
    volume = float(np.prod(extents))
    m_i = volume / basis.num_nodes

    out = []
    for k in range(d):
        rows, cols, vals = [], [], []
        for j in range(basis.num_nodes):
            mj = basis.local_multi(j)
            for shift in (-1, 0, 1):
                a_k = mj[k] + shift
                if not (0 <= a_k < n1):
                    continue
                coeff = D[a_k][mj[k]]
                mi = list(mj)
                mi[k] = a_k
                i = basis.local_index(tuple(mi))
                rows.append(i)
                cols.append(j)
                vals.append(m_i * float(coeff) / extents[k])
        out.append(
            csr_matrix(
                (vals, (rows, cols)),
                shape=(basis.num_nodes, basis.num_nodes),
            )
        )
    return out


def build_subcell_q1_matrices(basis: BernsteinBasis, cell_extents):
    """Mass matrices of the multilinear control-net approximation.

    The p^dim subcells of the box use the Bernstein control lattice as
    vertices; for p=1 the subcell mesh is the element itself.  Returns
    (consistent csr, lumped diagonal).
    """
    extents = tuple(float(h) for h in np.atleast_1d(cell_extents))
    p, d = basis.degree, basis.dim
    M1 = _frac_to_array(_subcell_mass_1d_frac(p))
    Mhat = _kron_all([extents[k] * M1 for k in range(d)])
    lumped = Mhat.sum(axis=1)
    # keep only entries of nodes sharing a subcell (the others are exact zeros)
    Mhat[np.abs(Mhat) == 0.0] = 0.0
    return csr_matrix(Mhat), lumped


def local_subcell_pairs(basis: BernsteinBasis) -> list[tuple[int, int]]:
    """Undirected local node pairs (a < b) sharing a subcell."""
    pairs = []
    N = basis.num_nodes
    for a in range(N):
        ma = basis.local_multi(a)
        for b in range(a + 1, N):
            mb = basis.local_multi(b)
            if max(abs(x - y) for x, y in zip(ma, mb)) <= 1:
                pairs.append((a, b))
    return pairs


def local_all_pairs(basis: BernsteinBasis) -> list[tuple[int, int]]:
    N = basis.num_nodes
    return [(a, b) for a in range(N) for b in range(a + 1, N)]


def gauss_rule_01(n: int):
    """n-point Gauss-Legendre rule on [0,1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def volume_quadrature(basis: BernsteinBasis, extents, npts_axis: int):
    """Tensor Gauss rule on the physical cell: points (Q, dim) in reference
    coords, weights (Q,) including the Jacobian."""
    x1, w1 = gauss_rule_01(npts_axis)
    if basis.dim == 1:
        return x1[:, None], w1 * extents[0]
    X, Y = np.meshgrid(x1, x1, indexing="xy")
    pts = np.column_stack([X.ravel(), Y.ravel()])
    W = np.outer(w1 * extents[1], w1 * extents[0]).ravel()
    return pts, W


def basis_tables(basis: BernsteinBasis, extents, pts: np.ndarray):
    """Basis values (N, Q) and physical gradients (N, Q, dim) at the given
    reference points."""
    p, d = basis.degree, basis.dim
    vals_1d = [bernstein_1d(p, pts[:, k]) for k in range(d)]       # (Q, p+1)
    ders_1d = [bernstein_1d_deriv(p, pts[:, k]) for k in range(d)]
    N, Q = basis.num_nodes, pts.shape[0]
    B = np.empty((N, Q))
    G = np.empty((N, Q, d))
    for i in range(N):
        mi = basis.local_multi(i)
        v = np.ones(Q)
        for k in range(d):
            v = v * vals_1d[k][:, mi[k]]
        B[i] = v
        for k in range(d):
            g = ders_1d[k][:, mi[k]] / extents[k]
            for a in range(d):
                if a != k:
                    g = g * vals_1d[a][:, mi[a]]
            G[i, :, k] = g
    return B, G


# ---------------------------------------------------------------------------
# cached composite bundle
# ---------------------------------------------------------------------------

@dataclass
class ReferenceElement:
    """Everything the assembly needs for one (degree, dim, extents) signature."""

    basis: BernsteinBasis
    extents: tuple[float, ...]
    matrices: ElementMatrices
    # dense copies used in element-batched contractions
    MC: np.ndarray
    mL: np.ndarray
    ML_minus_MC: np.ndarray
    C: np.ndarray            # (dim, N, N)
    Ct: np.ndarray           # (dim, N, N) dense view of the sparse matrices
    Ct_minus_C: np.ndarray
    CT: np.ndarray           # (dim, N, N) transposes of C
    # subcell decomposition
    mhat_L: np.ndarray
    mhat_C: np.ndarray
    subcell_solve: np.ndarray  # maps zero-mean q to zero-mean vhat
    # pair topology
    pairs_subcell: np.ndarray  # (P, 2) local (a, b)
    pairs_full: np.ndarray
    # quadrature
    quad_pts: np.ndarray       # (Q, dim) reference coords
    quad_w: np.ndarray         # (Q,)
    B: np.ndarray              # (N, Q)
    G: np.ndarray              # (N, Q, dim) physical gradients
    # control-lattice evaluation matrix: values of u_h at control points
    lattice_eval: np.ndarray   # (N, N)

    @property
    def volume(self) -> float:
        return float(np.prod(self.extents))


def _bordered_subcell_solver(mhat_L: np.ndarray, mhat_C: np.ndarray) -> np.ndarray:
    """Dense solve operator for (Mhat_L - Mhat_C) vhat = q, sum(vhat) = 0.

    Uses the bordered system [[A, 1], [1^T, 0]]; A is singular with the
    constant null vector only, so the bordered matrix is regular.
    """
    N = len(mhat_L)
    A = np.diag(mhat_L) - mhat_C
    K = np.zeros((N + 1, N + 1))
    K[:N, :N] = A
    K[:N, N] = 1.0
    K[N, :N] = 1.0
    Kinv = np.linalg.inv(K)
    return Kinv[:N, :N].copy()


def build_reference_element(degree: int, dim: int, extents) -> ReferenceElement:
    basis = BernsteinBasis(degree, dim)
    extents = tuple(float(h) for h in np.atleast_1d(extents))
    em = build_element_matrices(basis, extents)

    d, N = dim, basis.num_nodes
    C = np.stack([em.gradient[k] for k in range(d)])
    Ct = np.stack([em.gradient_lumped[k].toarray() for k in range(d)])
    mhat_C = em.subcell_mass_consistent.toarray()

    pts, w = volume_quadrature(basis, extents, degree + 1)
    B, G = basis_tables(basis, extents, pts)

    lattice_pts = basis.node_coords
    V = np.empty((N, N))
    for i in range(N):
        V[i] = eval_basis(basis, lattice_pts[i])

    return ReferenceElement(
        basis=basis,
        extents=extents,
        matrices=em,
        MC=em.mass_consistent,
        mL=em.mass_lumped,
        ML_minus_MC=np.diag(em.mass_lumped) - em.mass_consistent,
        C=C,
        Ct=Ct,
        Ct_minus_C=Ct - C,
        CT=np.stack([C[k].T.copy() for k in range(d)]),
        mhat_L=em.subcell_mass_lumped,
        mhat_C=mhat_C,
        subcell_solve=_bordered_subcell_solver(em.subcell_mass_lumped, mhat_C),
        pairs_subcell=np.array(local_subcell_pairs(basis), dtype=np.int64),
        pairs_full=np.array(local_all_pairs(basis), dtype=np.int64),
        quad_pts=pts,
        quad_w=w,
        B=B,
        G=G,
        lattice_eval=V,
    )


_cache: dict[tuple, ReferenceElement] = {}
_cache_lock = threading.Lock()


def reference_element(degree: int, dim: int, extents) -> ReferenceElement:
    """Cached accessor; safe for concurrent reads with exclusive insert."""
    key = (degree, dim, tuple(float(h) for h in np.atleast_1d(extents)))
    ref = _cache.get(key)
    if ref is not None:
        return ref
    with _cache_lock:
        ref = _cache.get(key)
        if ref is None:
            ref = build_reference_element(degree, dim, extents)
            _cache[key] = ref
    return ref


def dump_element_matrices(ref: ReferenceElement, path) -> None:
    """Debug CSV dump (matrix, row, col, value) for cross-validation."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["matrix", "row", "col", "value"])
        def emit(name, A):
            A = np.atleast_2d(A)
            for i in range(A.shape[0]):
                for j in range(A.shape[1]):
                    if A[i, j] != 0.0:
                        writer.writerow([name, i, j, repr(A[i, j])])
        emit("mass_consistent", ref.MC)
        emit("mass_lumped", np.diag(ref.mL))
        for k in range(ref.basis.dim):
            emit(f"gradient_{k}", ref.C[k])
            emit(f"gradient_lumped_{k}", ref.Ct[k])
        emit("subcell_mass_consistent", ref.mhat_C)
        emit("subcell_mass_lumped", np.diag(ref.mhat_L))
