"""Structured 1D/2D meshes with global Bernstein control-point numbering.

Nodes live on the fine lattice with p*cells+1 points per axis, numbered
lexicographically (x fastest), which makes the nearest-neighbor stencil a
banded structure and lets min/max stencil reductions run as window filters
on the reshaped grid.  Only uniform axis-aligned box cells are supported.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .reference_element import BernsteinBasis


@dataclass(frozen=True)
class FaceBlock:
    """All boundary faces on one side of the domain (constant-coordinate)."""

    axis: int              # 0 = x, 1 = y
    upper: bool            # True for the max-coordinate side
    elements: np.ndarray   # (Eb,) element ids owning a face on this side
    local_nodes: np.ndarray  # (Nf,) local node indices on the face
    normal: np.ndarray     # (dim,) outward unit normal


@dataclass
class Mesh:
    dim: int
    degree: int
    cells: tuple[int, ...]          # macro cells per axis
    bounds: tuple[tuple[float, float], ...]
    npts: tuple[int, ...]           # fine-lattice points per axis
    h: tuple[float, ...]            # macro cell extents
    num_nodes: int
    num_elements: int
    elem_nodes: np.ndarray          # (E, N) global node ids per element
    node_coords: np.ndarray         # (N_h, dim)
    faces: list[FaceBlock]

    @property
    def fine_spacing(self) -> tuple[float, ...]:
        return tuple(hk / self.degree for hk in self.h)

    def grid_shape(self) -> tuple[int, ...]:
        """Shape for reshaping node vectors to the lattice (last axis = x)."""
        return tuple(reversed(self.npts))

    def node_multi(self, i: int) -> tuple[int, ...]:
        m = []
        for k in range(self.dim):
            m.append(i % self.npts[k])
            i //= self.npts[k]
        return tuple(m)

    def boundary_node_mask(self) -> np.ndarray:
        mask = np.zeros(self.num_nodes, dtype=bool)
        for k in range(self.dim):
            idx = self.node_index_grid()
            mask[np.take(idx, 0, axis=self.dim - 1 - k).ravel()] = True
            mask[np.take(idx, -1, axis=self.dim - 1 - k).ravel()] = True
        return mask

    def node_index_grid(self) -> np.ndarray:
        return np.arange(self.num_nodes).reshape(self.grid_shape())

    # ---- stencil queries (set-based; intended for tests and small meshes) --

    def node_elems(self, i: int) -> list[int]:
        hits = np.nonzero((self.elem_nodes == i).any(axis=1))[0]
        return list(map(int, hits))

    def full_stencil(self, i: int) -> set[int]:
        out: set[int] = set()
        for e in self.node_elems(i):
            out.update(map(int, self.elem_nodes[e]))
        return out

    def subcell_stencil(self, i: int) -> set[int]:
        basis = BernsteinBasis(self.degree, self.dim)
        out: set[int] = set()
        for e in self.node_elems(i):
            local = int(np.nonzero(self.elem_nodes[e] == i)[0][0])
            for b in local_subcell_neighbors(self.degree, self.dim, local):
                out.add(int(self.elem_nodes[e][b]))
        return out


def local_subcell_neighbors(p: int, d: int, local: int) -> set[int]:
    """Local indices of nodes sharing a subcell with the given node
    (Chebyshev-distance <= 1 on the local control lattice)."""
    basis = BernsteinBasis(p, d)
    if not (0 <= local < basis.num_nodes):
        raise ValueError(f"local index {local} out of range")
    ma = basis.local_multi(local)
    out = set()
    for b in range(basis.num_nodes):
        mb = basis.local_multi(b)
        if max(abs(x - y) for x, y in zip(ma, mb)) <= 1:
            out.add(b)
    return out


def build_mesh(dim: int, degree: int, cells, bounds=None) -> Mesh:
    """Uniform tensor mesh on a box domain.

    cells may be an int (same count per axis) or a per-axis sequence;
    bounds defaults to the unit box.
    """
    if np.isscalar(cells):
        cells = (int(cells),) * dim
    cells = tuple(int(c) for c in cells)
    if len(cells) != dim or any(c < 1 for c in cells):
        raise ValueError(f"need at least one cell per axis, got {cells}")
    if bounds is None:
        bounds = ((0.0, 1.0),) * dim
    bounds = tuple((float(a), float(b)) for a, b in bounds)
    if any(b <= a for a, b in bounds):
        raise ValueError(f"empty domain {bounds}")

    basis = BernsteinBasis(degree, dim)
    p = degree
    npts = tuple(p * c + 1 for c in cells)
    h = tuple((b - a) / c for (a, b), c in zip(bounds, cells))
    num_nodes = int(np.prod(npts))
    num_elements = int(np.prod(cells))

    # global node ids per element, local index lexicographic (x fastest)
    loc = basis.node_coords * p  # integer offsets on the fine lattice
    loc = np.rint(loc).astype(np.int64)
    if dim == 1:
        ex = np.arange(cells[0])
        elem_nodes = p * ex[:, None] + loc[:, 0][None, :]
    else:
        ex = np.arange(cells[0])
        ey = np.arange(cells[1])
        EX, EY = np.meshgrid(ex, ey, indexing="xy")
        base = (p * EX + npts[0] * (p * EY)).ravel()  # element id = ex + cx*ey
        offs = loc[:, 0] + npts[0] * loc[:, 1]
        elem_nodes = base[:, None] + offs[None, :]

    axes = [bounds[k][0] + np.arange(npts[k]) * (h[k] / p) for k in range(dim)]
    if dim == 1:
        node_coords = axes[0][:, None]
    else:
        X, Y = np.meshgrid(axes[0], axes[1], indexing="xy")
        node_coords = np.column_stack([X.ravel(), Y.ravel()])

    faces = _boundary_faces(dim, degree, cells, npts, elem_nodes, basis)

    return Mesh(
        dim=dim,
        degree=degree,
        cells=cells,
        bounds=bounds,
        npts=npts,
        h=h,
        num_nodes=num_nodes,
        num_elements=num_elements,
        elem_nodes=elem_nodes,
        node_coords=node_coords,
        faces=faces,
    )


def _boundary_faces(dim, degree, cells, npts, elem_nodes, basis) -> list[FaceBlock]:
    p = degree
    blocks = []
    if dim == 1:
        for upper in (False, True):
            elems = np.array([cells[0] - 1 if upper else 0])
            local = np.array([p if upper else 0])
            normal = np.array([1.0 if upper else -1.0])
            blocks.append(FaceBlock(0, upper, elems, local, normal))
        return blocks

    cx, cy = cells
    all_e = np.arange(cx * cy).reshape(cy, cx)
    lattice = np.arange((p + 1) ** 2).reshape(p + 1, p + 1)  # [a2, a1]
    for axis in (0, 1):
        for upper in (False, True):
            if axis == 0:
                elems = all_e[:, -1] if upper else all_e[:, 0]
                local = lattice[:, p] if upper else lattice[:, 0]
                normal = np.array([1.0 if upper else -1.0, 0.0])
            else:
                elems = all_e[-1, :] if upper else all_e[0, :]
                local = lattice[p, :] if upper else lattice[0, :]
                normal = np.array([0.0, 1.0 if upper else -1.0])
            blocks.append(
                FaceBlock(axis, upper, elems.copy(), local.copy(), normal)
            )
    return blocks
