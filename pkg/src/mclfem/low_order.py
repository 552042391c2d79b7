"""Compact-stencil invariant-domain-preserving low-order operator.

Graph-viscosity coefficients on the subcell (or full) element stencil,
bar-state products, the lumped transport right-hand side, inflow boundary
terms, and the CFL-type stable time step bound.  Everything is vectorized
over elements; pair arrays have shape (E, P) with one slot per undirected
local node pair.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assembly import SolverContext


def build_dij_fn(ctx: SolverContext, scheme: str):
    """Returns a callable u -> (E, P) of symmetric viscosity coefficients.

    'upwind'  : max(c_ij.v_j, 0, c_ji.v_i), linear advection only.
    'rusanov' : max(|c_ij|, |c_ji|) * max(lambda_ij, lambda_ji) with the
                guaranteed maximum speed; for linear advection the speed is
                the element-wise maximum of |v|.
    """
    model = ctx.model
    E = ctx.mesh.num_elements
    if scheme == "upwind":
        if not model.is_linear:
            raise ValueError("discrete upwinding requires a linear flux")
        vI = ctx.v_nodes[ctx.I]  # (E, P, d)
        vJ = ctx.v_nodes[ctx.J]
        d_static = np.maximum(
            np.einsum("pk,epk->ep", ctx.c_ab, vJ),
            np.maximum(0.0, np.einsum("pk,epk->ep", ctx.c_ba, vI)),
        )
        return lambda u: d_static
    if scheme == "rusanov":
        maxnorm = np.maximum(ctx.cn_ab, ctx.cn_ba)
        if model.is_linear:
            d_static = maxnorm[None, :] * ctx.vmax_elem[:, None]
            return lambda u: d_static
        if ctx.flux_mode == 1:
            # Burgers: |n.f'| is affine in u, maximal at the endpoints
            from .kernels import gms_dij_burgers

            nv = np.maximum(np.abs(ctx.n_ab @ model.v), np.abs(ctx.n_ba @ model.v))
            s_ab = maxnorm * nv

            def fn_burgers(u):
                out = np.empty(ctx.I.shape)
                gms_dij_burgers(ctx.I, ctx.J, s_ab, u, out)
                return out

            return fn_burgers
        if ctx.flux_mode == 2:
            # unit wavespeed bound: coefficients are state-independent
            d_static = np.ascontiguousarray(np.broadcast_to(maxnorm, ctx.I.shape))
            return lambda u: d_static

        def fn(u):
            uI = u[ctx.I]
            uJ = u[ctx.J]
            lam_ab = model.gms_lambda(uI, uJ, ctx.n_ab)
            lam_ba = model.gms_lambda(uI, uJ, ctx.n_ba)
            return maxnorm[None, :] * np.maximum(lam_ab, lam_ba)

        return fn
    raise ValueError(f"unknown viscosity scheme {scheme!r}")


def bar_state_products(ctx: SolverContext, u, f_nodal, dij,
                       uI=None, uJ=None, df=None):
    """Division-free bar states w_ij = 2 d_ij (u_i+u_j)/2 - c_ij.(f_j-f_i)
    and the reverse orientation, both (E, P).  Pre-gathered nodal values
    and per-component flux differences may be passed to share work."""
    if uI is None:
        uI = u[ctx.I]
        uJ = u[ctx.J]
    if df is None:
        df = [
            f_nodal[:, k][ctx.J] - f_nodal[:, k][ctx.I]
            for k in range(ctx.mesh.dim)
        ]
    s = dij * (uI + uJ)
    cdf_ab = ctx.c_ab[:, 0] * df[0]
    cdf_ba = ctx.c_ba[:, 0] * df[0]
    for k in range(1, ctx.mesh.dim):
        cdf_ab += ctx.c_ab[:, k] * df[k]
        cdf_ba += ctx.c_ba[:, k] * df[k]
    return s - cdf_ab, s + cdf_ba


@dataclass
class BoundaryData:
    """Per-call boundary integrals.

    btilde uses nodal values (lumped inflow term); b_consistent uses the
    trace of u_h; face_div holds int_{bd K & Gamma} phi_i f(u_h).n per
    element; q_face the inflow defect int phi_i (u_h - u_i) f'(u_h).n;
    g_raw the group-interpolation flux error; g_weight the clipping weight
    int phi_i |f'(u_h).n|; cfl_face the inflow CFL surface term.
    """

    btilde: np.ndarray
    cfl_face: np.ndarray
    g_raw: np.ndarray
    g_weight: np.ndarray
    b_consistent: np.ndarray | None = None
    face_div: np.ndarray | None = None
    q_face: np.ndarray | None = None


def boundary_pass(
    ctx: SolverContext,
    u: np.ndarray,
    t: float,
    u_in_fn,
    f_nodal: np.ndarray,
    need_consistent: bool = False,
) -> BoundaryData:
    E, N = ctx.elem_nodes.shape
    Nh = ctx.num_nodes
    btilde = np.zeros(Nh)
    cfl_face = np.zeros(Nh)
    g_raw = np.zeros((E, N))
    g_weight = np.zeros((E, N))
    b_cons = np.zeros(Nh) if need_consistent else None
    face_div = np.zeros((E, N)) if need_consistent else None
    q_face = np.zeros((E, N)) if need_consistent else None
    model = ctx.model

    for ft in ctx.faces:
        uf = u[ft.gnodes]                                # (Eb, Nf)
        trace = np.einsum("fq,ef->eq", ft.Bf, uf)        # (Eb, Qf)
        if ft.vdotn is not None:
            fpn = ft.vdotn
        else:
            fpn = np.einsum(
                "eqk,k->eq", model.fprime(trace, ft.xq), ft.normal
            )
        inflow = fpn < 0.0
        fpn_in = np.where(inflow, fpn, 0.0)
        uin = np.asarray(u_in_fn(ft.xq, t))
        uin = np.broadcast_to(uin, trace.shape)

        # (Eb, Nf, Qf) quadrature kernel phi_a * w_q
        phi_w = ft.Bf[None, :, :] * ft.wq[None, None, :]
        base_in = phi_w * fpn_in[:, None, :]

        btilde_f = (base_in * (uf[:, :, None] - uin[:, None, :])).sum(axis=2)
        np.add.at(btilde, ft.gnodes, btilde_f)

        cfl_f = (phi_w * (-fpn_in)[:, None, :]).sum(axis=2)
        np.add.at(cfl_face, ft.gnodes, cfl_f)

        # group-interpolation error of the boundary flux
        ffq = model.flux(trace, ft.xq)                   # (Eb, Qf, d)
        fn_true = np.einsum("eqk,k->eq", ffq, ft.normal)
        fh_nodes = np.einsum("efk,k->ef", f_nodal[ft.gnodes], ft.normal)
        fn_group = np.einsum("fq,ef->eq", ft.Bf, fh_nodes)
        g_f = (phi_w * (fn_group - fn_true)[:, None, :]).sum(axis=2)
        kappa_f = (phi_w * np.abs(fpn)[:, None, :]).sum(axis=2)
        np.add.at(g_raw, (ft.elements[:, None], ft.block.local_nodes[None, :]), g_f)
        np.add.at(
            g_weight, (ft.elements[:, None], ft.block.local_nodes[None, :]), kappa_f
        )

        if need_consistent:
            bcons_f = (base_in * (trace - uin)[:, None, :]).sum(axis=2)
            np.add.at(b_cons, ft.gnodes, bcons_f)
            qf = bcons_f - btilde_f
            np.add.at(
                q_face, (ft.elements[:, None], ft.block.local_nodes[None, :]), qf
            )
            fdiv_f = (phi_w * fn_true[:, None, :]).sum(axis=2)
            np.add.at(
                face_div,
                (ft.elements[:, None], ft.block.local_nodes[None, :]),
                fdiv_f,
            )

    return BoundaryData(
        btilde=btilde,
        cfl_face=cfl_face,
        g_raw=g_raw,
        g_weight=g_weight,
        b_consistent=b_cons,
        face_div=face_div,
        q_face=q_face,
    )


def low_order_terms(ctx: SolverContext, u, f_nodal, dij,
                    uI=None, uJ=None, extra_pair_flux=None):
    """Diffusion + group transport parts of the low-order rates:
    sum_e sum_j d_ij (u_j - u_i) - sum_j c_ij . f_j  per node.

    extra_pair_flux (antisymmetric per pair, e.g. limited target fluxes)
    rides along in the same scatter."""
    if uI is None:
        uI = u[ctx.I]
        uJ = u[ctx.J]
    dflux = dij * (uJ - uI)
    if extra_pair_flux is not None:
        dflux = dflux + extra_pair_flux
    r = ctx.scatter_pairs(dflux, -dflux)
    for k in range(ctx.mesh.dim):
        r -= ctx.grad_glob[k] @ np.ascontiguousarray(f_nodal[:, k])
    return r


def low_order_rhs(ctx: SolverContext, u, t, u_in_fn, dij_fn):
    """Low-order nodal rates m_i du_i/dt (without the clipped boundary flux
    correction, which the time integrator adds per scheme)."""
    f_nodal = ctx.nodal_flux(u)
    dij = dij_fn(u)
    bdata = boundary_pass(ctx, u, t, u_in_fn, f_nodal)
    return low_order_terms(ctx, u, f_nodal, dij) + bdata.btilde


def clip_boundary_correction(ctx: SolverContext, u, bdata: BoundaryData, lo, hi):
    """Clipped per-element boundary flux corrections g*, scattered to nodes."""
    ue = u[ctx.elem_nodes]
    gmax = (hi[ctx.elem_nodes] - ue) * bdata.g_weight
    gmin = (lo[ctx.elem_nodes] - ue) * bdata.g_weight
    gstar = np.minimum(gmax, np.maximum(bdata.g_raw, gmin))
    return gstar


def max_stable_dt(ctx: SolverContext, u, dij, cfl_face, nu: float) -> float:
    """Largest forward-Euler step keeping every bar-state update a convex
    combination: dt * (sum 2 d_ij + inflow surface term) <= nu * m_i."""
    denom = ctx.scatter_pairs(2.0 * dij, 2.0 * dij) + cfl_face
    m = ctx.lumped_mass
    pos = denom > 0.0
    if not np.any(pos):
        return np.inf
    return float(nu * np.min(m[pos] / denom[pos]))
