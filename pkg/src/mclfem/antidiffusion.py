"""High-order target assembly: consistent-mass Galerkin rates, antidiffusive
element contributions, their decomposition into subcell fluxes through the
control-net mass system, and entropy-viscosity stabilization.

The Galerkin divergence term is evaluated in integrated-by-parts form
(volume term with the true flux plus domain-boundary face terms; interior
faces cancel by continuity).  With that choice the flux-corrected scheme
reproduces the consistent-mass Galerkin rates exactly when no limiting and
no stabilization are applied, independent of quadrature exactness.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assembly import SolverContext
from .low_order import BoundaryData


@dataclass
class GalerkinRates:
    udot: np.ndarray
    iterations: int
    residual: float


def volume_gradflux_reference(ctx: SolverContext, u: np.ndarray) -> np.ndarray:
    """Plain-numpy evaluation of int_K grad(phi_i) . f(u_h), shape (E, N)."""
    uq = ctx.quad_values(u)
    fq = ctx.quad_flux(uq)
    return np.einsum("nqk,eqk->en", ctx.Gw, fq)


def volume_gradflux(ctx: SolverContext, u: np.ndarray) -> np.ndarray:
    """int_K grad(phi_i) . f(u_h) per element and local node, shape (E, N)."""
    if ctx.flux_mode is None:
        return volume_gradflux_reference(ctx, u)
    from .kernels import volume_gradflux_kernel

    out = np.zeros(ctx.elem_nodes.shape)
    vq = ctx.vq if ctx.flux_mode == 0 else np.empty((1, 1, ctx.mesh.dim))
    volume_gradflux_kernel(
        ctx.elem_nodes, ctx.ref.B, ctx.Gw, vq, u, ctx.flux_mode, ctx.vconst, out
    )
    return out


def galerkin_rates(
    ctx: SolverContext,
    u: np.ndarray,
    bdata: BoundaryData,
    gradflux_en: np.ndarray | None = None,
    mass_solver: str = "lu",
    rtol: float = 1e-10,
) -> GalerkinRates:
    """Nodal time derivatives of the consistent-mass Galerkin system."""
    if gradflux_en is None:
        gradflux_en = volume_gradflux(ctx, u)
    rhs = (
        bdata.b_consistent
        + ctx.scatter_elements(gradflux_en)
        - ctx.scatter_elements(bdata.face_div)
    )
    if mass_solver == "lu":
        udot = ctx.mass_solve_lu(rhs)
        iters = 0
    elif mass_solver == "cg":
        udot, iters = ctx.mass_solve_cg(rhs, rtol=rtol)
    else:
        raise ValueError(f"unknown mass solver {mass_solver!r}")
    rnorm = float(np.linalg.norm(rhs))
    res = float(np.linalg.norm(ctx.mass_glob @ udot - rhs))
    if rnorm > 0 and res > 10.0 * rtol * rnorm:
        raise RuntimeError(
            f"consistent-mass solve residual {res:.3e} exceeds "
            f"{rtol:.1e} * |rhs| = {rtol * rnorm:.3e}"
        )
    return GalerkinRates(udot=udot, iterations=iters, residual=res)


def element_contributions_reference(
    ctx: SolverContext,
    u: np.ndarray,
    udot: np.ndarray,
    f_nodal: np.ndarray,
    gradflux_en: np.ndarray,
    bdata: BoundaryData,
) -> np.ndarray:
    """Plain-numpy element contributions q_i^e."""
    ref = ctx.ref
    ud_e = udot[ctx.elem_nodes]
    fe = f_nodal[ctx.elem_nodes]  # (E, N, d)
    q = np.einsum("ij,ej->ei", ref.ML_minus_MC, ud_e)
    for k in range(ctx.mesh.dim):
        q += np.einsum("ij,ej->ei", ref.Ct_minus_C[k], fe[:, :, k])
        q -= np.einsum("ij,ej->ei", ref.CT[k], fe[:, :, k])
    q += gradflux_en
    q += bdata.q_face
    return q


def element_contributions(
    ctx: SolverContext,
    u: np.ndarray,
    udot: np.ndarray,
    f_nodal: np.ndarray,
    gradflux_en: np.ndarray,
    bdata: BoundaryData,
) -> np.ndarray:
    """Antidiffusive element contributions q_i^e (E, N); each row sums to
    zero up to roundoff, which makes the subcell flux decomposition exact."""
    from .kernels import element_q_kernel

    q = gradflux_en + bdata.q_face
    fx = np.ascontiguousarray(f_nodal[:, 0])
    fy = (
        np.ascontiguousarray(f_nodal[:, 1])
        if ctx.mesh.dim == 2
        else np.empty(0)
    )
    element_q_kernel(
        ctx.elem_nodes, ctx.ref.ML_minus_MC, ctx.q_fmat, udot, fx, fy,
        ctx.mesh.dim, q,
    )
    return q


def subcell_decompose(ctx: SolverContext, q_en: np.ndarray) -> np.ndarray:
    """Decompose element contributions into antisymmetric subcell fluxes
    q_ij = mhat_ij (v_i - v_j) with (Mhat_L - Mhat_C) v = q, sum(v) = 0.

    The mean of q is projected out first so the singular system stays
    compatible under roundoff; the fluxes are invariant under constant
    shifts of v.  Returns one value per stored pair orientation (E, P).
    """
    qm = q_en - q_en.mean(axis=1, keepdims=True)
    v = np.einsum("ij,ej->ei", ctx.ref.subcell_solve, qm)
    return ctx.mhat_ab[None, :] * (v[:, ctx.pa] - v[:, ctx.pb])


def entropy_sensor(
    ctx: SolverContext, u: np.ndarray, f_nodal: np.ndarray, eps: float = 1e-10
) -> np.ndarray:
    """Nodal rate-of-entropy-production sensor R in [0, 1], built from the
    full-stencil (unlumped) discrete gradient."""
    model = ctx.model
    if model.is_linear:
        F_nodal = ctx.v_nodes * (0.5 * u * u)[:, None]
    else:
        F_nodal = model.entropy_flux(u)
    a = np.zeros(ctx.num_nodes)
    b = np.zeros(ctx.num_nodes)
    for k in range(ctx.mesh.dim):
        a += ctx.grad_full_glob[k] @ np.ascontiguousarray(F_nodal[:, k])
        b += ctx.grad_full_glob[k] @ np.ascontiguousarray(f_nodal[:, k])
    ep = model.entropy_prime(u)
    num = np.abs(a - ep * b)
    den = np.abs(a) + np.abs(ep) * np.abs(b) + eps
    return np.clip(num / den, 0.0, 1.0)


def target_fluxes(
    ctx: SolverContext,
    u: np.ndarray,
    q_pairs: np.ndarray,
    dij: np.ndarray,
    R: np.ndarray | None = None,
    ce: float = 1.0,
    uI=None,
    uJ=None,
) -> np.ndarray:
    """Raw target fluxes f_ij = d_ij (u_i - u_j) + q_ij, optionally with the
    graph-viscosity part scaled down by the entropy sensor."""
    if uI is None:
        uI = u[ctx.I]
        uJ = u[ctx.J]
    dpart = dij * (uI - uJ)
    if R is not None:
        factor = 1.0 - ce * np.maximum(R[ctx.I], R[ctx.J])
        dpart = factor * dpart
    return dpart + q_pairs
