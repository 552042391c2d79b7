"""Monolithic convex limiting of subcell target fluxes.

Pure elementwise formulas (array-shape agnostic) for the flux correction:
the guaranteed-maximum-speed form, the generalized form that stays safe
when bar states of a linear-advection operator leave the local bounds, and
the smoothness-relaxed variant that opens the constraints near smooth
extrema.  Plus nodal bounds and the control-net Laplacian smoothness
sensor feeding the relaxed variant.
"""

from __future__ import annotations

import numpy as np

from .assembly import SolverContext


def local_bounds(ctx: SolverContext, u: np.ndarray, mode: str = "subcell"):
    """Nodal min/max over the chosen stencil (including the node itself)."""
    return ctx.local_bounds(u, mode)


def mcl_limit(f, wij, wji, dij, ui_min, ui_max, uj_min, uj_max, variant="gms"):
    """Bound-preserving correction f* of a target flux.

    variant 'gms': valid for viscosities built from guaranteed maximum
    speeds, where bar states already sit between the nodal values.
    variant 'linear': wraps the inner bounds with max{0,.}/min{0,.} so that
    positivity survives bar states outside the local bounds (variable
    velocity fields).  Pairs with zero viscosity carry no flux.
    """
    f = np.asarray(f, dtype=float)
    two_d = 2.0 * np.asarray(dij, dtype=float)
    up_i = two_d * ui_max - wij
    lo_i = two_d * ui_min - wij
    up_j = wji - two_d * uj_min
    lo_j = wji - two_d * uj_max
    if variant == "gms":
        pos = np.minimum(f, np.minimum(up_i, up_j))
        neg = np.maximum(f, np.maximum(lo_i, lo_j))
    elif variant == "linear":
        pos = np.minimum(f, np.maximum(0.0, np.minimum(up_i, up_j)))
        neg = np.maximum(f, np.minimum(0.0, np.maximum(lo_i, lo_j)))
    else:
        raise ValueError(f"unknown limiter variant {variant!r}")
    out = np.where(f > 0.0, pos, neg)
    return np.where(two_d > 0.0, out, 0.0)


def si_limit(f, wij, wji, dij, ui_min, ui_max, uj_min, uj_max, gamma_i, gamma_j):
    """Smoothness-relaxed flux correction.

    Reduces to the 'linear' variant at gamma=0 and passes the target flux
    through unchanged at gamma=1.
    """
    f = np.asarray(f, dtype=float)
    two_d = 2.0 * np.asarray(dij, dtype=float)
    up_i = np.maximum(0.0, two_d * ui_max - wij)
    up_j = np.maximum(0.0, wji - two_d * uj_min)
    lo_i = np.minimum(0.0, two_d * ui_min - wij)
    lo_j = np.minimum(0.0, wji - two_d * uj_max)
    pos = np.minimum(
        f,
        np.minimum(
            gamma_i * f + (1.0 - gamma_i) * up_i,
            gamma_j * f + (1.0 - gamma_j) * up_j,
        ),
    )
    neg = np.maximum(
        f,
        np.maximum(
            gamma_i * f + (1.0 - gamma_i) * lo_i,
            gamma_j * f + (1.0 - gamma_j) * lo_j,
        ),
    )
    return np.where(f > 0.0, pos, neg)


def smoothness_gamma(
    ctx: SolverContext,
    u: np.ndarray,
    c_sensor: float = 3.0,
    eps: float = 1e-10,
    scale_invariant: bool = True,
) -> np.ndarray:
    """Nodal smoothness sensors in [0, 1].

    Reconstructs nodal Laplacians of the piecewise-multilinear interpolant
    of u_h sampled at the control points, then compares the stencil extrema
    of the Laplacian field: gamma = 1 when both extrema share the sign and
    differ by at most the factor c_sensor, gamma = 0 across sign changes.
    Boundary nodes get gamma = 1.

    By default eps is scaled by max(1, max eta^2) so the sensor is
    invariant under u -> s*u; scale_invariant=False keeps the plain
    absolute epsilon.
    """
    T, K, m = ctx.fine_operators()
    u_lattice = T @ u
    eta = (K @ u_lattice) / m
    lo, hi = ctx.window_bounds(eta)
    eps_eff = eps * max(1.0, float(np.max(eta * eta))) if scale_invariant else eps
    num = c_sensor * np.maximum(0.0, lo * hi) + eps_eff
    den = np.maximum(lo * lo, hi * hi) + eps_eff
    gamma = np.minimum(1.0, num / den)
    gamma[ctx.mesh.boundary_node_mask()] = 1.0
    return gamma
