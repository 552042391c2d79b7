"""Fused element-loop kernels for the hot assembly paths.

The pure-numpy implementations in low_order/antidiffusion/limiter are the
reference; these kernels fuse gather, bar-state, target-flux, limiting and
scatter into single passes to avoid redundant memory traffic.  All loops
are sequential, so results are independent of any thread-pool size.

Limiter modes: 0 passes the target through, 1 is the guaranteed-maximum-
speed form, 2 the generalized (linear-advection-safe) form, 3 the
smoothness-relaxed form.
"""

from __future__ import annotations

import numba
import numpy as np


@numba.njit(cache=True)
def pair_flux_accumulate(
    I, J, c_ab, c_ba, dij, qp, u, f, R, gamma, lo, hi, ce, mode, r
):
    """Per-pair target assembly, limiting, and accumulation of
    d_ij (u_j - u_i) + f*_ij into the rate vector r (both orientations)."""
    E, P = I.shape
    dim = c_ab.shape[1]
    for e in range(E):
        for p in range(P):
            i = I[e, p]
            j = J[e, p]
            ui = u[i]
            uj = u[j]
            dd = dij[e, p]
            fac = 1.0 - ce * max(R[i], R[j])
            fij = qp[e, p] + fac * (dd * (ui - uj))
            if mode == 0:
                fstar = fij
            else:
                dfx = f[j, 0] - f[i, 0]
                ca = c_ab[p, 0] * dfx
                cb = c_ba[p, 0] * dfx
                if dim == 2:
                    dfy = f[j, 1] - f[i, 1]
                    ca += c_ab[p, 1] * dfy
                    cb += c_ba[p, 1] * dfy
                s = dd * (ui + uj)
                wij = s - ca
                wji = s + cb
                two_d = 2.0 * dd
                if mode == 1:
                    if fij > 0.0:
                        fstar = min(
                            fij, min(two_d * hi[i] - wij, wji - two_d * lo[j])
                        )
                    else:
                        fstar = max(
                            fij, max(two_d * lo[i] - wij, wji - two_d * hi[j])
                        )
                    if two_d <= 0.0:
                        fstar = 0.0
                elif mode == 2:
                    if fij > 0.0:
                        fstar = min(
                            fij,
                            max(0.0, min(two_d * hi[i] - wij,
                                         wji - two_d * lo[j])),
                        )
                    else:
                        fstar = max(
                            fij,
                            min(0.0, max(two_d * lo[i] - wij,
                                         wji - two_d * hi[j])),
                        )
                    if two_d <= 0.0:
                        fstar = 0.0
                else:
                    gi = gamma[i]
                    gj = gamma[j]
                    if fij > 0.0:
                        fstar = min(
                            fij,
                            min(
                                gi * fij
                                + (1.0 - gi) * max(0.0, two_d * hi[i] - wij),
                                gj * fij
                                + (1.0 - gj) * max(0.0, wji - two_d * lo[j]),
                            ),
                        )
                    else:
                        fstar = max(
                            fij,
                            max(
                                gi * fij
                                + (1.0 - gi) * min(0.0, two_d * lo[i] - wij),
                                gj * fij
                                + (1.0 - gj) * min(0.0, wji - two_d * hi[j]),
                            ),
                        )
            contrib = dd * (uj - ui) + fstar
            r[i] += contrib
            r[j] -= contrib


@numba.njit(cache=True)
def loworder_pair_accumulate(I, J, dij, u, r):
    """Accumulate the graph-viscosity part d_ij (u_j - u_i) alone."""
    E, P = I.shape
    for e in range(E):
        for p in range(P):
            i = I[e, p]
            j = J[e, p]
            contrib = dij[e, p] * (u[j] - u[i])
            r[i] += contrib
            r[j] -= contrib


@numba.njit(cache=True)
def gms_dij_burgers(I, J, s_ab, u, out):
    """Rusanov coefficients for the Burgers flux:
    max(|c_ij|,|c_ji|) max(|n_ij.v|,|n_ji.v|) max(|u_i|,|u_j|)."""
    E, P = I.shape
    for e in range(E):
        for p in range(P):
            out[e, p] = s_ab[p] * max(abs(u[I[e, p]]), abs(u[J[e, p]]))


@numba.njit(cache=True)
def volume_gradflux_kernel(elem_nodes, B, Gw, vq, u, flux_mode, vconst, out):
    """out[e, i] = sum_q w_q grad(phi_i)(x_q) . f(u_h(x_q)).

    flux_mode 0: linear advection, f = vq * u (vq per quad point);
    flux_mode 1: Burgers, f = vconst * u^2/2;
    flux_mode 2: KPP, f = (sin u, cos u).
    """
    E, N = elem_nodes.shape
    Q = B.shape[1]
    dim = Gw.shape[2]
    for e in range(E):
        for q in range(Q):
            uq = 0.0
            for n in range(N):
                uq += B[n, q] * u[elem_nodes[e, n]]
            if flux_mode == 0:
                fx = vq[e, q, 0] * uq
                fy = vq[e, q, 1] * uq if dim == 2 else 0.0
            elif flux_mode == 1:
                h = 0.5 * uq * uq
                fx = vconst[0] * h
                fy = vconst[1] * h if dim == 2 else 0.0
            else:
                fx = np.sin(uq)
                fy = np.cos(uq)
            for n in range(N):
                acc = Gw[n, q, 0] * fx
                if dim == 2:
                    acc += Gw[n, q, 1] * fy
                out[e, n] += acc


@numba.njit(cache=True)
def element_q_kernel(elem_nodes, ML_minus_MC, q_fmat, udot, fx, fy, dim, out):
    """Fused element contributions:
    out[e,:] += (M_L - M_C) udot_e + sum_k [(Ct_k - C_k) - C_k^T] f_k,e,
    with the flux matrices pre-combined into q_fmat."""
    E, N = elem_nodes.shape
    for e in range(E):
        for i in range(N):
            acc = 0.0
            for j in range(N):
                gj = elem_nodes[e, j]
                acc += ML_minus_MC[i, j] * udot[gj]
                acc += q_fmat[0, i, j] * fx[gj]
                if dim == 2:
                    acc += q_fmat[1, i, j] * fy[gj]
            out[e, i] += acc
