"""Explicit time integration of the flux-corrected semi-discrete system.

Each Runge-Kutta stage is a forward-Euler update of the scheme

    m_i du_i/dt = sum_e sum_j [d_ij (u_j - u_i) + f*_ij]
                  - sum_j c_ij . f_j + btilde_i + sum_e g*_i,

with the target fluxes, stabilization, and limiting selected by the scheme
configuration.  Time stepping uses the classical three-stage, third-order
strong-stability-preserving Runge-Kutta method; the step size is recomputed
from the CFL bound at every step and the last step is clipped to hit the
final time exactly.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from . import antidiffusion, kernels, limiter as limiter_mod, low_order
from .assembly import SolverContext
from .flux_models import FluxModel
from .mesh import Mesh

_DUMMY = np.zeros(1)
_ZERO_CACHE: dict[int, np.ndarray] = {}


def _zeros_like_cached(ctx) -> np.ndarray:
    z = _ZERO_CACHE.get(ctx.num_nodes)
    if z is None:
        z = np.zeros(ctx.num_nodes)
        _ZERO_CACHE[ctx.num_nodes] = z
    return z


SCHEME_PRESETS = {
    "lo": dict(variant="compact", target="none", limiter="none"),
    "lo-full": dict(variant="full", target="none", limiter="none"),
    "ho-galerkin-l": dict(variant="compact", target="galerkin", limiter="mcl"),
    "ho-ev": dict(variant="compact", target="ev", limiter="none"),
    "ho-ev-l": dict(variant="compact", target="ev", limiter="mcl"),
    "ho-ev-l-si": dict(variant="compact", target="ev", limiter="mcl-si"),
}


@dataclass
class SchemeConfig:
    """Spatial scheme selection.

    dij / limiter_variant default to the model-appropriate choice:
    discrete upwinding and the generalized limiter for linear advection,
    guaranteed-maximum-speed viscosity and the plain limiter otherwise.
    """

    name: str = "ho-ev-l"
    variant: str = "compact"          # gradient stencil: compact | full
    target: str = "ev"                # none | galerkin | ev
    limiter: str = "mcl"              # none | mcl | mcl-si
    dij: str | None = None            # rusanov | upwind
    limiter_variant: str | None = None  # gms | linear
    bounds_mode: str = "subcell"      # subcell | full
    ce: float = 1.0
    si_c: float = 3.0
    si_eps_scale_invariant: bool = True
    mass_solver: str = "lu"

    @classmethod
    def named(cls, name: str, **overrides) -> "SchemeConfig":
        if name not in SCHEME_PRESETS:
            raise ValueError(
                f"unknown scheme {name!r}; choose from {sorted(SCHEME_PRESETS)}"
            )
        kw = dict(SCHEME_PRESETS[name])
        kw.update(overrides)
        return cls(name=name, **kw)

    def resolve(self, model: FluxModel) -> "SchemeConfig":
        out = self
        if out.dij is None:
            out = replace(out, dij="upwind" if model.is_linear else "rusanov")
        if out.limiter_variant is None:
            out = replace(
                out, limiter_variant="linear" if model.is_linear else "gms"
            )
        return out


@dataclass
class TimeLoopConfig:
    t_final: float = 1.0
    cfl: float = 0.5
    steady: bool = False
    steady_tol: float = 1e-8
    max_steps: int = 1_000_000
    max_dt: float = np.inf


@dataclass
class RunResult:
    u: np.ndarray
    t: float
    steps: int
    stage_min: float
    stage_max: float
    monitor: list = field(default_factory=list)
    converged: bool = True
    residual0: float = 0.0
    residual: float = 0.0
    net_inflow: float = 0.0  # time-integrated total rate (boundary flux)


def ssp_rk3(u: np.ndarray, dt: float, L, t: float = 0.0):
    """One Shu-Osher SSP-RK3 step for du/dt = L(u, t); returns the stage
    states so callers can monitor stage-wise bounds."""
    u1 = u + dt * L(u, t)
    u2 = 0.75 * u + 0.25 * (u1 + dt * L(u1, t + dt))
    u3 = u / 3.0 + (2.0 / 3.0) * (u2 + dt * L(u2, t + 0.5 * dt))
    return u3, (u1, u2)


class SemiDiscreteSystem:
    """Binds mesh, flux model, boundary data, and a scheme configuration."""

    def __init__(self, mesh: Mesh, model: FluxModel, scheme: SchemeConfig,
                 u_in_fn=None):
        self.mesh = mesh
        self.model = model
        self.scheme = scheme.resolve(model)
        self.u_in_fn = u_in_fn if u_in_fn is not None else (lambda x, t: 0.0)
        self.ctx = SolverContext(mesh, model, self.scheme.variant)
        self.dij_fn = low_order.build_dij_fn(self.ctx, self.scheme.dij)
        if self.scheme.target != "none" and self.scheme.variant == "full":
            raise ValueError("high-order targets require the compact stencil")

    # ------------------------------------------------------------------
    def rhs(self, u: np.ndarray, t: float) -> np.ndarray:
        """Nodal rates r_i = m_i du_i/dt of the configured scheme."""
        if not np.all(np.isfinite(u)):
            bad = int(np.argmax(~np.isfinite(u)))
            raise RuntimeError(
                f"non-finite state at node {bad} "
                f"(x = {self.mesh.node_coords[bad]}, t = {t:.6g})"
            )
        ctx, sch = self.ctx, self.scheme
        f_nodal = ctx.nodal_flux(u)
        dij = self.dij_fn(u)
        need_consistent = sch.target != "none"
        bdata = low_order.boundary_pass(
            ctx, u, t, self.u_in_fn, f_nodal, need_consistent=need_consistent
        )

        limited = sch.limiter != "none"
        if limited or sch.target == "none":
            lo, hi = ctx.local_bounds(u, sch.bounds_mode)
        else:
            lo = hi = _DUMMY

        r = np.zeros(ctx.num_nodes)
        if need_consistent:
            gradflux = antidiffusion.volume_gradflux(ctx, u)
            rates = antidiffusion.galerkin_rates(
                ctx, u, bdata, gradflux, mass_solver=sch.mass_solver
            )
            q_en = antidiffusion.element_contributions(
                ctx, u, rates.udot, f_nodal, gradflux, bdata
            )
            q_pairs = antidiffusion.subcell_decompose(ctx, q_en)
            if sch.target == "ev":
                R = antidiffusion.entropy_sensor(ctx, u, f_nodal)
            else:
                R = _zeros_like_cached(ctx)
            if not limited:
                mode = 0
                gamma = _DUMMY
            elif sch.limiter == "mcl":
                mode = 1 if sch.limiter_variant == "gms" else 2
                gamma = _DUMMY
            else:
                mode = 3
                gamma = limiter_mod.smoothness_gamma(
                    ctx, u, sch.si_c,
                    scale_invariant=sch.si_eps_scale_invariant,
                )
            kernels.pair_flux_accumulate(
                ctx.I, ctx.J, ctx.c_ab, ctx.c_ba, dij, q_pairs,
                u, f_nodal, R, gamma, lo, hi, sch.ce, mode, r,
            )
        else:
            kernels.loworder_pair_accumulate(ctx.I, ctx.J, dij, u, r)

        for k in range(ctx.mesh.dim):
            r -= ctx.grad_glob[k] @ np.ascontiguousarray(f_nodal[:, k])
        r += bdata.btilde

        # boundary flux correction: clipped whenever the scheme limits
        # (the low-order scheme clips too); raw for unlimited targets so
        # the pure Galerkin rates are recovered
        if limited or sch.target == "none":
            gstar = low_order.clip_boundary_correction(ctx, u, bdata, lo, hi)
        else:
            gstar = bdata.g_raw
        r += ctx.scatter_elements(gstar)
        return r

    # ------------------------------------------------------------------
    def max_stable_dt(self, u: np.ndarray, t: float, nu: float) -> float:
        ctx = self.ctx
        f_nodal = ctx.nodal_flux(u)
        dij = self.dij_fn(u)
        bdata = low_order.boundary_pass(ctx, u, t, self.u_in_fn, f_nodal)
        return low_order.max_stable_dt(ctx, u, dij, bdata.cfl_face, nu)

    def _rate(self, u, t):
        return self.rhs(u, t) / self.ctx.lumped_mass

    def ssp_rk3_step(self, u: np.ndarray, t: float, dt: float):
        """One SSP-RK3 step; also returns the stage states and the exact
        total-mass increment (the Runge-Kutta combination of the stage
        rate sums, which telescopes to the net boundary flux)."""
        r0 = self.rhs(u, t)
        u1 = u + dt * (r0 / self.ctx.lumped_mass)
        r1 = self.rhs(u1, t + dt)
        u2 = 0.75 * u + 0.25 * (u1 + dt * (r1 / self.ctx.lumped_mass))
        r2 = self.rhs(u2, t + 0.5 * dt)
        u3 = u / 3.0 + (2.0 / 3.0) * (u2 + dt * (r2 / self.ctx.lumped_mass))
        dmass = dt * (r0.sum() + r1.sum() + 4.0 * r2.sum()) / 6.0
        return u3, (u1, u2), dmass

    # ------------------------------------------------------------------
    def run(self, u0: np.ndarray, tcfg: TimeLoopConfig, monitor=None,
            stage_callback=None) -> RunResult:
        """Advance to t_final; records per-step monitor rows
        (step, t, dt, umin, umax, mass) and tracks stage-wise extrema."""
        if tcfg.steady:
            return self.march_to_steady(u0, tcfg, monitor=monitor)
        u = u0.copy()
        t = 0.0
        m = self.ctx.lumped_mass
        stage_min = float(u.min())
        stage_max = float(u.max())
        rows = []
        step = 0
        net_inflow = 0.0
        while t < tcfg.t_final - 1e-14 * max(1.0, tcfg.t_final):
            dt = self.max_stable_dt(u, t, tcfg.cfl)
            dt = min(dt, tcfg.max_dt, tcfg.t_final - t)
            if not np.isfinite(dt) or dt <= 0:
                dt = tcfg.t_final - t
            u, stages, dmass = self.ssp_rk3_step(u, t, dt)
            net_inflow += dmass
            t += dt
            step += 1
            for us in (*stages, u):
                stage_min = min(stage_min, float(us.min()))
                stage_max = max(stage_max, float(us.max()))
                if stage_callback is not None:
                    stage_callback(us)
            rows.append((step, t, dt, float(u.min()), float(u.max()),
                         float(np.dot(m, u))))
            if monitor is not None:
                monitor(rows[-1])
            if step >= tcfg.max_steps:
                warnings.warn(
                    f"time loop hit max_steps={tcfg.max_steps} at t={t:.6g}"
                )
                break
        return RunResult(u=u, t=t, steps=step, stage_min=stage_min,
                         stage_max=stage_max, monitor=rows,
                         net_inflow=net_inflow)

    # ------------------------------------------------------------------
    def march_to_steady(self, u0: np.ndarray, tcfg: TimeLoopConfig,
                        monitor=None) -> RunResult:
        """Lumped-mass pseudo-time iteration until the residual of the
        semi-discrete scheme drops below steady_tol relative to its initial
        value."""
        u = u0.copy()
        m = self.ctx.lumped_mass
        r = self.rhs(u, 0.0)
        res0 = float(np.abs(r).max())
        res = res0
        stage_min = float(u.min())
        stage_max = float(u.max())
        rows = []
        step = 0
        converged = res0 == 0.0
        while not converged and step < tcfg.max_steps:
            dt = self.max_stable_dt(u, 0.0, tcfg.cfl)
            if not np.isfinite(dt):
                break
            u = u + dt * (r / m)
            step += 1
            stage_min = min(stage_min, float(u.min()))
            stage_max = max(stage_max, float(u.max()))
            r = self.rhs(u, 0.0)
            res = float(np.abs(r).max())
            if step % 100 == 0 or res <= tcfg.steady_tol * res0:
                rows.append((step, 0.0, dt, float(u.min()), float(u.max()),
                             float(np.dot(m, u))))
                if monitor is not None:
                    monitor(rows[-1])
            if res <= tcfg.steady_tol * res0:
                converged = True
        if not converged:
            warnings.warn(
                f"pseudo-time marching stopped after {step} steps with "
                f"relative residual {res / res0 if res0 else 0.0:.3e}"
            )
        return RunResult(u=u, t=0.0, steps=step, stage_min=stage_min,
                         stage_max=stage_max, monitor=rows,
                         converged=converged, residual0=res0, residual=res)
