"""Acceptance suite: benchmark reproduction and scheme-property gates.

Each criterion prints one PASS/FAIL line (run with `pytest -s` to see them
on success).  Benchmark runs are cached under .acceptance_cache keyed by a
digest of the package sources; a cold cache recomputes everything, which
takes a few hours for the finest meshes.
"""

import subprocess
import sys
import os

import numpy as np
import pytest

from _accept_util import (
    BURGERS_FIGS,
    NH_1D,
    SBR_FIGS,
    STEADY_FIGS,
    TABLE1,
    TABLE2,
    run_cached,
)
from mclfem.harness import cells_for_nh, eoc


def _report(num, name, failures, extra=""):
    status = "PASS" if not failures else "FAIL"
    print(f"\nACCEPTANCE {num} ({name}): {status}{extra}")
    for f in failures:
        print(f"  - {f}")
    assert not failures, f"criterion {num} ({name}): " + "; ".join(failures)


def _adjusted_reference(e_ref, eoc_ref, nh_nominal, nh_actual):
    """Power-law shift of a reference error to the realized lattice size
    (quadratic elements cannot represent node counts 20/28/54)."""
    if nh_actual == nh_nominal or eoc_ref is None:
        return e_ref
    h_ratio = (nh_nominal - 1) / (nh_actual - 1)
    return e_ref * h_ratio**eoc_ref


def _table_rows(scheme, degree, cfl, **overrides):
    rows = []
    for nh in NH_1D:
        out = run_cached("advect1d", scheme, cells_for_nh(nh, degree),
                         degree=degree, cfl=cfl, **overrides)
        rows.append((out["num_nodes"], out["e1"]))
    return rows


class TestCriterion1:
    def test_table1_low_order(self):
        failures = []
        for (scheme, degree), ref in TABLE1.items():
            rows = _table_rows(scheme, degree, cfl=0.5)
            orders = eoc(rows)
            for k, ((nh, e1), order) in enumerate(zip(rows, orders)):
                e_ref = _adjusted_reference(
                    ref["e1"][k], ref["eoc"][k], NH_1D[k], nh
                )
                if abs(e1 - e_ref) > 0.05 * e_ref:
                    failures.append(
                        f"{scheme} q{degree} N={nh}: E1={e1:.3e} vs "
                        f"{e_ref:.3e} ({e1 / e_ref:.2f}x, >5%)"
                    )
                if ref["eoc"][k] is not None and abs(order - ref["eoc"][k]) > 0.05:
                    failures.append(
                        f"{scheme} q{degree} N={nh}: EOC={order:.2f} vs "
                        f"{ref['eoc'][k]:.2f} (>0.05)"
                    )
        _report(1, "1D low-order grid convergence", failures)


class TestCriterion2:
    def test_table2_high_order(self):
        failures = []
        reports = {}
        for scheme, ref in TABLE2.items():
            rows = _table_rows(scheme, 2, cfl=0.25, bounds_mode="full")
            orders = eoc(rows)
            reports[scheme] = (rows, orders)
            for k, ((nh, e1), order) in enumerate(zip(rows, orders)):
                e_ref = _adjusted_reference(
                    ref["e1"][k], ref["eoc"][k], NH_1D[k], nh
                )
                if abs(e1 - e_ref) > 0.15 * e_ref:
                    failures.append(
                        f"{scheme} N={nh}: E1={e1:.3e} vs {e_ref:.3e} "
                        f"({e1 / e_ref:.2f}x, >15%)"
                    )
                if ref["eoc"][k] is not None and abs(order - ref["eoc"][k]) > 0.2:
                    failures.append(
                        f"{scheme} N={nh}: EOC={order:.2f} vs "
                        f"{ref['eoc'][k]:.2f} (>0.2)"
                    )
        # dt-halving control: < 3% change attributes residual mismatch to
        # the benchmark setup rather than to the discretization
        base = run_cached("advect1d", "ho-ev", 73, degree=2, cfl=0.25,
                          bounds_mode="full")
        half = run_cached("advect1d", "ho-ev", 73, degree=2, cfl=0.125,
                          bounds_mode="full")
        rel = abs(base["e1"] - half["e1"]) / base["e1"]
        if rel > 0.03:
            failures.append(f"dt-halving control changed E1 by {rel:.1%} (>3%)")
        # stabilized-unlimited method must approach third order
        for nh, order in zip([r[0] for r in reports["ho-ev"][0][-2:]],
                             reports["ho-ev"][1][-2:]):
            if order < 2.8:
                failures.append(f"ho-ev N={nh}: EOC={order:.2f} < 2.8")
        final_si = reports["ho-ev-l-si"][0][-1][1]
        if final_si > 1.5e-5:
            failures.append(f"ho-ev-l-si final E1={final_si:.3e} > 1.5e-5")
        _report(2, "1D high-order grid convergence", failures,
                extra=f" (dt control: {rel:.2e} relative change)")


SBR_RUNS = {129: 64, 257: 128}


class TestCriterion3:
    def test_solid_body_rotation(self):
        failures = []
        limited = {"ho-galerkin-l", "ho-ev-l", "ho-ev-l-si"}
        bound_checked = {"lo", "lo-full"} | limited
        for (scheme, degree), refs in SBR_FIGS.items():
            for dofs, (e_ref, umax_ref) in refs.items():
                cells = SBR_RUNS[dofs] * (2 // degree)
                out = run_cached("sbr", scheme, cells, degree=degree, cfl=0.5)
                tag = f"{scheme} q{degree} {dofs}^2"
                if abs(out["e1"] - e_ref) > 0.15 * e_ref:
                    failures.append(
                        f"{tag}: E1={out['e1']:.3e} vs {e_ref:.3e} (>15%)"
                    )
                if scheme in limited and abs(out["umax"] - umax_ref) > 0.03:
                    failures.append(
                        f"{tag}: umax={out['umax']:.4f} vs {umax_ref} (>0.03)"
                    )
                if scheme in bound_checked:
                    if out["stage_min"] < -1e-12 or out["stage_max"] > 1 + 1e-12:
                        failures.append(
                            f"{tag}: stage range [{out['stage_min']:.2e}, "
                            f"{out['stage_max']:.12f}] leaves [0,1]"
                        )
        _report(3, "solid body rotation figures", failures)


class TestCriterion4:
    def test_burgers(self):
        failures = []
        for scheme, refs in BURGERS_FIGS.items():
            for dofs, e_ref in refs.items():
                out = run_cached("burgers2d", scheme, SBR_RUNS[dofs], degree=2,
                                 cfl=0.5)
                tag = f"{scheme} {dofs}^2"
                if abs(out["e1"] - e_ref) > 0.10 * e_ref:
                    failures.append(
                        f"{tag}: E1={out['e1']:.3e} vs {e_ref:.3e} (>10%)"
                    )
                if out["stage_min"] < -1.0 - 1e-12 or out["stage_max"] > 0.8 + 1e-12:
                    failures.append(
                        f"{tag}: stage range [{out['stage_min']:.12f}, "
                        f"{out['stage_max']:.12f}] leaves [-1, 0.8]"
                    )
        _report(4, "Burgers Riemann figures", failures)


class TestCriterion5:
    def test_steady_circular(self):
        failures = []
        specs = [("lo", 32, 65, 0.15), ("ho-galerkin-l", 64, 129, 0.20)]
        for scheme, cells, dofs, tol in specs:
            out = run_cached("circular", scheme, cells, degree=2, cfl=0.8,
                             max_steps=200_000)
            e_ref = STEADY_FIGS[(scheme, dofs)]
            tag = f"{scheme} {dofs}^2"
            if not out["converged"] or out["residual_rel"] > 1e-8:
                failures.append(
                    f"{tag}: residual {out['residual_rel']:.2e} > 1e-8 "
                    f"after {out['steps']} steps"
                )
            if abs(out["e1"] - e_ref) > tol * e_ref:
                failures.append(
                    f"{tag}: E1={out['e1']:.3e} vs {e_ref:.3e} (>{tol:.0%})"
                )
        _report(5, "steady circular advection", failures)


class TestCriterion6:
    def test_kpp(self):
        failures = []
        lo_pi, hi_pi = 0.25 * np.pi, 3.5 * np.pi
        outs = {}
        for scheme in ("lo", "ho-galerkin-l", "ho-ev-l"):
            out = run_cached("kpp", scheme, 64, degree=2, cfl=0.5)
            outs[scheme] = out
            if out["stage_min"] < lo_pi - 1e-12 or out["stage_max"] > hi_pi + 1e-12:
                failures.append(
                    f"{scheme}: stage range [{out['stage_min']:.12f}, "
                    f"{out['stage_max']:.12f}] leaves [pi/4, 14pi/4]"
                )
        ent_g = outs["ho-galerkin-l"]["entropy"]
        ent_ev = outs["ho-ev-l"]["entropy"]
        rel = abs(ent_g - ent_ev) / abs(ent_ev)
        if rel <= 0.01:
            failures.append(
                f"entropy proxy: unstabilized {ent_g:.6e} vs stabilized "
                f"{ent_ev:.6e} differ by {rel:.2%} (<= 1%)"
            )
        _report(6, "KPP rotating wave", failures,
                extra=f" (entropy difference {rel:.1%})")


class TestCriterion7:
    """Fast property suite."""

    def test_galerkin_recovery(self):
        from mclfem import antidiffusion as ad, low_order
        from mclfem.flux_models import Burgers, KPP, LinearAdvection, velocity_field
        from mclfem.mesh import build_mesh
        from mclfem.time_integration import SchemeConfig, SemiDiscreteSystem

        failures = []
        rng = np.random.default_rng(77)
        cases = []
        for dim in (1, 2):
            cases.append((LinearAdvection(velocity_field(
                "constant", (1.0,) * dim, dim=dim)), dim))
            cases.append((Burgers((1.0,) * dim), dim))
        cases.append((KPP(), 2))
        cases.append((LinearAdvection(velocity_field("solid_body_rotation")), 2))
        for model, dim in cases:
            for p in (1, 2):
                mesh = build_mesh(dim, p, 3)
                system = SemiDiscreteSystem(
                    mesh, model, SchemeConfig.named("ho-galerkin-l", limiter="none"),
                    u_in_fn=lambda x, t: 0.25,
                )
                u = rng.uniform(0.05, 1.0, mesh.num_nodes)
                r = system.rhs(u, 0.0)
                ctx = system.ctx
                f = ctx.nodal_flux(u)
                bdata = low_order.boundary_pass(
                    ctx, u, 0.0, system.u_in_fn, f, need_consistent=True
                )
                gf = ad.volume_gradflux(ctx, u)
                rates = ad.galerkin_rates(ctx, u, bdata, gf)
                target = ctx.lumped_mass * rates.udot
                rel = np.abs(r - target).max() / np.abs(target).max()
                if rel > 1e-9:
                    failures.append(
                        f"{type(model).__name__} d={dim} p={p}: recovery "
                        f"residual {rel:.2e}"
                    )
        _report(7.1, "Galerkin recovery identity", failures)

    def test_element_zero_sum_and_decomposition(self):
        from mclfem import antidiffusion as ad, low_order
        from mclfem.assembly import SolverContext
        from mclfem.flux_models import Burgers
        from mclfem.mesh import build_mesh

        failures = []
        rng = np.random.default_rng(78)
        mesh = build_mesh(2, 2, 3)
        ctx = SolverContext(mesh, Burgers((1.0, 1.0)))
        u = rng.uniform(-1, 1, mesh.num_nodes)
        f = ctx.nodal_flux(u)
        bdata = low_order.boundary_pass(
            ctx, u, 0.0, lambda x, t: 0.2, f, need_consistent=True
        )
        gf = ad.volume_gradflux(ctx, u)
        rates = ad.galerkin_rates(ctx, u, bdata, gf)
        q = ad.element_contributions(ctx, u, rates.udot, f, gf, bdata)
        bad = np.abs(q.sum(axis=1)) > 1e-12 * np.abs(q).sum(axis=1) + 1e-15
        if bad.any():
            failures.append(f"zero-sum violated on {bad.sum()} elements")
        qp = ad.subcell_decompose(ctx, q)
        rec = np.zeros_like(q)
        for p, (a, b) in enumerate(zip(ctx.pa, ctx.pb)):
            rec[:, a] += qp[:, p]
            rec[:, b] -= qp[:, p]
        qm = q - q.mean(axis=1, keepdims=True)
        err = np.abs(rec - qm).max()
        if err > 1e-11 * max(1.0, np.abs(qm).max()):
            failures.append(f"decomposition consistency {err:.2e}")
        _report(7.2, "element zero-sum and subcell decomposition", failures)

    def test_lumped_gradient_oracle_and_sparsity(self):
        from mclfem.reference_element import (
            BernsteinBasis,
            build_element_matrices,
        )

        failures = []
        for p, d in [(1, 1), (2, 1), (1, 2), (2, 2)]:
            em = build_element_matrices(BernsteinBasis(p, d), [0.8, 1.1][:d])
            for k in range(d):
                oracle = np.diag(em.mass_lumped) @ np.linalg.solve(
                    em.mass_consistent, em.gradient[k]
                )
                diff = np.abs(em.gradient_lumped[k].toarray() - oracle).max()
                lim = 1e-12 * np.prod(em.extents) / em.extents[k]
                if diff > lim:
                    failures.append(f"p={p} d={d} k={k}: oracle diff {diff:.2e}")
                coo = em.gradient_lumped[k].tocoo()
                basis = BernsteinBasis(p, d)
                for i, j in zip(coo.row, coo.col):
                    mi, mj = basis.local_multi(int(i)), basis.local_multi(int(j))
                    if any(
                        mi[a] != mj[a] for a in range(d) if a != k
                    ) or abs(mi[k] - mj[k]) > 1:
                        failures.append(f"p={p} d={d}: stored entry off-stencil")
                        break
        _report(7.3, "lumped gradient oracle and structural sparsity", failures)

    def test_limiter_containment(self):
        from mclfem.limiter import mcl_limit

        rng = np.random.default_rng(79)
        n = 100_000
        d = rng.uniform(0.05, 2.0, n)
        lo_i = rng.uniform(-2, 0, n)
        hi_i = lo_i + rng.uniform(0, 2, n)
        lo_j = rng.uniform(-2, 0, n)
        hi_j = lo_j + rng.uniform(0, 2, n)
        wij = 2 * d * rng.uniform(lo_i, hi_i)
        wji = 2 * d * rng.uniform(lo_j, hi_j)
        f = rng.normal(scale=2.0, size=n)
        fstar = mcl_limit(f, wij, wji, d, lo_i, hi_i, lo_j, hi_j, "gms")
        ub_ij = (wij + fstar) / (2 * d)
        ub_ji = (wji - fstar) / (2 * d)
        failures = []
        tol = 1e-12
        if not (
            np.all(ub_ij >= lo_i - tol)
            and np.all(ub_ij <= hi_i + tol)
            and np.all(ub_ji >= lo_j - tol)
            and np.all(ub_ji <= hi_j + tol)
        ):
            failures.append("corrected bar state left its bounds")
        _report(7.4, "limiter bar-state containment (1e5 tuples)", failures)

    def test_conservation_sbr(self):
        out = run_cached("sbr", "ho-ev-l", 64, degree=2, cfl=0.5)
        failures = []
        if out["mass_balance"] > 1e-10:
            failures.append(
                f"discrete mass balance {out['mass_balance']:.2e} > 1e-10"
            )
        extra = (f" (raw drift {out['mass_drift']:.2e} = physical boundary "
                 f"outflow, balance {out['mass_balance']:.2e})")
        _report(7.5, "conservation on solid body rotation", failures, extra)

    def test_bitwise_determinism(self):
        snippet = (
            "import hashlib\n"
            "from mclfem.harness import run_single\n"
            "rec = run_single('sbr', 'ho-ev-l-si', cells=8, degree=2, "
            "cfl=0.5, t_final=0.02)\n"
            "print(hashlib.sha256(rec.result.u.tobytes()).hexdigest())\n"
        )
        digests = []
        for nthreads in ("1", "2", "8"):
            env = dict(os.environ)
            for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                        "MKL_NUM_THREADS"):
                env[var] = nthreads
            out = subprocess.run(
                [sys.executable, "-c", snippet],
                capture_output=True, text=True, env=env, check=True,
            )
            digests.append(out.stdout.strip().splitlines()[-1])
        failures = []
        if len(set(digests)) != 1:
            failures.append(f"digests differ across thread counts: {digests}")
        _report(7.6, "bitwise determinism across 1/2/8 threads", failures)
