"""Command line interface.

solve: run one benchmark configuration, writing errors.csv, monitor.csv,
field.vtk and field.png into the output directory.

study: run the 1D grid convergence tables (low-order or high-order method
set), writing errors.csv and convergence.png.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import antidiffusion
from .harness import (
    NH_SEQUENCE_1D,
    run_convergence_study,
    run_single,
    write_convergence_figure,
    write_errors_csv,
    write_field_outputs,
    write_monitor_csv,
    write_run_csv,
)
from .io_vtk import write_vtk_structured_points
from .problems import get_problem
from .reference_element import dump_element_matrices
from .time_integration import SCHEME_PRESETS, SchemeConfig


def _add_scheme_args(p: argparse.ArgumentParser):
    p.add_argument("--scheme", default="ho-ev-l", choices=sorted(SCHEME_PRESETS),
                   help="named scheme preset")
    p.add_argument("--limiter", choices=["none", "mcl", "mcl-si"],
                   help="override the preset's limiter")
    p.add_argument("--stabilization", choices=["none", "ev"],
                   help="override the preset's target stabilization")
    p.add_argument("--low-order", dest="low_order",
                   choices=["rusanov", "upwind"],
                   help="graph viscosity (default: upwind for linear flux, "
                        "rusanov otherwise)")
    p.add_argument("--bounds", default="subcell", choices=["subcell", "full"],
                   help="stencil for the local limiter bounds")
    p.add_argument("--si-c", type=float, default=3.0,
                   help="smoothness sensor contrast factor")
    p.add_argument("--si-eps-absolute", action="store_true",
                   help="use a plain absolute epsilon in the smoothness sensor")
    p.add_argument("--mass-solver", default="lu", choices=["lu", "cg"])


def _scheme_from_args(args) -> SchemeConfig:
    overrides = dict(
        bounds_mode=args.bounds,
        si_c=args.si_c,
        si_eps_scale_invariant=not args.si_eps_absolute,
        mass_solver=args.mass_solver,
    )
    if args.limiter is not None:
        overrides["limiter"] = args.limiter
    if args.stabilization is not None:
        overrides["target"] = (
            "ev" if args.stabilization == "ev" else
            ("none" if args.scheme in ("lo", "lo-full") else "galerkin")
        )
    if args.low_order is not None:
        overrides["dij"] = args.low_order
    return SchemeConfig.named(args.scheme, **overrides)


def cmd_solve(args) -> int:
    os.makedirs(args.out, exist_ok=True)
    scheme = _scheme_from_args(args)
    record = run_single(
        args.problem,
        scheme,
        cells=args.cells,
        degree=args.degree,
        cfl=args.cfl,
        t_final=args.tfinal,
        steady_tol=args.steady_tol,
        max_steps=args.max_steps,
    )
    problem = get_problem(args.problem)
    write_run_csv(os.path.join(args.out, "errors.csv"), record)
    write_monitor_csv(os.path.join(args.out, "monitor.csv"), record.result)
    write_field_outputs(args.out, record, problem)
    if args.dump_element_matrices:
        dump_element_matrices(
            record.system.ctx.ref,
            os.path.join(args.out, "element_matrices.csv"),
        )
    if args.dump_sensor:
        ctx = record.system.ctx
        u = record.result.u
        R = antidiffusion.entropy_sensor(ctx, u, ctx.nodal_flux(u))
        write_vtk_structured_points(
            os.path.join(args.out, "sensor.vtk"), record.mesh,
            {"entropy_sensor": R},
        )
    e1 = f"{record.e1:.6e}" if record.e1 is not None else "n/a"
    print(
        f"{args.problem} {scheme.name}: N_h={record.num_nodes} E1={e1} "
        f"u in [{record.umin:.6f}, {record.umax:.6f}] "
        f"({record.runtime_s:.2f} s, {record.result.steps} steps)"
    )
    return 0


STUDY_TABLES = {
    "1": [
        ("lo-full", 1, {}),
        ("lo-full", 2, {}),
        ("lo", 2, {}),
    ],
    "2": [
        ("ho-ev", 2, dict(bounds_mode="full")),
        ("ho-ev-l", 2, dict(bounds_mode="full")),
        ("ho-ev-l-si", 2, dict(bounds_mode="full")),
    ],
}


def cmd_study(args) -> int:
    os.makedirs(args.out, exist_ok=True)
    specs = STUDY_TABLES[args.table]
    cfl = args.cfl if args.cfl is not None else (0.5 if args.table == "1" else 0.25)
    reports = []
    for name, degree, overrides in specs:
        scheme = SchemeConfig.named(name, **overrides)
        rep = run_convergence_study(
            "advect1d", scheme, degree, nh_sequence=NH_SEQUENCE_1D, cfl=cfl
        )
        rep.scheme = f"{name}-q{degree}"
        reports.append(rep)
        for nh, e1, order, *_ in rep.rows:
            o = f"{order:.2f}" if order is not None else "  - "
            print(f"  {rep.scheme:16s} N_h={nh:4d}  E1={e1:.3e}  EOC={o}")
    write_errors_csv(os.path.join(args.out, "errors.csv"), reports)
    write_convergence_figure(
        os.path.join(args.out, "convergence.png"), reports,
        title=f"1D advection, method set {args.table}",
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="mclfem",
        description="Bernstein finite element solver for scalar conservation "
                    "laws with subcell convex flux limiting",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("solve", help="run one benchmark configuration")
    ps.add_argument("--problem", required=True,
                    choices=["advect1d", "sbr", "circular", "burgers2d", "kpp"])
    ps.add_argument("--degree", type=int, default=2, choices=[1, 2])
    ps.add_argument("--cells", type=int, required=True,
                    help="macro cells per axis")
    _add_scheme_args(ps)
    ps.add_argument("--cfl", type=float, default=0.5)
    ps.add_argument("--tfinal", type=float, default=None,
                    help="override the problem's final time")
    ps.add_argument("--steady", action="store_true",
                    help="march to steady state (implied by the circular "
                         "advection problem)")
    ps.add_argument("--steady-tol", type=float, default=1e-8)
    ps.add_argument("--max-steps", type=int, default=1_000_000)
    ps.add_argument("--out", required=True)
    ps.add_argument("--monitor", action="store_true",
                    help="kept for compatibility; monitor.csv is always written")
    ps.add_argument("--dump-element-matrices", action="store_true")
    ps.add_argument("--dump-sensor", action="store_true")
    ps.set_defaults(fn=cmd_solve)

    pt = sub.add_parser("study", help="1D grid convergence study")
    pt.add_argument("--table", required=True, choices=["1", "2"],
                    help="1: low-order methods, 2: high-order methods")
    pt.add_argument("--cfl", type=float, default=None)
    pt.add_argument("--out", required=True)
    pt.set_defaults(fn=cmd_study)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
