"""Benchmark driver: initialization, L1 errors, EOC tables, convergence
studies, and report files (CSV + VTK + rendered figures)."""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field

import numpy as np

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .assembly import SolverContext
from .io_vtk import write_vtk_structured_points
from .mesh import Mesh, build_mesh
from .problems import Problem, get_problem
from .reference_element import basis_tables, volume_quadrature
from .time_integration import (
    RunResult,
    SchemeConfig,
    SemiDiscreteSystem,
    TimeLoopConfig,
)

# 1D node-count sequence of the grid convergence studies.  For quadratic
# elements the counts 20, 28 and 54 have no integral cell count; the
# nearest admissible lattice (21, 29, 55 nodes) is used and reported.
NH_SEQUENCE_1D = (11, 15, 20, 28, 39, 54, 75, 105, 147)


def cells_for_nh(nh: int, degree: int) -> int:
    return max(1, round((nh - 1) / degree))


def initialize(problem: Problem, mesh: Mesh, ctx: SolverContext) -> np.ndarray:
    """Nodal coefficients of the initial condition.

    Default: bound-preserving interpolation at the control points.  For the
    smooth 1D problem: consistent-mass L2 projection (quadrature with p+6
    points per cell on the right-hand side).
    """
    if problem.init_mode == "interp":
        return np.asarray(problem.u0(mesh.node_coords), dtype=float)
    pts, w = volume_quadrature(ctx.ref.basis, mesh.h, mesh.degree + 6)
    B, _ = basis_tables(ctx.ref.basis, mesh.h, pts)
    xq = (
        ctx.elem_origin[:, None, :]
        + pts[None, :, :] * np.asarray(mesh.h)[None, None, :]
    )
    vals = problem.u0(xq)  # (E, Q)
    rhs_en = np.einsum("nq,q,eq->en", B, w, vals)
    rhs = ctx.scatter_elements(rhs_en)
    return ctx.mass_solve_lu(rhs)


def l1_error(
    u: np.ndarray, problem: Problem, mesh: Mesh, ctx: SolverContext, t: float
) -> float:
    """L1 distance to the exact solution via over-integrated cell quadrature."""
    if problem.exact is None:
        raise ValueError(f"problem {problem.name} has no exact solution")
    B, w, xq = ctx.error_quadrature()
    ue = u[mesh.elem_nodes]
    uh = np.einsum("nq,en->eq", B, ue)
    uex = problem.exact(xq, t)
    return float(np.einsum("q,eq->", w, np.abs(uh - uex)))


def eoc(rows):
    """Experimental orders of convergence for a list of (N_h, E1) rows,
    using h = 1/(N_h - 1); the first row has no order."""
    out = [None]
    for (n0, e0), (n1, e1) in zip(rows[:-1], rows[1:]):
        if e1 <= 0.0 or e0 <= 0.0:
            out.append(np.inf)
            continue
        out.append(float(np.log(e0 / e1) / np.log((n1 - 1) / (n0 - 1))))
    return out


@dataclass
class RunRecord:
    problem: str
    scheme: str
    degree: int
    cells: int
    num_nodes: int
    e1: float | None
    umin: float
    umax: float
    stage_min: float
    stage_max: float
    runtime_s: float
    mass_drift: float
    mass_balance: float  # |mass change - integrated boundary flux| / scale
    result: RunResult = field(repr=False, default=None)
    mesh: Mesh = field(repr=False, default=None)
    system: SemiDiscreteSystem = field(repr=False, default=None)


def run_single(
    problem_name: str,
    scheme: SchemeConfig | str,
    cells: int,
    degree: int = 2,
    cfl: float = 0.5,
    t_final: float | None = None,
    steady_tol: float = 1e-8,
    max_steps: int = 1_000_000,
    stage_callback=None,
) -> RunRecord:
    problem = get_problem(problem_name)
    if isinstance(scheme, str):
        scheme = SchemeConfig.named(scheme)
    mesh = build_mesh(problem.dim, degree, cells, problem.bounds)
    system = SemiDiscreteSystem(mesh, problem.model, scheme, u_in_fn=problem.u_in)
    u0 = initialize(problem, mesh, system.ctx)
    tcfg = TimeLoopConfig(
        t_final=problem.t_final if t_final is None else t_final,
        cfl=cfl,
        steady=problem.steady,
        steady_tol=steady_tol,
        max_steps=max_steps,
    )
    t0 = time.perf_counter()
    result = system.run(u0, tcfg, stage_callback=stage_callback)
    runtime = time.perf_counter() - t0
    e1 = None
    if problem.exact is not None:
        e1 = l1_error(result.u, problem, mesh, system.ctx, result.t)
    mass0 = float(np.dot(system.ctx.lumped_mass, u0))
    mass1 = float(np.dot(system.ctx.lumped_mass, result.u))
    scale = max(abs(mass0), abs(mass1), 1e-300)
    balance = abs(mass1 - mass0 - result.net_inflow) / scale
    return RunRecord(
        problem=problem_name,
        scheme=scheme.name,
        degree=degree,
        cells=cells,
        num_nodes=mesh.num_nodes,
        e1=e1,
        umin=float(result.u.min()),
        umax=float(result.u.max()),
        stage_min=result.stage_min,
        stage_max=result.stage_max,
        runtime_s=runtime,
        mass_drift=abs(mass1 - mass0) / scale,
        mass_balance=balance,
        result=result,
        mesh=mesh,
        system=system,
    )


@dataclass
class ConvergenceReport:
    scheme: str
    degree: int
    rows: list  # (N_h, E1, EOC, umin, umax, runtime_s)


def run_convergence_study(
    problem_name: str,
    scheme: SchemeConfig | str,
    degree: int,
    nh_sequence=NH_SEQUENCE_1D,
    cfl: float = 0.5,
) -> ConvergenceReport:
    records = []
    for nh in nh_sequence:
        cells = cells_for_nh(nh, degree)
        records.append(
            run_single(problem_name, scheme, cells, degree=degree, cfl=cfl)
        )
    pairs = [(r.num_nodes, r.e1) for r in records]
    orders = eoc(pairs)
    name = scheme if isinstance(scheme, str) else scheme.name
    rows = [
        (r.num_nodes, r.e1, o, r.umin, r.umax, r.runtime_s)
        for r, o in zip(records, orders)
    ]
    return ConvergenceReport(scheme=name, degree=degree, rows=rows)


# ---------------------------------------------------------------------------
# report files
# ---------------------------------------------------------------------------

def write_errors_csv(path, reports: list[ConvergenceReport]):
    """Delimited convergence report; EOC blank on first rows.

    EOC is the standard log-ratio of errors versus mesh sizes
    h = 1/(N_h - 1); node counts are the realized lattice sizes.
    """
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scheme", "degree", "N_h", "E1", "EOC",
                         "umin", "umax", "runtime_s"])
        for rep in reports:
            for nh, e1, order, umin, umax, rt in rep.rows:
                writer.writerow([
                    rep.scheme, rep.degree, nh,
                    f"{e1:.6e}" if e1 is not None else "",
                    f"{order:.3f}" if order is not None else "",
                    f"{umin:.6e}", f"{umax:.6e}", f"{rt:.3f}",
                ])


def write_run_csv(path, record: RunRecord):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["N_h", "E1", "EOC", "umin", "umax", "runtime_s"])
        writer.writerow([
            record.num_nodes,
            f"{record.e1:.6e}" if record.e1 is not None else "",
            "",
            f"{record.umin:.6e}",
            f"{record.umax:.6e}",
            f"{record.runtime_s:.3f}",
        ])


def write_monitor_csv(path, result: RunResult):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "t", "dt", "umin", "umax", "mass"])
        for row in result.monitor:
            writer.writerow([row[0]] + [f"{v:.12e}" for v in row[1:]])


def write_field_outputs(outdir, record: RunRecord, problem: Problem | None = None):
    """VTK field plus a rendered figure beside it."""
    import os

    mesh = record.mesh
    u = record.result.u
    write_vtk_structured_points(
        os.path.join(outdir, "field.vtk"), mesh, {"u": u},
        title=f"{record.problem} {record.scheme}",
    )
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    if mesh.dim == 1:
        x = mesh.node_coords[:, 0]
        ax.plot(x, u, "o-", ms=2.5, lw=1.0, label="numerical")
        if problem is not None and problem.exact is not None:
            xs = np.linspace(mesh.bounds[0][0], mesh.bounds[0][1], 800)
            ax.plot(xs, problem.exact(xs[:, None], record.result.t), "k--",
                    lw=0.8, label="exact")
            ax.legend(frameon=False)
        ax.set_xlabel("x")
        ax.set_ylabel("u")
    else:
        grid = u.reshape(mesh.grid_shape())
        extent = (mesh.bounds[0][0], mesh.bounds[0][1],
                  mesh.bounds[1][0], mesh.bounds[1][1])
        im = ax.imshow(grid, origin="lower", extent=extent, cmap="viridis")
        fig.colorbar(im, ax=ax, shrink=0.85)
        ax.set_xlabel("x")
        ax.set_ylabel("y")
    ax.set_title(f"{record.problem}, {record.scheme}, N_h={record.num_nodes}")
    fig.tight_layout()
    fig.savefig(os.path.join(outdir, "field.png"), dpi=150)
    plt.close(fig)


def write_convergence_figure(path, reports: list[ConvergenceReport], title=""):
    fig, ax = plt.subplots(figsize=(5.5, 4.2))
    for rep in reports:
        nh = np.array([r[0] for r in rep.rows], dtype=float)
        e1 = np.array([r[1] for r in rep.rows], dtype=float)
        ax.loglog(nh - 1, e1, "o-", ms=3.5, lw=1.0, label=rep.scheme)
    ax.set_xlabel("$N_h - 1$")
    ax.set_ylabel("$L^1$ error")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(frameon=False)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
