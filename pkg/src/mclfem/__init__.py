"""Continuous Bernstein finite element solver for scalar conservation laws.

Compact-stencil invariant-domain-preserving low-order transport operator plus
monolithic subcell convex flux limiting of a (stabilized) Galerkin target, on
structured 1D/2D box meshes with Bernstein elements of degree 1 and 2.
"""

from .reference_element import BernsteinBasis, reference_element
from .mesh import Mesh, build_mesh
from .flux_models import LinearAdvection, Burgers, KPP, velocity_field
from .time_integration import SchemeConfig, TimeLoopConfig, SemiDiscreteSystem
from .problems import get_problem
from .harness import run_single, run_convergence_study

__all__ = [
    "BernsteinBasis",
    "reference_element",
    "Mesh",
    "build_mesh",
    "LinearAdvection",
    "Burgers",
    "KPP",
    "velocity_field",
    "SchemeConfig",
    "TimeLoopConfig",
    "SemiDiscreteSystem",
    "get_problem",
    "run_single",
    "run_convergence_study",
]
