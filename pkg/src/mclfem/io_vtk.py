"""Legacy ASCII VTK output: structured points on the control lattice."""

from __future__ import annotations

import numpy as np

from .mesh import Mesh


def write_vtk_structured_points(path, mesh: Mesh, fields: dict, title="mclfem"):
    """Write nodal scalar fields on the control lattice as STRUCTURED_POINTS."""
    nx = mesh.npts[0]
    ny = mesh.npts[1] if mesh.dim == 2 else 1
    sp = mesh.fine_spacing
    dx = sp[0]
    dy = sp[1] if mesh.dim == 2 else 1.0
    ox = mesh.bounds[0][0]
    oy = mesh.bounds[1][0] if mesh.dim == 2 else 0.0
    n = nx * ny
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(f"{title}\n")
        fh.write("ASCII\n")
        fh.write("DATASET STRUCTURED_POINTS\n")
        fh.write(f"DIMENSIONS {nx} {ny} 1\n")
        fh.write(f"ORIGIN {ox:.16g} {oy:.16g} 0\n")
        fh.write(f"SPACING {dx:.16g} {dy:.16g} 1\n")
        fh.write(f"POINT_DATA {n}\n")
        for name, values in fields.items():
            values = np.asarray(values).ravel()
            if values.size != n:
                raise ValueError(
                    f"field {name!r} has {values.size} values, expected {n}"
                )
            fh.write(f"SCALARS {name} double 1\n")
            fh.write("LOOKUP_TABLE default\n")
            for v in values:
                fh.write(f"{v:.16g}\n")
