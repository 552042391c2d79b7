"""Physical flux functions, wavespeed bounds, and entropy pairs.

Three model families cover the benchmark set: linear advection with a
(possibly space-dependent) velocity field, the 2D Burgers flux v*u^2/2,
and the nonconvex KPP flux (sin u, cos u).  The entropy pair is
E(u) = u^2/2 with F(u) = int_0^u z f'(z) dz in closed form per model.

All methods are vectorized: u has any shape, x has shape u.shape + (dim,),
flux-like results have shape u.shape + (dim,).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class VelocityField:
    """Named velocity field v(x) for linear advection."""

    name: str
    dim: int
    fn: Callable[[np.ndarray], np.ndarray]

    def at(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.fn(x)


def velocity_field(name: str, value=None, dim: int = 2) -> VelocityField:
    """Built-in velocity fields.

    constant: v = value (defaults to ones)
    solid_body_rotation: v = 2*pi*(0.5 - y, x - 0.5)
    circular: v = (y, -x)
    """
    if name == "constant":
        vec = np.ones(dim) if value is None else np.asarray(value, dtype=float)
        if vec.shape != (dim,):
            raise ValueError(f"constant velocity must have dim {dim}")

        def fn(x):
            return np.broadcast_to(vec, x.shape).copy()

        return VelocityField("constant", dim, fn)
    if name == "solid_body_rotation":
        def fn(x):
            v = np.empty_like(x)
            v[..., 0] = 2.0 * np.pi * (0.5 - x[..., 1])
            v[..., 1] = 2.0 * np.pi * (x[..., 0] - 0.5)
            return v

        return VelocityField("solid_body_rotation", 2, fn)
    if name == "circular":
        def fn(x):
            v = np.empty_like(x)
            v[..., 0] = x[..., 1]
            v[..., 1] = -x[..., 0]
            return v

        return VelocityField("circular", 2, fn)
    raise ValueError(f"unknown velocity field {name!r}")


class FluxModel:
    """Common interface; subclasses provide the physics."""

    dim: int
    is_linear = False

    def flux(self, u, x=None) -> np.ndarray:
        raise NotImplementedError

    def fprime(self, u, x=None) -> np.ndarray:
        raise NotImplementedError

    def entropy(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return 0.5 * u * u

    def entropy_prime(self, u) -> np.ndarray:
        return np.asarray(u, dtype=float)

    def entropy_flux(self, u, x=None) -> np.ndarray:
        raise NotImplementedError

    def gms_lambda(self, ui, uj, n, x=None) -> np.ndarray:
        """Upper bound on |n . f'(w ui + (1-w) uj)| over w in [0,1]."""
        raise NotImplementedError


class LinearAdvection(FluxModel):
    """f(x, u) = v(x) u; affine in u at fixed position."""

    is_linear = True

    def __init__(self, velocity: VelocityField):
        self.velocity = velocity
        self.dim = velocity.dim

    def flux(self, u, x=None):
        u = np.asarray(u, dtype=float)
        return self.velocity.at(x) * u[..., None]

    def fprime(self, u, x=None):
        u = np.asarray(u, dtype=float)
        v = self.velocity.at(x)
        return np.broadcast_to(v, u.shape + (self.dim,)).copy()

    def entropy_flux(self, u, x=None):
        u = np.asarray(u, dtype=float)
        return self.velocity.at(x) * (0.5 * u * u)[..., None]

    def gms_lambda(self, ui, uj, n, x=None):
        if x is None:
            raise ValueError("linear advection wavespeed needs a position")
        v = self.velocity.at(x)
        return np.abs(np.sum(np.asarray(n, dtype=float) * v, axis=-1))


class Burgers(FluxModel):
    """f(u) = v u^2/2 with a constant direction vector v."""

    def __init__(self, direction=(1.0, 1.0)):
        self.v = np.asarray(direction, dtype=float)
        self.dim = len(self.v)

    def flux(self, u, x=None):
        u = np.asarray(u, dtype=float)
        return self.v * (0.5 * u * u)[..., None]

    def fprime(self, u, x=None):
        u = np.asarray(u, dtype=float)
        return self.v * u[..., None]

    def entropy_flux(self, u, x=None):
        u = np.asarray(u, dtype=float)
        return self.v * (u**3 / 3.0)[..., None]

    def gms_lambda(self, ui, uj, n, x=None):
        # |n.f'| = |n.v| |u| is affine in u, so the maximum over the segment
        # sits at an endpoint
        ui = np.asarray(ui, dtype=float)
        uj = np.asarray(uj, dtype=float)
        nv = np.abs(np.sum(np.asarray(n, dtype=float) * self.v, axis=-1))
        return nv * np.maximum(np.abs(ui), np.abs(uj))


class KPP(FluxModel):
    """Nonconvex rotating-wave flux f(u) = (sin u, cos u)."""

    dim = 2

    def flux(self, u, x=None):
        u = np.asarray(u, dtype=float)
        return np.stack([np.sin(u), np.cos(u)], axis=-1)

    def fprime(self, u, x=None):
        u = np.asarray(u, dtype=float)
        return np.stack([np.cos(u), -np.sin(u)], axis=-1)

    def entropy_flux(self, u, x=None):
        u = np.asarray(u, dtype=float)
        return np.stack(
            [u * np.sin(u) + np.cos(u) - 1.0, u * np.cos(u) - np.sin(u)],
            axis=-1,
        )

    def gms_lambda(self, ui, uj, n, x=None):
        # |f'| = 1 everywhere; a cheap global bound
        shape = np.broadcast(np.asarray(ui), np.asarray(uj)).shape
        return np.ones(shape)
