"""Benchmark problem definitions: initial/inflow data and exact solutions.

Five problems: smooth 1D advection of a Gaussian, solid body rotation of
the slotted-cylinder/cone/hump triple, steady circular advection, the 2D
Burgers four-state Riemann problem, and the KPP rotating wave.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .flux_models import Burgers, FluxModel, KPP, LinearAdvection, velocity_field


@dataclass
class Problem:
    name: str
    dim: int
    bounds: tuple
    model: FluxModel
    t_final: float
    u0: Callable[[np.ndarray], np.ndarray]
    u_in: Callable[[np.ndarray, float], np.ndarray]
    exact: Optional[Callable[[np.ndarray, float], np.ndarray]] = None
    init_mode: str = "interp"      # interp | l2
    steady: bool = False
    invariant_range: Optional[tuple[float, float]] = None


# ---------------------------------------------------------------------------
# 1D advection of a Gaussian
# ---------------------------------------------------------------------------

def _gauss1d(x):
    return np.exp(-100.0 * (x - 0.25) ** 2)


def _advect1d() -> Problem:
    model = LinearAdvection(velocity_field("constant", (1.0,), dim=1))

    def u0(x):
        return _gauss1d(x[..., 0])

    def exact(x, t):
        return _gauss1d(x[..., 0] - t)

    return Problem(
        name="advect1d",
        dim=1,
        bounds=((0.0, 1.0),),
        model=model,
        t_final=0.5,
        u0=u0,
        u_in=lambda x, t: _gauss1d(x[..., 0] - t),
        exact=exact,
        init_mode="l2",
    )


# ---------------------------------------------------------------------------
# solid body rotation
# ---------------------------------------------------------------------------

def _sbr_initial(x):
    X = x[..., 0]
    Y = x[..., 1]
    u = np.zeros(X.shape)
    r_hump = np.sqrt((X - 0.25) ** 2 + (Y - 0.5) ** 2)
    hump = r_hump <= 0.15
    u = np.where(hump, 0.25 + 0.25 * np.cos(np.pi * np.minimum(r_hump, 0.15) / 0.15), u)
    r_cone = np.sqrt((X - 0.5) ** 2 + (Y - 0.25) ** 2)
    cone = r_cone <= 0.15
    u = np.where(cone, 1.0 - r_cone / 0.15, u)
    r_cyl = np.sqrt((X - 0.5) ** 2 + (Y - 0.75) ** 2)
    cyl = (r_cyl <= 0.15) & ((np.abs(X - 0.5) >= 0.025) | (Y >= 0.85))
    u = np.where(cyl, 1.0, u)
    return u


def _sbr() -> Problem:
    model = LinearAdvection(velocity_field("solid_body_rotation"))
    return Problem(
        name="sbr",
        dim=2,
        bounds=((0.0, 1.0), (0.0, 1.0)),
        model=model,
        t_final=1.0,
        u0=_sbr_initial,
        u_in=lambda x, t: 0.0,
        exact=lambda x, t: _sbr_initial(x),  # valid at whole revolutions
        invariant_range=(0.0, 1.0),
    )


# ---------------------------------------------------------------------------
# steady circular advection
# ---------------------------------------------------------------------------

def _circular_profile(x):
    r = np.sqrt(x[..., 0] ** 2 + x[..., 1] ** 2)
    u = np.zeros(r.shape)
    u = np.where((r >= 0.15) & (r <= 0.45), 1.0, u)
    band = (r >= 0.55) & (r <= 0.85)
    u = np.where(band, np.cos(10.0 * np.pi * (r - 0.7) / 3.0) ** 2, u)
    return u


def _circular() -> Problem:
    model = LinearAdvection(velocity_field("circular"))
    return Problem(
        name="circular",
        dim=2,
        bounds=((0.0, 1.0), (0.0, 1.0)),
        model=model,
        t_final=np.inf,
        u0=_circular_profile,
        u_in=lambda x, t: _circular_profile(x),
        exact=lambda x, t: _circular_profile(x),
        steady=True,
        invariant_range=(0.0, 1.0),
    )


# ---------------------------------------------------------------------------
# 2D Burgers four-state Riemann problem
# ---------------------------------------------------------------------------

def _burgers_initial(x):
    X = x[..., 0]
    Y = x[..., 1]
    u = np.where(X < 0.5, np.where(Y > 0.5, -0.2, 0.5), np.where(Y > 0.5, -1.0, 0.8))
    return u


def burgers_exact(x: np.ndarray, t: float) -> np.ndarray:
    """Entropy solution of u_t + (u^2/2)_x + (u^2/2)_y = 0 with four-state
    data (-0.2 NW, -1 NE, 0.5 SW, 0.8 SE around (0.5, 0.5)).

    The equation decouples along diagonals x - y = const into 1D Burgers
    problems in the coordinate eta = (x+y)/2, each with three-state data,
    solved in closed form including the shock/rarefaction interactions.
    """
    x = np.asarray(x, dtype=float)
    X = x[..., 0]
    Y = x[..., 1]
    if t <= 1e-14:
        return _burgers_initial(x)
    c = X - Y
    eta = 0.5 * (X + Y)
    u = np.empty(np.broadcast(X, Y).shape)

    # lower-right half (c >= 0): states (0.5, 0.8, -1.0) along eta with a
    # rarefaction 0.5->0.8 at eta1 and a shock 0.8->-1 at eta2
    cp = np.maximum(c, 0.0)
    eta1 = 0.5 - 0.5 * cp
    eta2 = 0.5 + 0.5 * cp
    t_hit = cp / 0.9          # rarefaction head reaches the shock
    t_gone = 1.6 * cp         # fan fully absorbed
    # shock position: plain, fan-eating, and merged phases
    s_plain = eta2 - 0.1 * t
    s_eat = eta1 + 2.0 * np.sqrt(np.maximum(0.9 * cp * t, 0.0)) - t
    s_merged = eta1 + 1.2 * cp - 0.25 * t
    shock = np.where(t < t_hit, s_plain, np.where(t < t_gone, s_eat, s_merged))
    fan = np.clip((eta - eta1) / t, 0.5, 0.8)
    u_right = np.where(eta >= shock, -1.0, fan)

    # upper-left half (c < 0): states (0.5, -0.2, -1.0), shocks at
    # 0.15 and -0.6 that merge into a 0.5->-1 shock of speed -0.25
    cm = np.maximum(-c, 0.0)
    eta1m = 0.5 - 0.5 * cm    # crossing of y = 0.5
    eta2m = 0.5 + 0.5 * cm    # crossing of x = 0.5
    t_merge = cm / 0.75
    s1 = eta1m + 0.15 * t
    s2 = eta2m - 0.6 * t
    s_post = eta1m + 0.15 * t_merge - 0.25 * (t - t_merge)
    pre = t < t_merge
    u_left = np.where(
        pre,
        np.where(eta < s1, 0.5, np.where(eta < s2, -0.2, -1.0)),
        np.where(eta < s_post, 0.5, -1.0),
    )

    u = np.where(c >= 0.0, u_right, u_left)
    return u


def _burgers2d() -> Problem:
    model = Burgers((1.0, 1.0))
    return Problem(
        name="burgers2d",
        dim=2,
        bounds=((0.0, 1.0), (0.0, 1.0)),
        model=model,
        t_final=0.5,
        u0=_burgers_initial,
        u_in=lambda x, t: burgers_exact(x, t),
        exact=burgers_exact,
        invariant_range=(-1.0, 0.8),
    )


# ---------------------------------------------------------------------------
# KPP rotating wave
# ---------------------------------------------------------------------------

def _kpp_initial(x):
    r = np.sqrt(x[..., 0] ** 2 + x[..., 1] ** 2)
    return np.where(r <= 1.0, 3.5 * np.pi, 0.25 * np.pi)


def _kpp() -> Problem:
    return Problem(
        name="kpp",
        dim=2,
        bounds=((-2.0, 2.0), (-2.5, 1.5)),
        model=KPP(),
        t_final=1.0,
        u0=_kpp_initial,
        u_in=lambda x, t: 0.25 * np.pi,
        exact=None,
        invariant_range=(0.25 * np.pi, 3.5 * np.pi),
    )


_REGISTRY = {
    "advect1d": _advect1d,
    "sbr": _sbr,
    "circular": _circular,
    "burgers2d": _burgers2d,
    "kpp": _kpp,
}


def get_problem(name: str) -> Problem:
    if name not in _REGISTRY:
        raise ValueError(f"unknown problem {name!r}; choose from {sorted(_REGISTRY)}")
    return _REGISTRY[name]()
