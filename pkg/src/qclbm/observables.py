"""Comparison metrics and momentum-exchange read-out on the obstacle."""
from __future__ import annotations

import warnings

import numpy as np

from .classical import macroscopics
from .errors import ConfigurationError
from .lattice import BOUNCE_BACK, Lattice

PERCENT_ERROR_GUARD = 1e-300
VELOCITY_MEASURES = ("speed-sum", "momentum")


def total_fluid_velocity(f, lattice: Lattice, measure: str = "speed-sum", rho_bar: float = 1.0) -> float:
    """Sum over fluid nodes of ``|u(x)|``.

    ``measure="momentum"`` instead returns ``|sum_x rho u| / rho_bar``.
    """
    rho, u = macroscopics(f, lattice.scheme)
    if measure == "speed-sum":
        return float(np.linalg.norm(u, axis=1).sum())
    if measure == "momentum":
        return float(np.linalg.norm((rho[:, None] * u).sum(axis=0)) / rho_bar)
    raise ConfigurationError(f"unknown velocity measure {measure!r}; expected one of {VELOCITY_MEASURES}")


def percent_error(v_q, v_c):
    return 100.0 * np.abs(np.asarray(v_q) - v_c) / np.maximum(v_c, PERCENT_ERROR_GUARD)


def solid_links(lattice: Lattice, include_walls: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Fluid-to-solid links as ``(fluid node, direction)`` pairs.

    A link ``(x, i)`` is listed when ``x + e_i`` is a solid node. With
    ``include_walls`` links that leave the grid through a bounce-back wall
    are included too.
    """
    grid, scheme = lattice.grid, lattice.scheme
    nodes, dirs = [], []
    for n, coord in enumerate(lattice.index.coords):
        for i in range(1, scheme.Q):
            down = coord + scheme.e[i]
            hit = False
            for axis, (c, d) in enumerate(zip(down, grid.dims)):
                if 0 <= c < d:
                    continue
                if grid.wall_rules[axis] == BOUNCE_BACK:
                    hit = include_walls
                    break
                down[axis] = c % d
            else:
                hit = bool(grid.solid[tuple(down)])
            if hit:
                nodes.append(n)
                dirs.append(i)
    return np.array(nodes, dtype=np.int64), np.array(dirs, dtype=np.int64)


def boundary_force(f_before, f_after, lattice: Lattice, include_walls: bool = False) -> np.ndarray:
    """Momentum-exchange force on the solid over one step.

    ``F = sum_links (f_i(x, t) + f_opp(i)(x, t + dt)) e_i`` over links from a
    fluid node ``x`` to a solid neighbour ``x + e_i``: the population heading
    into the solid plus the one it comes back as.
    """
    scheme = lattice.scheme
    nodes, dirs = solid_links(lattice, include_walls)
    if len(nodes) == 0:
        warnings.warn("no fluid-solid links; force is zero", RuntimeWarning, stacklevel=2)
        return np.zeros(scheme.dim)
    before = np.asarray(f_before).reshape(-1, scheme.Q)
    after = np.asarray(f_after).reshape(-1, scheme.Q)
    weight = before[nodes, dirs] + after[nodes, scheme.opp[dirs]]
    return weight @ scheme.e[dirs].astype(float)


def drag_coefficient(force_x, rho, u_ref, area):
    """``C_D = 2 F_x / (rho U^2 S)``."""
    if u_ref <= 0 or area <= 0 or rho <= 0:
        raise ConfigurationError("reference density, speed and cross-section must be positive")
    return 2.0 * np.asarray(force_x) / (rho * u_ref**2 * area)


def obstacle_cross_section(lattice: Lattice) -> int:
    """Extent of the solid nodes across the flow (along y), in nodes."""
    solid = np.argwhere(lattice.grid.solid)
    if len(solid) == 0:
        return 0
    if solid.shape[1] == 1:
        return 1
    return int(len(np.unique(solid[:, 1])))
