"""Reference nonlinear lattice Boltzmann solver (BGK collision, exact 1/rho).

One time step streams first and then relaxes the streamed populations toward
equilibrium, the same ordering the Carleman transfer operator uses.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DegenerateStateError, DivergenceError
from .lattice import Lattice, StreamingPermutation, VelocityScheme

CS2 = 1.0 / 3.0


@dataclass(frozen=True)
class RelaxationParams:
    tau: float
    dt: float
    rho_bar: float = 1.0

    def __post_init__(self):
        for name in ("tau", "dt", "rho_bar"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise ConfigurationError(f"{name} must be positive, got {value}")
        if self.tau / self.dt <= 0.5:
            warnings.warn(f"tau/dt = {self.tau / self.dt:.6g} <= 1/2; BGK is unstable", RuntimeWarning, stacklevel=2)

    @property
    def omega(self) -> float:
        """Relaxation fraction applied per step, ``dt / tau``."""
        return self.dt / self.tau


def tau_from_reynolds(reynolds: float, u: float, dt: float, length: float = 1.0) -> float:
    """Relaxation time giving Reynolds number ``reynolds`` for inflow ``u``.

    ``u`` is in lattice units per step, so the inflow speed per unit time is
    ``u / dt``. The viscosity ``U L / Re`` is matched to the BGK viscosity
    ``cs2 * (tau/dt - 1/2) * dt``; ``length`` is the obstacle side in nodes.
    """
    if reynolds <= 0 or u <= 0 or dt <= 0 or length <= 0:
        raise ConfigurationError("reynolds, u, dt and length must be positive")
    nu = (u / dt) * length / reynolds
    return dt * (0.5 + nu / (CS2 * dt))


@dataclass
class FluidState:
    f: np.ndarray
    step: int = 0
    t: float = 0.0


def equilibrium(rho, u, scheme: VelocityScheme) -> np.ndarray:
    """BGK equilibrium for one node or a batch of nodes.

    ``rho`` has shape ``(...)`` and ``u`` shape ``(..., dim)``; the result has
    shape ``(..., Q)``.
    """
    rho = np.asarray(rho, dtype=float)
    u = np.asarray(u, dtype=float)
    if np.any(rho <= 0):
        raise DegenerateStateError("equilibrium needs positive density")
    eu = u @ scheme.e.T
    uu = np.sum(u * u, axis=-1)[..., None]
    return scheme.w * rho[..., None] * (1.0 + 3.0 * eu + 4.5 * eu**2 - 1.5 * uu)


def macroscopics(f: np.ndarray, scheme: VelocityScheme) -> tuple[np.ndarray, np.ndarray]:
    """Per-node density ``(n_fluid,)`` and velocity ``(n_fluid, dim)``."""
    fn = np.asarray(f).reshape(-1, scheme.Q)
    rho = fn.sum(axis=1)
    if np.any(rho <= 0) or not np.all(np.isfinite(rho)):
        bad = int(np.flatnonzero(~(rho > 0))[0])
        raise DegenerateStateError(f"non-positive density {rho[bad]} at fluid node {bad}")
    u = (fn @ scheme.e) / rho[:, None]
    return rho, u


def collide(f: np.ndarray, params: RelaxationParams, scheme: VelocityScheme) -> np.ndarray:
    rho, u = macroscopics(f, scheme)
    fn = np.asarray(f).reshape(-1, scheme.Q)
    feq = equilibrium(rho, u, scheme)
    return (fn - params.omega * (fn - feq)).reshape(-1)


def stream(f: np.ndarray, perm: StreamingPermutation) -> np.ndarray:
    return np.asarray(f)[perm.src]


def step(f: np.ndarray, params: RelaxationParams, perm: StreamingPermutation, scheme: VelocityScheme) -> np.ndarray:
    return collide(stream(f, perm), params, scheme)


def init_state(lattice: Lattice, rho_bar: float, u: float) -> np.ndarray:
    """Uniform start with momentum ``rho_bar * u`` along +x.

    Every fluid node gets ``rho_bar * w`` with ``u/2`` moved from the -x
    population to the +x population (times ``rho_bar``).
    """
    if abs(u) >= 1:
        raise ConfigurationError(f"|u| must be below one lattice unit per step, got {u}")
    scheme = lattice.scheme
    x_axis = np.zeros(scheme.dim, dtype=np.int64)
    x_axis[0] = 1
    plus = int(np.flatnonzero((scheme.e == x_axis).all(axis=1))[0])
    node = scheme.w.copy()
    node[plus] += u / 2
    node[scheme.opp[plus]] -= u / 2
    return np.tile(rho_bar * node, lattice.n_fluid)


def simulate(f0, params: RelaxationParams, lattice: Lattice, n_steps: int, callback=None) -> np.ndarray:
    """Advance ``n_steps`` classical steps; ``callback(step, f)`` sees every state."""
    f = np.array(f0, dtype=float)
    if callback is not None:
        callback(0, f)
    for n in range(1, n_steps + 1):
        f = step(f, params, lattice.stream, lattice.scheme)
        if not np.all(np.isfinite(f)):
            raise DivergenceError(n)
        if callback is not None:
            callback(n, f)
    return f
