"""Block lower-bidiagonal time-marching system and its classical solution.

With ``n`` steps the unknown is ``(phi_0, ..., phi_n)`` and

    [ I            ] [phi_0]   [phi(t0)]
    [-O   I        ] [phi_1] = [   0   ]
    [    -O   I    ] [ ... ]   [  ...  ]
    [        -O   I] [phi_n]   [   0   ]

Block forward substitution stands in for a quantum linear solver: it
produces the same solution vector without factorising anything.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse as sp

from .carleman import CarlemanOperator, project
from .errors import ConfigurationError, DivergenceError, SizeCapError

DEFAULT_SIZE_CAP = 20_000
MM_PRECISION = 17
STATE_MAGIC = b"QCLB"
STATE_VERSION = 1
_STATE_HEADER = struct.Struct("<4sIQQ")


@dataclass
class GlobalSystem:
    op: CarlemanOperator
    phi0: np.ndarray
    n_steps: int

    def __post_init__(self):
        if self.n_steps < 1:
            raise ConfigurationError(f"n_steps must be >= 1, got {self.n_steps}")
        self.phi0 = np.asarray(self.phi0, dtype=float)
        if self.phi0.shape != (self.op.dim,):
            raise ConfigurationError(f"phi0 has shape {self.phi0.shape}, expected ({self.op.dim},)")

    @property
    def block_dim(self) -> int:
        return self.op.dim

    @property
    def dim(self) -> int:
        return (self.n_steps + 1) * self.block_dim

    def rhs(self) -> np.ndarray:
        b = np.zeros(self.dim)
        b[: self.block_dim] = self.phi0
        return b

    def matvec(self, x: np.ndarray) -> np.ndarray:
        """``A x`` using the matrix-free transfer operator."""
        D = self.block_dim
        blocks = np.asarray(x, dtype=float).reshape(self.n_steps + 1, D)
        out = blocks.copy()
        for m in range(1, self.n_steps + 1):
            out[m] -= self.op.apply(blocks[m - 1])
        return out.reshape(-1)

    def tosparse(self, max_dim: int = DEFAULT_SIZE_CAP) -> sp.csr_matrix:
        if self.dim > max_dim:
            raise SizeCapError(f"global system dimension {self.dim} exceeds cap {max_dim}")
        O = self.op.tosparse(max_dim)
        return _bidiagonal(O, self.n_steps)


def _bidiagonal(block, n_steps: int) -> sp.csr_matrix:
    D = block.shape[0]
    sub = sp.diags(np.ones(n_steps), -1, shape=(n_steps + 1, n_steps + 1), format="csr")
    return (sp.identity((n_steps + 1) * D, format="csr") - sp.kron(sub, block, format="csr")).tocsr()


def assemble_global(op: CarlemanOperator, phi0, n_steps: int) -> GlobalSystem:
    return GlobalSystem(op, phi0, int(n_steps))


@dataclass
class Trajectory:
    """Per-step projected states, plus full Carleman states when kept."""

    N: int
    states: list = field(default_factory=list)
    phis: list | None = None

    def __len__(self):
        return len(self.states)


def solve_forward(system: GlobalSystem, keep: str = "projected", callback=None) -> Trajectory:
    """Forward-substitute the block rows: ``phi_{m+1} = O phi_m``.

    ``keep`` is ``"projected"`` (first block only), ``"full"`` or ``"none"``.
    ``callback(m, phi_m)`` is called for every block including ``m = 0``.
    """
    if keep not in ("projected", "full", "none"):
        raise ConfigurationError(f"unknown storage policy {keep!r}")
    N = system.op.N
    traj = Trajectory(N, phis=[] if keep == "full" else None)
    phi = system.phi0.copy()
    spare = np.empty_like(phi) if keep != "full" else None
    for m in range(system.n_steps + 1):
        if m > 0:
            if spare is None:
                phi = system.op.apply(phi)
            else:
                phi, spare = system.op.apply(phi, out=spare), phi
            if not np.all(np.isfinite(phi)):
                raise DivergenceError(m, "non-finite values in solution block")
        if keep != "none":
            traj.states.append(project(phi, N).copy())
        if keep == "full":
            traj.phis.append(phi.copy())
        if callback is not None:
            callback(m, phi)
    return traj


# ---------------------------------------------------------------------------
# export


def export_targets(op: CarlemanOperator, n_steps: int = 1) -> dict:
    """Lazily materialisable matrices keyed by export name."""
    N = op.N

    def order1_ohat():
        return op.block(1, 1)

    return {
        "F1": lambda: op.poly.F1,
        "F2": lambda: op.poly.F2,
        "F3": lambda: op.poly.F3,
        "S": lambda: op.S,
        "Ohat-order-1": order1_ohat,
        "A-order-1": lambda: _bidiagonal(order1_ohat(), n_steps),
        "Ohat": lambda: op.tosparse(np.inf),
        "_dims": {"Ohat": op.dim, "A-order-1": (n_steps + 1) * N, "Ohat-order-1": N},
    }


def export_matrix(matrix, path, comment: str = "") -> Path:
    """Write ``matrix`` as a general real coordinate Matrix Market file."""
    path = Path(path)
    scipy.io.mmwrite(path, sp.coo_matrix(matrix), comment=comment, field="real", precision=MM_PRECISION, symmetry="general")
    if path.suffix != ".mtx" and not path.exists():
        path = path.with_name(path.name + ".mtx")
    return path


def export_target(op: CarlemanOperator, target: str, path, n_steps: int = 1, max_dim: int = DEFAULT_SIZE_CAP) -> Path:
    targets = export_targets(op, n_steps)
    if target not in targets or target.startswith("_"):
        raise ConfigurationError(f"unknown export target {target!r}")
    dim = targets["_dims"].get(target, 0)
    if dim > max_dim:
        raise SizeCapError(f"{target} has dimension {dim}, above the export cap {max_dim}")
    return export_matrix(targets[target](), path, comment=target)


def import_matrix(path) -> sp.coo_matrix:
    return sp.coo_matrix(scipy.io.mmread(path))


# ---------------------------------------------------------------------------
# trajectory files


def write_state_dump(path, states) -> Path:
    """Binary dump: ``<4sIQQ`` header (magic, version, N, count) then float64 LE."""
    arr = np.ascontiguousarray(np.atleast_2d(np.asarray(states, dtype="<f8")))
    path = Path(path)
    with path.open("wb") as fh:
        fh.write(_STATE_HEADER.pack(STATE_MAGIC, STATE_VERSION, arr.shape[1], arr.shape[0]))
        fh.write(arr.tobytes())
    return path


def read_state_dump(path) -> np.ndarray:
    with Path(path).open("rb") as fh:
        magic, version, N, count = _STATE_HEADER.unpack(fh.read(_STATE_HEADER.size))
        if magic != STATE_MAGIC or version != STATE_VERSION:
            raise ValueError(f"{path} is not a version {STATE_VERSION} state dump")
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != N * count:
        raise ValueError(f"{path}: expected {N * count} values, found {data.size}")
    return data.reshape(count, N)
