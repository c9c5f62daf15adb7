"""
Time marching as one linear system
==================================

Stacking n steps gives a block lower-bidiagonal system A x = b. Forward
substitution solves it exactly, and the operators can be written out in
Matrix Market form for an external linear solver.
"""
import tempfile
from pathlib import Path

import numpy as np

from qclbm.carleman import build_carleman, lift_state
from qclbm.classical import RelaxationParams, init_state
from qclbm.lattice import PERIODIC, make_lattice
from qclbm.linear_system import assemble_global, export_target, import_matrix, solve_forward

lattice = make_lattice("D1Q3", (3,), solids=[(2,)], wall_rules=PERIODIC)
op = build_carleman(lattice, RelaxationParams(tau=0.9, dt=0.5))
phi0 = lift_state(init_state(lattice, 1.0, 0.05))
system = assemble_global(op, phi0, n_steps=20)
print(f"global system: {system.dim} unknowns in {system.n_steps + 1} blocks of {system.block_dim}")

traj = solve_forward(system, keep="full")
x = np.concatenate(traj.phis)
A = system.tosparse(max_dim=10**5)
print(f"residual |A x - b| = {np.abs(A @ x - system.rhs()).max():.1e}")

with tempfile.TemporaryDirectory() as tmp:
    for target in ("F1", "F2", "F3", "S", "Ohat"):
        path = export_target(op, target, Path(tmp) / f"{target}.mtx")
        M = import_matrix(path)
        print(f"{target:5s} {M.shape[0]:4d} x {M.shape[1]:<5d} nnz {M.nnz}")
