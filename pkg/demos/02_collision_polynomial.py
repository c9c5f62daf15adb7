"""
BGK collision as a cubic polynomial
===================================

Replacing 1/rho by 2/rho_bar - rho/rho_bar^2 turns the BGK collision into an
exact cubic in the populations. The sparse blocks F1, F2, F3 reproduce the
direct evaluation to roundoff, while the gap to the exact 1/rho collision
is the Taylor remainder.
"""
import numpy as np

from qclbm.carleman import expand_collision_polynomial, taylor_collision
from qclbm.classical import RelaxationParams, collide
from qclbm.lattice import PERIODIC, make_lattice

lattice = make_lattice("D2Q9", (1, 1), wall_rules=PERIODIC)
params = RelaxationParams(tau=0.8, dt=1.0)
poly = expand_collision_polynomial(lattice.scheme, params, lattice.index)
print("block shapes:", [F.shape for F in poly.blocks], "nonzeros:", [F.nnz for F in poly.blocks])

rng = np.random.default_rng(0)
for spread in (0.1, 0.01):
    f = lattice.scheme.w * (1 + spread * rng.uniform(-1, 1, 9))
    poly_rate = poly.evaluate(f)
    vs_taylor = np.abs(poly_rate - taylor_collision(f, params, lattice.scheme)).max()
    exact_rate = collide(f, params, lattice.scheme) - f
    vs_exact = np.abs(poly_rate - exact_rate).max()
    print(f"spread {spread:5.2f}: |poly - Taylor BGK| = {vs_taylor:.1e}, |poly - exact BGK| = {vs_exact:.1e}")

# the collision conserves mass and momentum block by block
e = lattice.scheme.e
for name, F in zip(("F1", "F2", "F3"), poly.blocks):
    dense = F.toarray()
    print(name, "column mass", np.abs(dense.sum(0)).max(), "column momentum", np.abs(e.T @ dense).max())
