"""
Drag on the obstacle from both solvers
======================================

The momentum-exchange force on the solid node is read from consecutive
states and turned into a drag coefficient. The Carleman trajectory and the
classical one give the same history.
"""
import numpy as np

from qclbm.config import config_from_dict, preset
from qclbm.observables import drag_coefficient, obstacle_cross_section, percent_error
from qclbm.runner import build_lattice, relaxation_params, run_carleman, run_classical

raw = preset("obstacle-5x3")
raw["n_steps"] = 200
cfg = config_from_dict(raw)
lattice = build_lattice(cfg)
params = relaxation_params(cfg)

classical = run_classical(cfg, lattice, params)
carleman = run_carleman(cfg, lattice, params)

err = percent_error(np.array(carleman.velocity), np.array(classical.velocity))
print(f"max percent error of total fluid velocity: {err.max():.2e}")

area = obstacle_cross_section(lattice)
for n in (1, 50, 100, 200):
    cd_q = drag_coefficient(carleman.force[n][0], cfg.rho_bar, cfg.u, area)
    cd_c = drag_coefficient(classical.force[n][0], cfg.rho_bar, cfg.u, area)
    print(f"step {n:4d}  C_D carleman {cd_q:12.4f}  classical {cd_c:12.4f}")
