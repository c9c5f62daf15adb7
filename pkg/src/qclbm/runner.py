"""Batch experiment driver behind the command line."""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import classical, observables
from .carleman import build_carleman, lift_state, phi_dimension_terms, project
from .classical import RelaxationParams, init_state, tau_from_reynolds
from .config import RunConfig
from .errors import SizeCapError
from .lattice import Lattice, make_lattice
from .linear_system import assemble_global, export_target, solve_forward, write_state_dump

log = logging.getLogger(__name__)

# input and output phi buffers of one step
_LIVE_PHI_COPIES = 2


def build_lattice(cfg: RunConfig) -> Lattice:
    return make_lattice(cfg.scheme, cfg.dims, cfg.solids, cfg.walls)


def relaxation_params(cfg: RunConfig) -> RelaxationParams:
    tau = cfg.tau
    if tau is None:
        tau = tau_from_reynolds(cfg.reynolds, cfg.u, cfg.dt, cfg.characteristic_length)
    return RelaxationParams(tau=tau, dt=cfg.dt, rho_bar=cfg.rho_bar)


def describe_dimension(N: int) -> str:
    terms = phi_dimension_terms(N)
    return "dim phi = " + " + ".join(f"{t:,}" for t in terms) + f" = {sum(terms):,}"


def check_memory(N: int, max_bytes: int) -> int:
    need = _LIVE_PHI_COPIES * 8 * sum(phi_dimension_terms(N))
    if need > max_bytes:
        raise SizeCapError(
            f"Carleman state needs about {need:,} bytes (cap {max_bytes:,}); "
            f"shrink the grid or raise --max-bytes. {describe_dimension(N)}"
        )
    return need


@dataclass
class Series:
    """Per-step observables of one trajectory."""

    mass: list = field(default_factory=list)
    velocity: list = field(default_factory=list)
    force: list = field(default_factory=list)
    states: list = field(default_factory=list)

    def record(self, f, lattice, cfg, prev=None, keep_state=False):
        self.mass.append(float(np.sum(f)))
        self.velocity.append(observables.total_fluid_velocity(f, lattice, cfg.velocity_measure, cfg.rho_bar))
        if lattice.grid.n_solid:
            self.force.append(observables.boundary_force(prev, f, lattice) if prev is not None else np.zeros(lattice.scheme.dim))
        if keep_state:
            self.states.append(np.array(f))


def run_classical(cfg: RunConfig, lattice: Lattice, params: RelaxationParams, keep_states=False) -> Series:
    series = Series()
    prev = [None]

    def record(n, f):
        series.record(f, lattice, cfg, prev[0], keep_states)
        prev[0] = f

    f0 = init_state(lattice, cfg.rho_bar, cfg.u)
    classical.simulate(f0, params, lattice, cfg.n_steps, callback=record)
    return series


def run_carleman(cfg: RunConfig, lattice: Lattice, params: RelaxationParams, keep_states=False) -> Series:
    log.info(describe_dimension(lattice.N))
    check_memory(lattice.N, cfg.max_bytes)
    op = build_carleman(lattice, params, cfg.streaming_lift, workers=cfg.workers)
    system = assemble_global(op, lift_state(init_state(lattice, cfg.rho_bar, cfg.u)), cfg.n_steps)
    series = Series()
    prev = [None]

    def record(m, phi):
        f = project(phi, lattice.N).copy()
        series.record(f, lattice, cfg, prev[0], keep_states)
        prev[0] = f

    solve_forward(system, keep="none", callback=record)
    return series


def _drag(series: Series, cfg: RunConfig, lattice: Lattice) -> list:
    area = observables.obstacle_cross_section(lattice)
    if not series.force or area == 0 or cfg.u <= 0:
        return []
    fx = np.array([F[0] for F in series.force])
    return observables.drag_coefficient(fx, cfg.rho_bar, cfg.u, area).tolist()


def _write_csv(path: Path, header, rows):
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _fmt(x):
    return repr(float(x))


def run(cfg: RunConfig, out_dir=None) -> int:
    """Execute ``cfg.mode`` and write its artifacts; returns a process exit status."""
    out = Path(out_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    lattice = build_lattice(cfg)
    params = relaxation_params(cfg)
    log.info("N = %d (%d fluid nodes x Q=%d), tau/dt = %.6g", lattice.N, lattice.n_fluid, lattice.Q, params.tau / params.dt)
    times = [n * cfg.dt for n in range(cfg.n_steps + 1)]

    if cfg.mode == "export":
        op = build_carleman(lattice, params, cfg.streaming_lift)
        for target in cfg.export_targets:
            path = export_target(op, target, out / f"{target}.mtx", n_steps=cfg.n_steps, max_dim=cfg.export_max_dim)
            log.info("wrote %s", path)
        return 0

    keep = cfg.write_states
    cl = qc = None
    if cfg.mode in ("classical", "compare", "drag"):
        cl = run_classical(cfg, lattice, params, keep)
    if cfg.mode in ("carleman", "compare", "drag"):
        qc = run_carleman(cfg, lattice, params, keep)

    if cfg.mode in ("classical", "carleman"):
        s = cl or qc
        rows = [(n, _fmt(t), _fmt(m), _fmt(v)) for n, (t, m, v) in enumerate(zip(times, s.mass, s.velocity))]
        _write_csv(out / f"{cfg.mode}.csv", ("step", "time", "total_mass", "total_fluid_velocity"), rows)
        if keep:
            _write_states(out, cfg.mode, s, times)
        return 0

    err = observables.percent_error(np.array(qc.velocity), np.array(cl.velocity))
    rows = [
        (n, _fmt(t), _fmt(cm), _fmt(cv), _fmt(qm), _fmt(qv), _fmt(e))
        for n, (t, cm, cv, qm, qv, e) in enumerate(zip(times, cl.mass, cl.velocity, qc.mass, qc.velocity, err))
    ]
    header = (
        "step",
        "time",
        "total_mass_classical",
        "total_fluid_velocity_classical",
        "total_mass_carleman",
        "total_fluid_velocity_carleman",
        "percent_error",
    )
    _write_csv(out / "compare.csv", header, rows)
    if keep:
        _write_states(out, "classical", cl, times)
        _write_states(out, "carleman", qc, times)

    summary = {
        "max_percent_error": float(np.max(err)),
        "mean_percent_error": float(np.mean(err)),
        "n_steps": cfg.n_steps,
        "phi_dimension": phi_dimension_terms(lattice.N),
    }
    cd_q, cd_c = _drag(qc, cfg, lattice), _drag(cl, cfg, lattice)
    if cd_q:
        summary["final_CD"] = cd_q[-1]
        summary["final_CD_classical"] = cd_c[-1]
    if cfg.mode == "drag":
        summary["CD_series"] = cd_q
        summary["CD_series_classical"] = cd_c
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    return 0


def _write_states(out: Path, name: str, series: Series, times):
    write_state_dump(out / f"{name}_states.bin", series.states)
    N = len(series.states[0])
    rows = [(n, _fmt(t), *map(_fmt, f)) for n, (t, f) in enumerate(zip(times, series.states))]
    _write_csv(out / f"{name}_trajectory.csv", ("step", "time", *(f"f{k}" for k in range(N))), rows)
