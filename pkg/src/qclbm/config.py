"""Run configuration: JSON ingestion, validation and presets."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema

from .errors import ConfigurationError

MODES = ("classical", "carleman", "compare", "export", "drag")
STORAGE = ("projected", "full", "none")
DEFAULT_MAX_BYTES = 4 * 1024**3


def load_schema() -> dict:
    return json.loads(resources.files("qclbm").joinpath("config_schema.json").read_text())


@dataclass
class RunConfig:
    scheme: str
    dims: tuple[int, ...]
    dt: float
    n_steps: int
    tau: float | None = None
    reynolds: float | None = None
    t_end: float | None = None
    solids: list[tuple[int, ...]] = field(default_factory=list)
    walls: tuple[str, ...] | str = "periodic"
    rho_bar: float = 1.0
    u: float = 0.0
    characteristic_length: float = 1.0
    mode: str = "compare"
    output_dir: str = "qclbm-out"
    storage: str = "projected"
    write_states: bool = False
    streaming_lift: str = "exact"
    velocity_measure: str = "speed-sum"
    export_targets: tuple[str, ...] = ("F1", "F2", "F3", "S")
    export_max_dim: int = 20_000
    max_bytes: int = DEFAULT_MAX_BYTES
    workers: int = 1

    def to_dict(self) -> dict:
        d = asdict(self)
        d["dims"] = list(self.dims)
        d["solids"] = [list(s) for s in self.solids]
        d["export_targets"] = list(self.export_targets)
        if not isinstance(self.walls, str):
            d["walls"] = list(self.walls)
        return d


def parse_config(source) -> RunConfig:
    """Validate a config given as a path, JSON text or an already-loaded dict."""
    if isinstance(source, dict):
        raw = dict(source)
    else:
        path = Path(source)
        try:
            raw = json.loads(path.read_text())
        except FileNotFoundError:
            raise ConfigurationError(f"config file {path} not found") from None
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"{path} is not valid JSON: {exc}") from None
    return config_from_dict(raw)


def config_from_dict(raw: dict) -> RunConfig:
    schema = load_schema()
    unknown = sorted(set(raw) - set(schema["properties"]))
    if unknown:
        raise ConfigurationError(f"unknown config key(s): {', '.join(unknown)}")
    for a, b in (("tau", "reynolds"), ("t_end", "n_steps")):
        if a in raw and b in raw:
            raise ConfigurationError(f"config sets both {a!r} and {b!r}; give exactly one")
        if a not in raw and b not in raw:
            raise ConfigurationError(f"config needs one of {a!r} or {b!r}")
    try:
        jsonschema.validate(raw, schema)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigurationError(f"invalid config at {where}: {exc.message}") from None

    data = dict(raw)
    if "reynolds" in data and data.get("u", 0.0) <= 0:
        raise ConfigurationError("'reynolds' needs a positive inflow speed 'u'")
    if "t_end" in data:
        data["n_steps"] = int(round(data["t_end"] / data["dt"]))
        if data["n_steps"] < 1:
            raise ConfigurationError("t_end is shorter than one time step")
    data["dims"] = tuple(data["dims"])
    data["solids"] = [tuple(s) for s in data.get("solids", [])]
    if isinstance(data.get("walls"), list):
        data["walls"] = tuple(data["walls"])
    if "export_targets" in data:
        data["export_targets"] = tuple(data["export_targets"])
    if abs(data.get("u", 0.0)) >= 1:
        raise ConfigurationError("'u' must be below one lattice unit per step")
    return RunConfig(**data)


PRESETS = {
    # 10 x 5 grid, Re 50, 5 s at dt = 2.5e-4, square obstacle at (2, 2)
    "obstacle-10x5": {
        "scheme": "D2Q9",
        "dims": [10, 5],
        "solids": [[2, 2]],
        "walls": ["periodic", "bounce-back"],
        "rho_bar": 1.0,
        "u": 0.0001,
        "reynolds": 50,
        "dt": 0.00025,
        "t_end": 5.0,
        "mode": "compare",
    },
    "obstacle-5x3": {
        "scheme": "D2Q9",
        "dims": [5, 3],
        "solids": [[2, 1]],
        "walls": ["periodic", "bounce-back"],
        "rho_bar": 1.0,
        "u": 0.0001,
        "reynolds": 50,
        "dt": 0.00025,
        "n_steps": 2000,
        "mode": "compare",
    },
}


def preset(name: str) -> dict:
    if name not in PRESETS:
        raise ConfigurationError(f"unknown preset {name!r}; expected one of {sorted(PRESETS)}")
    return json.loads(json.dumps(PRESETS[name]))

