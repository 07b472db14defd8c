"""JSON run configuration.

Every block is checked against a fixed key set; unknown keys are an error.
Paths are resolved relative to the directory holding the config file.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

from .geometry import ConeBeamGeometry, RadialGrid
from .sim import PhantomSpec, default_phantom, uniform_cylinder
from .solver import SolverParams

PATH_KEYS = ("matrix", "phantom", "projection", "volume", "diagnostics", "report", "export_dir")


class ConfigError(ValueError):
    pass


def _strict(block: Any, allowed, name: str, required=()) -> dict:
    if not isinstance(block, dict):
        raise ConfigError(f"'{name}' must be an object")
    unknown = sorted(set(block) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) in '{name}': {', '.join(unknown)}")
    missing = [k for k in required if k not in block]
    if missing:
        raise ConfigError(f"missing key(s) in '{name}': {', '.join(missing)}")
    return block


def _fields(cls):
    return [f.name for f in dataclasses.fields(cls) if not f.name.startswith("_")]


@dataclass
class NoiseConfig:
    noise_variance: float = 0.0
    seed: int = 0


@dataclass
class RunConfig:
    geometry: ConeBeamGeometry
    grid: RadialGrid
    phantom: PhantomSpec
    solver: SolverParams
    noise: NoiseConfig
    paths: Dict[str, Path]
    window: Tuple[float, float] = (0.0, 1.0)
    phantom_block: dict = field(default_factory=dict)

    def path(self, key: str, override: Optional[str] = None) -> Path:
        if override is not None:
            return Path(override)
        if key not in self.paths:
            raise ConfigError(f"no '{key}' entry in the 'paths' block and none given on the command line")
        return self.paths[key]

    def provenance(self) -> dict:
        return {"grid": self.grid.to_dict(), "geometry": self.geometry.to_dict()}


def _phantom(block: dict, grid: RadialGrid) -> PhantomSpec:
    _strict(block, ("preset", "pieces"), "phantom")
    if "pieces" in block and "preset" in block:
        raise ConfigError("'phantom' takes either 'preset' or 'pieces', not both")
    if "pieces" in block:
        items = block["pieces"]
        for k, item in enumerate(items):
            _strict(item, ("r_in", "r_out", "z_min", "z_max", "value"), f"phantom.pieces[{k}]",
                    required=("r_in", "r_out", "z_min", "z_max", "value"))
        return PhantomSpec.from_list(items)
    preset = block.get("preset", "default")
    if preset == "default":
        return default_phantom()
    if preset == "uniform":
        return uniform_cylinder(grid)
    raise ConfigError(f"unknown phantom preset {preset!r}")


def parse_config(raw: dict, base_dir: Path = Path(".")) -> RunConfig:
    _strict(raw, ("geometry", "grid", "phantom", "solver", "noise", "paths", "export"), "config",
            required=("geometry", "grid"))
    try:
        geom_keys = _fields(ConeBeamGeometry)
        geom = ConeBeamGeometry(**_strict(raw["geometry"], geom_keys, "geometry", required=geom_keys))
        grid_keys = _fields(RadialGrid)
        grid = RadialGrid(**_strict(raw["grid"], grid_keys, "grid", required=grid_keys))
        geom.check_encloses(grid)
        phantom_block = raw.get("phantom", {})
        phantom = _phantom(phantom_block, grid)
        solver = SolverParams(**_strict(raw.get("solver", {}), _fields(SolverParams), "solver"))
        noise = NoiseConfig(**_strict(raw.get("noise", {}), _fields(NoiseConfig), "noise"))
        if noise.noise_variance < 0:
            raise ConfigError("noise_variance must be nonnegative")
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
    paths = {k: base_dir / v for k, v in _strict(raw.get("paths", {}), PATH_KEYS, "paths").items()}
    export = _strict(raw.get("export", {}), ("window",), "export")
    window = tuple(float(x) for x in export.get("window", (0.0, 1.0)))
    if len(window) != 2 or not window[1] > window[0]:
        raise ConfigError("export.window must be [lo, hi] with lo < hi")
    return RunConfig(geom, grid, phantom, solver, noise, paths, window, phantom_block)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return parse_config(raw, path.parent)
