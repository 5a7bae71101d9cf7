from __future__ import annotations

from dataclasses import dataclass, field
import json
from pathlib import Path
import re
from typing import Any

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .elements import CylMethod
from .errors import ConfigError, MaterialError
from .export import parse_formats
from .mesh import SURFACE_TAGS, CylinderGeometry, Geometry, ReceiverGeometry
from .receiver import SurfaceCondition, SurfacePhysics


SHAPES = ("receiver", "cylinder")
DEFAULT_NR = 32
DEFAULT_NZ = 32
DEFAULT_METHOD = CylMethod.EXACT_INTEGRAL.value
DEFAULT_TOLERANCE = 1e-9
DEFAULT_PREFIX = "receiver"
DEFAULT_PRECISION = 9
CYLINDER_TAGS = ("A", "B", "D", "E")

_SECTIONS = {"geometry", "mesh", "material", "surface", "solver", "output"}
_GEOMETRY_KEYS = {
    "receiver": ("r_min", "r_inner", "r_outer", "bottom_thickness", "wall_height"),
    "cylinder": ("r_inner", "r_outer", "height"),
}
# physical key -> (generic field, required)
_SURFACE_SCHEMAS: dict[str, dict[str, tuple[str, bool]]] = {
    "A": {"alpha_b": ("h", True), "t_cavity": ("t_inf", True), "q": ("q", False)},
    "C": {"alpha_b": ("h", True), "t_cavity": ("t_inf", True), "q": ("q", False)},
    "D": {"k_d": ("h", True), "t_ambient": ("t_inf", True)},
    "E": {"k_w": ("h", True), "t_gas": ("t_inf", True)},
    "B": {"h": ("h", False), "t_inf": ("t_inf", True), "q": ("q", False)},
}
_GENERIC_SCHEMA = {"h": ("h", True), "t_inf": ("t_inf", True), "q": ("q", False)}


@dataclass(slots=True)
class GeometryConfig:
    shape: str = "receiver"
    values: dict[str, float] = field(default_factory=dict)

    def to_geometry(self) -> Geometry:
        if self.shape == "cylinder":
            return CylinderGeometry(**self.values)
        return ReceiverGeometry(**self.values)


@dataclass(slots=True)
class MeshConfig:
    nr: int = DEFAULT_NR
    nz: int = DEFAULT_NZ


@dataclass(slots=True)
class MaterialConfig:
    conductivity: float = 0.0
    plate_conductivity: float | None = None
    wall_conductivity: float | None = None

    def table(self) -> list[float]:
        plate = self.plate_conductivity if self.plate_conductivity is not None else self.conductivity
        wall = self.wall_conductivity if self.wall_conductivity is not None else self.conductivity
        return [plate, wall]


@dataclass(slots=True)
class SolverConfig:
    method: str = DEFAULT_METHOD
    residual_tolerance: float = DEFAULT_TOLERANCE


@dataclass(slots=True)
class OutputConfig:
    formats: list[str] = field(default_factory=lambda: ["csv"])
    prefix: str = DEFAULT_PREFIX
    precision: int = DEFAULT_PRECISION


@dataclass(slots=True)
class RunConfig:
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    mesh: MeshConfig = field(default_factory=MeshConfig)
    material: MaterialConfig = field(default_factory=MaterialConfig)
    surfaces: dict[str, SurfaceCondition] = field(default_factory=dict)
    solver: SolverConfig = field(default_factory=SolverConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def physics(self) -> SurfacePhysics:
        return SurfacePhysics(surfaces=dict(self.surfaces))


def _load_yaml_if_available(raw_text: str) -> dict[str, Any]:
    try:
        import yaml  # type: ignore
    except ImportError as ex:
        raise ConfigError(
            "YAML config requires PyYAML. Install with: pip install pyyaml"
        ) from ex
    try:
        parsed = yaml.safe_load(raw_text)
    except yaml.YAMLError as ex:
        raise ConfigError(f"invalid YAML config: {ex}") from ex
    if not isinstance(parsed, dict):
        raise ConfigError("YAML config root must be an object")
    return parsed


def _load_json_tolerant(raw_text: str) -> dict[str, Any]:
    try:
        parsed = json.loads(raw_text)
    except json.JSONDecodeError:
        sanitized = re.sub(r",\s*(\]|\})", r"\1", raw_text)
        try:
            parsed = json.loads(sanitized)
        except json.JSONDecodeError as ex:
            raise ConfigError(f"invalid JSON config: {ex}") from ex
    if not isinstance(parsed, dict):
        raise ConfigError("JSON config root must be an object")
    return parsed


def _load_toml(raw_text: str) -> dict[str, Any]:
    try:
        return tomllib.loads(raw_text)
    except tomllib.TOMLDecodeError as ex:
        raise ConfigError(f"invalid TOML config: {ex}") from ex


def load_config(path: Path) -> RunConfig:
    try:
        raw_text = path.read_text(encoding="utf-8")
    except OSError as ex:
        raise ConfigError(f"cannot read config {path}: {ex}") from ex
    suffix = path.suffix.lower()
    if suffix == ".toml":
        parsed = _load_toml(raw_text)
    elif suffix == ".json":
        parsed = _load_json_tolerant(raw_text)
    elif suffix in {".yaml", ".yml"}:
        parsed = _load_yaml_if_available(raw_text)
    else:
        raise ConfigError("config must be .toml/.json/.yaml/.yml")
    return parse_config(parsed)


def _section(data: dict[str, Any], name: str, required: bool = True) -> dict[str, Any]:
    value = data.get(name)
    if value is None:
        if required:
            raise ConfigError(f"missing required section '{name}'")
        return {}
    if not isinstance(value, dict):
        raise ConfigError(f"'{name}' must be a table")
    return value


def _reject_unknown(section: dict[str, Any], allowed: set[str], prefix: str) -> None:
    for key in section:
        if key not in allowed:
            raise ConfigError(f"unknown key '{prefix}.{key}'")


def _number(section: dict[str, Any], key: str, prefix: str, default: float | None = None) -> float:
    if key not in section:
        if default is None:
            raise ConfigError(f"missing required key '{prefix}.{key}'")
        return default
    value = section[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"'{prefix}.{key}' must be a number, got {value!r}")
    return float(value)


def _integer(section: dict[str, Any], key: str, prefix: str, default: int | None = None) -> int:
    if key not in section:
        if default is None:
            raise ConfigError(f"missing required key '{prefix}.{key}'")
        return default
    value = section[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"'{prefix}.{key}' must be an integer, got {value!r}")
    return value


def _parse_surface(tag: str, data: dict[str, Any]) -> SurfaceCondition:
    prefix = f"surface.{tag}"
    physical = _SURFACE_SCHEMAS[tag]
    uses_generic = tag != "B" and any(key in data for key in ("h", "t_inf"))
    schema = _GENERIC_SCHEMA if uses_generic else physical
    _reject_unknown(data, set(schema), prefix)
    values = {"h": 0.0, "t_inf": 0.0, "q": 0.0}
    for key, (target, required) in schema.items():
        values[target] = _number(data, key, prefix, None if required else values[target])
    return SurfaceCondition(h=values["h"], t_inf=values["t_inf"], q=values["q"])


def parse_config(data: dict[str, Any]) -> RunConfig:
    for key in data:
        if key not in _SECTIONS:
            raise ConfigError(f"unknown section '{key}'")

    geometry_data = _section(data, "geometry")
    shape = str(geometry_data.get("shape", "receiver")).strip().lower()
    if shape not in SHAPES:
        raise ConfigError(f"'geometry.shape' must be one of {', '.join(SHAPES)}, got {shape!r}")
    keys = _GEOMETRY_KEYS[shape]
    _reject_unknown(geometry_data, {"shape", *keys}, "geometry")
    geometry = GeometryConfig(
        shape=shape,
        values={key: _number(geometry_data, key, "geometry") for key in keys},
    )

    mesh_data = _section(data, "mesh", required=False)
    _reject_unknown(mesh_data, {"nr", "nz"}, "mesh")
    mesh = MeshConfig(
        nr=_integer(mesh_data, "nr", "mesh", DEFAULT_NR),
        nz=_integer(mesh_data, "nz", "mesh", DEFAULT_NZ),
    )

    material_data = _section(data, "material")
    _reject_unknown(material_data, {"conductivity", "plate_conductivity", "wall_conductivity"}, "material")
    material = MaterialConfig(
        conductivity=_number(material_data, "conductivity", "material"),
        plate_conductivity=(
            _number(material_data, "plate_conductivity", "material")
            if "plate_conductivity" in material_data
            else None
        ),
        wall_conductivity=(
            _number(material_data, "wall_conductivity", "material")
            if "wall_conductivity" in material_data
            else None
        ),
    )

    surface_data = _section(data, "surface")
    _reject_unknown(surface_data, set(SURFACE_TAGS), "surface")
    needed = SURFACE_TAGS if shape == "receiver" else CYLINDER_TAGS
    surfaces: dict[str, SurfaceCondition] = {}
    for tag in SURFACE_TAGS:
        if tag not in surface_data:
            if tag in needed:
                raise ConfigError(f"missing required section 'surface.{tag}'")
            continue
        table = surface_data[tag]
        if not isinstance(table, dict):
            raise ConfigError(f"'surface.{tag}' must be a table")
        surfaces[tag] = _parse_surface(tag, table)

    solver_data = _section(data, "solver", required=False)
    _reject_unknown(solver_data, {"method", "residual_tolerance"}, "solver")
    solver = SolverConfig(
        method=str(solver_data.get("method", DEFAULT_METHOD)),
        residual_tolerance=_number(solver_data, "residual_tolerance", "solver", DEFAULT_TOLERANCE),
    )

    output_data = _section(data, "output", required=False)
    _reject_unknown(output_data, {"formats", "prefix", "precision"}, "output")
    output = OutputConfig(
        formats=parse_formats(output_data.get("formats", ["csv"])),
        prefix=str(output_data.get("prefix", DEFAULT_PREFIX)),
        precision=_integer(output_data, "precision", "output", DEFAULT_PRECISION),
    )

    run_config = RunConfig(
        geometry=geometry,
        mesh=mesh,
        material=material,
        surfaces=surfaces,
        solver=solver,
        output=output,
    )
    validate_config(run_config)
    return run_config


def merge_cli_overrides(
    base: RunConfig,
    method: str | None = None,
    nr: int | None = None,
    nz: int | None = None,
    out: str | None = None,
    formats: str | None = None,
) -> RunConfig:
    if method:
        base.solver.method = method
    if nr is not None:
        base.mesh.nr = nr
    if nz is not None:
        base.mesh.nz = nz
    if out:
        base.output.prefix = out
    if formats:
        base.output.formats = parse_formats(formats)

    validate_config(base)
    return base


def validate_config(config: RunConfig) -> None:
    config.geometry.to_geometry().validate()

    if config.mesh.nr < 1 or config.mesh.nz < 1:
        raise ConfigError(f"mesh counts must be >= 1, got nr={config.mesh.nr}, nz={config.mesh.nz}")
    if config.geometry.shape == "receiver" and (config.mesh.nr < 2 or config.mesh.nz < 2):
        raise ConfigError(
            f"receiver mesh needs nr >= 2 and nz >= 2, got nr={config.mesh.nr}, nz={config.mesh.nz}"
        )

    for key, value in zip(("conductivity", "plate_conductivity", "wall_conductivity"), (
        config.material.conductivity,
        config.material.plate_conductivity,
        config.material.wall_conductivity,
    )):
        if value is not None and not value > 0.0:
            raise MaterialError(f"'material.{key}' must be > 0 W/mK, got {value}")

    config.physics().validate()

    config.solver.method = CylMethod.parse(config.solver.method).value
    if not config.solver.residual_tolerance > 0.0:
        raise ConfigError(
            f"'solver.residual_tolerance' must be > 0, got {config.solver.residual_tolerance}"
        )

    if not config.output.formats:
        raise ConfigError("'output.formats' must name at least one format")
    if not 1 <= config.output.precision <= 17:
        raise ConfigError(f"'output.precision' must be in 1..17, got {config.output.precision}")
    if not config.output.prefix.strip():
        raise ConfigError("'output.prefix' cannot be empty")
