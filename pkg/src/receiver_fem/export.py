from __future__ import annotations

from collections.abc import Iterable
from dataclasses import dataclass
import logging
from pathlib import Path

import numpy as np

from .errors import ConfigError, ExportError
from .receiver import TemperatureField


logger = logging.getLogger(__name__)

EXPORT_FORMATS = ("csv", "vtk", "pgm", "flux")
CSV_HEADER = "node_id,r,z,T"
FLUX_HEADER = "element_id,r_m,z_m,q_r,q_z"
VTK_TRIANGLE = 5
PGM_MAX = 255


@dataclass(frozen=True, slots=True)
class CsvField:
    node_ids: np.ndarray
    nodes: np.ndarray
    temperatures: np.ndarray


@dataclass(frozen=True, slots=True)
class VtkField:
    points: np.ndarray
    cells: np.ndarray
    cell_types: np.ndarray
    temperatures: np.ndarray
    heat_flux: np.ndarray | None


def output_path(prefix: str | Path, fmt: str) -> Path:
    prefix = Path(prefix)
    if fmt == "flux":
        return prefix.with_name(f"{prefix.name}_flux.csv")
    return prefix.with_name(f"{prefix.name}_temperature.{fmt}")


def parse_formats(value: str | Iterable[str]) -> list[str]:
    if isinstance(value, str):
        items = value.split(",")
    elif isinstance(value, (list, tuple)):
        items = list(value)
    else:
        raise ConfigError(f"'output.formats' must be a list or comma-separated string, got {value!r}")
    formats: list[str] = []
    for item in items:
        fmt = str(item).strip().lower()
        if not fmt:
            continue
        if fmt not in EXPORT_FORMATS:
            raise ConfigError(f"unknown output format '{fmt}', expected one of: {', '.join(EXPORT_FORMATS)}")
        if fmt not in formats:
            formats.append(fmt)
    return formats


def export_field(field: TemperatureField, fmt: str, path: str | Path, precision: int = 9) -> Path:
    fmt = fmt.strip().lower()
    if fmt == "csv":
        text = format_csv(field, precision)
    elif fmt == "vtk":
        text = format_vtk(field)
    elif fmt == "pgm":
        text = format_pgm(field)
    elif fmt == "flux":
        text = format_flux_csv(field, precision)
    else:
        raise ConfigError(f"unknown output format '{fmt}', expected one of: {', '.join(EXPORT_FORMATS)}")

    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8", newline="\n")
    except OSError as ex:
        raise ExportError(f"cannot write {fmt} export to {path}: {ex}") from ex
    logger.info("Wrote %s export: %s", fmt, path)
    return path


def export_all(
    field: TemperatureField,
    formats: Iterable[str],
    prefix: str | Path,
    precision: int = 9,
) -> list[Path]:
    return [export_field(field, fmt, output_path(prefix, fmt), precision) for fmt in formats]


def format_csv(field: TemperatureField, precision: int = 9) -> str:
    nodes = field.mesh.nodes
    lines = [CSV_HEADER]
    for node_id, ((r, z), t) in enumerate(zip(nodes, field.temperatures)):
        lines.append(f"{node_id},{r:.{precision}g},{z:.{precision}g},{t:.{precision}g}")
    return "\n".join(lines) + "\n"


def format_flux_csv(field: TemperatureField, precision: int = 9) -> str:
    centroids = field.mesh.nodes[field.mesh.elements].mean(axis=1)
    lines = [FLUX_HEADER]
    for element_id, ((r, z), (qr, qz)) in enumerate(zip(centroids, field.flux)):
        lines.append(
            f"{element_id},{r:.{precision}g},{z:.{precision}g},{qr:.{precision}g},{qz:.{precision}g}"
        )
    return "\n".join(lines) + "\n"


def format_vtk(field: TemperatureField) -> str:
    mesh = field.mesh
    n = mesh.node_count
    m = mesh.element_count
    lines = [
        "# vtk DataFile Version 3.0",
        "receiver-fem temperature field",
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {n} double",
    ]
    # .17g keeps every double bit-exact through a text round trip
    lines.extend(f"{r:.17g} {z:.17g} 0" for r, z in mesh.nodes)
    lines.append(f"CELLS {m} {4 * m}")
    lines.extend(f"3 {i} {j} {k}" for i, j, k in mesh.elements)
    lines.append(f"CELL_TYPES {m}")
    lines.extend(str(VTK_TRIANGLE) for _ in range(m))
    lines.append(f"POINT_DATA {n}")
    lines.append("SCALARS temperature double 1")
    lines.append("LOOKUP_TABLE default")
    lines.extend(f"{t:.17g}" for t in field.temperatures)
    lines.append(f"CELL_DATA {m}")
    lines.append("VECTORS heat_flux double")
    lines.extend(f"{qr:.17g} {qz:.17g} 0" for qr, qz in field.flux)
    return "\n".join(lines) + "\n"


def pgm_raster(field: TemperatureField) -> np.ndarray:
    grid = field.mesh.grid
    if grid is None:
        raise ExportError("PGM export needs a structured mesh grid")
    n_z_cells, n_r_cells = grid.cell_mask.shape
    index = grid.node_index
    T = field.temperatures
    t_min = float(T.min())
    t_max = float(T.max())
    span = t_max - t_min

    raster = np.zeros((n_z_cells, n_r_cells), dtype=np.int64)
    j, i = np.nonzero(grid.cell_mask)
    corners = np.stack(
        [index[j, i], index[j, i + 1], index[j + 1, i], index[j + 1, i + 1]],
        axis=1,
    )
    cell_t = T[corners].mean(axis=1)
    if span > 0.0:
        raster[j, i] = np.rint((cell_t - t_min) / span * PGM_MAX).astype(np.int64)
    else:
        raster[j, i] = PGM_MAX
    # image rows run top (largest z) to bottom
    return raster[::-1]


def format_pgm(field: TemperatureField) -> str:
    raster = pgm_raster(field)
    height, width = raster.shape
    lines = ["P2", "# receiver-fem temperature", f"{width} {height}", str(PGM_MAX)]
    lines.extend(" ".join(str(int(v)) for v in row) for row in raster)
    return "\n".join(lines) + "\n"


def _read_lines(path: str | Path) -> list[str]:
    try:
        return Path(path).read_text(encoding="utf-8").splitlines()
    except (OSError, UnicodeDecodeError) as ex:
        raise ExportError(f"cannot read export {path}: {ex}") from ex


def read_csv(path: str | Path) -> CsvField:
    lines = _read_lines(path)
    if not lines or lines[0].strip() != CSV_HEADER:
        raise ExportError(f"{path}: expected header '{CSV_HEADER}'")
    rows = [line.split(",") for line in lines[1:] if line.strip()]
    try:
        ids = np.array([int(row[0]) for row in rows], dtype=np.int64)
        values = np.array([[float(v) for v in row[1:4]] for row in rows], dtype=float).reshape(-1, 3)
    except (ValueError, IndexError) as ex:
        raise ExportError(f"{path}: malformed CSV row: {ex}") from ex
    return CsvField(node_ids=ids, nodes=values[:, :2].copy(), temperatures=values[:, 2].copy())


def read_vtk(path: str | Path) -> VtkField:
    lines = [line.strip() for line in _read_lines(path)]
    if not lines or not lines[0].startswith("# vtk DataFile"):
        raise ExportError(f"{path}: not a legacy VTK file")
    try:
        cursor = lines.index("DATASET UNSTRUCTURED_GRID") + 1
        n = int(lines[cursor].split()[1])
        points = np.array([[float(v) for v in lines[cursor + 1 + k].split()] for k in range(n)]).reshape(-1, 3)
        cursor += 1 + n

        m = int(lines[cursor].split()[1])
        cells = np.array([[int(v) for v in lines[cursor + 1 + k].split()[1:]] for k in range(m)], dtype=np.int64)
        cursor += 1 + m
        cell_types = np.array([int(lines[cursor + 1 + k]) for k in range(m)], dtype=np.int64)
        cursor += 1 + m

        # POINT_DATA, SCALARS, LOOKUP_TABLE
        cursor += 3
        temperatures = np.array([float(lines[cursor + k]) for k in range(n)])
        cursor += n

        heat_flux = None
        if cursor < len(lines) and lines[cursor].startswith("CELL_DATA"):
            heat_flux = np.array(
                [[float(v) for v in lines[cursor + 2 + k].split()[:2]] for k in range(m)]
            ).reshape(-1, 2)
    except (ValueError, IndexError) as ex:
        raise ExportError(f"{path}: malformed VTK file: {ex}") from ex
    return VtkField(
        points=points,
        cells=cells.reshape(-1, 3),
        cell_types=cell_types,
        temperatures=temperatures,
        heat_flux=heat_flux,
    )
