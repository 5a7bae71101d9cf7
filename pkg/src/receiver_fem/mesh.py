from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field, replace
import logging

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import reverse_cuthill_mckee

from .errors import ConfigError


logger = logging.getLogger(__name__)

SURFACE_TAGS = ("A", "B", "C", "D", "E")

MATERIAL_PLATE = 0
MATERIAL_WALL = 1

RADIAL_EDGE = "radial"
AXIAL_EDGE = "axial"

DEGENERATE_AREA = 1e-14


@dataclass(frozen=True, slots=True)
class ReceiverGeometry:
    r_min: float
    r_inner: float
    r_outer: float
    bottom_thickness: float
    wall_height: float

    @property
    def top(self) -> float:
        return self.bottom_thickness + self.wall_height

    @property
    def area(self) -> float:
        plate = (self.r_outer - self.r_min) * self.bottom_thickness
        wall = (self.r_outer - self.r_inner) * self.wall_height
        return plate + wall

    @property
    def perimeter(self) -> float:
        return 2.0 * (self.r_outer - self.r_min) + 2.0 * self.top

    def validate(self) -> None:
        if not 0.0 < self.r_min < self.r_inner < self.r_outer:
            raise ConfigError(
                "geometry requires 0 < r_min < r_inner < r_outer, got "
                f"r_min={self.r_min}, r_inner={self.r_inner}, r_outer={self.r_outer}"
            )
        if self.bottom_thickness <= 0.0:
            raise ConfigError(f"geometry.bottom_thickness must be > 0, got {self.bottom_thickness}")
        if self.wall_height <= 0.0:
            raise ConfigError(f"geometry.wall_height must be > 0, got {self.wall_height}")


@dataclass(frozen=True, slots=True)
class CylinderGeometry:
    r_inner: float
    r_outer: float
    height: float

    @property
    def top(self) -> float:
        return self.height

    @property
    def area(self) -> float:
        return (self.r_outer - self.r_inner) * self.height

    @property
    def perimeter(self) -> float:
        return 2.0 * (self.r_outer - self.r_inner) + 2.0 * self.height

    def validate(self) -> None:
        if not 0.0 < self.r_inner < self.r_outer:
            raise ConfigError(
                "cylinder requires 0 < r_inner < r_outer, got "
                f"r_inner={self.r_inner}, r_outer={self.r_outer}"
            )
        if self.height <= 0.0:
            raise ConfigError(f"geometry.height must be > 0, got {self.height}")


Geometry = ReceiverGeometry | CylinderGeometry


@dataclass(frozen=True, slots=True)
class Node:
    id: int
    r: float
    z: float


@dataclass(frozen=True, slots=True)
class TriElement:
    nodes: tuple[int, int, int]
    material_id: int


@dataclass(frozen=True, slots=True)
class BoundaryEdge:
    nodes: tuple[int, int]
    surface_tag: str | None
    length: float
    orientation: str


@dataclass(frozen=True, slots=True)
class StructuredGrid:
    r_lines: np.ndarray
    z_lines: np.ndarray
    node_index: np.ndarray
    cell_mask: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.cell_mask.shape


@dataclass(frozen=True, slots=True)
class Mesh:
    nodes: np.ndarray
    elements: np.ndarray
    material_ids: np.ndarray
    boundary: tuple[BoundaryEdge, ...]
    half_bandwidth: int
    original_ids: np.ndarray
    grid: StructuredGrid | None = None
    domain_area: float | None = None

    def __post_init__(self) -> None:
        # the mesh keeps read-only copies; caller arrays stay writable
        for name in ("nodes", "elements", "material_ids", "original_ids"):
            array = np.array(getattr(self, name))
            array.setflags(write=False)
            object.__setattr__(self, name, array)

    @property
    def node_count(self) -> int:
        return int(self.nodes.shape[0])

    @property
    def element_count(self) -> int:
        return int(self.elements.shape[0])

    def node(self, node_id: int) -> Node:
        r, z = self.nodes[node_id]
        return Node(id=int(node_id), r=float(r), z=float(z))

    def element(self, element_id: int) -> TriElement:
        i, j, k = (int(v) for v in self.elements[element_id])
        return TriElement(nodes=(i, j, k), material_id=int(self.material_ids[element_id]))

    def element_points(self, element_id: int) -> np.ndarray:
        return self.nodes[self.elements[element_id]]

    def signed_areas(self) -> np.ndarray:
        p = self.nodes[self.elements]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def tag_nodes(self, tag: str) -> np.ndarray:
        ids = {node for edge in self.boundary if edge.surface_tag == tag for node in edge.nodes}
        return np.array(sorted(ids), dtype=np.int64)

    def tagged_length(self, tag: str | None = None) -> float:
        return float(
            sum(edge.length for edge in self.boundary if tag is None or edge.surface_tag == tag)
        )

    def is_renumbered(self) -> bool:
        return not np.array_equal(self.original_ids, np.arange(self.node_count))


def compute_half_bandwidth(elements: np.ndarray) -> int:
    if elements.size == 0:
        return 0
    return int(np.max(elements.max(axis=1) - elements.min(axis=1)))


def generate_mesh(geometry: Geometry, nr: int, nz: int) -> Mesh:
    if not isinstance(nr, (int, np.integer)) or not isinstance(nz, (int, np.integer)):
        raise ConfigError(f"mesh counts must be integers, got nr={nr!r}, nz={nz!r}")
    if nr < 1 or nz < 1:
        raise ConfigError(f"mesh counts must be >= 1, got nr={nr}, nz={nz}")
    geometry.validate()
    if isinstance(geometry, ReceiverGeometry) and (nr < 2 or nz < 2):
        # plate and wall segments each take at least one cell
        raise ConfigError(f"receiver mesh needs nr >= 2 and nz >= 2, got nr={nr}, nz={nz}")

    if isinstance(geometry, ReceiverGeometry):
        r_lines, i_inner = _segment_lines(
            [geometry.r_min, geometry.r_inner, geometry.r_outer], int(nr)
        )
        z_lines, j_plate = _segment_lines([0.0, geometry.bottom_thickness, geometry.top], int(nz))
        ir = np.arange(r_lines.size - 1)
        iz = np.arange(z_lines.size - 1)
        cell_mask = (iz[:, None] < j_plate) | (ir[None, :] >= i_inner)
    else:
        r_lines = np.linspace(geometry.r_inner, geometry.r_outer, int(nr) + 1)
        z_lines = np.linspace(0.0, geometry.height, int(nz) + 1)
        i_inner, j_plate = 0, z_lines.size - 1
        cell_mask = np.ones((z_lines.size - 1, r_lines.size - 1), dtype=bool)

    n_z_cells, n_r_cells = cell_mask.shape
    touched = np.zeros((n_z_cells + 1, n_r_cells + 1), dtype=bool)
    touched[:-1, :-1] |= cell_mask
    touched[1:, :-1] |= cell_mask
    touched[:-1, 1:] |= cell_mask
    touched[1:, 1:] |= cell_mask

    # generator numbering runs along z first; renumber_bandwidth picks the short sweep
    node_index = np.full(touched.shape, -1, dtype=np.int64)
    points: list[tuple[float, float]] = []
    for i in range(n_r_cells + 1):
        for j in range(n_z_cells + 1):
            if touched[j, i]:
                node_index[j, i] = len(points)
                points.append((float(r_lines[i]), float(z_lines[j])))

    elements: list[tuple[int, int, int]] = []
    materials: list[int] = []
    boundary: list[BoundaryEdge] = []
    is_receiver = isinstance(geometry, ReceiverGeometry)

    for i in range(n_r_cells):
        for j in range(n_z_cells):
            if not cell_mask[j, i]:
                continue
            p00 = int(node_index[j, i])
            p10 = int(node_index[j, i + 1])
            p11 = int(node_index[j + 1, i + 1])
            p01 = int(node_index[j + 1, i])
            material = MATERIAL_WALL if is_receiver and j >= j_plate else MATERIAL_PLATE
            elements.append((p00, p10, p11))
            elements.append((p00, p11, p01))
            materials.extend((material, material))

            dr = float(r_lines[i + 1] - r_lines[i])
            dz = float(z_lines[j + 1] - z_lines[j])
            if j == 0 or not cell_mask[j - 1, i]:
                tag = _tag_bottom(j)
                boundary.append(BoundaryEdge((p00, p10), tag, dr, RADIAL_EDGE))
            if i == n_r_cells - 1 or not cell_mask[j, i + 1]:
                boundary.append(BoundaryEdge((p10, p11), "D" if i == n_r_cells - 1 else None, dz, AXIAL_EDGE))
            if j == n_z_cells - 1 or not cell_mask[j + 1, i]:
                tag = _tag_top(j + 1, n_z_cells, j_plate, is_receiver)
                boundary.append(BoundaryEdge((p11, p01), tag, dr, RADIAL_EDGE))
            if i == 0 or not cell_mask[j, i - 1]:
                tag = _tag_left(i, i_inner, is_receiver)
                boundary.append(BoundaryEdge((p01, p00), tag, dz, AXIAL_EDGE))

    element_array = np.array(elements, dtype=np.int64).reshape(-1, 3)
    mesh = Mesh(
        nodes=np.array(points, dtype=float).reshape(-1, 2),
        elements=element_array,
        material_ids=np.array(materials, dtype=np.int64),
        boundary=tuple(boundary),
        half_bandwidth=compute_half_bandwidth(element_array),
        original_ids=np.arange(len(points), dtype=np.int64),
        grid=StructuredGrid(
            r_lines=r_lines,
            z_lines=z_lines,
            node_index=node_index,
            cell_mask=cell_mask,
        ),
        domain_area=geometry.area,
    )
    logger.debug(
        "Mesh generated: nodes=%d, elements=%d, boundary edges=%d, half-bandwidth=%d",
        mesh.node_count,
        mesh.element_count,
        len(mesh.boundary),
        mesh.half_bandwidth,
    )
    return mesh


def _segment_lines(breaks: list[float], total: int) -> tuple[np.ndarray, int]:
    span = breaks[-1] - breaks[0]
    first = min(max(1, round(total * (breaks[1] - breaks[0]) / span)), max(1, total - 1))
    second = max(1, total - first)
    lower = np.linspace(breaks[0], breaks[1], first + 1)
    upper = np.linspace(breaks[1], breaks[2], second + 1)
    return np.concatenate([lower, upper[1:]]), first


def _tag_bottom(j: int) -> str | None:
    return "E" if j == 0 else None


def _tag_top(line: int, top_line: int, plate_line: int, is_receiver: bool) -> str | None:
    if line == top_line:
        return "B"
    if is_receiver and line == plate_line:
        return "C"
    return None


def _tag_left(i: int, i_inner: int, is_receiver: bool) -> str | None:
    if i == 0:
        return "B" if is_receiver else "A"
    if is_receiver and i == i_inner:
        return "A"
    return None


def renumber_bandwidth(mesh: Mesh) -> Mesh:
    if mesh.grid is not None:
        order = _sweep_order(mesh.grid)
    else:
        order = _cuthill_mckee_order(mesh)

    new_id = np.empty_like(order)
    new_id[order] = np.arange(order.size, dtype=np.int64)
    elements = new_id[mesh.elements]
    half_bandwidth = compute_half_bandwidth(elements)
    if half_bandwidth > mesh.half_bandwidth:
        logger.debug(
            "Renumbering kept original order: sweep bandwidth %d > %d",
            half_bandwidth,
            mesh.half_bandwidth,
        )
        return mesh

    grid = mesh.grid
    if grid is not None:
        index = np.where(grid.node_index >= 0, new_id[np.maximum(grid.node_index, 0)], -1)
        grid = replace(grid, node_index=index)

    renumbered = Mesh(
        nodes=mesh.nodes[order].copy(),
        elements=elements,
        material_ids=mesh.material_ids.copy(),
        boundary=tuple(
            replace(edge, nodes=(int(new_id[edge.nodes[0]]), int(new_id[edge.nodes[1]])))
            for edge in mesh.boundary
        ),
        half_bandwidth=half_bandwidth,
        original_ids=mesh.original_ids[order].copy(),
        grid=grid,
        domain_area=mesh.domain_area,
    )
    logger.debug("Renumbered nodes: half-bandwidth %d -> %d", mesh.half_bandwidth, half_bandwidth)
    return renumbered


def _sweep_order(grid: StructuredGrid) -> np.ndarray:
    n_z_lines, n_r_lines = grid.node_index.shape
    if n_r_lines <= n_z_lines:
        ordered = grid.node_index.reshape(-1)
    else:
        ordered = grid.node_index.T.reshape(-1)
    return ordered[ordered >= 0].astype(np.int64)


def _cuthill_mckee_order(mesh: Mesh) -> np.ndarray:
    rows = np.repeat(mesh.elements, 3, axis=1).reshape(-1)
    cols = np.tile(mesh.elements, (1, 3)).reshape(-1)
    graph = coo_matrix(
        (np.ones(rows.size), (rows, cols)),
        shape=(mesh.node_count, mesh.node_count),
    ).tocsr()
    return np.asarray(reverse_cuthill_mckee(graph, symmetric_mode=True), dtype=np.int64)


@dataclass(slots=True)
class MeshReport:
    orientation_violations: list[str] = field(default_factory=list)
    degenerate_elements: list[str] = field(default_factory=list)
    untagged_edges: list[str] = field(default_factory=list)
    nonconforming_edges: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not (
            self.orientation_violations
            or self.degenerate_elements
            or self.untagged_edges
            or self.nonconforming_edges
        )

    @property
    def violation_count(self) -> int:
        return (
            len(self.orientation_violations)
            + len(self.degenerate_elements)
            + len(self.untagged_edges)
            + len(self.nonconforming_edges)
        )

    def messages(self) -> list[str]:
        return [
            *(f"orientation: {item}" for item in self.orientation_violations),
            *(f"degenerate: {item}" for item in self.degenerate_elements),
            *(f"untagged: {item}" for item in self.untagged_edges),
            *(f"non-conforming: {item}" for item in self.nonconforming_edges),
        ]


def validate_mesh(mesh: Mesh) -> MeshReport:
    report = MeshReport()
    n = mesh.node_count

    valid = np.ones(mesh.element_count, dtype=bool)
    for index, element in enumerate(mesh.elements):
        ids = [int(v) for v in element]
        if any(v < 0 or v >= n for v in ids):
            report.nonconforming_edges.append(f"element {index} references missing node {ids}")
            valid[index] = False
        elif len(set(ids)) != 3:
            report.degenerate_elements.append(f"element {index} repeats a node {ids}")
            valid[index] = False

    safe = np.where(valid[:, None], mesh.elements, 0)
    areas = replace(mesh, elements=safe).signed_areas() if mesh.element_count else np.zeros(0)
    for index in np.flatnonzero(valid):
        area = float(areas[index])
        if abs(area) < DEGENERATE_AREA:
            report.degenerate_elements.append(f"element {index} area {area:.3e} m^2")
        elif area < 0.0:
            report.orientation_violations.append(f"element {index} is clockwise (area {area:.3e} m^2)")

    edge_count: Counter[tuple[int, int]] = Counter()
    for index in np.flatnonzero(valid):
        i, j, k = (int(v) for v in mesh.elements[index])
        for a, b in ((i, j), (j, k), (k, i)):
            edge_count[(min(a, b), max(a, b))] += 1

    for edge, count in sorted(edge_count.items()):
        if count > 2:
            report.nonconforming_edges.append(f"edge {edge} shared by {count} elements")

    outer = {edge for edge, count in edge_count.items() if count == 1}
    seen: set[tuple[int, int]] = set()
    for edge in mesh.boundary:
        key = (min(edge.nodes), max(edge.nodes))
        if edge.surface_tag not in SURFACE_TAGS:
            report.untagged_edges.append(f"boundary edge {key} has tag {edge.surface_tag!r}")
        if key in seen:
            report.nonconforming_edges.append(f"boundary edge {key} is listed twice")
        seen.add(key)
        if key not in outer:
            report.nonconforming_edges.append(f"boundary edge {key} is not on the mesh boundary")

    for key in sorted(outer - seen):
        report.untagged_edges.append(f"boundary edge {key} is not covered by any surface tag")

    for key in sorted(outer):
        hanging = _nodes_inside_edge(mesh.nodes, key)
        if hanging.size:
            report.nonconforming_edges.append(
                f"edge {key} has hanging node(s) {hanging.tolist()}"
            )

    return report


def _nodes_inside_edge(nodes: np.ndarray, key: tuple[int, int]) -> np.ndarray:
    a = nodes[key[0]]
    b = nodes[key[1]]
    d = b - a
    length_sq = float(d @ d)
    if length_sq == 0.0:
        return np.zeros(0, dtype=np.int64)
    rel = nodes - a
    t = rel @ d / length_sq
    cross = rel[:, 0] * d[1] - rel[:, 1] * d[0]
    inside = (np.abs(cross) <= 1e-12 * length_sq) & (t > 1e-9) & (t < 1.0 - 1e-9)
    return np.flatnonzero(inside)
