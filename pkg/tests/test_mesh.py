from dataclasses import replace

import numpy as np
import pytest

from receiver_fem.elements import is_axis_aligned_right
from receiver_fem.errors import ConfigError
from receiver_fem.mesh import (
    MATERIAL_PLATE,
    MATERIAL_WALL,
    CylinderGeometry,
    ReceiverGeometry,
    generate_mesh,
    renumber_bandwidth,
    validate_mesh,
)


RECEIVER = ReceiverGeometry(r_min=0.01, r_inner=0.10, r_outer=0.13, bottom_thickness=0.03, wall_height=0.20)


def test_single_rectangle_is_two_triangles() -> None:
    mesh = generate_mesh(CylinderGeometry(r_inner=1.0, r_outer=2.0, height=1.0), 1, 1)

    assert mesh.node_count == 4
    assert mesh.element_count == 2
    assert len(mesh.boundary) == 4
    assert sorted(edge.surface_tag for edge in mesh.boundary) == ["A", "B", "D", "E"]
    assert np.all(mesh.signed_areas() > 0.0)


def test_receiver_mesh_covers_l_shape() -> None:
    mesh = generate_mesh(RECEIVER, 24, 46)
    grid = mesh.grid
    assert grid is not None

    assert mesh.element_count == 2 * int(grid.cell_mask.sum())
    assert mesh.domain_area == pytest.approx(0.12 * 0.03 + 0.03 * 0.20, rel=1e-12)
    assert float(np.sum(mesh.signed_areas())) == pytest.approx(RECEIVER.area, rel=1e-12)
    # plate cells span the full radius, wall cells only [r_inner, r_outer]
    assert np.isclose(grid.r_lines, RECEIVER.r_inner).any()
    assert np.isclose(grid.z_lines, RECEIVER.bottom_thickness).any()


def test_receiver_tags_and_perimeter() -> None:
    mesh = generate_mesh(RECEIVER, 24, 46)

    assert mesh.tagged_length() == pytest.approx(RECEIVER.perimeter, rel=1e-12)
    assert mesh.tagged_length("E") == pytest.approx(0.12, rel=1e-12)
    assert mesh.tagged_length("D") == pytest.approx(0.23, rel=1e-12)
    assert mesh.tagged_length("C") == pytest.approx(0.09, rel=1e-12)
    assert mesh.tagged_length("A") == pytest.approx(0.20, rel=1e-12)
    assert mesh.tagged_length("B") == pytest.approx(0.06, rel=1e-12)

    a_nodes = mesh.nodes[mesh.tag_nodes("A")]
    assert np.allclose(a_nodes[:, 0], RECEIVER.r_inner)
    c_nodes = mesh.nodes[mesh.tag_nodes("C")]
    assert np.allclose(c_nodes[:, 1], RECEIVER.bottom_thickness)


def test_materials_split_plate_and_wall() -> None:
    mesh = generate_mesh(RECEIVER, 12, 23)
    centroids_z = mesh.nodes[mesh.elements][:, :, 1].mean(axis=1)

    assert np.all(mesh.material_ids[centroids_z < RECEIVER.bottom_thickness] == MATERIAL_PLATE)
    assert np.all(mesh.material_ids[centroids_z > RECEIVER.bottom_thickness] == MATERIAL_WALL)


def test_every_element_is_axis_aligned_right_triangle() -> None:
    mesh = generate_mesh(RECEIVER, 10, 12)

    for e in range(mesh.element_count):
        points = mesh.element_points(e)
        assert is_axis_aligned_right(points)
        # hypotenuse runs lower-left to upper-right
        r, z = points[:, 0], points[:, 1]
        assert (r.min(), z.min()) in {tuple(p) for p in points}
        assert (r.max(), z.max()) in {tuple(p) for p in points}


def test_generated_mesh_is_valid() -> None:
    report = validate_mesh(generate_mesh(RECEIVER, 10, 12))

    assert report.passed
    assert report.violation_count == 0


def test_validate_mesh_flags_clockwise_element() -> None:
    mesh = generate_mesh(CylinderGeometry(r_inner=1.0, r_outer=2.0, height=1.0), 2, 2)
    elements = mesh.elements.copy()
    elements[0] = elements[0][[0, 2, 1]]

    report = validate_mesh(replace(mesh, elements=elements))

    assert not report.passed
    assert len(report.orientation_violations) == 1
    assert any(message.startswith("orientation:") for message in report.messages())


def test_validate_mesh_flags_untagged_edge() -> None:
    mesh = generate_mesh(CylinderGeometry(r_inner=1.0, r_outer=2.0, height=1.0), 2, 2)
    boundary = (replace(mesh.boundary[0], surface_tag=None), *mesh.boundary[1:])

    report = validate_mesh(replace(mesh, boundary=boundary))

    assert len(report.untagged_edges) == 1


def test_renumber_reduces_bandwidth_and_keeps_nodes() -> None:
    mesh = generate_mesh(RECEIVER, 24, 46)
    renumbered = renumber_bandwidth(mesh)

    assert renumbered.half_bandwidth < mesh.half_bandwidth
    assert renumbered.is_renumbered()
    np.testing.assert_array_equal(renumbered.nodes, mesh.nodes[renumbered.original_ids])
    assert sorted(map(tuple, renumbered.nodes)) == sorted(map(tuple, mesh.nodes))
    assert validate_mesh(renumbered).passed


def test_renumber_keeps_short_sweep_order() -> None:
    mesh = generate_mesh(CylinderGeometry(r_inner=0.1, r_outer=0.2, height=0.1), 32, 4)
    renumbered = renumber_bandwidth(mesh)

    assert renumbered.half_bandwidth <= mesh.half_bandwidth
    assert not renumbered.is_renumbered()


def test_renumber_without_grid_uses_cuthill_mckee() -> None:
    mesh = generate_mesh(RECEIVER, 8, 10)
    rng = np.random.default_rng(7)
    order = rng.permutation(mesh.node_count)
    new_id = np.empty_like(order)
    new_id[order] = np.arange(order.size)
    shuffled = replace(
        mesh,
        nodes=mesh.nodes[order].copy(),
        elements=new_id[mesh.elements],
        boundary=tuple(
            replace(edge, nodes=(int(new_id[edge.nodes[0]]), int(new_id[edge.nodes[1]])))
            for edge in mesh.boundary
        ),
        half_bandwidth=int(np.max(np.ptp(new_id[mesh.elements], axis=1))),
        original_ids=mesh.original_ids[order].copy(),
        grid=None,
    )

    renumbered = renumber_bandwidth(shuffled)

    assert renumbered.half_bandwidth <= shuffled.half_bandwidth
    np.testing.assert_array_equal(renumbered.nodes, mesh.nodes[renumbered.original_ids])


@pytest.mark.parametrize(("nr", "nz"), [(0, 4), (4, 0)])
def test_zero_cell_count_is_config_error(nr: int, nz: int) -> None:
    with pytest.raises(ConfigError):
        generate_mesh(RECEIVER, nr, nz)


def test_bad_radius_order_is_config_error() -> None:
    geometry = ReceiverGeometry(r_min=0.1, r_inner=0.05, r_outer=0.13, bottom_thickness=0.03, wall_height=0.2)

    with pytest.raises(ConfigError):
        generate_mesh(geometry, 4, 4)


@pytest.mark.parametrize(("nr", "nz"), [(1, 1), (1, 50), (50, 1)])
def test_single_cell_strips_keep_bandwidth_three(nr: int, nz: int) -> None:
    mesh = renumber_bandwidth(generate_mesh(CylinderGeometry(r_inner=0.1, r_outer=0.2, height=0.1), nr, nz))

    assert mesh.half_bandwidth <= 3


@pytest.mark.parametrize("geometry", [RECEIVER, CylinderGeometry(r_inner=0.1, r_outer=0.2, height=0.1)])
def test_renumbered_bandwidth_bound(geometry) -> None:
    for nr in range(2, 15):
        for nz in range(2, 15):
            mesh = renumber_bandwidth(generate_mesh(geometry, nr, nz))
            assert mesh.half_bandwidth <= min(nr, nz) + 2, (nr, nz, mesh.half_bandwidth)


@pytest.mark.parametrize(("nr", "nz"), [(1, 8), (8, 1), (1, 1)])
def test_receiver_needs_two_cells_each_way(nr: int, nz: int) -> None:
    with pytest.raises(ConfigError, match="nr >= 2 and nz >= 2"):
        generate_mesh(RECEIVER, nr, nz)


def test_mesh_leaves_caller_arrays_writable() -> None:
    mesh = generate_mesh(CylinderGeometry(r_inner=1.0, r_outer=2.0, height=1.0), 2, 2)
    elements = mesh.elements.copy()

    rebuilt = replace(mesh, elements=elements)
    elements[0, 0] = 99

    assert elements.flags.writeable
    assert not rebuilt.elements.flags.writeable
    assert rebuilt.elements[0, 0] == mesh.elements[0, 0]
