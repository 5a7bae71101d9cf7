import math

import numpy as np
import pytest

from receiver_fem.assembly import RobinPair
from receiver_fem.elements import CylMethod
from receiver_fem.errors import ConfigError
from receiver_fem.mesh import CylinderGeometry, ReceiverGeometry, generate_mesh
from receiver_fem.receiver import (
    SurfaceCondition,
    SurfacePhysics,
    build_field,
    element_heat_flux,
    energy_balance,
    solve_receiver,
    surface_to_robin,
)
from receiver_fem.verify import RadialAnalyticSolution, VerificationSetup, radial_physics


RECEIVER = ReceiverGeometry(r_min=0.01, r_inner=0.10, r_outer=0.13, bottom_thickness=0.03, wall_height=0.20)
CYLINDER = CylinderGeometry(r_inner=0.1, r_outer=0.2, height=0.1)


def _representative(q: float = 150000.0) -> SurfacePhysics:
    return SurfacePhysics.receiver(
        k_d=0.5,
        t_ambient=300.0,
        alpha_b=15.0,
        t_cavity=900.0,
        q_wall=q,
        q_bottom=q,
        k_w=2000.0,
        t_gas=900.0,
    )


def test_surface_to_robin_substitution() -> None:
    pairs = surface_to_robin(_representative())

    assert pairs["D"] == RobinPair(h=0.5, c=150.0)
    assert pairs["A"] == RobinPair(h=15.0, c=163500.0)
    assert pairs["E"] == RobinPair(h=2000.0, c=1800000.0)
    assert pairs["B"].h == 0.0


def test_surface_to_robin_rejects_bad_physics() -> None:
    with pytest.raises(ConfigError, match="surface D"):
        surface_to_robin(_representative().with_surface("D", SurfaceCondition(h=-1.0, t_inf=300.0)))
    with pytest.raises(ConfigError, match="surface E"):
        surface_to_robin(_representative().with_surface("E", SurfaceCondition(h=10.0, t_inf=0.0)))
    with pytest.raises(ConfigError, match="unknown surface"):
        surface_to_robin(SurfacePhysics(surfaces={"F": SurfaceCondition(h=1.0, t_inf=300.0)}))


@pytest.mark.parametrize("method", list(CylMethod))
@pytest.mark.parametrize("geometry", [RECEIVER, CYLINDER])
def test_equilibrium_gives_uniform_field(method: CylMethod, geometry) -> None:
    result = solve_receiver(geometry, 8, 10, 40.0, SurfacePhysics.uniform(h=200.0, t_inf=500.0), method)

    assert np.max(np.abs(result.field.temperatures - 500.0)) < 1e-8
    assert np.max(np.abs(result.field.flux)) < 1e-6
    assert all(abs(flow) < 1e-6 for flow in result.balance.surface_flows.values())
    assert result.balance.gross_input < 1e-6


def test_axial_field_flux() -> None:
    mesh = generate_mesh(CYLINDER, 6, 5)
    T = 400.0 + 1000.0 * mesh.nodes[:, 1]

    flux = element_heat_flux(mesh, T, 40.0)

    np.testing.assert_allclose(flux[:, 1], -40000.0, rtol=1e-9)
    np.testing.assert_allclose(flux[:, 0], 0.0, atol=1e-6)


def test_flux_is_pure() -> None:
    result = solve_receiver(RECEIVER, 8, 10, 40.0, _representative(), CylMethod.EXACT_INTEGRAL)

    again = element_heat_flux(result.field.mesh, result.field.temperatures, 40.0)
    np.testing.assert_array_equal(again, result.field.flux)
    np.testing.assert_array_equal(again, element_heat_flux(result.field.mesh, result.field.temperatures, 40.0))


def test_radial_flux_times_radius_is_constant() -> None:
    setup = VerificationSetup()
    result = solve_receiver(setup.geometry, 64, setup.nz, setup.conductivity, radial_physics(setup), "exact")
    mesh = result.field.mesh
    r_m = mesh.nodes[mesh.elements][:, :, 0].mean(axis=1)

    product = result.field.flux[:, 0] * r_m
    assert (product.max() - product.min()) / abs(product.mean()) < 0.01
    # q_r = C / r for the log profile, so q_r * r is the constant C
    expected = float(RadialAnalyticSolution(0.1, 0.2, 1000.0, 500.0).radial_flux(1.0, 40.0))
    assert float(product.mean()) == pytest.approx(expected, rel=0.01)


def test_radial_energy_balance_matches_analytic_heat_rate() -> None:
    setup = VerificationSetup()
    result = solve_receiver(setup.geometry, 32, setup.nz, setup.conductivity, radial_physics(setup), "exact")
    analytic = RadialAnalyticSolution(0.1, 0.2, 1000.0, 500.0).heat_rate(40.0, 0.1)

    inflow = -result.balance.surface_flows["A"]
    outflow = result.balance.surface_flows["D"]
    assert abs(inflow - outflow) < 0.005 * result.balance.gross_input
    assert inflow == pytest.approx(analytic, rel=0.005)
    assert analytic == pytest.approx(2.0 * math.pi * 40.0 * 500.0 * 0.1 / math.log(2.0))


def test_energy_balance_uses_exact_edge_integration() -> None:
    mesh = generate_mesh(CylinderGeometry(r_inner=1.0, r_outer=2.0, height=1.0), 1, 1)
    physics = SurfacePhysics(
        surfaces={
            "A": SurfaceCondition(h=0.0, t_inf=300.0),
            "B": SurfaceCondition(h=0.0, t_inf=300.0),
            "D": SurfaceCondition(h=0.0, t_inf=300.0),
            "E": SurfaceCondition(h=2.0, t_inf=300.0, q=5.0),
        }
    )
    T = 300.0 + 10.0 * mesh.nodes[:, 0]
    field = build_field(mesh, T, 1.0)

    balance = energy_balance(field, physics)

    # E spans r in [1, 2] at z = 0: ∫ 2 (10 r) 2πr dr - ∫ 5 2πr dr
    convective = 2.0 * 2.0 * math.pi * 10.0 * (8.0 - 1.0) / 3.0
    absorbed = 5.0 * math.pi * (4.0 - 1.0)
    assert balance.surface_flows["E"] == pytest.approx(convective - absorbed, rel=1e-12)
    assert balance.absorbed["E"] == pytest.approx(absorbed, rel=1e-12)
    assert balance.gross_input == pytest.approx(absorbed, rel=1e-12)


def test_representative_receiver_run() -> None:
    result = solve_receiver(RECEIVER, 16, 24, 40.0, _representative(), CylMethod.EXACT_INTEGRAL)
    mesh = result.field.mesh
    T = result.field.temperatures

    hottest = int(np.argmax(T))
    coldest = int(np.argmin(T))
    cavity = set(mesh.tag_nodes("A")) | set(mesh.tag_nodes("C"))
    assert hottest in cavity
    assert coldest in set(mesh.tag_nodes("E"))
    assert T[mesh.tag_nodes("D")].min() > T[coldest]
    assert T.max() > 900.0
    assert result.balance.imbalance_fraction < 0.02
    assert result.balance.gross_input > 0.0


def test_maximum_principle_without_absorbed_flux() -> None:
    physics = SurfacePhysics(
        surfaces={
            "A": SurfaceCondition(h=50.0, t_inf=800.0),
            "B": SurfaceCondition(h=10.0, t_inf=400.0),
            "C": SurfaceCondition(h=20.0, t_inf=700.0),
            "D": SurfaceCondition(h=5.0, t_inf=300.0),
            "E": SurfaceCondition(h=100.0, t_inf=600.0),
        }
    )
    result = solve_receiver(RECEIVER, 12, 16, 40.0, physics, CylMethod.MODIFIED_CONDUCTIVITY)

    assert result.field.t_min >= 300.0 - 1e-9
    assert result.field.t_max <= 800.0 + 1e-9


def test_more_absorbed_flux_never_cools() -> None:
    base = _representative()
    hotter = base.with_surface("A", SurfaceCondition.cavity(15.0, 900.0, 250000.0))

    cold = solve_receiver(RECEIVER, 12, 16, 40.0, base, CylMethod.MODIFIED_CONDUCTIVITY)
    warm = solve_receiver(RECEIVER, 12, 16, 40.0, hotter, CylMethod.MODIFIED_CONDUCTIVITY)

    assert np.all(warm.field.temperatures >= cold.field.temperatures - 1e-9)


def test_solve_receiver_is_deterministic() -> None:
    first = solve_receiver(RECEIVER, 8, 10, 40.0, _representative(), "masscenter")
    second = solve_receiver(RECEIVER, 8, 10, 40.0, _representative(), "masscenter")

    np.testing.assert_array_equal(first.field.temperatures, second.field.temperatures)
