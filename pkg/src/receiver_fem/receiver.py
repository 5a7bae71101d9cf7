from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, field
import logging
import math

import numpy as np

from .assembly import (
    RESIDUAL_TOLERANCE,
    Conductivity,
    GlobalSystem,
    RobinPair,
    Solution,
    assemble,
    conductivity_table,
    solve_banded,
)
from .elements import CylMethod
from .errors import ConfigError
from .mesh import SURFACE_TAGS, Geometry, Mesh, generate_mesh, renumber_bandwidth


logger = logging.getLogger(__name__)


@dataclass(frozen=True, slots=True)
class SurfaceCondition:
    h: float
    t_inf: float
    q: float = 0.0

    @classmethod
    def ambient_loss(cls, k_d: float, t_ambient: float) -> SurfaceCondition:
        return cls(h=k_d, t_inf=t_ambient)

    @classmethod
    def cavity(cls, alpha_b: float, t_cavity: float, q: float) -> SurfaceCondition:
        return cls(h=alpha_b, t_inf=t_cavity, q=q)

    @classmethod
    def exchanger(cls, k_w: float, t_gas: float) -> SurfaceCondition:
        return cls(h=k_w, t_inf=t_gas)

    def validate(self, tag: str) -> None:
        if self.h < 0.0:
            raise ConfigError(f"surface {tag}: heat transfer coefficient must be >= 0, got {self.h}")
        if self.q < 0.0:
            raise ConfigError(f"surface {tag}: absorbed flux must be >= 0, got {self.q}")
        if self.t_inf <= 0.0:
            raise ConfigError(f"surface {tag}: driving temperature must be > 0 K, got {self.t_inf}")


@dataclass(frozen=True, slots=True)
class SurfacePhysics:
    surfaces: Mapping[str, SurfaceCondition]

    @classmethod
    def receiver(
        cls,
        *,
        k_d: float,
        t_ambient: float,
        alpha_b: float,
        t_cavity: float,
        q_wall: float,
        q_bottom: float,
        k_w: float,
        t_gas: float,
        aperture: SurfaceCondition | None = None,
    ) -> SurfacePhysics:
        return cls(
            surfaces={
                "A": SurfaceCondition.cavity(alpha_b, t_cavity, q_wall),
                "B": aperture or SurfaceCondition(h=0.0, t_inf=t_ambient),
                "C": SurfaceCondition.cavity(alpha_b, t_cavity, q_bottom),
                "D": SurfaceCondition.ambient_loss(k_d, t_ambient),
                "E": SurfaceCondition.exchanger(k_w, t_gas),
            }
        )

    @classmethod
    def uniform(cls, h: float, t_inf: float) -> SurfacePhysics:
        return cls(surfaces={tag: SurfaceCondition(h=h, t_inf=t_inf) for tag in SURFACE_TAGS})

    def with_surface(self, tag: str, condition: SurfaceCondition) -> SurfacePhysics:
        return SurfacePhysics(surfaces={**self.surfaces, tag: condition})

    def condition(self, tag: str) -> SurfaceCondition:
        try:
            return self.surfaces[tag]
        except KeyError as ex:
            raise ConfigError(f"no physics given for surface {tag}") from ex

    def validate(self) -> None:
        for tag, condition in self.surfaces.items():
            if tag not in SURFACE_TAGS:
                raise ConfigError(f"unknown surface tag '{tag}'")
            condition.validate(tag)


@dataclass(frozen=True, slots=True)
class TemperatureField:
    mesh: Mesh
    temperatures: np.ndarray
    flux: np.ndarray
    conductivity: np.ndarray

    @property
    def t_min(self) -> float:
        return float(self.temperatures.min())

    @property
    def t_max(self) -> float:
        return float(self.temperatures.max())


@dataclass(slots=True)
class EnergyBalance:
    surface_flows: dict[str, float] = field(default_factory=dict)
    absorbed: dict[str, float] = field(default_factory=dict)
    gross_input: float = 0.0
    net_imbalance: float = 0.0

    @property
    def imbalance_fraction(self) -> float:
        if self.gross_input <= 0.0:
            return 0.0
        return abs(self.net_imbalance) / self.gross_input


@dataclass(frozen=True, slots=True)
class ReceiverResult:
    field: TemperatureField
    balance: EnergyBalance
    solution: Solution
    solver_mesh: Mesh
    system: GlobalSystem
    method: CylMethod


def surface_to_robin(physics: SurfacePhysics) -> dict[str, RobinPair]:
    physics.validate()
    return {
        tag: RobinPair(h=condition.h, c=condition.h * condition.t_inf + condition.q)
        for tag, condition in physics.surfaces.items()
    }


def element_heat_flux(mesh: Mesh, temperatures: np.ndarray, conductivity: Conductivity) -> np.ndarray:
    table = conductivity_table(conductivity, mesh)
    p = mesh.nodes[mesh.elements]
    r = p[:, :, 0]
    z = p[:, :, 1]
    twice_area = (r[:, 1] - r[:, 0]) * (z[:, 2] - z[:, 0]) - (r[:, 2] - r[:, 0]) * (z[:, 1] - z[:, 0])
    j = [1, 2, 0]
    k = [2, 0, 1]
    b = (z[:, j] - z[:, k]) / twice_area[:, None]
    c = (r[:, k] - r[:, j]) / twice_area[:, None]
    t = np.asarray(temperatures, dtype=float)[mesh.elements]
    lam = table[mesh.material_ids]
    return -lam[:, None] * np.column_stack([np.sum(t * b, axis=1), np.sum(t * c, axis=1)])


def energy_balance(field: TemperatureField, physics: SurfacePhysics) -> EnergyBalance:
    balance = EnergyBalance()
    nodes = field.mesh.nodes
    T = field.temperatures
    convective_in = 0.0
    for edge in field.mesh.boundary:
        condition = physics.condition(edge.surface_tag)
        a, b = edge.nodes
        ra, rb = float(nodes[a, 0]), float(nodes[b, 0])
        ua, ub = T[a] - condition.t_inf, T[b] - condition.t_inf
        # exact ∫ h (T - T∞) 2πr ds for linear T and r along the edge
        convective = 2.0 * math.pi * condition.h * edge.length / 6.0 * (
            2.0 * ra * ua + ra * ub + rb * ua + 2.0 * rb * ub
        )
        absorbed = 2.0 * math.pi * condition.q * edge.length * 0.5 * (ra + rb)
        tag = edge.surface_tag
        balance.surface_flows[tag] = balance.surface_flows.get(tag, 0.0) + convective - absorbed
        balance.absorbed[tag] = balance.absorbed.get(tag, 0.0) + absorbed
        convective_in += max(-convective, 0.0)

    balance.gross_input = sum(balance.absorbed.values()) + convective_in
    balance.net_imbalance = sum(balance.surface_flows.values())
    return balance


def build_field(mesh: Mesh, temperatures: np.ndarray, conductivity: Conductivity) -> TemperatureField:
    T = np.asarray(temperatures, dtype=float).copy()
    T.setflags(write=False)
    flux = element_heat_flux(mesh, T, conductivity)
    flux.setflags(write=False)
    return TemperatureField(
        mesh=mesh,
        temperatures=T,
        flux=flux,
        conductivity=conductivity_table(conductivity, mesh),
    )


def solve_on_mesh(
    mesh: Mesh,
    conductivity: Conductivity,
    physics: SurfacePhysics,
    method: CylMethod | str,
    tolerance: float = RESIDUAL_TOLERANCE,
    renumber: bool = True,
) -> ReceiverResult:
    method = CylMethod.parse(method)
    bcs = surface_to_robin(physics)
    solver_mesh = renumber_bandwidth(mesh) if renumber else mesh
    system = assemble(solver_mesh, method, conductivity, bcs)
    solution = solve_banded(system, tolerance)
    field = build_field(mesh, solution.T, conductivity)
    balance = energy_balance(field, physics)
    logger.info(
        "Solved %s: nodes=%d, T=[%.2f, %.2f] K, imbalance=%.3e",
        method.value,
        mesh.node_count,
        field.t_min,
        field.t_max,
        balance.imbalance_fraction,
    )
    return ReceiverResult(
        field=field,
        balance=balance,
        solution=solution,
        solver_mesh=solver_mesh,
        system=system,
        method=method,
    )


def solve_receiver(
    geometry: Geometry,
    nr: int,
    nz: int,
    conductivity: Conductivity,
    physics: SurfacePhysics,
    method: CylMethod | str,
    tolerance: float = RESIDUAL_TOLERANCE,
) -> ReceiverResult:
    mesh = generate_mesh(geometry, nr, nz)
    return solve_on_mesh(mesh, conductivity, physics, method, tolerance)
