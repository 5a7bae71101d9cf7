from __future__ import annotations

from collections.abc import Callable, Iterable
from dataclasses import dataclass, field
import logging
import math

import numpy as np
from numpy.typing import ArrayLike

from .elements import CylMethod, shape_coefficients
from .errors import ConfigError, DomainError, QuadratureNonconvergenceError
from .mesh import CylinderGeometry, generate_mesh
from .receiver import SurfaceCondition, SurfacePhysics, TemperatureField, solve_on_mesh


logger = logging.getLogger(__name__)

PENALTY_H = 1e8
RADIAL_THRESHOLD = 1e-3
AXIAL_THRESHOLD = 1e-9
MIN_QUADRATURE_RTOL = 1e-13

Sampler = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True, slots=True)
class RadialAnalyticSolution:
    r1: float
    r2: float
    t1: float
    t2: float

    def __post_init__(self) -> None:
        if not 0.0 < self.r1 < self.r2:
            raise DomainError(f"radial solution needs 0 < r1 < r2, got r1={self.r1}, r2={self.r2}")

    def temperature(self, r: ArrayLike) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        slack = 1e-12 * self.r2
        if np.any(r < self.r1 - slack) or np.any(r > self.r2 + slack):
            raise DomainError(f"radius outside [{self.r1}, {self.r2}]")
        s = np.log(r / self.r1) / math.log(self.r2 / self.r1)
        # written as a blend so both end values come out exactly
        return self.t1 * (1.0 - s) + self.t2 * s

    def sample(self, r: np.ndarray, z: np.ndarray) -> np.ndarray:
        return self.temperature(r)

    def radial_flux(self, r: ArrayLike, conductivity: float) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return -conductivity * (self.t2 - self.t1) / (math.log(self.r2 / self.r1) * r)

    def heat_rate(self, conductivity: float, height: float) -> float:
        return 2.0 * math.pi * conductivity * (self.t1 - self.t2) * height / math.log(self.r2 / self.r1)


@dataclass(frozen=True, slots=True)
class AxialAnalyticSolution:
    t0: float
    gradient: float
    z0: float = 0.0

    def temperature(self, z: ArrayLike) -> np.ndarray:
        return self.t0 + self.gradient * (np.asarray(z, dtype=float) - self.z0)

    def sample(self, r: np.ndarray, z: np.ndarray) -> np.ndarray:
        return self.temperature(z)


def analytic_radial_oracle(r1: float, r2: float, t1: float, t2: float, r: ArrayLike) -> np.ndarray | float:
    values = RadialAnalyticSolution(r1, r2, t1, t2).temperature(r)
    return float(values) if values.ndim == 0 else values


@dataclass(frozen=True, slots=True)
class QuadratureSpec:
    rtol: float = 1e-12
    max_depth: int = 12
    order: int = 6

    def __post_init__(self) -> None:
        if self.rtol < MIN_QUADRATURE_RTOL:
            raise ConfigError(f"quadrature tolerance must be >= {MIN_QUADRATURE_RTOL}, got {self.rtol}")
        if self.max_depth < 1:
            raise ConfigError(f"quadrature max_depth must be >= 1, got {self.max_depth}")
        if self.order < 1:
            raise ConfigError(f"quadrature order must be >= 1, got {self.order}")


@dataclass(frozen=True, slots=True)
class QuadratureResult:
    value: float
    error: float
    depth: int
    evaluations: int


# f(r, z, shape) -> values; shape holds the region's shape functions at each point
_Kernel = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]


def _gauss_01(order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (x + 1.0), 0.5 * w


def _triangle_rule(tri: np.ndarray, kernel: _Kernel, coeffs, order: int) -> np.ndarray:
    # collapsed (Duffy) tensor Gauss rule on each triangle of tri[k, 3, 2]
    x, w = _gauss_01(order)
    u = np.repeat(x, order)
    v = np.tile(x, order) * (1.0 - u)
    weight = np.repeat(w, order) * np.tile(w, order) * (1.0 - u)

    p0, p1, p2 = tri[:, 0], tri[:, 1], tri[:, 2]
    e1 = p1 - p0
    e2 = p2 - p0
    jac = np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    r = p0[:, None, 0] + u[None, :] * e1[:, None, 0] + v[None, :] * e2[:, None, 0]
    z = p0[:, None, 1] + u[None, :] * e1[:, None, 1] + v[None, :] * e2[:, None, 1]
    shape = coeffs.a + coeffs.b * r[..., None] + coeffs.c * z[..., None]
    values = kernel(r, z, shape)
    return jac * np.sum(values * weight[None, :], axis=1)


def _split_triangles(tri: np.ndarray) -> np.ndarray:
    p0, p1, p2 = tri[:, 0], tri[:, 1], tri[:, 2]
    m01 = 0.5 * (p0 + p1)
    m12 = 0.5 * (p1 + p2)
    m20 = 0.5 * (p2 + p0)
    children = np.stack(
        [
            np.stack([p0, m01, m20], axis=1),
            np.stack([m01, p1, m12], axis=1),
            np.stack([m20, m12, p2], axis=1),
            np.stack([m01, m12, m20], axis=1),
        ],
        axis=1,
    )
    return children.reshape(-1, 3, 2)


def _edge_rule(seg: np.ndarray, kernel: _Kernel, start: np.ndarray, direction: np.ndarray, order: int) -> np.ndarray:
    x, w = _gauss_01(order)
    a, b = seg[:, 0], seg[:, 1]
    d = b - a
    length = np.hypot(d[:, 0], d[:, 1])
    r = a[:, None, 0] + x[None, :] * d[:, None, 0]
    z = a[:, None, 1] + x[None, :] * d[:, None, 1]
    t = ((r - start[0]) * direction[0] + (z - start[1]) * direction[1]) / float(direction @ direction)
    shape = np.stack([1.0 - t, t], axis=-1)
    values = kernel(r, z, shape)
    return length * np.sum(values * w[None, :], axis=1)


def _split_edges(seg: np.ndarray) -> np.ndarray:
    mid = 0.5 * (seg[:, 0] + seg[:, 1])
    return np.stack(
        [np.stack([seg[:, 0], mid], axis=1), np.stack([mid, seg[:, 1]], axis=1)],
        axis=1,
    ).reshape(-1, 2, 2)


def _adaptive(
    region: np.ndarray,
    rule: Callable[[np.ndarray], np.ndarray],
    split: Callable[[np.ndarray], np.ndarray],
    spec: QuadratureSpec,
) -> QuadratureResult:
    children_per_split = 4 if region.shape[0] == 3 else 2
    active = region[None]
    coarse = rule(active)
    scale = abs(float(coarse[0]))
    total = 0.0
    error = 0.0
    evaluations = 1
    for depth in range(1, spec.max_depth + 1):
        children = split(active)
        fine = rule(children).reshape(-1, children_per_split).sum(axis=1)
        evaluations += children.shape[0]
        diff = np.abs(fine - coarse)
        scale = max(scale, abs(total + float(fine.sum())))
        # each piece gets a share of the budget proportional to its measure
        share = 1.0 / children_per_split ** (depth - 1)
        done = diff <= spec.rtol * max(scale, 1e-300) * share
        total += float(fine[done].sum())
        error += float(diff[done].sum())
        if done.all():
            return QuadratureResult(value=total, error=error, depth=depth, evaluations=evaluations)
        keep = ~done
        active = children.reshape(-1, children_per_split, *region.shape)[keep].reshape(-1, *region.shape)
        coarse = rule(active)
    raise QuadratureNonconvergenceError(
        f"adaptive quadrature did not reach rtol {spec.rtol:.1e} within depth {spec.max_depth} "
        f"({active.shape[0]} pieces unresolved)"
    )


def _triangle_kernel(integrand: str | Sampler, coeffs, i: int, j: int) -> _Kernel:
    if callable(integrand):
        return lambda r, z, shape: np.asarray(integrand(r, z), dtype=float)
    if integrand == "one":
        return lambda r, z, shape: np.ones_like(r)
    if integrand == "inv_r":
        return lambda r, z, shape: 1.0 / r
    if integrand == "z_over_r":
        return lambda r, z, shape: z / r
    if integrand == "shape_over_r":
        return lambda r, z, shape: shape[..., i] / r
    if integrand == "shape_product":
        return lambda r, z, shape: shape[..., i] * shape[..., j]
    if integrand == "grad_dot":
        value = float(coeffs.b[i] * coeffs.b[j] + coeffs.c[i] * coeffs.c[j])
        return lambda r, z, shape: np.full_like(r, value)
    raise ConfigError(f"unknown triangle integrand '{integrand}'")


def _edge_kernel(integrand: str | Sampler, i: int, j: int) -> _Kernel:
    if callable(integrand):
        return lambda r, z, shape: np.asarray(integrand(r, z), dtype=float)
    if integrand == "one":
        return lambda r, z, shape: np.ones_like(r)
    if integrand == "edge_mass":
        return lambda r, z, shape: shape[..., i] * shape[..., j]
    if integrand == "edge_mass_r":
        return lambda r, z, shape: r * shape[..., i] * shape[..., j]
    if integrand == "edge_shape":
        return lambda r, z, shape: shape[..., i]
    if integrand == "edge_shape_r":
        return lambda r, z, shape: r * shape[..., i]
    raise ConfigError(f"unknown edge integrand '{integrand}'")


_NEEDS_POSITIVE_R = {"inv_r", "z_over_r", "shape_over_r"}


def quadrature_oracle(
    integrand: str | Sampler,
    region: ArrayLike,
    spec: QuadratureSpec | None = None,
    i: int = 0,
    j: int = 0,
) -> QuadratureResult:
    """Adaptive quadrature over a triangle (3x2 points) or an edge (2x2 points).

    Named integrands: one, inv_r, z_over_r, shape_over_r, shape_product and
    grad_dot on triangles; one, edge_mass, edge_mass_r, edge_shape and
    edge_shape_r on edges. Shape functions belong to the region itself.
    A callable f(r, z) may be passed instead of a name.
    """
    spec = spec or QuadratureSpec()
    points = np.asarray(region, dtype=float)
    if not callable(integrand) and integrand in _NEEDS_POSITIVE_R and float(points[:, 0].min()) <= 0.0:
        raise DomainError(f"integrand '{integrand}' needs min r > 0 over the region")

    if points.shape == (3, 2):
        coeffs = shape_coefficients(points)
        kernel = _triangle_kernel(integrand, coeffs, i, j)
        return _adaptive(
            points,
            lambda tri: _triangle_rule(tri, kernel, coeffs, spec.order),
            _split_triangles,
            spec,
        )
    if points.shape == (2, 2):
        kernel = _edge_kernel(integrand, i, j)
        start = points[0]
        direction = points[1] - points[0]
        return _adaptive(
            points,
            lambda seg: _edge_rule(seg, kernel, start, direction, spec.order),
            _split_edges,
            spec,
        )
    raise ConfigError(f"quadrature region must be a triangle or an edge, got shape {points.shape}")


def compare_fields(field: TemperatureField, sampler: Sampler) -> float:
    nodes = field.mesh.nodes
    expected = np.asarray(sampler(nodes[:, 0], nodes[:, 1]), dtype=float)
    return float(np.max(np.abs(field.temperatures - expected) / np.abs(expected), initial=0.0))


@dataclass(slots=True)
class VerificationCase:
    name: str
    method: CylMethod
    resolution: int
    max_relative_error: float
    threshold: float
    details: dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.max_relative_error < self.threshold


@dataclass(slots=True)
class VerificationReport:
    cases: list[VerificationCase] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return bool(self.cases) and all(case.passed for case in self.cases)


@dataclass(frozen=True, slots=True)
class VerificationSetup:
    r_inner: float = 0.1
    r_outer: float = 0.2
    height: float = 0.1
    conductivity: float = 40.0
    nz: int = 4
    t_inner: float = 1000.0
    t_outer: float = 500.0
    axial_h: float = 500.0
    axial_t_inf: float = 400.0
    axial_q: float = 40000.0

    @property
    def geometry(self) -> CylinderGeometry:
        return CylinderGeometry(r_inner=self.r_inner, r_outer=self.r_outer, height=self.height)


def radial_physics(setup: VerificationSetup) -> SurfacePhysics:
    insulated = SurfaceCondition(h=0.0, t_inf=setup.t_outer)
    return SurfacePhysics(
        surfaces={
            "A": SurfaceCondition(h=PENALTY_H, t_inf=setup.t_inner),
            "D": SurfaceCondition(h=PENALTY_H, t_inf=setup.t_outer),
            "B": insulated,
            "E": insulated,
        }
    )


def axial_physics(setup: VerificationSetup) -> SurfacePhysics:
    insulated = SurfaceCondition(h=0.0, t_inf=setup.axial_t_inf)
    return SurfacePhysics(
        surfaces={
            "A": insulated,
            "D": insulated,
            "B": SurfaceCondition(h=0.0, t_inf=setup.axial_t_inf, q=setup.axial_q),
            "E": SurfaceCondition(h=setup.axial_h, t_inf=setup.axial_t_inf),
        }
    )


def axial_solution(setup: VerificationSetup) -> AxialAnalyticSolution:
    # all absorbed flux on the top leaves through the bottom Robin face
    gradient = setup.axial_q / setup.conductivity
    return AxialAnalyticSolution(t0=setup.axial_t_inf + setup.axial_q / setup.axial_h, gradient=gradient)


def run_radial_case(
    method: CylMethod | str,
    resolution: int = 32,
    setup: VerificationSetup | None = None,
) -> VerificationCase:
    setup = setup or VerificationSetup()
    method = CylMethod.parse(method)
    oracle = RadialAnalyticSolution(setup.r_inner, setup.r_outer, setup.t_inner, setup.t_outer)
    mesh = generate_mesh(setup.geometry, resolution, setup.nz)
    result = solve_on_mesh(mesh, setup.conductivity, radial_physics(setup), method)
    flows = result.balance.surface_flows
    analytic = oracle.heat_rate(setup.conductivity, setup.height)
    inflow = -flows.get("A", 0.0)
    outflow = flows.get("D", 0.0)
    return VerificationCase(
        name="radial",
        method=method,
        resolution=resolution,
        max_relative_error=compare_fields(result.field, oracle.sample),
        threshold=RADIAL_THRESHOLD,
        details={
            "inflow_w": inflow,
            "outflow_w": outflow,
            "analytic_w": analytic,
            "imbalance_fraction": result.balance.imbalance_fraction,
            "residual": result.solution.residual_norm,
        },
    )


def run_axial_case(
    method: CylMethod | str,
    resolution: int = 32,
    setup: VerificationSetup | None = None,
) -> VerificationCase:
    setup = setup or VerificationSetup()
    method = CylMethod.parse(method)
    oracle = axial_solution(setup)
    mesh = generate_mesh(setup.geometry, resolution, setup.nz)
    result = solve_on_mesh(mesh, setup.conductivity, axial_physics(setup), method)
    return VerificationCase(
        name="axial",
        method=method,
        resolution=resolution,
        max_relative_error=compare_fields(result.field, oracle.sample),
        threshold=AXIAL_THRESHOLD,
        details={
            "t_bottom": float(oracle.temperature(0.0)),
            "t_top": float(oracle.temperature(setup.height)),
            "residual": result.solution.residual_norm,
        },
    )


def run_verification_suite(
    resolution: int = 32,
    methods: Iterable[CylMethod | str] | None = None,
    setup: VerificationSetup | None = None,
) -> VerificationReport:
    if resolution < 1:
        raise ConfigError(f"verification resolution must be >= 1, got {resolution}")
    report = VerificationReport()
    for method in methods or list(CylMethod):
        for runner in (run_radial_case, run_axial_case):
            case = runner(method, resolution, setup)
            logger.info(
                "Verification %s/%s: max relative error %.3e (threshold %.1e)",
                case.name,
                case.method.value,
                case.max_relative_error,
                case.threshold,
            )
            report.cases.append(case)
    return report
