from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from numpy.typing import ArrayLike

from .errors import ConfigError, GeometryError, MaterialError, UnsupportedElementError
from .mesh import DEGENERATE_AREA, BoundaryEdge


AXIS_TOLERANCE = 1e-9


class CylMethod(str, Enum):
    EXACT_INTEGRAL = "exact"
    MASS_CENTER = "masscenter"
    MODIFIED_CONDUCTIVITY = "modified"

    @classmethod
    def parse(cls, value: str | CylMethod) -> CylMethod:
        if isinstance(value, CylMethod):
            return value
        normalized = str(value).strip().lower()
        for method in cls:
            if method.value == normalized:
                return method
        choices = ", ".join(method.value for method in cls)
        raise ConfigError(f"unknown method '{value}', expected one of: {choices}")


@dataclass(frozen=True, slots=True)
class ShapeCoeffs:
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    area: float

    def evaluate(self, r: float, z: float) -> np.ndarray:
        return self.a + self.b * r + self.c * z


@dataclass(frozen=True, slots=True)
class LocalMatrix:
    k: np.ndarray
    symmetric: bool

    def __add__(self, other: LocalMatrix) -> LocalMatrix:
        return LocalMatrix(k=self.k + other.k, symmetric=self.symmetric and other.symmetric)

    def __sub__(self, other: LocalMatrix) -> LocalMatrix:
        return LocalMatrix(k=self.k - other.k, symmetric=self.symmetric and other.symmetric)


@dataclass(frozen=True, slots=True)
class EdgeContribution:
    g: np.ndarray
    f: np.ndarray


@dataclass(frozen=True, slots=True)
class RadialMoments:
    """Exact integrals of 1/r, 1 and z/r over one triangle."""

    inv_r: float
    area: float
    z_over_r: float


def shape_coefficients(points: ArrayLike) -> ShapeCoeffs:
    p = np.asarray(points, dtype=float).reshape(3, 2)
    r = p[:, 0]
    z = p[:, 1]
    j = np.array([1, 2, 0])
    k = np.array([2, 0, 1])
    twice_area = (r[1] - r[0]) * (z[2] - z[0]) - (r[2] - r[0]) * (z[1] - z[0])
    if twice_area < 2.0 * DEGENERATE_AREA:
        if abs(twice_area) < 2.0 * DEGENERATE_AREA:
            raise GeometryError(f"degenerate triangle, area {0.5 * twice_area:.3e} m^2")
        raise GeometryError("triangle nodes must be counterclockwise")
    return ShapeCoeffs(
        a=(r[j] * z[k] - r[k] * z[j]) / twice_area,
        b=(z[j] - z[k]) / twice_area,
        c=(r[k] - r[j]) / twice_area,
        area=0.5 * twice_area,
    )


def _check_conductivity(conductivity: float) -> float:
    value = float(conductivity)
    if not value > 0.0:
        raise MaterialError(f"conductivity must be > 0 W/mK, got {conductivity}")
    return value


def planar_stiffness(coeffs: ShapeCoeffs, conductivity: float) -> LocalMatrix:
    lam = _check_conductivity(conductivity)
    k = lam * coeffs.area * (np.outer(coeffs.b, coeffs.b) + np.outer(coeffs.c, coeffs.c))
    return LocalMatrix(k=k, symmetric=True)


def is_axis_aligned_right(points: ArrayLike) -> bool:
    p = np.asarray(points, dtype=float).reshape(3, 2)
    radial = axial = 0
    for start, end in ((0, 1), (1, 2), (2, 0)):
        d = p[end] - p[start]
        length = float(np.hypot(d[0], d[1]))
        if length == 0.0:
            return False
        if abs(d[1]) / length < AXIS_TOLERANCE:
            radial += 1
        elif abs(d[0]) / length < AXIS_TOLERANCE:
            axial += 1
    return radial == 1 and axial == 1


def _log1p_remainder(x: float, order: int) -> float:
    # ln(1 + x) minus its Taylor polynomial of degree `order`
    if abs(x) < 0.25:
        total = 0.0
        power = x**order
        for m in range(order + 1, order + 80):
            power *= x
            term = (-1.0) ** (m + 1) * power / m
            total += term
            if abs(term) <= 1e-18 * abs(total):
                break
        return total
    head = sum((-1.0) ** (m + 1) * x**m / m for m in range(1, order + 1))
    return float(np.log1p(x)) - head


def triangle_integrals(points: ArrayLike) -> RadialMoments:
    inv_r, area, shifted, z_ref = _right_triangle_moments(points)
    return RadialMoments(inv_r=inv_r, area=area, z_over_r=shifted + z_ref * inv_r)


def _right_triangle_moments(points: ArrayLike) -> tuple[float, float, float, float]:
    p = np.asarray(points, dtype=float).reshape(3, 2)
    if not is_axis_aligned_right(p):
        raise UnsupportedElementError(
            "closed-form 1/r integrals need an axis-aligned right triangle; "
            "use the masscenter method for general triangles"
        )
    if float(p[:, 0].min()) <= 0.0:
        raise UnsupportedElementError("closed-form 1/r integrals need min r > 0")

    # vertical leg shares r; the remaining vertex is the apex of the horizontal leg
    for apex in range(3):
        others = [v for v in range(3) if v != apex]
        d = p[others[1]] - p[others[0]]
        if abs(d[0]) < AXIS_TOLERANCE * float(np.hypot(d[0], d[1])):
            break
    r_apex, z_apex = p[apex]
    leg = others[0] if abs(p[others[0], 1] - z_apex) > abs(p[others[1], 1] - z_apex) else others[1]
    r_leg = float(np.mean(p[others, 0]))
    z_far = float(p[leg, 1])

    width = abs(r_leg - r_apex)
    height = abs(z_far - z_apex)
    x = (r_leg - r_apex) / r_apex
    # ∫|r - r_apex|/r dr and ∫(r - r_apex)^2/r dr between r_apex and r_leg
    j1 = r_apex * abs(_log1p_remainder(x, 1))
    j2 = r_apex**2 * abs(_log1p_remainder(x, 2))

    area = 0.5 * width * height
    inv_r = height / width * j1
    # ∬ (z - z_apex)/r, kept relative to the apex to avoid cancellation
    shifted = float(np.sign(z_far - z_apex)) * height**2 / (2.0 * width**2) * j2
    return inv_r, area, shifted, float(z_apex)


def exact_shape_over_r(coeffs: ShapeCoeffs, points: ArrayLike) -> np.ndarray:
    """∬ N_i / r dr dz for the three shape functions, in closed form."""
    inv_r, area, shifted, z_ref = _right_triangle_moments(points)
    return (coeffs.a + coeffs.c * z_ref) * inv_r + coeffs.b * area + coeffs.c * shifted


def cyl_correction_exact(coeffs: ShapeCoeffs, points: ArrayLike, conductivity: float) -> LocalMatrix:
    lam = _check_conductivity(conductivity)
    weights = exact_shape_over_r(coeffs, points)
    return LocalMatrix(k=lam * np.outer(weights, coeffs.b), symmetric=False)


def centroid(points: ArrayLike) -> tuple[float, float]:
    p = np.asarray(points, dtype=float).reshape(3, 2)
    return float(p[:, 0].mean()), float(p[:, 1].mean())


def cyl_correction_masscenter(coeffs: ShapeCoeffs, points: ArrayLike, conductivity: float) -> LocalMatrix:
    lam = _check_conductivity(conductivity)
    r_m, z_m = centroid(points)
    if r_m <= 0.0:
        raise GeometryError(f"mass-center radius must be > 0, got {r_m}")
    # S·(a_i/r_m + b_i + c_i·z_m/r_m) = S·N_i(r_m, z_m)/r_m and N_i(centroid) = 1/3
    weights = np.full(3, coeffs.area / (3.0 * r_m))
    return LocalMatrix(k=lam * np.outer(weights, coeffs.b), symmetric=False)


def modified_stiffness(coeffs: ShapeCoeffs, points: ArrayLike, conductivity: float) -> LocalMatrix:
    lam = _check_conductivity(conductivity)
    r_m, _ = centroid(points)
    if r_m <= 0.0:
        raise GeometryError(f"mass-center radius must be > 0, got {r_m}")
    return planar_stiffness(coeffs, lam * r_m)


def local_matrix(method: CylMethod, points: ArrayLike, conductivity: float) -> LocalMatrix:
    coeffs = shape_coefficients(points)
    if method is CylMethod.MODIFIED_CONDUCTIVITY:
        return modified_stiffness(coeffs, points, conductivity)
    planar = planar_stiffness(coeffs, conductivity)
    if method is CylMethod.EXACT_INTEGRAL:
        correction = cyl_correction_exact(coeffs, points, conductivity)
    else:
        correction = cyl_correction_masscenter(coeffs, points, conductivity)
    # integration by parts leaves the first-order 1/r term with a minus sign
    return planar - correction


def _check_robin(length: float, h: float) -> None:
    if not length > 0.0:
        raise GeometryError(f"edge length must be > 0, got {length}")
    if h < 0.0:
        raise ConfigError(f"Robin coefficient h must be >= 0, got {h}")


def edge_robin_contrib(edge: BoundaryEdge, h: float, c: float) -> EdgeContribution:
    _check_robin(edge.length, h)
    delta = edge.length
    g = h * delta / 6.0 * np.array([[2.0, 1.0], [1.0, 2.0]])
    f = np.full(2, 0.5 * c * delta)
    return EdgeContribution(g=g, f=f)


def edge_robin_contrib_axisymmetric(
    edge: BoundaryEdge,
    radii: tuple[float, float],
    h: float,
    c: float,
) -> EdgeContribution:
    _check_robin(edge.length, h)
    delta = edge.length
    ra, rb = radii
    g = h * delta / 12.0 * np.array(
        [
            [3.0 * ra + rb, ra + rb],
            [ra + rb, ra + 3.0 * rb],
        ]
    )
    f = c * delta / 6.0 * np.array([2.0 * ra + rb, ra + 2.0 * rb])
    return EdgeContribution(g=g, f=f)
