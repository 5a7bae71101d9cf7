from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
import logging
import warnings

import numpy as np
import scipy.linalg

from .elements import (
    CylMethod,
    EdgeContribution,
    edge_robin_contrib,
    edge_robin_contrib_axisymmetric,
    local_matrix,
)
from .errors import AssemblyError, ConfigError, SingularSystemError, SolverError
from .mesh import Mesh


logger = logging.getLogger(__name__)

RESIDUAL_TOLERANCE = 1e-9

Conductivity = float | Sequence[float] | np.ndarray


@dataclass(frozen=True, slots=True)
class RobinPair:
    h: float
    c: float


@dataclass(slots=True)
class BandedMatrix:
    n: int
    half_bandwidth: int
    # row-wise band: data[i, half_bandwidth + j - i] holds K[i, j]
    data: np.ndarray = field(repr=False)

    @classmethod
    def zeros(cls, n: int, half_bandwidth: int) -> BandedMatrix:
        return cls(n=n, half_bandwidth=half_bandwidth, data=np.zeros((n, 2 * half_bandwidth + 1)))

    def add(self, i: int, j: int, value: float) -> None:
        offset = j - i
        if abs(offset) > self.half_bandwidth:
            raise AssemblyError(
                f"entry ({i}, {j}) lies outside the half-bandwidth {self.half_bandwidth}"
            )
        self.data[i, self.half_bandwidth + offset] += value

    def get(self, i: int, j: int) -> float:
        offset = j - i
        if abs(offset) > self.half_bandwidth:
            return 0.0
        return float(self.data[i, self.half_bandwidth + offset])

    def to_dense(self) -> np.ndarray:
        dense = np.zeros((self.n, self.n))
        beta = self.half_bandwidth
        for offset in range(-beta, beta + 1):
            rows = np.arange(max(0, -offset), min(self.n, self.n - offset))
            dense[rows, rows + offset] = self.data[rows, beta + offset]
        return dense

    def matvec(self, x: np.ndarray) -> np.ndarray:
        beta = self.half_bandwidth
        padded = np.concatenate([np.zeros(beta), np.asarray(x, dtype=float), np.zeros(beta)])
        windows = np.lib.stride_tricks.sliding_window_view(padded, 2 * beta + 1)
        return np.einsum("ij,ij->i", self.data, windows[: self.n])

    def scaled(self, factor: float) -> BandedMatrix:
        return BandedMatrix(n=self.n, half_bandwidth=self.half_bandwidth, data=self.data * factor)

    def is_symmetric(self, tol: float = 0.0) -> bool:
        dense = self.to_dense()
        return bool(np.max(np.abs(dense - dense.T), initial=0.0) <= tol)


@dataclass(frozen=True, slots=True)
class GlobalSystem:
    K: BandedMatrix
    F: np.ndarray
    method: CylMethod
    permutation: np.ndarray
    constrained: bool

    def scaled(self, factor: float) -> GlobalSystem:
        return GlobalSystem(
            K=self.K.scaled(factor),
            F=self.F * factor,
            method=self.method,
            permutation=self.permutation,
            constrained=self.constrained,
        )


@dataclass(frozen=True, slots=True)
class Solution:
    T: np.ndarray
    residual_norm: float
    solver: str


def conductivity_table(conductivity: Conductivity, mesh: Mesh) -> np.ndarray:
    if np.isscalar(conductivity):
        needed = int(mesh.material_ids.max(initial=0)) + 1
        return np.full(needed, float(conductivity))
    table = np.asarray(conductivity, dtype=float).reshape(-1)
    if mesh.element_count and int(mesh.material_ids.max()) >= table.size:
        raise ConfigError(
            f"conductivity table has {table.size} entries but mesh uses material "
            f"{int(mesh.material_ids.max())}"
        )
    return table


def element_matrices(mesh: Mesh, method: CylMethod, conductivity: Conductivity) -> np.ndarray:
    method = CylMethod.parse(method)
    table = conductivity_table(conductivity, mesh)
    local = np.empty((mesh.element_count, 3, 3))
    for e in range(mesh.element_count):
        lam = table[mesh.material_ids[e]]
        local[e] = local_matrix(method, mesh.element_points(e), lam).k
    return local


def edge_contribution(
    mesh: Mesh,
    method: CylMethod,
    edge_index: int,
    pair: RobinPair,
) -> EdgeContribution:
    edge = mesh.boundary[edge_index]
    if method is CylMethod.MODIFIED_CONDUCTIVITY:
        radii = (float(mesh.nodes[edge.nodes[0], 0]), float(mesh.nodes[edge.nodes[1], 0]))
        return edge_robin_contrib_axisymmetric(edge, radii, pair.h, pair.c)
    return edge_robin_contrib(edge, pair.h, pair.c)


def assemble(
    mesh: Mesh,
    method: CylMethod | str,
    conductivity: Conductivity,
    bcs: Mapping[str, RobinPair],
) -> GlobalSystem:
    method = CylMethod.parse(method)
    missing = sorted({edge.surface_tag for edge in mesh.boundary if edge.surface_tag not in bcs}, key=str)
    if missing:
        raise ConfigError(f"no boundary condition for surface tag(s): {', '.join(map(str, missing))}")

    K = BandedMatrix.zeros(mesh.node_count, mesh.half_bandwidth)
    F = np.zeros(mesh.node_count)

    # scatter in element-id order so repeated runs add in the same sequence
    local = element_matrices(mesh, method, conductivity)
    for e in range(mesh.element_count):
        ids = mesh.elements[e]
        for a in range(3):
            for b in range(3):
                K.add(int(ids[a]), int(ids[b]), local[e, a, b])

    constrained = False
    for index, edge in enumerate(mesh.boundary):
        pair = bcs[edge.surface_tag]
        contribution = edge_contribution(mesh, method, index, pair)
        for a in range(2):
            F[edge.nodes[a]] += contribution.f[a]
            for b in range(2):
                K.add(edge.nodes[a], edge.nodes[b], contribution.g[a, b])
        constrained = constrained or pair.h > 0.0

    logger.debug(
        "Assembled %s system: n=%d, half-bandwidth=%d, constrained=%s",
        method.value,
        mesh.node_count,
        mesh.half_bandwidth,
        constrained,
    )
    return GlobalSystem(
        K=K,
        F=F,
        method=method,
        permutation=mesh.original_ids.copy(),
        constrained=constrained,
    )


class _ZeroPivot(Exception):
    pass


def _banded_lu_solve(K: BandedMatrix, rhs: np.ndarray) -> np.ndarray:
    beta = K.half_bandwidth
    n = K.n
    lu = K.data.copy()
    scale = float(np.max(np.abs(lu), initial=0.0))
    if scale == 0.0:
        raise _ZeroPivot(0)

    for k in range(n - 1):
        pivot = lu[k, beta]
        if abs(pivot) <= 1e-14 * scale:
            raise _ZeroPivot(k)
        last = min(k + beta, n - 1)
        upper = lu[k, beta + 1 : beta + 1 + last - k]
        for i in range(k + 1, last + 1):
            offset = beta + k - i
            if lu[i, offset] == 0.0:
                continue
            factor = lu[i, offset] / pivot
            lu[i, offset] = factor
            lu[i, offset + 1 : offset + 1 + last - k] -= factor * upper
    if abs(lu[n - 1, beta]) <= 1e-14 * scale:
        raise _ZeroPivot(n - 1)

    y = np.asarray(rhs, dtype=float).copy()
    for i in range(1, n):
        lo = max(0, i - beta)
        y[i] -= lu[i, beta - (i - lo) : beta] @ y[lo:i]
    x = y
    for i in range(n - 1, -1, -1):
        hi = min(n - 1, i + beta)
        x[i] = (x[i] - lu[i, beta + 1 : beta + 1 + hi - i] @ x[i + 1 : hi + 1]) / lu[i, beta]
    return x


def residual_norm(system: GlobalSystem, T: np.ndarray) -> float:
    residual = system.K.matvec(T) - system.F
    reference = float(np.max(np.abs(system.F), initial=0.0)) or 1.0
    return float(np.max(np.abs(residual), initial=0.0)) / reference


def _to_original(system: GlobalSystem, T: np.ndarray) -> np.ndarray:
    original = np.empty_like(T)
    original[system.permutation] = T
    return original


def _check_constrained(system: GlobalSystem) -> None:
    if not system.constrained:
        raise SingularSystemError(
            "system is singular: no Robin edge has h > 0, so a constant temperature "
            "shift lies in the nullspace"
        )


def solve_dense(system: GlobalSystem, tolerance: float = RESIDUAL_TOLERANCE) -> Solution:
    _check_constrained(system)
    with warnings.catch_warnings():
        warnings.simplefilter("error", scipy.linalg.LinAlgWarning)
        try:
            factors = scipy.linalg.lu_factor(system.K.to_dense(), check_finite=True)
            T = scipy.linalg.lu_solve(factors, system.F)
        except (scipy.linalg.LinAlgError, scipy.linalg.LinAlgWarning, ValueError) as ex:
            raise SingularSystemError(f"dense factorization failed: {ex}") from ex
    if not np.all(np.isfinite(T)):
        raise SingularSystemError("dense factorization produced non-finite temperatures")
    norm = residual_norm(system, T)
    if norm >= tolerance:
        raise SolverError(
            f"dense solve residual {norm:.3e} exceeds tolerance {tolerance:.1e}; "
            "system is numerically singular"
        )
    return Solution(T=_to_original(system, T), residual_norm=norm, solver="dense-pivoted")


def solve_banded(system: GlobalSystem, tolerance: float = RESIDUAL_TOLERANCE) -> Solution:
    _check_constrained(system)
    try:
        T = _banded_lu_solve(system.K, system.F)
    except _ZeroPivot as ex:
        logger.warning("Banded LU hit a zero pivot at row %s; falling back to dense pivoted LU", ex)
        return solve_dense(system, tolerance)

    norm = residual_norm(system, T) if np.all(np.isfinite(T)) else float("inf")
    if norm >= tolerance:
        logger.warning(
            "Banded LU residual %.3e >= %.1e; falling back to dense pivoted LU",
            norm,
            tolerance,
        )
        return solve_dense(system, tolerance)

    logger.debug("Banded LU solve: residual=%.3e", norm)
    return Solution(T=_to_original(system, T), residual_norm=norm, solver="banded-lu")
