from __future__ import annotations


class ReceiverFemError(Exception):
    category = "error"


class ConfigError(ReceiverFemError, ValueError):
    category = "config"


class GeometryError(ReceiverFemError, ValueError):
    category = "geometry"


class MaterialError(ReceiverFemError, ValueError):
    category = "material"


class DomainError(ReceiverFemError, ValueError):
    category = "domain"


class UnsupportedElementError(ReceiverFemError):
    category = "element"


class AssemblyError(ReceiverFemError):
    category = "assembly"


class SolverError(ReceiverFemError):
    category = "solver"


class SingularSystemError(SolverError):
    pass


class QuadratureNonconvergenceError(ReceiverFemError):
    category = "quadrature"


class ExportError(ReceiverFemError):
    category = "io"
