from __future__ import annotations

from dataclasses import dataclass, field
import logging
import sys

from .verify import VerificationReport


PACKAGE_LOGGER = "receiver_fem"
LOG_LEVELS = {"summary": logging.WARNING, "normal": logging.INFO, "debug": logging.DEBUG}


@dataclass(slots=True)
class SolveReport:
    config_path: str = ""
    shape: str = ""
    method: str = ""
    nr: int = 0
    nz: int = 0
    node_count: int = 0
    element_count: int = 0
    boundary_edges: int = 0
    half_bandwidth_before: int = 0
    half_bandwidth: int = 0
    solver: str = ""
    residual_norm: float = 0.0
    t_min: float = 0.0
    t_max: float = 0.0
    surface_flows: dict[str, float] = field(default_factory=dict)
    absorbed: dict[str, float] = field(default_factory=dict)
    gross_input: float = 0.0
    net_imbalance: float = 0.0
    imbalance_fraction: float = 0.0
    outputs: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    errors: list[str] = field(default_factory=list)


@dataclass(slots=True)
class TagSummary:
    tag: str
    edges: int
    length: float


@dataclass(slots=True)
class MeshInfoReport:
    config_path: str = ""
    shape: str = ""
    nr: int = 0
    nz: int = 0
    node_count: int = 0
    element_count: int = 0
    boundary_edges: int = 0
    half_bandwidth_before: int = 0
    half_bandwidth_after: int = 0
    domain_area: float = 0.0
    element_area: float = 0.0
    perimeter: float = 0.0
    tagged_length: float = 0.0
    tags: list[TagSummary] = field(default_factory=list)
    violations: list[str] = field(default_factory=list)
    errors: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations and not self.errors


class _RuntimeFormatter(logging.Formatter):
    def __init__(self, use_color: bool) -> None:
        super().__init__("[runtime] %(message)s")
        self.theme = _ConsoleTheme(enabled=use_color)

    def format(self, record: logging.LogRecord) -> str:
        line = super().format(record)
        if record.levelno >= logging.ERROR:
            return self.theme.error(line)
        if record.levelno >= logging.WARNING:
            return self.theme.warn(line)
        return self.theme.runtime(line)


def configure_logging(log_level: str = "normal", use_color: bool = True) -> logging.Logger:
    logger = logging.getLogger(PACKAGE_LOGGER)
    for handler in list(logger.handlers):
        if getattr(handler, "_receiver_fem", False):
            logger.removeHandler(handler)
    handler = logging.StreamHandler(sys.stdout)
    handler._receiver_fem = True  # type: ignore[attr-defined]
    handler.setFormatter(_RuntimeFormatter(use_color))
    logger.addHandler(handler)
    logger.setLevel(LOG_LEVELS.get((log_level or "normal").lower(), logging.INFO))
    logger.propagate = False
    return logger


def _append_problems(lines: list[str], theme: _ConsoleTheme, warnings: list[str], errors: list[str]) -> None:
    if warnings:
        lines.append(theme.section("Warnings"))
        lines.extend(theme.warn(f"  ! {message}") for message in warnings)
    if errors:
        lines.append(theme.section("Errors"))
        lines.extend(theme.error(f"  x {message}") for message in errors)


def render_solve_report(report: SolveReport, use_color: bool = True, log_level: str = "normal") -> str:
    theme = _ConsoleTheme(enabled=use_color)
    level = (log_level or "normal").lower()
    lines = [theme.title(f"Receiver FEM | SOLVE | METHOD={report.method.upper() or '-'} | LOG={level.upper()}")]

    if report.node_count:
        lines.append(theme.section("Summary"))
        lines.append(f"  • config              : {report.config_path}")
        lines.append(f"  • geometry            : {report.shape} (nr={report.nr}, nz={report.nz})")
        lines.append(f"  • nodes / elements    : {report.node_count} / {report.element_count}")
        lines.append(f"  • boundary edges      : {report.boundary_edges}")
        lines.append(f"  • half-bandwidth      : {report.half_bandwidth_before} -> {report.half_bandwidth}")
        lines.append(f"  • solver              : {report.solver}")
        lines.append(f"  • residual norm       : {report.residual_norm:.3e}")
        lines.append(f"  • T min / max [K]     : {report.t_min:.3f} / {report.t_max:.3f}")

        lines.append(theme.section("Energy Balance"))
        for tag in sorted(report.surface_flows):
            lines.append(
                f"  • surface {tag}: flow {report.surface_flows[tag]:+.4e} W"
                f" (absorbed {report.absorbed.get(tag, 0.0):.4e} W)"
            )
        lines.append(f"  • gross input         : {report.gross_input:.4e} W")
        lines.append(f"  • net imbalance       : {report.net_imbalance:+.4e} W")
        lines.append(f"  • imbalance fraction  : {report.imbalance_fraction:.3e}")

    if report.outputs and level in {"normal", "debug"}:
        lines.append(theme.section("Outputs"))
        lines.extend(theme.success(f"  + {path}") for path in report.outputs)

    _append_problems(lines, theme, report.warnings, report.errors)
    return "\n".join(lines)


def render_verify_report(
    report: VerificationReport,
    use_color: bool = True,
    log_level: str = "normal",
    errors: list[str] | None = None,
) -> str:
    theme = _ConsoleTheme(enabled=use_color)
    level = (log_level or "normal").lower()
    lines = [theme.title(f"Receiver FEM | VERIFY | LOG={level.upper()}")]
    lines.append(theme.section("Verification"))
    for case in report.cases:
        status = "OK" if case.passed else "FAILED"
        painter = theme.success if case.passed else theme.error
        lines.append(
            painter(
                f"  • {case.name:<6} {case.method.value:<10} nr={case.resolution:<4}"
                f" max rel error {case.max_relative_error:.3e} < {case.threshold:.0e}: {status}"
            )
        )
        if level == "debug" or (case.name == "radial" and level == "normal"):
            for key, value in case.details.items():
                lines.append(f"      {key:<20}: {value:.6g}")
    if report.cases:
        painter = theme.success if report.passed else theme.error
        lines.append(painter(f"  Result: {'PASSED' if report.passed else 'FAILED'}"))
    _append_problems(lines, theme, [], errors or [])
    return "\n".join(lines)


def render_mesh_report(report: MeshInfoReport, use_color: bool = True, log_level: str = "normal") -> str:
    theme = _ConsoleTheme(enabled=use_color)
    level = (log_level or "normal").lower()
    lines = [theme.title(f"Receiver FEM | MESH-INFO | LOG={level.upper()}")]

    if report.node_count:
        lines.append(theme.section("Summary"))
        lines.append(f"  • config              : {report.config_path}")
        lines.append(f"  • geometry            : {report.shape} (nr={report.nr}, nz={report.nz})")
        lines.append(f"  • nodes / elements    : {report.node_count} / {report.element_count}")
        lines.append(f"  • boundary edges      : {report.boundary_edges}")
        lines.append(
            f"  • half-bandwidth      : {report.half_bandwidth_before} -> {report.half_bandwidth_after}"
        )
        lines.append(f"  • area (domain/mesh)  : {report.domain_area:.6e} / {report.element_area:.6e} m^2")
        lines.append(f"  • perimeter / tagged  : {report.perimeter:.6e} / {report.tagged_length:.6e} m")

        lines.append(theme.section("Surfaces"))
        for item in report.tags:
            lines.append(f"  • {item.tag}: {item.edges} edges, {item.length:.6e} m")

        lines.append(theme.section("Validation"))
        if report.violations:
            lines.extend(theme.error(f"  x {message}") for message in report.violations)
        else:
            lines.append(theme.success("  • mesh valid"))

    _append_problems(lines, theme, [], report.errors)
    return "\n".join(lines)


class _ConsoleTheme:
    def __init__(self, enabled: bool) -> None:
        self.enabled = enabled

    def _paint(self, text: str, code: str) -> str:
        if not self.enabled:
            return text
        return f"\033[{code}m{text}\033[0m"

    def title(self, text: str) -> str:
        return self._paint(text, "1;36")

    def section(self, text: str) -> str:
        return self._paint(text, "1;35")

    def runtime(self, text: str) -> str:
        return self._paint(text, "36")

    def success(self, text: str) -> str:
        return self._paint(text, "32")

    def warn(self, text: str) -> str:
        return self._paint(text, "33")

    def error(self, text: str) -> str:
        return self._paint(text, "31")
