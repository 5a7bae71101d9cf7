from __future__ import annotations

import argparse
from pathlib import Path
import sys

from .config import load_config, merge_cli_overrides
from .elements import CylMethod
from .engine import run_mesh_info, run_solve
from .errors import ReceiverFemError
from .report import (
    MeshInfoReport,
    SolveReport,
    configure_logging,
    render_mesh_report,
    render_solve_report,
    render_verify_report,
)
from .verify import VerificationReport, run_verification_suite


EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4

_EXIT_BY_CATEGORY = {
    "config": EXIT_CONFIG,
    "material": EXIT_CONFIG,
    "domain": EXIT_CONFIG,
    "geometry": EXIT_NUMERICAL,
    "element": EXIT_NUMERICAL,
    "assembly": EXIT_NUMERICAL,
    "solver": EXIT_NUMERICAL,
    "quadrature": EXIT_NUMERICAL,
    "io": EXIT_IO,
}


def exit_code_for(error: ReceiverFemError) -> int:
    return _EXIT_BY_CATEGORY.get(error.category, EXIT_NUMERICAL)


def _format_error(error: ReceiverFemError) -> str:
    return f"[{error.category}] {error}"


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--no-color", action="store_true", help="disable ANSI colored console output")
    parser.add_argument(
        "--log-level",
        choices=["summary", "normal", "debug"],
        default="normal",
        help="console logging detail level (default: normal)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="receiver-fem")
    commands = parser.add_subparsers(dest="command", required=True)

    solve = commands.add_parser("solve", help="solve a receiver configuration and export fields")
    solve.add_argument("--config", required=True, help="path to .toml/.json/.yaml/.yml config")
    solve.add_argument(
        "--method",
        choices=[method.value for method in CylMethod],
        help="treatment of the cylindrical 1/r term (overrides solver.method)",
    )
    solve.add_argument("--nr", type=int, help="radial cell count (overrides mesh.nr)")
    solve.add_argument("--nz", type=int, help="axial cell count (overrides mesh.nz)")
    solve.add_argument("--out", help="output path prefix (overrides output.prefix)")
    solve.add_argument("--format", help="comma-separated formats from csv,vtk,pgm,flux")
    _add_common(solve)

    verify = commands.add_parser("verify", help="run the analytic verification suite")
    verify.add_argument("--resolution", type=int, default=32, help="radial cell count (default: 32)")
    _add_common(verify)

    mesh_info = commands.add_parser("mesh-info", help="print mesh statistics for a configuration")
    mesh_info.add_argument("--config", required=True, help="path to .toml/.json/.yaml/.yml config")
    _add_common(mesh_info)
    return parser


def run_config(
    config_path: Path,
    method: str | None = None,
    nr: int | None = None,
    nz: int | None = None,
    out: str | None = None,
    formats: str | None = None,
    use_color: bool = True,
    log_level: str = "normal",
) -> int:
    report = SolveReport(config_path=str(config_path))
    exit_code = EXIT_OK
    try:
        config = merge_cli_overrides(
            load_config(config_path),
            method=method,
            nr=nr,
            nz=nz,
            out=out,
            formats=formats,
        )
        report = run_solve(config, config_path=config_path)
    except ReceiverFemError as ex:
        report.errors.append(_format_error(ex))
        exit_code = exit_code_for(ex)
    print(render_solve_report(report, use_color=use_color, log_level=log_level))
    return exit_code


def run_verify(resolution: int, use_color: bool = True, log_level: str = "normal") -> int:
    report = VerificationReport()
    errors: list[str] = []
    exit_code = EXIT_OK
    try:
        report = run_verification_suite(resolution=resolution)
        exit_code = EXIT_OK if report.passed else EXIT_VERIFY_FAILED
    except ReceiverFemError as ex:
        errors.append(_format_error(ex))
        exit_code = exit_code_for(ex)
    print(render_verify_report(report, use_color=use_color, log_level=log_level, errors=errors))
    return exit_code


def run_mesh_info_command(config_path: Path, use_color: bool = True, log_level: str = "normal") -> int:
    report = MeshInfoReport(config_path=str(config_path))
    try:
        report = run_mesh_info(load_config(config_path), config_path=config_path)
        exit_code = EXIT_OK if report.passed else EXIT_NUMERICAL
    except ReceiverFemError as ex:
        report.errors.append(_format_error(ex))
        exit_code = exit_code_for(ex)
    print(render_mesh_report(report, use_color=use_color, log_level=log_level))
    return exit_code


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    use_color = not args.no_color
    configure_logging(args.log_level, use_color)

    if args.command == "solve":
        return run_config(
            Path(args.config).resolve(),
            method=args.method,
            nr=args.nr,
            nz=args.nz,
            out=args.out,
            formats=args.format,
            use_color=use_color,
            log_level=args.log_level,
        )
    if args.command == "verify":
        return run_verify(args.resolution, use_color=use_color, log_level=args.log_level)
    return run_mesh_info_command(Path(args.config).resolve(), use_color=use_color, log_level=args.log_level)


if __name__ == "__main__":
    sys.exit(main())
