from pathlib import Path

import pytest

from receiver_fem.cli import EXIT_CONFIG, EXIT_IO, main
from receiver_fem.config import load_config
from receiver_fem.engine import run_solve
from receiver_fem.mesh import generate_mesh


CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs"
RECEIVER_CONFIG = CONFIG_DIR / "receiver.toml"
CYLINDER_CONFIG = CONFIG_DIR / "cylinder.toml"


def test_cli_solve_writes_csv(tmp_path: Path) -> None:
    prefix = tmp_path / "run"

    rc = main(
        [
            "solve",
            "--config",
            str(RECEIVER_CONFIG),
            "--out",
            str(prefix),
            "--format",
            "csv",
            "--nr",
            "8",
            "--nz",
            "10",
            "--no-color",
        ]
    )

    assert rc == 0
    output = tmp_path / "run_temperature.csv"
    assert output.exists()
    assert not (tmp_path / "run_temperature.vtk").exists()
    mesh = generate_mesh(load_config(RECEIVER_CONFIG).geometry.to_geometry(), 8, 10)
    assert len(output.read_text(encoding="utf-8").splitlines()) == mesh.node_count + 1


def test_cli_method_flag_beats_config(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    rc = main(
        [
            "solve",
            "--config",
            str(RECEIVER_CONFIG),
            "--method",
            "masscenter",
            "--out",
            str(tmp_path / "mc"),
            "--nr",
            "6",
            "--nz",
            "8",
            "--no-color",
        ]
    )

    assert rc == 0
    out = capsys.readouterr().out
    assert "METHOD=MASSCENTER" in out
    assert "imbalance" in out.lower()


def test_cli_solve_cylinder_all_formats(tmp_path: Path) -> None:
    rc = main(["solve", "--config", str(CYLINDER_CONFIG), "--out", str(tmp_path / "cyl"), "--no-color"])

    assert rc == 0
    for name in ("cyl_temperature.csv", "cyl_temperature.vtk", "cyl_temperature.pgm", "cyl_flux.csv"):
        assert (tmp_path / name).exists()


def test_cli_verify_passes(capsys: pytest.CaptureFixture[str]) -> None:
    rc = main(["verify", "--no-color"])

    assert rc == 0
    assert "Result: PASSED" in capsys.readouterr().out


def test_cli_mesh_info(capsys: pytest.CaptureFixture[str]) -> None:
    rc = main(["mesh-info", "--config", str(RECEIVER_CONFIG), "--no-color"])

    assert rc == 0
    assert "MESH-INFO" in capsys.readouterr().out


def test_cli_bad_config_exits_with_config_code(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    config = tmp_path / "bad.toml"
    config.write_text(
        RECEIVER_CONFIG.read_text(encoding="utf-8").replace("wall_height", "wall_heigth"),
        encoding="utf-8",
    )

    rc = main(["solve", "--config", str(config), "--no-color"])

    assert rc == EXIT_CONFIG
    assert "geometry.wall_heigth" in capsys.readouterr().out


def test_cli_missing_config_file(tmp_path: Path) -> None:
    assert main(["solve", "--config", str(tmp_path / "absent.toml"), "--no-color"]) == EXIT_CONFIG


def test_cli_unwritable_output_is_io_error(tmp_path: Path) -> None:
    blocker = tmp_path / "blocker"
    blocker.write_text("file", encoding="utf-8")

    rc = main(
        [
            "solve",
            "--config",
            str(CYLINDER_CONFIG),
            "--out",
            str(blocker / "run"),
            "--nr",
            "4",
            "--no-color",
        ]
    )

    assert rc == EXIT_IO


def test_repeated_runs_are_byte_identical(tmp_path: Path) -> None:
    outputs = []
    for name in ("first", "second"):
        config = load_config(RECEIVER_CONFIG)
        config.mesh.nr = 8
        config.mesh.nz = 10
        config.output.formats = ["csv", "vtk"]
        config.output.prefix = str(tmp_path / name)
        outputs.append(run_solve(config).outputs)

    for first, second in zip(*outputs):
        assert Path(first).read_bytes() == Path(second).read_bytes()


def test_cli_non_list_formats_exits_with_config_code(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    config = tmp_path / "numeric_formats.toml"
    config.write_text(
        CYLINDER_CONFIG.read_text(encoding="utf-8").replace('formats = "csv,vtk,pgm,flux"', "formats = 5"),
        encoding="utf-8",
    )

    rc = main(["solve", "--config", str(config), "--no-color"])

    assert rc == EXIT_CONFIG
    assert "output.formats" in capsys.readouterr().out
