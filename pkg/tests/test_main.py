"""Tests for the command-line interface."""

import json

import pytest
import yaml

from elasticity_imaging import db
from elasticity_imaging.main import create_argument_parser, main
from tests.conftest import TINY_CONFIG


@pytest.fixture
def config_file(temp_dir):
    path = temp_dir / "experiment.yaml"
    path.write_text(yaml.safe_dump(TINY_CONFIG))
    return str(path)


def last_json_line(capsys):
    lines = [line for line in capsys.readouterr().out.splitlines() if line.strip()]
    return json.loads(lines[-1])


class TestArgumentParser:
    """Test command line parsing."""

    def test_parse_sweep(self):
        args = create_argument_parser().parse_args(
            ["sweep", "--out", "results", "--workers", "4", "--fresh", "--seed", "7"]
        )
        assert args.command == "sweep"
        assert args.out == "results"
        assert args.workers == 4
        assert args.fresh is True
        assert args.seed == 7

    def test_unknown_command(self):
        with pytest.raises(SystemExit) as excinfo:
            create_argument_parser().parse_args(["invert"])
        assert excinfo.value.code == 2

    def test_render_requires_mesh_and_field(self, temp_dir):
        with pytest.raises(SystemExit) as excinfo:
            main(["render", "--out", str(temp_dir)])
        assert excinfo.value.code == 2


class TestMain:
    """Test end-to-end command execution."""

    def test_mesh_command(self, config_file, temp_dir, capsys):
        out = str(temp_dir / "out")
        main(["mesh", "--config", config_file, "--out", out])
        assert last_json_line(capsys) == {"status": "ok", "out": out}
        assert (temp_dir / "out" / "mesh.txt").exists()

        connection = db.init(out)
        try:
            run = db.Run.select().get()
            assert run.verb == "mesh"
            assert run.status == "ok"
        finally:
            connection.close()

    def test_missing_config(self, temp_dir, capsys):
        with pytest.raises(SystemExit) as excinfo:
            main(["mesh", "--config", str(temp_dir / "missing.yaml"), "--out", str(temp_dir)])
        assert excinfo.value.code == 1
        assert last_json_line(capsys)["error"] == "ConfigError"

    def test_invalid_override(self, config_file, temp_dir, capsys):
        with pytest.raises(SystemExit) as excinfo:
            main(["sweep", "--config", config_file, "--out", str(temp_dir), "--workers", "0"])
        assert excinfo.value.code == 1
        assert last_json_line(capsys)["error"] == "ConfigError"

    def test_render_mismatched_field(self, config_file, temp_dir, capsys):
        out = str(temp_dir / "out")
        main(["mesh", "--config", config_file, "--out", out])
        field = temp_dir / "field.csv"
        field.write_text("value\n1\n2\n")
        with pytest.raises(SystemExit) as excinfo:
            main(
                [
                    "render",
                    "--config",
                    config_file,
                    "--out",
                    out,
                    "--mesh",
                    str(temp_dir / "out" / "mesh.txt"),
                    "--field",
                    str(field),
                ]
            )
        assert excinfo.value.code == 1
        error = last_json_line(capsys)
        assert error["error"] == "ExperimentError"
        assert "rows" in error["message"]

        connection = db.init(out)
        try:
            statuses = [run.status for run in db.Run.select().order_by(db.Run.id)]
            assert statuses == ["ok", "failed"]
        finally:
            connection.close()
