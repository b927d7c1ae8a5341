import json

import pytest

from master_script import parse_arguments, run_command
from setup.config_conf import MANIFEST_NAME, VERSION

LAME_CONFIG = """domain.outer = circle 0 0 2
domain.cavity = circle 0 0 1
domain.r0 = 0.4
domain.M1 = 20
mesh.h = 0.08
material.E = 1
material.nu = 0.3
load.segments = full pressure 1
run.seed = 3
"""

CLOSE_CAVITIES = """domain.outer = circle 0 0 3
domain.cavity = circle -0.12 0 0.1
domain.cavity = circle 0.12 0 0.1
domain.r0 = 0.1
domain.M1 = 100
mesh.h = 0.02
"""


def write_config(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return path


def run(command, config, output):
    return run_command([command, "--config", str(config), "--output", str(output)])


def test_parse_arguments():
    args = parse_arguments(["forward", "--config", "a.cfg", "--verbose"])
    assert args.command == "forward"
    assert args.config == "a.cfg"
    assert args.verbose
    with pytest.raises(SystemExit):
        parse_arguments(["solve", "--config", "a.cfg"])


def test_forward_writes_outputs_and_manifest(tmp_path):
    config = write_config(tmp_path, LAME_CONFIG)
    output = tmp_path / "out"
    assert run("forward", config, output) == 0

    displacement = (output / "displacement.csv").read_text().splitlines()
    assert displacement[0] == f"# gpscav {VERSION}"
    assert displacement[1] == "node,x1,x2,a1,a2"
    assert (output / "stress.csv").exists()
    report = (output / "forward_report.txt").read_text()
    assert report.startswith(f"# gpscav {VERSION} forward")
    assert "energy_identity_error" in report

    manifest = json.loads((output / MANIFEST_NAME).read_text())
    assert {"displacement.csv", "stress.csv", "forward_report.txt"} <= set(manifest)
    entry = manifest["displacement.csv"]
    assert entry["command"] == "forward"
    assert entry["seed"] == 3
    assert entry["version"] == VERSION


def test_forward_is_deterministic(tmp_path):
    config = write_config(tmp_path, LAME_CONFIG)
    assert run("forward", config, tmp_path / "first") == 0
    assert run("forward", config, tmp_path / "second") == 0
    for name in ("displacement.csv", "stress.csv", "forward_report.txt"):
        assert (tmp_path / "first" / name).read_bytes() == (tmp_path / "second" / name).read_bytes()


def test_mesh_command(tmp_path):
    config = write_config(tmp_path, LAME_CONFIG)
    assert run("mesh", config, tmp_path / "out") == 0
    assert (tmp_path / "out" / "mesh.gpsmesh").read_text().startswith("gpsmesh v1")


def test_invalid_config_exits_with_2(tmp_path):
    config = write_config(tmp_path, LAME_CONFIG.replace("material.nu = 0.3", "material.nu = 0.6"))
    assert run("forward", config, tmp_path / "out") == 2
    assert not (tmp_path / "out" / MANIFEST_NAME).exists()


def test_missing_config_exits_with_2(tmp_path):
    assert run("forward", tmp_path / "absent.cfg", tmp_path / "out") == 2


def test_close_cavities_exit_with_4(tmp_path):
    config = write_config(tmp_path, CLOSE_CAVITIES)
    assert run("mesh", config, tmp_path / "out") == 4


def test_missing_subcommand_key_exits_with_2(tmp_path):
    config = write_config(tmp_path, LAME_CONFIG)
    assert run("rates", config, tmp_path / "out") == 2


def test_airy_check_on_lame_cavity(tmp_path):
    config = write_config(tmp_path, LAME_CONFIG + "solver.order = 2\n")
    assert run("airy-check", config, tmp_path / "out") == 0
    report = (tmp_path / "out" / "airy-check_report.txt").read_text()
    assert "[airy boundary_0]" in report
    assert "dirichlet_phi" in report
    assert (tmp_path / "out" / "airy_boundary_0.csv").exists()


@pytest.mark.parametrize("command", ["airy-check", "forward", "profile"])
def test_every_command_checks_the_geometry_first(tmp_path, command):
    config = write_config(tmp_path, CLOSE_CAVITIES + "inverse.rho_values = 0.05\n")
    assert run(command, config, tmp_path / "out") == 4
    assert not (tmp_path / "out").exists()


def test_mesh_file_does_not_skip_the_geometry_check(tmp_path):
    lame = write_config(tmp_path, LAME_CONFIG, name="lame.cfg")
    assert run("mesh", lame, tmp_path / "lame_out") == 0

    config = write_config(tmp_path, CLOSE_CAVITIES + "mesh.file = lame_out/mesh.gpsmesh\n")
    assert run("forward", config, tmp_path / "out") == 4
    assert not (tmp_path / "out").exists()


def test_failing_patch_leaves_no_partial_outputs(tmp_path):
    # the interior disk sticks out of the outer circle
    text = LAME_CONFIG + "airy.patch_center = 1.9 0\nairy.patch_radius = 0.3\n"
    config = write_config(tmp_path, text)
    output = tmp_path / "out"
    assert run("airy-check", config, output) == 3
    assert not output.exists() or not any(output.iterdir())
