from pathlib import Path

import pytest

from setup.config_conf import DEFAULT_NU, DEFAULT_SIGMA_SAMPLES
from setup.run_config import load_run_config, parse_config
from utilities.errors import ConfigError

LAME_CONFIG = """# Lame annulus
domain.outer = circle 0 0 2
domain.cavity = circle 0 0 1
domain.r0 = 0.4
domain.M1 = 20
mesh.h = 0.08
material.E = 1
material.nu = 0.3
load.segments = full pressure 1
"""


def test_parse_lame_config():
    config = parse_config(LAME_CONFIG)
    assert config["domain.r0"] == 0.4
    assert config["material.nu"] == 0.3
    assert config["domain.cavity"][0].rho0 == 1.0
    assert config.line_of("material.nu") == 8
    assert config.line_of("domain.cavity") == 3


def test_defaults_for_missing_keys():
    config = parse_config("domain.outer = circle 0 0 1\n")
    assert config["material.nu"] == DEFAULT_NU
    assert config["inverse.sigma_samples"] == DEFAULT_SIGMA_SAMPLES
    assert config["domain.cavity"] == []
    assert config["load.project"] is True
    assert config["inverse.reg_weight"] is None


def test_repeatable_keys_accumulate():
    config = parse_config(
        "domain.outer = circle 0 0 3\n"
        "domain.cavity = circle -1 0 0.2\n"
        "domain.cavity = circle 1 0 0.2\n"
    )
    assert [c.center.x1 for c in config["domain.cavity"]] == [-1.0, 1.0]
    assert config.lines["domain.cavity"] == [2, 3]


def test_comments_and_blank_lines_are_ignored():
    config = parse_config("\n   # nothing\nmesh.h = 0.1  # coarse\n\n")
    assert config["mesh.h"] == 0.1
    assert config.line_of("mesh.h") == 3


@pytest.mark.parametrize(
    "text, key, line",
    [
        ("mesh.h 0.1", None, 1),
        ("mesh.h = 0.1\nmesh.size = 2", "mesh.size", 2),
        ("mesh.h = 0.1\nmesh.h = 0.2", "mesh.h", 2),
        ("mesh.h = tiny", "mesh.h", 1),
        ("mesh.h =", "mesh.h", 1),
        ("mesh.h = nan", "mesh.h", 1),
        ("solver.order = 3", "solver.order", 1),
        ("solver.method = cholesky", "solver.method", 1),
        ("domain.outer = square 0 0 1", "domain.outer", 1),
        ("inverse.s = 1.0", "inverse.s", 1),
    ],
)
def test_invalid_lines_name_key_and_line(text, key, line):
    with pytest.raises(ConfigError) as excinfo:
        parse_config(text)
    assert excinfo.value.key == key
    assert excinfo.value.line == line
    assert f"line {line}" in str(excinfo.value)


def test_out_of_range_poisson_ratio():
    with pytest.raises(ConfigError) as excinfo:
        parse_config(LAME_CONFIG.replace("material.nu = 0.3", "material.nu = 0.6"))
    message = str(excinfo.value)
    assert "material.nu" in message
    assert "(-1, 0.5)" in message
    assert excinfo.value.exit_code == 2


def test_reg_weight_auto_and_bool_values():
    config = parse_config("inverse.reg_weight = auto\nload.project = no\n")
    assert config["inverse.reg_weight"] is None
    assert config["load.project"] is False
    assert parse_config("inverse.reg_weight = 0.01")["inverse.reg_weight"] == 0.01


def test_digest_ignores_layout():
    a = parse_config(LAME_CONFIG)
    b = parse_config("\n".join(reversed(LAME_CONFIG.splitlines())) + "\n# trailing\n")
    assert a.digest == b.digest
    c = parse_config(LAME_CONFIG.replace("mesh.h = 0.08", "mesh.h = 0.05"))
    assert c.digest != a.digest


def test_domain_material_and_traction_are_built_lazily():
    config = parse_config(LAME_CONFIG)
    assert config._domain is None
    config.validate()
    assert config.domain.r0 == 0.4
    assert len(config.domain.cavities) == 1
    assert config.material.h == 1.0
    assert len(config.traction.segments) == 1


def test_bad_segment_reports_its_line():
    text = LAME_CONFIG + "load.segments = 0 1 spiral 2\n"
    config = parse_config(text)
    with pytest.raises(ConfigError) as excinfo:
        config.validate()
    assert excinfo.value.key == "load.segments"
    assert excinfo.value.line == 10


def test_radial_moduli_come_in_pairs():
    config = parse_config("domain.outer = circle 0 0 1\nmaterial.lambda_expr = 1 0.1\n")
    with pytest.raises(ConfigError) as excinfo:
        config.validate()
    assert excinfo.value.key == "material.mu_expr"


def test_family_direction_needs_t_values():
    config = parse_config(LAME_CONFIG + "inverse.family_direction = 0 0 1\n")
    with pytest.raises(ConfigError, match="inverse.t_values"):
        config.validate()


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="does not exist"):
        load_run_config(tmp_path / "absent.cfg")


def test_relative_paths_follow_config_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text(LAME_CONFIG + "run.output_dir = out\n")
    config = load_run_config(path)
    assert config.output_dir == tmp_path / "out"


CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


@pytest.mark.parametrize("path", sorted(CONFIG_DIR.glob("*.cfg")), ids=lambda p: p.name)
def test_shipped_configs_validate(path):
    config = load_run_config(path)
    assert config.domain.r0 > 0.0
    assert config.output_dir.parent.name == "gpscav_output"
