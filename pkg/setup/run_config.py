"""
Run configuration: parsing and validation of the line-oriented config format
shared by every subcommand.

    # comment
    section.key = value

Every key is declared once in SCHEMA with its parser, default and whether it
may repeat. All sections are validated on every subcommand.
"""
import hashlib
import logging
import math
from dataclasses import dataclass
from pathlib import Path

from elasticity.traction import TractionSpec
from geometry.shapes import DomainSpec, Point2, StarShape
from material.plate_material import LameField, PlateMaterial, ScalarField
from setup.config_conf import (
    DEFAULT_D0_FACTOR,
    DEFAULT_DISCREPANCY_FACTOR,
    DEFAULT_E,
    DEFAULT_FIT_RADIUS,
    DEFAULT_LPS_OFFSET,
    DEFAULT_MAX_ITER,
    DEFAULT_MESH_H,
    DEFAULT_NU,
    DEFAULT_ORDER,
    DEFAULT_SANDWICH_SLACK,
    DEFAULT_SEED,
    DEFAULT_SIGMA_SAMPLES,
    DEFAULT_SOLVER_METHOD,
    DEFAULT_SOLVER_TOL,
    DEFAULT_THICKNESS,
    DEFAULT_THREADS,
    MAX_FOURIER_MODES,
    OUTPUT_DIR,
)
from utilities.errors import ConfigError, GpsCavError

logger = logging.getLogger(__name__)


def _float(text):
    value = float(text)
    if not math.isfinite(value):
        raise ValueError(f"'{text}' is not finite")
    return value


def _int(text):
    return int(text)


def _bool(text):
    lowered = text.lower()
    if lowered in ("true", "yes", "1", "on"):
        return True
    if lowered in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"'{text}' is not a boolean")


def _floats(text):
    values = [_float(v) for v in text.replace(",", " ").split()]
    if not values:
        raise ValueError("empty list")
    return tuple(values)


def _point(text):
    values = _floats(text)
    if len(values) != 2:
        raise ValueError(f"expected two coordinates, got {len(values)}")
    return values


def _interval(text):
    if text.strip() == "full":
        return None
    values = _floats(text)
    if len(values) != 2:
        raise ValueError("expected 's0 s1' or 'full'")
    return values


def _shape(text):
    return StarShape.from_line(text)


def _weight(text):
    return None if text.strip() == "auto" else _float(text)


def _text(text):
    return text


def _choice(*options):
    def parse(text):
        if text not in options:
            raise ValueError(f"'{text}' is not one of {', '.join(options)}")
        return text

    return parse


def _positive(v):
    return v > 0.0


def _non_negative(v):
    return v >= 0.0


def _all_positive(values):
    return all(v > 0.0 for v in values)


@dataclass(frozen=True)
class KeySpec:
    parse: object
    default: object = None
    check: object = None
    bound: str = ""
    repeatable: bool = False


SCHEMA = {
    "run.seed": KeySpec(_int, DEFAULT_SEED, _non_negative, ">= 0"),
    "run.threads": KeySpec(_int, DEFAULT_THREADS, lambda v: v >= 1, ">= 1"),
    "run.output_dir": KeySpec(_text, None),
    "domain.outer": KeySpec(_shape, None),
    "domain.cavity": KeySpec(_shape, None, repeatable=True),
    "domain.sigma_anchor": KeySpec(_point, None),
    "domain.sigma_interval": KeySpec(_interval, None),
    "domain.r0": KeySpec(_float, 1.0, _positive, "> 0"),
    "domain.M0": KeySpec(_float, 1.0, _positive, "> 0"),
    "domain.M1": KeySpec(_float, 10.0, _positive, "> 0"),
    "domain.alpha": KeySpec(_float, 0.5, lambda v: 0.0 < v <= 1.0, "(0, 1]"),
    "mesh.h": KeySpec(_float, DEFAULT_MESH_H, _positive, "> 0"),
    "mesh.h_cavity": KeySpec(_float, None, _positive, "> 0"),
    "mesh.grading": KeySpec(_float, None, _positive, "> 0"),
    "mesh.file": KeySpec(_text, None),
    "material.E": KeySpec(_float, DEFAULT_E, _positive, "> 0"),
    "material.nu": KeySpec(_float, DEFAULT_NU, lambda v: -1.0 < v < 0.5, "(-1, 0.5)"),
    "material.h": KeySpec(_float, DEFAULT_THICKNESS, _positive, "> 0"),
    "material.lambda_expr": KeySpec(_floats, None),
    "material.mu_expr": KeySpec(_floats, None),
    "material.alpha0": KeySpec(_float, None, _positive, "> 0"),
    "material.gamma0": KeySpec(_float, None, _positive, "> 0"),
    "material.Lambda0": KeySpec(_float, None, _positive, "> 0"),
    "load.segments": KeySpec(_text, None, repeatable=True),
    "load.project": KeySpec(_bool, True),
    "solver.order": KeySpec(_int, DEFAULT_ORDER, lambda v: v in (1, 2), "1 or 2"),
    "solver.tol": KeySpec(_float, DEFAULT_SOLVER_TOL, _positive, "> 0"),
    "solver.method": KeySpec(_choice("direct", "iterative"), DEFAULT_SOLVER_METHOD),
    "airy.patch_radius": KeySpec(_float, None, _positive, "> 0"),
    "airy.patch_center": KeySpec(_point, None),
    "airy.cavity": KeySpec(_int, 0, _non_negative, ">= 0"),
    "airy.slack": KeySpec(_float, DEFAULT_SANDWICH_SLACK, _non_negative, ">= 0"),
    "airy.fit_radius": KeySpec(_float, DEFAULT_FIT_RADIUS, _positive, "> 0"),
    "airy.anchor_theta": KeySpec(_float, 0.0),
    "inverse.family_direction": KeySpec(_floats, None),
    "inverse.t_values": KeySpec(_floats, None),
    "inverse.sigma_samples": KeySpec(_int, DEFAULT_SIGMA_SAMPLES, lambda v: v >= 1, ">= 1"),
    "inverse.d0_factor": KeySpec(_float, DEFAULT_D0_FACTOR, _positive, "> 0"),
    "inverse.s": KeySpec(_float, DEFAULT_LPS_OFFSET, lambda v: v > 1.0, "> 1"),
    "inverse.rho_values": KeySpec(_floats, None, _all_positive, "all > 0"),
    "inverse.radii": KeySpec(_floats, None, _all_positive, "all > 0"),
    "inverse.rate_center": KeySpec(_point, None),
    "inverse.rate_mode": KeySpec(_choice("interior", "boundary"), "interior"),
    "inverse.target": KeySpec(_shape, None),
    "inverse.reg_weight": KeySpec(_weight, None, lambda v: v is None or v >= 0.0, "'auto' or >= 0"),
    "inverse.noise": KeySpec(_float, 0.0, _non_negative, ">= 0"),
    "inverse.max_iter": KeySpec(_int, DEFAULT_MAX_ITER, lambda v: v >= 1, ">= 1"),
    "inverse.modes": KeySpec(_int, None, lambda v: 0 <= v <= MAX_FOURIER_MODES, f"0..{MAX_FOURIER_MODES}"),
    "inverse.discrepancy": KeySpec(_float, DEFAULT_DISCREPANCY_FACTOR, lambda v: v > 1.0, "> 1"),
}


class RunConfig:
    """Parsed and validated run configuration.

    Values are looked up with ``config["section.key"]``; missing keys give their
    schema default, repeatable keys a list.
    """

    def __init__(self, values, lines, source="<string>", text=""):
        self.values = values
        self.lines = lines
        self.source = source
        self.text = text
        self._domain = None
        self._material = None
        self._traction = None

    def __getitem__(self, key):
        if key not in SCHEMA:
            raise KeyError(key)
        spec = SCHEMA[key]
        if key in self.values:
            return self.values[key]
        return [] if spec.repeatable else spec.default

    def line_of(self, key):
        line = self.lines.get(key)
        return line[0] if isinstance(line, list) else line

    @property
    def digest(self):
        """SHA-256 of the canonical key = value listing."""
        canonical = "\n".join(f"{key} = {self.values[key]!r}" for key in sorted(self.values))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    @property
    def output_dir(self):
        value = self["run.output_dir"]
        if value is None:
            return OUTPUT_DIR
        path = Path(value)
        if not path.is_absolute() and self.source != "<string>":
            path = Path(self.source).parent / path
        return path

    @property
    def mesh_file(self):
        value = self["mesh.file"]
        if value is None:
            return None
        path = Path(value)
        if not path.is_absolute() and self.source != "<string>":
            path = Path(self.source).parent / path
        return path

    def _wrap(self, key, build):
        try:
            return build()
        except ConfigError as e:
            if e.key is None or e.line is None:
                raise ConfigError(str(e).split(": ", 1)[-1] if e.key else str(e),
                                  key=e.key or key, line=self.line_of(e.key or key)) from e
            raise
        except GpsCavError as e:
            raise ConfigError(str(e), key=key, line=self.line_of(key)) from e

    @property
    def domain(self):
        if self._domain is None:
            self._domain = self._wrap("domain.outer", self._build_domain)
        return self._domain

    def _build_domain(self):
        outer = self["domain.outer"]
        if outer is None:
            raise ConfigError("a domain.outer shape is required", key="domain.outer")
        anchor = self["domain.sigma_anchor"]
        return DomainSpec(
            outer=outer,
            cavities=tuple(self["domain.cavity"]),
            r0=self["domain.r0"],
            M0=self["domain.M0"],
            M1=self["domain.M1"],
            alpha=self["domain.alpha"],
            sigma_interval=self["domain.sigma_interval"],
            sigma_anchor=Point2(*anchor) if anchor is not None else None,
        )

    @property
    def material(self):
        if self._material is None:
            self._material = self._wrap("material.E", self._build_material)
        return self._material

    def _build_material(self):
        lam_expr, mu_expr = self["material.lambda_expr"], self["material.mu_expr"]
        bounds = {name: self[f"material.{name}"] for name in ("alpha0", "gamma0", "Lambda0")}
        if (lam_expr is None) != (mu_expr is None):
            raise ConfigError("lambda_expr and mu_expr must be given together", key="material.mu_expr")
        if lam_expr is None:
            return PlateMaterial.homogeneous(self["material.E"], self["material.nu"], self["material.h"], **bounds)
        lame = LameField(ScalarField.radial(lam_expr), ScalarField.radial(mu_expr), **bounds)
        return PlateMaterial(h=self["material.h"], lame=lame)

    @property
    def traction(self):
        if self._traction is None:
            domain = self.domain
            segments = []
            for text, line in zip(self["load.segments"], self.lines.get("load.segments", [])):
                try:
                    segments.append(TractionSpec.parse_segment(domain, text))
                except ConfigError as e:
                    raise ConfigError(str(e).split(": ", 1)[-1], key="load.segments", line=line) from e
            self._traction = TractionSpec(domain, tuple(segments))
        return self._traction

    def validate(self):
        """Build the domain, material and load so every section is checked.

        Raises:
            ConfigError: Naming the offending key and line
        """
        self.domain
        self.material
        self.traction
        if self["inverse.family_direction"] is not None and self["inverse.t_values"] is None:
            raise ConfigError("inverse.family_direction needs inverse.t_values", key="inverse.t_values")
        mesh_file = self.mesh_file
        if mesh_file is not None and not mesh_file.exists():
            raise ConfigError(f"file {mesh_file} does not exist", key="mesh.file", line=self.line_of("mesh.file"))
        return self


def parse_config(text, source="<string>"):
    """Parse config text into a RunConfig without building domain objects.

    Raises:
        ConfigError: For syntax errors, unknown or duplicate keys, and
            unparseable or out-of-range values, naming the key and line
    """
    values = {}
    lines = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'section.key = value', got '{raw.strip()}'", line=number)
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError("unknown key", key=key, line=number)
        spec = SCHEMA[key]
        if not value:
            raise ConfigError("empty value", key=key, line=number)
        if key in values and not spec.repeatable:
            raise ConfigError(f"duplicate key (first set on line {lines[key]})", key=key, line=number)
        try:
            parsed = spec.parse(value)
        except ConfigError as e:
            raise ConfigError(str(e), key=key, line=number) from e
        except (ValueError, GpsCavError) as e:
            raise ConfigError(f"cannot parse '{value}': {e}", key=key, line=number) from e
        if spec.check is not None and parsed is not None and not spec.check(parsed):
            raise ConfigError(f"value {value} outside range {spec.bound}", key=key, line=number)
        if spec.repeatable:
            values.setdefault(key, []).append(parsed)
            lines.setdefault(key, []).append(number)
        else:
            values[key] = parsed
            lines[key] = number
    logger.debug(f"Parsed {len(values)} config keys from {source}")
    return RunConfig(values, lines, source, text)


def load_run_config(path):
    """Read, parse and validate a config file.

    Args:
        path (str | Path): Config file

    Returns:
        RunConfig: Validated configuration

    Raises:
        ConfigError: If the file is missing or invalid
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    config = parse_config(path.read_text(), source=str(path))
    config.validate()
    logger.info(f"Loaded config {path} ({len(config.values)} keys)")
    return config
