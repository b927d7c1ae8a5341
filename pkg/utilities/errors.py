"""
Exception hierarchy for gpscav.
Every error carries the exit code the command-line entry point maps it to.
"""


class GpsCavError(Exception):
    """Base class for all gpscav errors."""

    exit_code = 3


class ConfigError(GpsCavError):
    """Invalid configuration: syntax, unknown key or out-of-range value."""

    exit_code = 2

    def __init__(self, message, key=None, line=None):
        self.key = key
        self.line = line
        prefix = ""
        if key is not None:
            prefix += f"{key}: "
        if line is not None:
            prefix = f"line {line}: " + prefix
        super().__init__(prefix + message)


class MeshParseError(GpsCavError):
    """Malformed gpsmesh file."""

    exit_code = 2

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class MaterialError(GpsCavError):
    """Moduli outside their admissible bounds."""

    exit_code = 2


class ConstraintError(GpsCavError):
    """Violation of the a-priori information on geometry or load."""

    exit_code = 4


class InvalidShapeError(ConstraintError):
    """Star-shaped curve with a non-positive radius."""


class LoadError(ConstraintError):
    """Traction support outside Σ or an undefined norm ratio."""


class MeshError(GpsCavError):
    """Meshing failure or invalid mesh entity."""

    exit_code = 3


class SolverError(GpsCavError):
    """Singular or non-convergent linear system."""

    exit_code = 3


class PatchError(GpsCavError):
    """Airy patch that is not simply connected or not attached where expected."""

    exit_code = 3


class DegenerateFitError(GpsCavError):
    """Rate fit over energies that vanish or radii below mesh resolution."""

    exit_code = 3
