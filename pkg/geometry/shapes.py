"""
Plane geometry primitives: points, rigid motions, star-shaped curves and the
domain description carrying the a-priori constants r0, M0, M1 and alpha.
"""
import dataclasses
import logging
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from setup.config_conf import MAX_FOURIER_MODES
from utilities.errors import ConfigError, InvalidShapeError

logger = logging.getLogger(__name__)

_POSITIVITY_SAMPLES = 4096
_ARCLENGTH_SAMPLES = 8192


@dataclass(frozen=True)
class Point2:
    """A point of the plane."""

    x1: float
    x2: float

    def __post_init__(self):
        object.__setattr__(self, "x1", float(self.x1))
        object.__setattr__(self, "x2", float(self.x2))
        if not (math.isfinite(self.x1) and math.isfinite(self.x2)):
            raise InvalidShapeError(f"Point coordinates must be finite, got ({self.x1}, {self.x2})")

    def as_array(self):
        return np.array([self.x1, self.x2])

    @classmethod
    def from_array(cls, xy):
        return cls(float(xy[0]), float(xy[1]))


@dataclass(frozen=True)
class RigidMotion:
    """Infinitesimal rigid motion r(x) = c + w(-x2, x1).

    The associated matrix W = [[0, -w], [w, 0]] is antisymmetric by construction.
    """

    c: tuple = (0.0, 0.0)
    w: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "c", (float(self.c[0]), float(self.c[1])))
        object.__setattr__(self, "w", float(self.w))

    @property
    def matrix(self):
        return np.array([[0.0, -self.w], [self.w, 0.0]])

    def __call__(self, points):
        pts = np.asarray(points, dtype=float)
        spin = np.stack([-pts[..., 1], pts[..., 0]], axis=-1)
        return np.asarray(self.c) + self.w * spin


def rigid_eval(r, x):
    """Evaluate a rigid motion at a point (or an array of points).

    Args:
        r (RigidMotion): The rigid motion
        x (Point2 | array-like): Point, or array of shape (..., 2)

    Returns:
        numpy.ndarray: Displacement c + w(-x2, x1)
    """
    if isinstance(x, Point2):
        x = x.as_array()
    return r(x)


def rigid_basis(points):
    """Rigid-motion basis e1, e2 and the spin (-x2, x1) sampled at points.

    Args:
        points (numpy.ndarray): Array of shape (n, 2)

    Returns:
        numpy.ndarray: Array of shape (n, 2, 3); column j is basis field j
    """
    pts = np.asarray(points, dtype=float)
    basis = np.zeros((pts.shape[0], 2, 3))
    basis[:, 0, 0] = 1.0
    basis[:, 1, 1] = 1.0
    basis[:, 0, 2] = -pts[:, 1]
    basis[:, 1, 2] = pts[:, 0]
    return basis


@dataclass(frozen=True)
class StarShape:
    """Closed curve center + rho(theta)(cos theta, sin theta).

    rho(theta) = rho0 + sum_k (a_k cos k theta + b_k sin k theta), k = 1..K.
    The radius is checked to be strictly positive at construction.
    """

    center: Point2
    rho0: float
    fourier: tuple = ()

    def __post_init__(self):
        if not isinstance(self.center, Point2):
            object.__setattr__(self, "center", Point2.from_array(self.center))
        object.__setattr__(self, "rho0", float(self.rho0))
        pairs = tuple((float(a), float(b)) for a, b in self.fourier)
        object.__setattr__(self, "fourier", pairs)

        if len(pairs) > MAX_FOURIER_MODES:
            raise InvalidShapeError(
                f"At most {MAX_FOURIER_MODES} Fourier modes are supported, got {len(pairs)}"
            )
        if not all(math.isfinite(v) for pair in pairs for v in pair) or not math.isfinite(self.rho0):
            raise InvalidShapeError("Star-shape coefficients must be finite")

        theta = np.linspace(0.0, 2.0 * np.pi, _POSITIVITY_SAMPLES, endpoint=False)
        rho = self.radius(theta)
        i_min = int(np.argmin(rho))
        if rho[i_min] <= 0.0:
            raise InvalidShapeError(
                f"Radius function is non-positive ({rho[i_min]:.6g}) at theta={theta[i_min]:.6f}"
            )

    @classmethod
    def circle(cls, cx, cy, radius):
        return cls(Point2(cx, cy), radius, ())

    @property
    def modes(self):
        return len(self.fourier)

    @cached_property
    def _coefficients(self):
        if not self.fourier:
            return np.zeros(0), np.zeros(0), np.zeros(0)
        k = np.arange(1, self.modes + 1, dtype=float)
        a = np.array([pair[0] for pair in self.fourier])
        b = np.array([pair[1] for pair in self.fourier])
        return k, a, b

    def radius(self, theta, derivative=0):
        """Radius function or one of its theta-derivatives.

        Args:
            theta (float | numpy.ndarray): Angles
            derivative (int, optional): Derivative order. Defaults to 0.

        Returns:
            numpy.ndarray: rho^(m)(theta)
        """
        theta = np.asarray(theta, dtype=float)
        k, a, b = self._coefficients
        value = np.full(theta.shape, self.rho0 if derivative == 0 else 0.0)
        if k.size:
            phase = np.multiply.outer(theta, k) + derivative * np.pi / 2.0
            value = value + (k ** derivative * (a * np.cos(phase) + b * np.sin(phase))).sum(axis=-1)
        return value

    def points(self, theta):
        """Curve points, shape (..., 2)."""
        theta = np.asarray(theta, dtype=float)
        rho = self.radius(theta)
        return np.stack(
            [self.center.x1 + rho * np.cos(theta), self.center.x2 + rho * np.sin(theta)], axis=-1
        )

    def derivative(self, theta):
        """d/dtheta of the curve, shape (..., 2)."""
        theta = np.asarray(theta, dtype=float)
        rho = self.radius(theta)
        drho = self.radius(theta, 1)
        return np.stack(
            [drho * np.cos(theta) - rho * np.sin(theta), drho * np.sin(theta) + rho * np.cos(theta)],
            axis=-1,
        )

    def tangent(self, theta):
        """Unit counterclockwise tangent."""
        d = self.derivative(theta)
        return d / np.linalg.norm(d, axis=-1, keepdims=True)

    def polar_angle(self, points):
        pts = np.asarray(points, dtype=float)
        return np.mod(np.arctan2(pts[..., 1] - self.center.x2, pts[..., 0] - self.center.x1), 2.0 * np.pi)

    def contains(self, points):
        """Closed-region membership: |x - center| <= rho(theta(x))."""
        pts = np.asarray(points, dtype=float)
        r = np.hypot(pts[..., 0] - self.center.x1, pts[..., 1] - self.center.x2)
        return r <= self.radius(self.polar_angle(pts))

    @property
    def area(self):
        k, a, b = self._coefficients
        return math.pi * self.rho0 ** 2 + 0.5 * math.pi * float(np.sum(a ** 2 + b ** 2))

    @cached_property
    def _arclength_table(self):
        theta = np.linspace(0.0, 2.0 * np.pi, _ARCLENGTH_SAMPLES + 1)
        speed = np.linalg.norm(self.derivative(theta), axis=-1)
        dtheta = theta[1] - theta[0]
        s = np.concatenate([[0.0], np.cumsum(0.5 * (speed[1:] + speed[:-1]) * dtheta)])
        return theta, s

    @property
    def perimeter(self):
        return float(self._arclength_table[1][-1])

    def arclength_at(self, theta):
        """Counterclockwise arclength from theta = 0."""
        table_theta, table_s = self._arclength_table
        return np.interp(np.mod(theta, 2.0 * np.pi), table_theta, table_s)

    def theta_at(self, s):
        """Inverse of arclength_at, for s taken modulo the perimeter."""
        table_theta, table_s = self._arclength_table
        return np.interp(np.mod(s, table_s[-1]), table_s, table_theta)

    def equal_arclength_thetas(self, n):
        """Parameters of n points equally spaced in arclength, starting at theta = 0."""
        s = np.arange(n) * (self.perimeter / n)
        return self.theta_at(s)

    def to_params(self):
        """Parameter vector [cx, cy, rho0, a1, b1, ..., aK, bK]."""
        flat = [c for pair in self.fourier for c in pair]
        return np.array([self.center.x1, self.center.x2, self.rho0] + flat)

    @classmethod
    def from_params(cls, params):
        params = np.asarray(params, dtype=float)
        if params.size < 3 or (params.size - 3) % 2:
            raise InvalidShapeError(f"Star-shape parameter vector has invalid length {params.size}")
        pairs = tuple(zip(params[3::2], params[4::2]))
        return cls(Point2(params[0], params[1]), params[2], pairs)

    def perturbed(self, direction, t):
        """Shape with parameters self + t * direction (direction padded to a common K)."""
        base = self.to_params()
        step = np.asarray(direction, dtype=float)
        size = max(base.size, step.size)
        base = np.pad(base, (0, size - base.size))
        step = np.pad(step, (0, size - step.size))
        return StarShape.from_params(base + t * step)

    def to_line(self):
        """Serialize as ``star cx cy rho0 K a1 b1 ... aK bK``."""
        values = [self.center.x1, self.center.x2, self.rho0]
        coeffs = [c for pair in self.fourier for c in pair]
        parts = ["star"] + [repr(v) for v in values] + [str(self.modes)] + [repr(c) for c in coeffs]
        return " ".join(parts)

    @classmethod
    def from_line(cls, line):
        """Parse a ``star`` line (or ``circle cx cy R``).

        Raises:
            ConfigError: If the line is malformed
        """
        tokens = line.split()
        if not tokens:
            raise ConfigError("empty shape description")
        try:
            if tokens[0] == "circle":
                if len(tokens) != 4:
                    raise ConfigError(f"expected 'circle cx cy R', got '{line}'")
                return cls.circle(float(tokens[1]), float(tokens[2]), float(tokens[3]))
            if tokens[0] != "star" or len(tokens) < 5:
                raise ConfigError(f"expected 'star cx cy rho0 K a1 b1 ...', got '{line}'")
            modes = int(tokens[4])
            coeffs = [float(v) for v in tokens[5:]]
        except ValueError as e:
            raise ConfigError(f"non-numeric value in shape '{line}': {e}")
        if len(coeffs) != 2 * modes:
            raise ConfigError(f"star line declares K={modes} but carries {len(coeffs)} coefficients")
        pairs = tuple(zip(coeffs[0::2], coeffs[1::2]))
        return cls(Point2(float(tokens[1]), float(tokens[2])), float(tokens[3]), pairs)


def eval_star(shape, theta):
    """Point of a star-shaped curve at angle theta.

    Args:
        shape (StarShape): The curve
        theta (float): Angle

    Returns:
        Point2: center + rho(theta)(cos theta, sin theta)
    """
    return Point2.from_array(shape.points(float(theta)))


@dataclass(frozen=True)
class DomainSpec:
    """Outer domain, cavities, accessible boundary portion Sigma and a-priori constants.

    ``sigma_interval`` is a counterclockwise arclength interval (s0, s1) on the
    outer curve measured from theta = 0; ``None`` means Sigma is the whole of it.
    """

    outer: StarShape
    cavities: tuple = ()
    r0: float = 1.0
    M0: float = 1.0
    M1: float = 10.0
    alpha: float = 0.5
    sigma_interval: tuple = None
    sigma_anchor: Point2 = None

    def __post_init__(self):
        object.__setattr__(self, "cavities", tuple(self.cavities))
        if self.sigma_interval is not None:
            s0, s1 = (float(v) for v in self.sigma_interval)
            if not s1 > s0 or s1 - s0 > self.outer.perimeter * (1.0 + 1e-12):
                raise ConfigError(
                    f"Sigma interval ({s0}, {s1}) must satisfy s0 < s1 <= s0 + perimeter",
                    key="domain.sigma_interval",
                )
            object.__setattr__(self, "sigma_interval", (s0, s1))
        if self.sigma_anchor is None:
            if self.sigma_interval is None:
                s_mid = 0.0
            else:
                s_mid = 0.5 * (self.sigma_interval[0] + self.sigma_interval[1])
            anchor = self.outer.points(self.outer.theta_at(s_mid))
            object.__setattr__(self, "sigma_anchor", Point2.from_array(anchor))
        for name in ("r0", "M1", "alpha"):
            if not getattr(self, name) > 0.0:
                raise ConfigError(f"must be positive, got {getattr(self, name)}", key=f"domain.{name}")

    def with_cavities(self, cavities):
        return dataclasses.replace(self, cavities=tuple(cavities))

    @property
    def full_sigma(self):
        return self.sigma_interval is None

    def outer_arclength(self, points):
        """Arclength coordinate of (near-)outer-boundary points via their polar angle."""
        return self.outer.arclength_at(self.outer.polar_angle(points))

    def sigma_contains(self, s, margin=0.0):
        """Whether arclength positions lie in Sigma, shrunk by ``margin`` at both ends."""
        s = np.asarray(s, dtype=float)
        if self.sigma_interval is None:
            return np.ones(s.shape, dtype=bool)
        s0, s1 = self.sigma_interval
        offset = np.mod(s - s0, self.outer.perimeter)
        return (offset >= margin) & (offset <= (s1 - s0) - margin)

    @property
    def sigma_length(self):
        if self.sigma_interval is None:
            return self.outer.perimeter
        return self.sigma_interval[1] - self.sigma_interval[0]

    def sigma_arclengths(self, n):
        """n midpoint-rule arclength positions covering Sigma."""
        start = 0.0 if self.sigma_interval is None else self.sigma_interval[0]
        return start + (np.arange(n) + 0.5) * (self.sigma_length / n)

    @property
    def area(self):
        return self.outer.area - sum(c.area for c in self.cavities)
