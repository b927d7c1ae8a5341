"""
Plate material: Lame fields with their a-priori bounds, the elasticity tensor C
and the Airy compliance tensor L acting on 2x2 matrices.
"""
import dataclasses
import logging
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.interpolate import LinearNDInterpolator, NearestNDInterpolator

from material.moduli import enu_from_lame, lame_from_enu, lambda_star
from setup.config_conf import DEFAULT_E, DEFAULT_NU, DEFAULT_THICKNESS
from utilities.errors import MaterialError

logger = logging.getLogger(__name__)

_C4_SAMPLES = 256


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Scalar field: constant, polynomial in r = |x|, or per-node values."""

    kind: str
    coefficients: tuple = ()
    coords: np.ndarray = None
    values: np.ndarray = None
    _interp: tuple = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in ("constant", "radial", "nodal"):
            raise MaterialError(f"unknown scalar field kind '{self.kind}'")
        if self.kind == "nodal":
            coords = np.asarray(self.coords, dtype=float)
            values = np.asarray(self.values, dtype=float)
            if coords.shape != (values.size, 2):
                raise MaterialError("nodal field needs one value per node")
            linear = LinearNDInterpolator(coords, values)
            nearest = NearestNDInterpolator(coords, values)
            object.__setattr__(self, "_interp", (linear, nearest))
        else:
            coefficients = tuple(float(c) for c in self.coefficients)
            if not coefficients:
                raise MaterialError(f"{self.kind} field needs at least one coefficient")
            object.__setattr__(self, "coefficients", coefficients)

    @classmethod
    def constant(cls, value):
        return cls("constant", (value,))

    @classmethod
    def radial(cls, coefficients):
        return cls("radial", tuple(coefficients))

    @classmethod
    def nodal(cls, coords, values):
        return cls("nodal", coords=coords, values=values)

    def __call__(self, points):
        points = np.asarray(points, dtype=float)
        shape = points.shape[:-1]
        if self.kind == "constant":
            return np.full(shape, self.coefficients[0])
        if self.kind == "radial":
            r = np.hypot(points[..., 0], points[..., 1])
            return P.polyval(r, self.coefficients)
        flat = points.reshape(-1, 2)
        linear, nearest = self._interp
        out = linear(flat)
        missing = np.isnan(out)
        if np.any(missing):
            out[missing] = nearest(flat[missing])
        return out.reshape(shape)

    def c4_norm(self, r_max):
        """Sum over orders 0..4 of the sampled sup of the radial derivatives (None for nodal data)."""
        if self.kind == "constant":
            return abs(self.coefficients[0])
        if self.kind == "nodal":
            return None
        r = np.linspace(0.0, r_max, _C4_SAMPLES)
        total = 0.0
        coeffs = np.array(self.coefficients)
        for _ in range(5):
            total += float(np.abs(P.polyval(r, coeffs)).max()) if coeffs.size else 0.0
            coeffs = P.polyder(coeffs) if coeffs.size > 1 else np.zeros(0)
        return total


@dataclass(frozen=True, eq=False)
class LameField:
    """Lame moduli lambda(x), mu(x) with the bounds alpha0, gamma0, Lambda0."""

    lambda_spec: ScalarField
    mu_spec: ScalarField
    alpha0: float = None
    gamma0: float = None
    Lambda0: float = None

    def __call__(self, points):
        return self.lambda_spec(points), self.mu_spec(points)

    def resolved(self, points, r_max):
        """Copy with missing bounds taken from the sampled field."""
        lam, mu = self(points)
        lambda0 = self.Lambda0
        if lambda0 is None:
            norms = []
            for spec, values in ((self.lambda_spec, lam), (self.mu_spec, mu)):
                norm = spec.c4_norm(r_max)
                norms.append(float(np.abs(values).max()) if norm is None else norm)
            lambda0 = max(norms)
        return dataclasses.replace(
            self,
            alpha0=float(np.min(mu)) if self.alpha0 is None else self.alpha0,
            gamma0=float(np.min(2.0 * mu + 3.0 * lam)) if self.gamma0 is None else self.gamma0,
            Lambda0=lambda0,
        )

    def check(self, points, r_max):
        """Verify the bounds at sample points.

        Raises:
            MaterialError: Naming the violated bound
        """
        lam, mu = self(points)
        if self.alpha0 is not None and np.min(mu) < self.alpha0:
            raise MaterialError(f"material.alpha0: mu = {np.min(mu):.6g} below alpha0 = {self.alpha0:.6g}")
        if self.gamma0 is not None and np.min(2.0 * mu + 3.0 * lam) < self.gamma0:
            raise MaterialError(
                f"material.gamma0: 2 mu + 3 lambda = {np.min(2.0 * mu + 3.0 * lam):.6g} below gamma0 = {self.gamma0:.6g}"
            )
        if self.Lambda0 is not None:
            norms = [spec.c4_norm(r_max) for spec in (self.lambda_spec, self.mu_spec)]
            if any(n is None for n in norms):
                logger.warning("C4 bound not checked for per-node Lame data")
            for name, norm in zip(("lambda", "mu"), norms):
                if norm is not None and norm > self.Lambda0 * (1.0 + 1e-12):
                    raise MaterialError(
                        f"material.Lambda0: C4 norm of {name} = {norm:.6g} exceeds Lambda0 = {self.Lambda0:.6g}"
                    )


@dataclass(frozen=True, eq=False)
class PlateMaterial:
    """Isotropic plate of thickness h with Lame fields."""

    h: float
    lame: LameField

    def __post_init__(self):
        if not self.h > 0.0:
            raise MaterialError(f"material.h: thickness must be positive, got {self.h}")

    @classmethod
    def homogeneous(cls, E=DEFAULT_E, nu=DEFAULT_NU, h=DEFAULT_THICKNESS, alpha0=None, gamma0=None, Lambda0=None):
        """Constant moduli; missing bounds default to the moduli themselves."""
        mu, lam = lame_from_enu(E, nu)
        lame = LameField(
            lambda_spec=ScalarField.constant(lam),
            mu_spec=ScalarField.constant(mu),
            alpha0=mu if alpha0 is None else alpha0,
            gamma0=2.0 * mu + 3.0 * lam if gamma0 is None else gamma0,
            Lambda0=max(abs(lam), mu) if Lambda0 is None else Lambda0,
        )
        return cls(h=float(h), lame=lame)

    @property
    def xi0(self):
        """Strong convexity constant min(2 alpha0, gamma0) of C / h."""
        return min(2.0 * self.lame.alpha0, self.lame.gamma0)

    def moduli(self, points):
        """(E, nu) at points; validates mu > 0, 2 mu + 3 lambda > 0 and nu in (-1, 1/2)."""
        lam, mu = self.lame(points)
        E, nu = enu_from_lame(mu, lam)
        E = np.asarray(E)
        nu = np.asarray(nu)
        if np.any(E <= 0.0) or np.any(nu <= -1.0) or np.any(nu >= 0.5):
            raise MaterialError("E > 0 and -1 < nu < 1/2 must hold at every point")
        return E, nu

    def lambda_star(self, points):
        lam, mu = self.lame(points)
        return lambda_star(mu, lam)

    def resolved(self, points, r_max):
        return dataclasses.replace(self, lame=self.lame.resolved(points, r_max))

    def validate(self, points, r_max):
        """Check the bounds and the (E, nu) ranges at sample points."""
        self.lame.check(points, r_max)
        self.moduli(points)

    def voigt(self, points):
        """h times the plane-stress matrix acting on (eps11, eps22, 2 eps12), shape (..., 3, 3)."""
        E, nu = self.moduli(points)
        E = np.asarray(E, dtype=float)
        nu = np.asarray(nu, dtype=float)
        factor = self.h * E / (1.0 - nu ** 2)
        D = np.zeros(E.shape + (3, 3))
        D[..., 0, 0] = factor
        D[..., 1, 1] = factor
        D[..., 0, 1] = factor * nu
        D[..., 1, 0] = factor * nu
        D[..., 2, 2] = factor * 0.5 * (1.0 - nu)
        return D


def _point_array(x):
    if hasattr(x, "as_array"):
        return x.as_array()
    return np.asarray(x, dtype=float)


def _sym(A):
    return 0.5 * (A + np.swapaxes(A, -1, -2))


def _trace_identity(A):
    tr = A[..., 0, 0] + A[..., 1, 1]
    return tr[..., None, None] * np.eye(2)


def apply_C(material, x, A):
    """C A = (E h / (1 - nu^2)) ((1 - nu) sym(A) + nu tr(A) I).

    Args:
        material (PlateMaterial): The material
        x (Point2 | numpy.ndarray): Evaluation point(s), shape (..., 2)
        A (numpy.ndarray): Matrices, shape (..., 2, 2)

    Returns:
        numpy.ndarray: Symmetric matrices of the same shape as A
    """
    A = np.asarray(A, dtype=float)
    E, nu = material.moduli(_point_array(x))
    E = np.asarray(E)[..., None, None]
    nu = np.asarray(nu)[..., None, None]
    return (E * material.h / (1.0 - nu ** 2)) * ((1.0 - nu) * _sym(A) + nu * _trace_identity(A))


def apply_L(material, x, A):
    """L A = ((1 + nu) A - nu tr(A) I) / (E h) for symmetric A."""
    A = np.asarray(A, dtype=float)
    E, nu = material.moduli(_point_array(x))
    E = np.asarray(E)[..., None, None]
    nu = np.asarray(nu)[..., None, None]
    return ((1.0 + nu) * A - nu * _trace_identity(A)) / (E * material.h)


def random_symmetric(rng, count):
    A = rng.standard_normal((count, 2, 2))
    return _sym(A)


def convexity_report(material, points, samples=1000, seed=0):
    """Sampled strong convexity ratios of C and L on random symmetric matrices.

    Returns:
        dict: ``C_ratio`` = min C A.A / (h xi0 |A|^2) and
        ``L_ratio`` = min L A.A * 5 h Lambda0 / |A|^2; both should be >= 1
    """
    rng = np.random.default_rng(seed)
    points = np.asarray(points, dtype=float)
    where = points[rng.integers(0, points.shape[0], size=samples)]
    A = random_symmetric(rng, samples)
    norm2 = np.sum(A * A, axis=(-1, -2))
    CA = apply_C(material, where, A)
    LA = apply_L(material, where, A)
    c_ratio = np.sum(CA * A, axis=(-1, -2)) / (material.h * material.xi0 * norm2)
    l_ratio = np.sum(LA * A, axis=(-1, -2)) * 5.0 * material.h * material.lame.Lambda0 / norm2
    report = {"C_ratio": float(c_ratio.min()), "L_ratio": float(l_ratio.min())}
    logger.info(f"Convexity ratios: C {report['C_ratio']:.4g}, L {report['L_ratio']:.4g}")
    return report
