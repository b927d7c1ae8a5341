"""
Checks on an Airy function: strain functions K = L hess(phi), the weak plate
equation div div K = 0, Saint-Venant compatibility of eps = rot K, and the
two-sided bound between |sym grad a|^2 and |hess phi|^2.
"""
import logging
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from airy.fields import local_quadratic_fits, rot
from material.plate_material import apply_L
from mesh.quadrature import line_rule
from setup.config_conf import DEFAULT_SANDWICH_SLACK
from utilities.errors import PatchError

logger = logging.getLogger(__name__)

_RADIAL_POINTS = 8
_ANGULAR_POINTS = 24
_DEFAULT_DISKS = 5


@dataclass(frozen=True, eq=False)
class StrainFunctions:
    """K at points, with the relative mismatch of rot K against a displacement strain when one was given."""

    points: np.ndarray
    values: np.ndarray
    strain_mismatch: float = None

    @property
    def strains(self):
        return rot(self.values)


@dataclass(frozen=True)
class FieldResiduals:
    weak: float
    compatibility: float
    disks: tuple


@dataclass(frozen=True, eq=False)
class SandwichResult:
    fraction: float
    ratios: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    slack: float


def strain_K(material, airy, points=None, displacement=None):
    """Strain functions K = L hess(phi) at points.

    Args:
        material (PlateMaterial): Material
        airy (AiryField | ClosedFormAiry): Airy function
        points (numpy.ndarray, optional): Evaluation points. Defaults to the
            degree-2 quadrature points of the patch.
        displacement (DisplacementField, optional): When given, rot K is
            compared with its strain

    Returns:
        StrainFunctions: K at the points
    """
    if points is None:
        points, _ = airy.patch.quadrature(2)
    points = np.atleast_2d(np.asarray(points, dtype=float))
    K = apply_L(material, points, airy.hessian(points))
    mismatch = None
    if displacement is not None:
        eps = getattr(displacement, "displacement", displacement).strain(points)
        scale = float(np.linalg.norm(eps))
        mismatch = float(np.linalg.norm(rot(K) - eps) / scale) if scale > 0.0 else float(np.linalg.norm(rot(K)))
        logger.info(f"Strain from K against the displacement strain: relative mismatch {mismatch:.3e}")
    return StrainFunctions(points=points, values=K, strain_mismatch=mismatch)


def polar_rule(center, radius, n_radial=_RADIAL_POINTS, n_angular=_ANGULAR_POINTS):
    """Gauss-Legendre in r and trapezoid in theta on a disk: (points (n, 2), weights (n,))."""
    r01, w01 = line_rule(n_radial)
    r = radius * r01
    theta = 2.0 * np.pi * np.arange(n_angular) / n_angular
    rr, tt = np.meshgrid(r, theta, indexing="ij")
    points = np.asarray(center, dtype=float) + np.stack([rr * np.cos(tt), rr * np.sin(tt)], axis=-1).reshape(-1, 2)
    weights = np.outer(w01 * radius * r, np.full(n_angular, 2.0 * np.pi / n_angular)).ravel()
    return points, weights


def bump_hessian(points, center, radius):
    """Hessian of v = (1 - |x - c|^2 / R^2)^4 on the disk, shape (n, 2, 2)."""
    d = np.atleast_2d(points) - center
    q = np.sum(d * d, axis=1) / radius ** 2
    f1 = -4.0 * (1.0 - q) ** 3
    f2 = 12.0 * (1.0 - q) ** 2
    grad_q = 2.0 * d / radius ** 2
    return f2[:, None, None] * np.einsum("ni,nj->nij", grad_q, grad_q) + (f1 * 2.0 / radius ** 2)[:, None, None] * np.eye(2)


def residual_disks(patch, count=_DEFAULT_DISKS):
    """Disks well inside the patch on which the weak residual is tested.

    Raises:
        PatchError: If the patch is too small to hold one
    """
    if patch.kind == "interior-disk":
        radius = 0.4 * patch.radius
    else:
        radius = 0.4 * min(patch.half_width, patch.half_height)
    nodes = patch.mesh.nodes
    clear = patch.boundary_distance(nodes) >= 1.05 * radius
    candidates = nodes[clear]
    if candidates.shape[0] == 0:
        raise PatchError(f"patch has no room for a test disk of radius {radius:.4g}")
    order = np.argsort(np.linalg.norm(candidates - candidates.mean(axis=0), axis=1))
    picks = order[np.unique(np.linspace(0, order.size - 1, min(count, order.size)).astype(int))]
    return tuple((tuple(candidates[i]), float(radius)) for i in picks)


def compatibility_residual(points, strains, centers, radius):
    """Normalized eps11,22 + eps22,11 - 2 eps12,12 from local quadratic fits of sampled strain.

    Args:
        points (numpy.ndarray): Sample points, shape (n, 2)
        strains (numpy.ndarray): Strains there, shape (n, 2, 2)
        centers (numpy.ndarray): Where to evaluate, shape (m, 2)
        radius (float): Fit radius

    Returns:
        float: Max over centers of |residual| * radius^2 / max|eps|
    """
    strains = np.asarray(strains, dtype=float)
    samples = np.column_stack([strains[:, 0, 0], strains[:, 1, 1], strains[:, 0, 1]])
    coef = local_quadratic_fits(points, samples, centers, radius, cKDTree(points))
    # monomial order 1, x, y, x^2, xy, y^2
    residual = 2.0 * coef[:, 5, 0] + 2.0 * coef[:, 3, 1] - 2.0 * coef[:, 4, 2]
    scale = float(np.abs(samples).max())
    if scale == 0.0:
        return 0.0
    return float(np.abs(residual).max() * radius ** 2 / scale)


def field_residuals(airy, material, patch=None, disks=None):
    """Weak plate residual and compatibility residual of an Airy function.

    The weak residual on each test disk B is
    |int_B K : hess v| / (||K||_B ||hess v||_B) for the bump v of B.

    Args:
        airy (AiryField | ClosedFormAiry): Airy function
        material (PlateMaterial): Material
        patch (Patch, optional): Defaults to the patch of ``airy``
        disks (sequence, optional): ((center, radius), ...). Defaults to residual_disks(patch).

    Returns:
        FieldResiduals: Max over disks of both normalized residuals
    """
    patch = patch or airy.patch
    disks = tuple(disks) if disks is not None else residual_disks(patch)
    weak = 0.0
    points_all, K_all = [], []
    for center, radius in disks:
        c = np.asarray(center, dtype=float)
        points, weights = polar_rule(c, radius)
        K = apply_L(material, points, airy.hessian(points))
        V = bump_hessian(points, c, radius)
        num = abs(float(np.sum(weights * np.sum(K * V, axis=(-1, -2)))))
        norm_K = float(np.sqrt(np.sum(weights * np.sum(K * K, axis=(-1, -2)))))
        norm_V = float(np.sqrt(np.sum(weights * np.sum(V * V, axis=(-1, -2)))))
        if norm_K > 0.0:
            weak = max(weak, num / (norm_K * norm_V))
        points_all.append(points)
        K_all.append(K)

    points = np.vstack(points_all)
    K = np.concatenate(K_all)
    centers = np.array([center for center, _ in disks], dtype=float)
    compat = compatibility_residual(points, rot(K), centers, max(radius for _, radius in disks))
    logger.info(f"Field residuals on {len(disks)} disks: weak {weak:.3e}, compatibility {compat:.3e}")
    return FieldResiduals(weak=weak, compatibility=compat, disks=disks)


def sandwich_check(airy, sol, material, patch=None, slack=DEFAULT_SANDWICH_SLACK, points=None):
    """Fraction of points where (1-|nu|)^2 |H|^2 <= (E h)^2 |eps|^2 <= (1+|nu|)^2 |H|^2.

    H is the Hessian of phi and eps the strain of the displacement; both bounds
    get the multiplicative ``slack``.

    Args:
        airy (AiryField | ClosedFormAiry): Airy function
        sol (SaddleSolution | DisplacementField): Displacement of the same state
        material (PlateMaterial): Material
        patch (Patch, optional): Defaults to the patch of ``airy``
        slack (float, optional): Relative slack. Defaults to 0.05.
        points (numpy.ndarray, optional): Defaults to the patch quadrature points

    Returns:
        SandwichResult: Satisfied fraction with the per-point ratios and bounds
    """
    patch = patch or airy.patch
    if points is None:
        points, _ = patch.quadrature(2)
    points = np.atleast_2d(np.asarray(points, dtype=float))
    displacement = getattr(sol, "displacement", sol)
    eps = displacement.strain(points)
    H = airy.hessian(points)
    E, nu = material.moduli(points)
    Eh = np.asarray(E, dtype=float) * material.h
    nu = np.abs(np.asarray(nu, dtype=float))

    eps2 = np.sum(eps * eps, axis=(-1, -2)) * Eh ** 2
    H2 = np.sum(H * H, axis=(-1, -2))
    tiny = np.finfo(float).eps * max(float(H2.max()), float(eps2.max()), np.finfo(float).tiny)
    ratios = np.where(H2 > tiny, eps2 / np.maximum(H2, tiny), np.where(eps2 > tiny, np.inf, 1.0))
    lower = (1.0 - nu) ** 2 * np.ones_like(ratios)
    upper = (1.0 + nu) ** 2 * np.ones_like(ratios)
    ok = (ratios >= lower * (1.0 - slack)) & (ratios <= upper * (1.0 + slack))
    fraction = float(np.mean(ok))
    logger.info(f"Sandwich inequality holds at {fraction:.1%} of {ok.size} points (slack {slack:.0%})")
    return SandwichResult(fraction=fraction, ratios=ratios, lower=lower, upper=upper, slack=float(slack))
