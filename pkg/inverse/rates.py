"""
Local energy measurements: vanishing rates of the energy on shrinking disks and
the propagation-of-smallness profile.
"""
import logging
from dataclasses import dataclass

import numpy as np

from elasticity.norms import boundary_sobolev_norm, energy_cloud, local_energy
from geometry.distances import boundary_polyline, polyline_distance
from inverse.fits import log_log_fit
from setup.config_conf import DEFAULT_LPS_OFFSET
from utilities.errors import ConstraintError, DegenerateFitError

logger = logging.getLogger(__name__)

_POLYLINE_SAMPLES = 2048
_MIN_RADIUS_FACTOR = 4.0
_MIN_SPAN = 8.0
_ENERGY_FLOOR = 10.0 * np.finfo(float).eps


def _center_array(center):
    return center.as_array() if hasattr(center, "as_array") else np.asarray(center, dtype=float)


def boundary_distances(domain, points):
    """Distance from points to the outer boundary and to the nearest cavity (inf without cavities)."""
    points = np.atleast_2d(points)
    outer = polyline_distance(points, boundary_polyline(domain.outer, _POLYLINE_SAMPLES))
    cavity = np.full(points.shape[0], np.inf)
    for shape in domain.cavities:
        cavity = np.minimum(cavity, polyline_distance(points, boundary_polyline(shape, _POLYLINE_SAMPLES)))
    return outer, cavity


def in_domain(domain, points):
    points = np.atleast_2d(points)
    inside = domain.outer.contains(points)
    for shape in domain.cavities:
        inside &= ~shape.contains(points)
    return inside


def vanishing_rate(sol, center, radii, mode="interior", domain=None):
    """Slope of log local energy against log r over a dyadic set of radii.

    Args:
        sol (SaddleSolution | DisplacementField): Solved displacement
        center (Point2 | array-like): Disk center; on a cavity boundary in boundary mode
        radii (array-like): Radii spanning a factor of at least 8, the smallest at least 4 h_max
        mode (str, optional): ``interior`` or ``boundary``
        domain (DomainSpec, optional): When given, the disks are checked against it

    Returns:
        RateFit: Fit whose exponent is the slope (2 for a uniform strain in the interior)

    Raises:
        DegenerateFitError: For radii below the mesh resolution, too short a span,
            or a vanishing energy at some radius
        ConstraintError: If an interior disk leaves the domain or a boundary
            center is not on a cavity
    """
    if mode not in ("interior", "boundary"):
        raise ValueError(f"mode must be 'interior' or 'boundary', got '{mode}'")
    displacement = getattr(sol, "displacement", sol)
    h_max = displacement.mesh.h_max
    radii = np.sort(np.asarray(radii, dtype=float))
    c = _center_array(center)
    if radii.size < 3 or radii[0] < _MIN_RADIUS_FACTOR * h_max:
        raise DegenerateFitError(
            f"{radii.size} radii from {radii[0] if radii.size else float('nan'):.4g}: need at least 3, "
            f"all >= {_MIN_RADIUS_FACTOR:g} h_max = {_MIN_RADIUS_FACTOR * h_max:.4g}"
        )
    if radii[-1] < _MIN_SPAN * radii[0] * (1.0 - 1e-12):
        raise DegenerateFitError(f"radii span a factor {radii[-1] / radii[0]:.3g}, below {_MIN_SPAN:g}")

    if domain is not None:
        outer, cavity = boundary_distances(domain, c)
        if mode == "interior":
            gap = min(float(outer[0]), float(cavity[0]))
            if not in_domain(domain, c)[0] or gap < radii[-1]:
                raise ConstraintError(f"disk of radius {radii[-1]:.4g} at {c} leaves the domain (clearance {gap:.4g})")
        elif cavity[0] > 1e-6 * domain.r0 + 0.5 * h_max ** 2 / domain.r0:
            raise ConstraintError(f"center {c} is {cavity[0]:.3g} away from the cavity boundaries")

    energies = np.array([local_energy(displacement, c, r) for r in radii])
    scale = max(float(energies.max()), np.finfo(float).tiny)
    if np.any(energies <= _ENERGY_FLOOR * scale):
        r = radii[int(np.argmin(energies))]
        raise DegenerateFitError(f"local energy vanishes at radius {r:.4g}")
    fit = log_log_fit(radii, energies, kind=f"vanishing rate ({mode})")
    logger.info(f"Vanishing rate at {c} ({mode}): {fit.summary()}")
    return fit


@dataclass(frozen=True)
class ProfilePoint:
    rho: float
    value: float
    centers: int

    def shape_coordinates(self, r0):
        """(r0 / rho, log value) for comparison with an exp(-A (r0/rho)^B) decay."""
        return r0 / self.rho, float(np.log(self.value)) if self.value > 0.0 else float("-inf")


def offset_centers(domain, rho, s=DEFAULT_LPS_OFFSET):
    """Grid points of spacing rho / 4 farther than s * rho from every boundary.

    Raises:
        ConstraintError: If no grid point qualifies
    """
    pts = boundary_polyline(domain.outer, _POLYLINE_SAMPLES)
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    step = rho / 4.0
    gx = np.arange(lo[0], hi[0] + step, step)
    gy = np.arange(lo[1], hi[1] + step, step)
    grid = np.stack(np.meshgrid(gx, gy, indexing="ij"), axis=-1).reshape(-1, 2)
    grid = grid[in_domain(domain, grid)]
    outer, cavity = boundary_distances(domain, grid)
    centers = grid[(outer > s * rho) & (cavity > s * rho)]
    if centers.shape[0] == 0:
        raise ConstraintError(f"no point of the domain is farther than {s:g} * rho = {s * rho:.4g} from its boundary")
    return centers


def smallness_profile(sol, domain, rho_values, s=DEFAULT_LPS_OFFSET, traction_norm=None, centers=None):
    """Minimum normalized local energy over interior disks, per radius.

    Args:
        sol (SaddleSolution): Solved displacement (its traction gives the norm)
        domain (DomainSpec): Domain of the solve
        rho_values (array-like): Disk radii
        s (float, optional): Offset factor of the admissible centers. Defaults to 1.5.
        traction_norm (float, optional): ||N||_{-1/2}; computed from the solution's traction if omitted
        centers (numpy.ndarray, optional): Fixed center set used for every radius

    Returns:
        list: ProfilePoint per radius, in the given order, with value
        min_x E(B_rho(x)) / (r0^2 ||N||^2)
    """
    displacement = getattr(sol, "displacement", sol)
    if traction_norm is None:
        traction_norm = boundary_sobolev_norm(sol.traction, displacement.mesh, -0.5).value
    if traction_norm <= 0.0:
        raise ConstraintError("zero traction: the smallness profile is undefined")
    cloud = energy_cloud(displacement)
    scale = domain.r0 ** 2 * traction_norm ** 2
    profile = []
    for rho in rho_values:
        rho = float(rho)
        grid = centers if centers is not None else offset_centers(domain, rho, s)
        if rho <= 2.0 * displacement.mesh.h_max:
            logger.warning(f"rho = {rho:.4g} is not above 2 h_max; disk energies are coarse")
        members = cloud.tree.query_ball_point(grid, rho)
        energies = np.array(
            [float(np.sum(cloud.weights[idx] * cloud.density[idx])) if idx else 0.0 for idx in members]
        )
        k = int(np.argmin(energies))
        profile.append(ProfilePoint(rho=rho, value=float(energies[k]) / scale, centers=int(grid.shape[0])))
        logger.info(f"Smallness profile rho={rho:.4g}: {profile[-1].value:.6g} at {grid[k]} ({grid.shape[0]} centers)")
    return profile
