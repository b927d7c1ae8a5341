"""
Norms of boundary loads and displacement fields.

The negative Sobolev norms of the traction are the spectral norms on the outer
boundary parametrized by arclength: with complex Fourier coefficients c_k of
each component over a period of length L,

    ||N_hat||_s^2 = L * sum_k (1 + k^2)^s |c_k|^2,   s = -1/2 or -1.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from elasticity.traction import locate_on_outer
from mesh.quadrature import subdivided_rule, triangle_rule
from utilities.errors import LoadError

logger = logging.getLogger(__name__)

SOBOLEV_SAMPLES = 1024
_CLOUD_CHUNK = 4096


@dataclass(frozen=True)
class SobolevNorm:
    """Traction norm of the requested order with the H^{-1/2} / H^{-1} ratio F."""

    value: float
    order: float
    half: float
    one: float

    @property
    def ratio(self):
        """F = ||N_hat||_{-1/2} / ||N_hat||_{-1}.

        Raises:
            LoadError: For a zero traction
        """
        if self.one == 0.0:
            raise LoadError("traction is zero: the frequency ratio F is undefined")
        return self.half / self.one


def _outer_samples(mesh, samples):
    """Equal-arclength points on the outer boundary polygon with their edge normals."""
    loop = mesh.outer_loop()
    pts = mesh.nodes[loop]
    nxt = np.roll(pts, -1, axis=0)
    seg = nxt - pts
    length = np.linalg.norm(seg, axis=1)
    cum = np.concatenate([[0.0], np.cumsum(length)])
    perimeter = float(cum[-1])
    s = np.arange(samples) * (perimeter / samples)
    edge = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(length) - 1)
    frac = (s - cum[edge]) / length[edge]
    points = pts[edge] + frac[:, None] * seg[edge]
    tangent = seg[edge] / length[edge, None]
    normals = np.stack([tangent[:, 1], -tangent[:, 0]], axis=1)
    return points, normals, perimeter, (pts, cum)


def traction_spectrum(traction, mesh, samples=SOBOLEV_SAMPLES):
    """Fourier coefficients of both traction components over the outer boundary.

    Returns:
        tuple: (k integer frequencies, coefficients (samples, 2) complex, perimeter)
    """
    points, normals, perimeter, (pts, cum) = _outer_samples(mesh, samples)
    values = traction.density(points, normals)
    coeffs = np.fft.fft(values, axis=0) / samples
    k = np.fft.fftfreq(samples, d=1.0 / samples)

    center = traction.domain.outer.center.as_array()
    for position, force in traction.point_loads():
        edge_index, frac = locate_on_outer(mesh, center, position)
        a = mesh.nodes[mesh.edges[edge_index, 0]]
        start = int(np.flatnonzero(np.all(pts == a, axis=1))[0])
        s_p = cum[start] + frac * (cum[start + 1] - cum[start])
        phase = np.exp(-2j * np.pi * k * s_p / perimeter)
        coeffs += np.outer(phase, force) / perimeter
    return k, coeffs, perimeter


def boundary_sobolev_norm(traction, mesh, order=-0.5, samples=SOBOLEV_SAMPLES):
    """Spectral H^order norm of the boundary traction.

    Args:
        traction (TractionSpec): The load
        mesh (Mesh): Mesh whose outer polygon carries the arclength parameter
        order (float, optional): -1/2 or -1
        samples (int, optional): Equispaced arclength samples (modes |k| < samples/2)

    Returns:
        SobolevNorm: Norm of the requested order and both norms for the ratio F
    """
    if order not in (-0.5, -1.0, -1):
        raise ValueError(f"Sobolev order must be -1/2 or -1, got {order}")
    k, coeffs, perimeter = traction_spectrum(traction, mesh, samples)
    power = np.sum(np.abs(coeffs) ** 2, axis=1)
    half = math.sqrt(perimeter * float(np.sum((1.0 + k ** 2) ** -0.5 * power)))
    one = math.sqrt(perimeter * float(np.sum((1.0 + k ** 2) ** -1.0 * power)))
    value = half if order == -0.5 else one
    logger.debug(f"Traction norms: H^-1/2 = {half:.6g}, H^-1 = {one:.6g}")
    return SobolevNorm(value=value, order=float(order), half=half, one=one)


@dataclass(eq=False)
class EnergyCloud:
    """Energy density |sym grad a|^2 sampled on sub-triangle quadrature points."""

    points: np.ndarray
    weights: np.ndarray
    density: np.ndarray

    def __post_init__(self):
        self.tree = cKDTree(self.points)

    def integrate(self, center, radius):
        idx = self.tree.query_ball_point(np.asarray(center, dtype=float), radius)
        if not idx:
            return None
        idx = np.asarray(idx)
        return float(np.sum(self.weights[idx] * self.density[idx]))


def energy_cloud(displacement):
    """Sub-sampled energy density of a displacement field (cached on the field)."""
    cloud = displacement.cache.get("energy_cloud")
    if cloud is not None:
        return cloud
    space = displacement.space
    rule = subdivided_rule(4)
    n_cells = space.mesh.n_triangles
    points, weights, density = [], [], []
    for start in range(0, n_cells, _CLOUD_CHUNK):
        cells = np.arange(start, min(start + _CLOUD_CHUNK, n_cells))
        eps = displacement.element_strains(rule.points, cells)
        points.append(space.map_points(rule.points, cells).reshape(-1, 2))
        weights.append((rule.weights[None, :] * space.det_jacobians[cells, None]).ravel())
        density.append(np.sum(eps * eps, axis=(-1, -2)).ravel())
    cloud = EnergyCloud(np.vstack(points), np.concatenate(weights), np.concatenate(density))
    displacement.cache["energy_cloud"] = cloud
    return cloud


def local_energy(sol, center, radius, mesh=None):
    """Integral of |sym grad a|^2 over the disk B_radius(center) intersected with the mesh.

    Triangles straddling the disk are clipped by sub-sampling each into 16
    pieces with a 3-point rule.

    Args:
        sol (SaddleSolution | DisplacementField): Solved displacement
        center (Point2 | array-like): Disk center
        radius (float): Disk radius, more than 2 h_max
        mesh (Mesh, optional): Mesh (defaults to the field's)

    Returns:
        float: Local energy, zero (with a warning) when the disk misses the mesh
    """
    displacement = getattr(sol, "displacement", sol)
    mesh = mesh or displacement.mesh
    if radius <= 2.0 * mesh.h_max:
        logger.warning(f"Radius {radius:.4g} is not above 2 h_max = {2.0 * mesh.h_max:.4g}; clipping error is large")
    c = center.as_array() if hasattr(center, "as_array") else np.asarray(center, dtype=float)
    value = energy_cloud(displacement).integrate(c, radius)
    if value is None:
        logger.warning(f"Disk at {c} with radius {radius:.4g} does not meet the mesh")
        return 0.0
    return value


def h1_norm(sol, r0):
    """Scaled H1 norm r0^-1 (int |a|^2 + r0^2 int |grad a|^2)^(1/2)."""
    displacement = getattr(sol, "displacement", sol)
    space = displacement.space
    rule = triangle_rule(4)
    det = space.det_jacobians
    phi = space.shape_values(rule.points)
    values = np.einsum("qa,mai->mqi", phi, displacement.values[space.cell_dofs])
    grads = displacement.element_gradients(rule.points)
    w = rule.weights[None, :] * det[:, None]
    l2 = float(np.sum(w * np.sum(values ** 2, axis=-1)))
    semi = float(np.sum(w * np.sum(grads ** 2, axis=(-1, -2))))
    return math.sqrt(l2 + r0 ** 2 * semi) / r0


def direct_stability_ratio(sol, traction, mesh, r0):
    """||a||_{H1} / (r0 ||N_hat||_{-1/2}); bounded independently of the mesh for a stable solve.

    Raises:
        LoadError: For a zero traction
    """
    norm = boundary_sobolev_norm(traction, mesh, -0.5).value
    if norm == 0.0:
        raise LoadError("zero traction: stability ratio undefined")
    return h1_norm(sol, r0) / (r0 * norm)
