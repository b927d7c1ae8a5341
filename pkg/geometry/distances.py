"""
Set distances between cavities: Hausdorff distance of the closed regions and the
auxiliary distances d (between the complements in the closure of Omega) and d_m
(boundary-to-complement).
"""
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from setup.config_conf import DEFAULT_BOUNDARY_SAMPLES
from utilities.errors import ConstraintError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DistanceTriple:
    d: float
    d_m: float
    d_H: float

    def __post_init__(self):
        if min(self.d, self.d_m, self.d_H) < 0.0:
            raise ValueError(f"Distances must be non-negative, got {self}")


def polyline_distance(points, vertices, closed=True):
    """Distance from points to a polyline.

    Candidate segments are those adjacent to the nearest vertices, which is exact
    once the polyline is dense relative to its curvature.

    Args:
        points (numpy.ndarray): Query points, shape (n, 2)
        vertices (numpy.ndarray): Polyline vertices, shape (m, 2)
        closed (bool, optional): Whether the last vertex connects to the first

    Returns:
        numpy.ndarray: Distances, shape (n,)
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    vertices = np.asarray(vertices, dtype=float)
    m = vertices.shape[0]
    k = min(4, m)
    _, nearest = cKDTree(vertices).query(points, k=k)
    nearest = nearest.reshape(points.shape[0], k)

    best = np.full(points.shape[0], np.inf)
    for shift in (-1, 0):
        start = nearest + shift
        end = start + 1
        if closed:
            start, end = np.mod(start, m), np.mod(end, m)
        else:
            valid = (start >= 0) & (end < m)
            start, end = np.clip(start, 0, m - 1), np.clip(end, 0, m - 1)
        a = vertices[start]
        b = vertices[end]
        ab = b - a
        length2 = np.maximum(np.sum(ab ** 2, axis=-1), np.finfo(float).tiny)
        t = np.clip(np.sum((points[:, None, :] - a) * ab, axis=-1) / length2, 0.0, 1.0)
        proj = a + t[..., None] * ab
        dist = np.linalg.norm(points[:, None, :] - proj, axis=-1)
        if not closed:
            dist = np.where(valid, dist, np.inf)
        best = np.minimum(best, dist.min(axis=1))
    return best


def boundary_polyline(shape, n):
    """n vertices equally spaced in arclength on a star-shaped curve."""
    return shape.points(shape.equal_arclength_thetas(n))


def interior_samples(shape, n):
    """Points of a regular grid (about n of them) inside the closed region."""
    pts = boundary_polyline(shape, 256)
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    spacing = math.sqrt(shape.area / n)
    gx = np.arange(lo[0] + 0.5 * spacing, hi[0], spacing)
    gy = np.arange(lo[1] + 0.5 * spacing, hi[1], spacing)
    grid = np.stack(np.meshgrid(gx, gy, indexing="ij"), axis=-1).reshape(-1, 2)
    return grid[shape.contains(grid)]


def _region_samples(shape, n):
    return np.vstack([boundary_polyline(shape, n), interior_samples(shape, n)])


def _one_sided(samples, target, target_boundary):
    """sup over samples of the distance to the closed region ``target``."""
    dist = polyline_distance(samples, target_boundary)
    dist[target.contains(samples)] = 0.0
    return float(dist.max()) if dist.size else 0.0


def hausdorff_distance(A, B, n=DEFAULT_BOUNDARY_SAMPLES):
    """Hausdorff distance between the closed regions bounded by two star-shaped curves.

    Args:
        A (StarShape): First region
        B (StarShape): Second region
        n (int, optional): Boundary sample count (also the interior sample budget)

    Returns:
        float: Two-sided sup-inf distance of the sampled sets
    """
    if n < 256:
        raise ValueError(f"Hausdorff sampling needs n >= 256, got {n}")
    bnd_a = boundary_polyline(A, n)
    bnd_b = boundary_polyline(B, n)
    d_ab = _one_sided(_region_samples(A, n), B, bnd_b)
    d_ba = _one_sided(_region_samples(B, n), A, bnd_a)
    return max(d_ab, d_ba)


def _complement_gap(D1, D2, n):
    """sup over x in (closure(Omega) minus D1) of dist(x, closure(Omega) minus D2).

    Only points inside D2 contribute, at distance dist(x, boundary of D2).
    Also returns the same sup restricted to the boundary of D1.
    """
    bnd_1 = boundary_polyline(D1, n)
    bnd_2 = boundary_polyline(D2, n)
    inner_2 = interior_samples(D2, n)

    candidates = inner_2[~D1.contains(inner_2)]
    on_bnd_1 = bnd_1[D2.contains(bnd_1)]

    bnd_gap = float(polyline_distance(on_bnd_1, bnd_2).max()) if on_bnd_1.size else 0.0
    inner_gap = float(polyline_distance(candidates, bnd_2).max()) if candidates.size else 0.0
    return max(bnd_gap, inner_gap), bnd_gap


def auxiliary_distances(D1, D2, omega, n=DEFAULT_BOUNDARY_SAMPLES, check=True):
    """Auxiliary distances between two cavities inside the same domain.

    d = d_H(closure(Omega) minus D1, closure(Omega) minus D2),
    d_m = max over the two cavity boundaries of the distance to the other complement,
    d_H = d_H(closure(D1), closure(D2)).

    Args:
        D1 (StarShape): First cavity
        D2 (StarShape): Second cavity
        omega (DomainSpec): Domain whose outer boundary and constants apply
        n (int, optional): Sample count
        check (bool, optional): Verify the a-priori class first. Defaults to True.

    Returns:
        DistanceTriple: (d, d_m, d_H)

    Raises:
        ConstraintError: If a cavity violates the a-priori class or the
            geometric bound d_H <= sqrt(1 + M0^2) d fails beyond sampling slack
    """
    if check:
        from geometry.apriori import apriori_check

        for label, cavity in (("D1", D1), ("D2", D2)):
            report = apriori_check(omega.with_cavities((cavity,)))
            if not report.geometry_passed:
                failed = ", ".join(item.name for item in report.geometry_failures())
                raise ConstraintError(f"Cavity {label} violates the a-priori class: {failed}")

    gap_12, bnd_12 = _complement_gap(D1, D2, n)
    gap_21, bnd_21 = _complement_gap(D2, D1, n)
    d = max(gap_12, gap_21)
    d_m = max(bnd_12, bnd_21)
    d_H = hausdorff_distance(D1, D2, n)

    bound = math.sqrt(1.0 + omega.M0 ** 2) * d + 1e-3 * omega.r0
    if d_H > bound:
        raise ConstraintError(
            f"d_H = {d_H:.6g} exceeds sqrt(1+M0^2) d + slack = {bound:.6g}"
        )
    logger.debug(f"Auxiliary distances: d={d:.6g}, d_m={d_m:.6g}, d_H={d_H:.6g}")
    return DistanceTriple(d=d, d_m=d_m, d_H=d_H)
