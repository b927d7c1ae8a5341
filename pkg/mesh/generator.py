"""
Conforming triangulation of Omega minus the cavities.

Boundary loops are discretized first (node spacing following the size
function), interior nodes come from a hexagonal lattice, and the whole point
set is Delaunay-triangulated, filtered by triangle centroids and relaxed by
Laplacian smoothing with the boundary held fixed.
"""
import logging
import math

import numpy as np
from scipy.sparse import csr_matrix
from scipy.spatial import Delaunay

from geometry.apriori import apriori_check
from geometry.distances import boundary_polyline, polyline_distance
from mesh.model import TAG_OUTER, TAG_SIGMA, Mesh, triangle_areas, unique_edges
from setup.config_conf import DEFAULT_SMOOTHING_ITERATIONS, MIN_ANGLE_DEGREES
from utilities.errors import ConstraintError, MeshError

logger = logging.getLogger(__name__)

_CURVE_SAMPLES = 4096
_MIN_LOOP_NODES = 12
_BOUNDARY_CLEARANCE = 0.55
_AREA_TOL = 1.0e-10


class SizeFunction:
    """Target edge length h(x) = min(h, h_cavity + grading * dist(x, cavities))."""

    def __init__(self, h_target, cavity_polylines=(), h_cavity=None, grading=None):
        self.h_target = float(h_target)
        self.h_cavity = float(h_cavity) if h_cavity is not None else self.h_target
        self.grading = float(grading) if grading is not None else 0.0
        self.cavity_polylines = list(cavity_polylines)
        self.graded = grading is not None and self.h_cavity < self.h_target and bool(self.cavity_polylines)

    @property
    def h_min(self):
        return min(self.h_target, self.h_cavity) if self.graded else self.h_target

    def __call__(self, points):
        points = np.atleast_2d(points)
        h = np.full(points.shape[0], self.h_target)
        if not self.graded:
            return h
        for poly in self.cavity_polylines:
            h = np.minimum(h, self.h_cavity + self.grading * polyline_distance(points, poly))
        return h


def star_polygon_contains(points, center, vertices):
    """Point-in-polygon test for a polygon that is star-shaped about ``center``.

    The polygon radius along the ray through each point is found from the two
    angularly adjacent vertices.

    Args:
        points (numpy.ndarray): Query points, shape (n, 2)
        center (numpy.ndarray): Star center
        vertices (numpy.ndarray): Polygon vertices, any order, shape (m, 2)

    Returns:
        numpy.ndarray: Boolean mask (closed polygon)
    """
    rel_v = vertices - center
    ang_v = np.mod(np.arctan2(rel_v[:, 1], rel_v[:, 0]), 2.0 * np.pi)
    order = np.argsort(ang_v)
    ang_v = ang_v[order]
    rel_v = rel_v[order]

    rel_p = np.atleast_2d(points) - center
    ang_p = np.mod(np.arctan2(rel_p[:, 1], rel_p[:, 0]), 2.0 * np.pi)
    r_p = np.hypot(rel_p[:, 0], rel_p[:, 1])

    m = ang_v.size
    upper = np.searchsorted(ang_v, ang_p, side="right")
    i0 = np.mod(upper - 1, m)
    i1 = np.mod(upper, m)
    v0 = rel_v[i0]
    v1 = rel_v[i1]
    direction = np.stack([np.cos(ang_p), np.sin(ang_p)], axis=1)
    edge = v1 - v0
    numer = v0[:, 0] * v1[:, 1] - v0[:, 1] * v1[:, 0]
    denom = direction[:, 0] * edge[:, 1] - direction[:, 1] * edge[:, 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        radius = np.where(np.abs(denom) > 0.0, numer / denom, np.linalg.norm(v0, axis=1))
    return r_p <= radius * (1.0 + 1e-12)


def discretize_loop(shape, size_function, start_theta=0.0):
    """Boundary nodes on a star-shaped curve with spacing following h(x).

    Nodes are placed at equal increments of the integral of ds / h along the
    curve, counterclockwise from ``start_theta``.

    Returns:
        numpy.ndarray: Node angles, increasing
    """
    theta = start_theta + np.linspace(0.0, 2.0 * np.pi, _CURVE_SAMPLES + 1)
    pts = shape.points(theta)
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    mid = 0.5 * (pts[1:] + pts[:-1])
    counts = np.concatenate([[0.0], np.cumsum(seg / size_function(mid))])
    n = max(_MIN_LOOP_NODES, int(math.ceil(counts[-1])))
    targets = np.arange(n) * (counts[-1] / n)
    return np.interp(targets, counts, theta)


def hex_lattice(lo, hi, spacing):
    """Equilateral-triangle lattice covering a bounding box."""
    dy = spacing * math.sqrt(3.0) / 2.0
    ys = np.arange(lo[1], hi[1] + dy, dy)
    rows = []
    for j, y in enumerate(ys):
        xs = np.arange(lo[0] + (0.5 * spacing if j % 2 else 0.0), hi[0] + spacing, spacing)
        rows.append(np.stack([xs, np.full(xs.shape, y)], axis=1))
    return np.vstack(rows)


def _scaled_delaunay(p):
    lo, hi = p.min(axis=0), p.max(axis=0)
    center = 0.5 * (lo + hi)
    scale = 0.5 * float(np.min(hi - lo))
    if scale < np.finfo(float).eps:
        scale = 1.0
    return Delaunay((p - center) / scale).simplices


class _Region:
    """Membership of Omega minus the cavities, from the boundary polygons."""

    def __init__(self, domain, loops):
        self.domain = domain
        self.loops = loops

    def inside(self, points):
        outer_center = self.domain.outer.center.as_array()
        keep = star_polygon_contains(points, outer_center, self.loops[0])
        for shape, poly in zip(self.domain.cavities, self.loops[1:]):
            keep &= ~star_polygon_contains(points, shape.center.as_array(), poly)
        return keep

    def boundary_distance(self, points):
        dist = np.full(points.shape[0], np.inf)
        for poly in self.loops:
            dist = np.minimum(dist, polyline_distance(points, poly))
        return dist


def _triangulate(p, region):
    """Delaunay triangulation restricted to the region, counterclockwise, no slivers of zero area."""
    t = _scaled_delaunay(p)
    centroids = p[t].mean(axis=1)
    t = t[region.inside(centroids)]
    area = triangle_areas(p, t)
    flip = area < 0.0
    t[flip] = t[flip][:, [1, 0, 2]]
    area = np.abs(area)
    if area.size:
        t = t[area > _AREA_TOL * area.max()]
    return t


def _smooth(p, t, fixed, region, size_function, iterations, tol=0.01):
    """Laplacian smoothing with retriangulation; moves that leave the region are undone."""
    n = p.shape[0]
    for it in range(iterations):
        numt = t.shape[0]
        pairs = [(0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1)]
        rows = np.concatenate([t[:, a] for a, _ in pairs])
        cols = np.concatenate([t[:, b] for _, b in pairs])
        S = csr_matrix((np.ones(6 * numt), (rows, cols)), shape=(n, n))
        S.data[:] = 1.0
        W = np.asarray(S.sum(axis=1)).ravel()
        W[W == 0.0] = 1.0

        p_new = S.dot(p) / W[:, None]
        p_new[fixed] = p[fixed]

        moved = ~fixed
        candidates = p_new[moved]
        bad = ~region.inside(candidates)
        bad |= region.boundary_distance(candidates) < 0.3 * size_function(candidates)
        candidates[bad] = p[moved][bad]
        p_new[moved] = candidates

        shift = np.linalg.norm(p_new - p, axis=1) / size_function(p)
        p = p_new
        t = _triangulate(p, region)
        logger.debug(f"Smoothing iteration {it + 1}: max relative move {shift.max():.3g}")
        if shift.max() < tol:
            break
    return p, t


def _orient_boundary_edges(t, boundary):
    """Orient boundary edges so that the owning triangle (counterclockwise) lies on the left."""
    directed = set()
    for tri in t:
        for i in range(3):
            directed.add((int(tri[i]), int(tri[(i + 1) % 3])))
    oriented = boundary.copy()
    for k, (a, b) in enumerate(boundary):
        if (int(a), int(b)) not in directed:
            oriented[k] = (b, a)
    return oriented


def generate_mesh(domain, h_target, h_cavity=None, grading=None, smoothing_iterations=DEFAULT_SMOOTHING_ITERATIONS):
    """Build a conforming triangle mesh of Omega minus the cavities.

    Args:
        domain (DomainSpec): Geometry and a-priori constants
        h_target (float): Maximum edge length, at most r0 / 4
        h_cavity (float, optional): Edge length next to the cavities when grading
        grading (float, optional): Growth rate of h with the distance to the cavities
        smoothing_iterations (int, optional): Laplacian smoothing sweeps

    Returns:
        Mesh: Triangulation with outer / sigma / cavity:k edge tags

    Raises:
        ConstraintError: If h_target > r0 / 4 or the geometry fails the a-priori constraints
        MeshError: If the triangulation does not reproduce every boundary edge
    """
    if not h_target > 0.0 or h_target > domain.r0 / 4.0 * (1.0 + 1e-12):
        raise ConstraintError(f"h_target = {h_target:.6g} must lie in (0, r0/4 = {domain.r0 / 4.0:.6g}]")

    report = apriori_check(domain)
    if not report.geometry_passed:
        failed = ", ".join(item.name for item in report.geometry_failures())
        raise ConstraintError(f"Domain violates the a-priori constraints: {failed}")
    for item in report.failures():
        logger.warning(
            f"Constraint '{item.name}' not met (value {item.value:.6g} > {item.bound:.6g}); meshing anyway"
        )

    cavity_curves = [boundary_polyline(c, 1024) for c in domain.cavities]
    size_function = SizeFunction(h_target, cavity_curves, h_cavity, grading)

    # boundary nodes: outer loop first, then one block per cavity
    loops = []
    shapes = [domain.outer] + list(domain.cavities)
    for shape in shapes:
        theta = discretize_loop(shape, size_function)
        loops.append(shape.points(theta))
    region = _Region(domain, loops)
    boundary_points = np.vstack(loops)
    n_boundary = boundary_points.shape[0]

    pts = loops[0]
    lattice = hex_lattice(pts.min(axis=0), pts.max(axis=0), size_function.h_min)
    lattice = lattice[region.inside(lattice)]
    h_local = size_function(lattice)
    lattice = lattice[region.boundary_distance(lattice) >= _BOUNDARY_CLEARANCE * h_local]
    if size_function.graded:
        # thin the lattice to density ~ 1/h(x)^2
        h_local = size_function(lattice)
        keep_prob = (size_function.h_min / h_local) ** 2
        rng = np.random.default_rng(0)
        lattice = lattice[rng.random(lattice.shape[0]) < keep_prob]

    p = np.vstack([boundary_points, lattice])
    fixed = np.zeros(p.shape[0], dtype=bool)
    fixed[:n_boundary] = True
    logger.info(f"Meshing with {n_boundary} boundary and {lattice.shape[0]} interior nodes")

    t = _triangulate(p, region)
    p, t = _smooth(p, t, fixed, region, size_function, smoothing_iterations)

    used = np.unique(t.ravel())
    if used.size < p.shape[0]:
        unused_boundary = np.setdiff1d(np.arange(n_boundary), used)
        if unused_boundary.size:
            raise MeshError(f"boundary node {int(unused_boundary[0])} is not part of any triangle")
        remap = np.full(p.shape[0], -1, dtype=np.int64)
        remap[used] = np.arange(used.size)
        p = p[used]
        t = remap[t]

    # expected boundary polylines
    expected = []
    expected_tags = []
    offset = 0
    for index, loop in enumerate(loops):
        m = loop.shape[0]
        a = offset + np.arange(m)
        b = offset + np.mod(np.arange(m) + 1, m)
        if index == 0:
            mid = 0.5 * (loop + np.roll(loop, -1, axis=0))
            s_mid = domain.outer_arclength(mid)
            tags = np.where(domain.sigma_contains(s_mid), TAG_SIGMA, TAG_OUTER)
            if not domain.full_sigma and not np.any(tags == TAG_SIGMA):
                raise MeshError("no outer edge falls inside Sigma; refine the mesh")
        else:
            tags = np.full(m, index - 1)
        expected.append(np.stack([a, b], axis=1))
        expected_tags.append(tags)
        offset += m
    expected = np.vstack(expected)
    expected_tags = np.concatenate(expected_tags)

    all_edges, counts = unique_edges(t)
    boundary = all_edges[counts == 1]
    found = {(int(a), int(b)) for a, b in boundary}
    wanted = {(min(int(a), int(b)), max(int(a), int(b))) for a, b in expected}
    missing = wanted - found
    if missing:
        a, b = sorted(missing)[0]
        raise MeshError(f"boundary segment ({a}, {b}) at {p[a].round(6)} is missing from the triangulation")
    extra = found - wanted
    if extra:
        a, b = sorted(extra)[0]
        raise MeshError(f"spurious boundary edge ({a}, {b}) at {p[a].round(6)}: region not covered")

    edges = _orient_boundary_edges(t, expected)
    mesh = Mesh(nodes=p, triangles=t, regions=np.zeros(t.shape[0], dtype=np.int64), edges=edges, edge_tags=expected_tags)

    if mesh.euler_characteristic != 1 - len(domain.cavities):
        raise MeshError(
            f"Euler characteristic {mesh.euler_characteristic} does not match {len(domain.cavities)} cavities"
        )
    if mesh.min_angle < MIN_ANGLE_DEGREES:
        logger.warning(f"Minimum angle {mesh.min_angle:.2f} deg is below {MIN_ANGLE_DEGREES} deg")
    logger.info(
        f"Mesh: {mesh.n_nodes} nodes, {mesh.n_triangles} triangles, h_max={mesh.h_max:.4g}, "
        f"min angle={mesh.min_angle:.2f} deg"
    )
    return mesh
