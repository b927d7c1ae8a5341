"""
Simply connected patches of the mesh on which a local Airy function exists.

An interior patch is a disk inside the domain. A boundary patch is the
rectangle of half-width r0 and half-height 2 M0 r0 centered on a cavity point
in the tangent frame of the cavity, cut down to the elements whose centroid
lies inside it.
"""
import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from geometry.distances import boundary_polyline, polyline_distance
from mesh.model import Mesh, unique_edges
from mesh.quadrature import triangle_rule
from utilities.errors import PatchError

logger = logging.getLogger(__name__)

_POLYLINE_SAMPLES = 1024
TAG_CUT = -3


@dataclass(frozen=True, eq=False)
class BoundaryArc:
    """Ordered points along a boundary piece and the normals pointing out of the domain."""

    points: np.ndarray
    normals: np.ndarray

    @classmethod
    def from_points(cls, points):
        """Arc through ordered points with the domain on the left; normals from the chords."""
        points = np.asarray(points, dtype=float)
        if points.shape[0] < 2:
            raise PatchError("an arc needs at least two points")
        chords = np.gradient(points, axis=0)
        tangent = chords / np.linalg.norm(chords, axis=1, keepdims=True)
        return cls(points, np.stack([tangent[:, 1], -tangent[:, 0]], axis=1))

    @property
    def arclength(self):
        steps = np.linalg.norm(np.diff(self.points, axis=0), axis=1)
        return np.concatenate([[0.0], np.cumsum(steps)])


@dataclass(frozen=True, eq=False)
class Patch:
    """Sub-mesh of a simply connected region with its reference point P0.

    ``cells`` are the parent triangles in the order of ``mesh.triangles``, so
    barycentric quadrature points of the parent map to the same points here.
    """

    kind: str
    mesh: Mesh
    cells: np.ndarray
    center: np.ndarray
    reference: np.ndarray
    reference_node: int
    parent_h_max: float
    radius: float = None
    tangent: np.ndarray = None
    half_width: float = None
    half_height: float = None
    cavity_index: int = None
    arc: BoundaryArc = None

    @property
    def h_max(self):
        return self.parent_h_max

    def contains(self, points):
        """Membership in the patch region (before intersecting with the mesh)."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        d = points - self.center
        if self.kind == "interior-disk":
            return np.hypot(d[:, 0], d[:, 1]) <= self.radius
        u = d @ self.tangent
        v = d @ np.array([-self.tangent[1], self.tangent[0]])
        return (np.abs(u) <= self.half_width) & (np.abs(v) <= self.half_height)

    @cached_property
    def boundary_segments(self):
        """Start and end points of the sub-mesh boundary edges, shape (k, 2, 2)."""
        return self.mesh.nodes[self.mesh.edges]

    def boundary_distance(self, points):
        """Distance from points to the boundary of the sub-mesh."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        a = self.boundary_segments[:, 0]
        ab = self.boundary_segments[:, 1] - a
        length2 = np.maximum(np.sum(ab * ab, axis=1), np.finfo(float).tiny)
        best = np.full(points.shape[0], np.inf)
        for start in range(0, points.shape[0], 512):
            p = points[start:start + 512, None, :]
            t = np.clip(np.sum((p - a) * ab, axis=-1) / length2, 0.0, 1.0)
            dist = np.linalg.norm(p - (a + t[..., None] * ab), axis=-1)
            best[start:start + 512] = dist.min(axis=1)
        return best

    def quadrature(self, degree=2):
        """Quadrature points and weights over the patch, flattened to (n, 2) and (n,)."""
        rule = triangle_rule(degree)
        p = self.mesh.nodes[self.mesh.triangles]
        points = np.einsum("qi,mid->mqd", rule.points, p).reshape(-1, 2)
        weights = (rule.weights[None, :] * 2.0 * self.mesh.areas[:, None]).ravel()
        return points, weights


def _submesh(mesh, cells):
    """Mesh made of the listed parent triangles; edges cut out of the interior get TAG_CUT."""
    cells = np.asarray(cells, dtype=np.int64)
    used = np.unique(mesh.triangles[cells])
    renumber = np.full(mesh.n_nodes, -1, dtype=np.int64)
    renumber[used] = np.arange(used.size)
    triangles = renumber[mesh.triangles[cells]]

    parent_tags = {}
    for (a, b), tag in zip(mesh.edges, mesh.edge_tags):
        parent_tags[(min(int(a), int(b)), max(int(a), int(b)))] = int(tag)

    edges, counts = unique_edges(triangles)
    boundary = {(int(a), int(b)) for (a, b), c in zip(edges, counts) if c == 1}
    out_edges, out_tags = [], []
    # triangles are counterclockwise, so their own edge order keeps the patch on the left
    for tri in triangles:
        for i in range(3):
            a, b = int(tri[i]), int(tri[(i + 1) % 3])
            if (min(a, b), max(a, b)) in boundary:
                parent = parent_tags.get((min(int(used[a]), int(used[b])), max(int(used[a]), int(used[b]))))
                out_edges.append((a, b))
                out_tags.append(TAG_CUT if parent is None else parent)
    return Mesh(
        nodes=mesh.nodes[used],
        triangles=triangles,
        regions=mesh.regions[cells],
        edges=np.array(out_edges, dtype=np.int64).reshape(-1, 2),
        edge_tags=np.array(out_tags, dtype=np.int64),
    )


def check_simply_connected(submesh):
    """Raise unless the triangles form one connected piece with Euler characteristic 1.

    Raises:
        PatchError: For an empty, disconnected or holed patch
    """
    if submesh.n_triangles == 0:
        raise PatchError("patch contains no elements")
    edges, _ = unique_edges(submesh.triangles)
    lookup = {(int(a), int(b)): k for k, (a, b) in enumerate(edges)}
    rows, cols = [], []
    for t, tri in enumerate(submesh.triangles):
        for i in range(3):
            a, b = int(tri[i]), int(tri[(i + 1) % 3])
            rows.append(t)
            cols.append(lookup[(min(a, b), max(a, b))])
    incidence = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(submesh.n_triangles, edges.shape[0])).tocsr()
    n_parts, _ = connected_components(incidence @ incidence.T, directed=False)
    if n_parts != 1:
        raise PatchError(f"patch splits into {n_parts} disconnected pieces")
    chi = submesh.euler_characteristic
    if chi != 1:
        raise PatchError(f"patch is not simply connected (Euler characteristic {chi}, {1 - chi} holes)")


def _cavity_arc(submesh, cavity_index):
    """Ordered chain of the sub-mesh edges lying on one cavity."""
    indices = submesh.edges_with_tags((cavity_index,))
    if indices.size == 0:
        raise PatchError(f"patch does not touch cavity {cavity_index}")
    successor = {int(submesh.edges[k, 0]): int(submesh.edges[k, 1]) for k in indices}
    starts = set(successor) - set(successor.values())
    if len(starts) != 1:
        raise PatchError(f"boundary of cavity {cavity_index} inside the patch is not a single arc")
    node = starts.pop()
    chain = [node]
    while node in successor:
        node = successor[node]
        chain.append(node)
    if len(chain) != len(successor) + 1:
        raise PatchError(f"boundary of cavity {cavity_index} inside the patch is not a single arc")
    return np.array(chain)


def _nearest_boundary_node(submesh, point):
    nodes = np.unique(submesh.edges)
    d = np.linalg.norm(submesh.nodes[nodes] - point, axis=1)
    return int(nodes[np.argmin(d)])


def interior_disk_patch(mesh, domain, center, radius):
    """Patch of the elements with centroid in the disk B_radius(center).

    Args:
        mesh (Mesh): Mesh of the domain
        domain (DomainSpec): Domain the mesh was built for
        center (Point2 | array-like): Disk center
        radius (float): Disk radius

    Returns:
        Patch: The disk patch, with P0 on its boundary at angle zero

    Raises:
        PatchError: If the disk leaves the domain or the sub-mesh is not simply connected
    """
    c = center.as_array() if hasattr(center, "as_array") else np.asarray(center, dtype=float)
    if not radius > 0.0:
        raise PatchError(f"patch radius must be positive, got {radius}")
    if not domain.outer.contains(c) or any(cav.contains(c) for cav in domain.cavities):
        raise PatchError(f"patch center {c} is outside the domain")
    gaps = [("outer boundary", float(polyline_distance(c, boundary_polyline(domain.outer, _POLYLINE_SAMPLES))[0]))]
    for k, cav in enumerate(domain.cavities):
        gaps.append((f"cavity {k}", float(polyline_distance(c, boundary_polyline(cav, _POLYLINE_SAMPLES))[0])))
    for name, gap in gaps:
        if gap <= radius:
            raise PatchError(f"disk of radius {radius:.6g} at {c} meets the {name} (distance {gap:.6g})")

    centroids = mesh.nodes[mesh.triangles].mean(axis=1)
    cells = np.flatnonzero(np.hypot(*(centroids - c).T) <= radius)
    submesh = _submesh(mesh, cells)
    check_simply_connected(submesh)
    ref_node = _nearest_boundary_node(submesh, c + np.array([radius, 0.0]))
    patch = Patch(
        kind="interior-disk",
        mesh=submesh,
        cells=cells,
        center=c,
        reference=submesh.nodes[ref_node].copy(),
        reference_node=ref_node,
        parent_h_max=mesh.h_max,
        radius=float(radius),
    )
    logger.debug(f"Interior patch at {c} with radius {radius:.4g}: {cells.size} elements")
    return patch


def boundary_rectangle_patch(mesh, domain, cavity_index, theta, r0=None, M0=None):
    """Patch R_{r0, 2 M0 r0}(x) intersected with the mesh, x on cavity ``cavity_index``.

    The rectangle is centered on x = gamma(theta) with its long side along the
    cavity normal. P0 is the cavity node closest to x.

    Args:
        mesh (Mesh): Mesh of the domain
        domain (DomainSpec): Domain with the cavity
        cavity_index (int): Cavity number
        theta (float): Polar angle of x on the cavity
        r0 (float, optional): Half-width. Defaults to domain.r0.
        M0 (float, optional): Lipschitz constant. Defaults to domain.M0.

    Returns:
        Patch: The boundary patch with its cavity arc

    Raises:
        PatchError: If the cavity index is invalid, the patch reaches the outer
            boundary, is not simply connected, or cuts the cavity more than once
    """
    if not 0 <= cavity_index < len(domain.cavities):
        raise PatchError(f"no cavity {cavity_index} (domain has {len(domain.cavities)})")
    r0 = domain.r0 if r0 is None else r0
    M0 = domain.M0 if M0 is None else M0
    shape = domain.cavities[cavity_index]
    x_bar = shape.points(float(theta))
    tangent = shape.tangent(float(theta))

    centroids = mesh.nodes[mesh.triangles].mean(axis=1)
    d = centroids - x_bar
    u = d @ tangent
    v = d @ np.array([-tangent[1], tangent[0]])
    cells = np.flatnonzero((np.abs(u) <= r0) & (np.abs(v) <= 2.0 * M0 * r0))
    submesh = _submesh(mesh, cells)
    check_simply_connected(submesh)
    if any(int(t) != TAG_CUT and int(t) != cavity_index for t in submesh.edge_tags):
        raise PatchError(f"boundary patch at cavity {cavity_index}, theta {theta:.4g} reaches another boundary")

    chain = _cavity_arc(submesh, cavity_index)
    arc_points = submesh.nodes[chain]
    arc_normals = _arc_normals(shape, arc_points)
    ref_node = int(chain[np.argmin(np.linalg.norm(arc_points - x_bar, axis=1))])
    patch = Patch(
        kind="boundary-rectangle",
        mesh=submesh,
        cells=cells,
        center=x_bar,
        reference=submesh.nodes[ref_node].copy(),
        reference_node=ref_node,
        parent_h_max=mesh.h_max,
        tangent=tangent,
        half_width=float(r0),
        half_height=float(2.0 * M0 * r0),
        cavity_index=int(cavity_index),
        arc=BoundaryArc(arc_points, arc_normals),
    )
    logger.debug(
        f"Boundary patch on cavity {cavity_index} at theta {theta:.4g}: {cells.size} elements, "
        f"{chain.size} arc nodes"
    )
    return patch


def _arc_normals(shape, points):
    """Normals of the cavity curve at its own points, pointing into the cavity."""
    tangent = shape.tangent(shape.polar_angle(points))
    return np.stack([-tangent[:, 1], tangent[:, 0]], axis=1)
