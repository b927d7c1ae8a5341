"""
Triangle mesh of Omega minus the cavities, with tagged boundary edges.
"""
import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from utilities.errors import MeshError

logger = logging.getLogger(__name__)

TAG_OUTER = -2
TAG_SIGMA = -1


def tag_name(tag):
    """Text form of an edge tag: outer, sigma or cavity:<k>."""
    tag = int(tag)
    if tag == TAG_OUTER:
        return "outer"
    if tag == TAG_SIGMA:
        return "sigma"
    if tag >= 0:
        return f"cavity:{tag}"
    raise ValueError(f"Unknown edge tag {tag}")


def parse_tag(text):
    """Inverse of tag_name; raises ValueError on unknown text."""
    if text == "outer":
        return TAG_OUTER
    if text == "sigma":
        return TAG_SIGMA
    if text.startswith("cavity:"):
        k = int(text.split(":", 1)[1])
        if k < 0:
            raise ValueError(f"negative cavity index in tag '{text}'")
        return k
    raise ValueError(f"unknown tag '{text}'")


def triangle_areas(nodes, triangles):
    """Signed areas, positive for counterclockwise triangles."""
    d12 = nodes[triangles[:, 1]] - nodes[triangles[:, 0]]
    d13 = nodes[triangles[:, 2]] - nodes[triangles[:, 0]]
    return 0.5 * (d12[:, 0] * d13[:, 1] - d12[:, 1] * d13[:, 0])


def triangle_angles(nodes, triangles):
    """Interior angles in degrees, shape (M, 3)."""
    p = nodes[triangles]
    angles = np.empty(triangles.shape)
    for i in range(3):
        a = p[:, (i + 1) % 3] - p[:, i]
        b = p[:, (i + 2) % 3] - p[:, i]
        cosine = np.sum(a * b, axis=1) / (np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1))
        angles[:, i] = np.degrees(np.arccos(np.clip(cosine, -1.0, 1.0)))
    return angles


def unique_edges(triangles):
    """Sorted unique node pairs of a triangulation and the multiplicity of each."""
    all_edges = np.sort(
        np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]]), axis=1
    )
    edges, counts = np.unique(all_edges, axis=0, return_counts=True)
    return edges, counts


@dataclass(frozen=True, eq=False)
class Mesh:
    """Conforming triangulation.

    Boundary edges are oriented with the domain on their left, so the outward
    normal of edge (a, b) is the clockwise rotation of b - a.
    """

    nodes: np.ndarray
    triangles: np.ndarray
    regions: np.ndarray
    edges: np.ndarray
    edge_tags: np.ndarray

    def __post_init__(self):
        for name, dtype in (
            ("nodes", float),
            ("triangles", np.int64),
            ("regions", np.int64),
            ("edges", np.int64),
            ("edge_tags", np.int64),
        ):
            array = np.array(getattr(self, name), dtype=dtype)
            array.setflags(write=False)
            object.__setattr__(self, name, array)
        if self.nodes.ndim != 2 or self.nodes.shape[1] != 2:
            raise MeshError(f"nodes must have shape (N, 2), got {self.nodes.shape}")
        object.__setattr__(self, "triangles", self.triangles.reshape(-1, 3))
        object.__setattr__(self, "edges", self.edges.reshape(-1, 2))

    @property
    def n_nodes(self):
        return self.nodes.shape[0]

    @property
    def n_triangles(self):
        return self.triangles.shape[0]

    @cached_property
    def areas(self):
        return triangle_areas(self.nodes, self.triangles)

    @cached_property
    def all_edges(self):
        return unique_edges(self.triangles)[0]

    @cached_property
    def h_max(self):
        e = self.all_edges
        return float(np.linalg.norm(self.nodes[e[:, 0]] - self.nodes[e[:, 1]], axis=1).max())

    @cached_property
    def min_angle(self):
        return float(triangle_angles(self.nodes, self.triangles).min())

    @property
    def euler_characteristic(self):
        return self.n_nodes - self.all_edges.shape[0] + self.n_triangles

    @cached_property
    def edge_triangles(self):
        """Index of the triangle owning each boundary edge."""
        lookup = {}
        for t, tri in enumerate(self.triangles):
            for i in range(3):
                a, b = int(tri[i]), int(tri[(i + 1) % 3])
                lookup.setdefault((min(a, b), max(a, b)), []).append(t)
        owners = np.empty(self.edges.shape[0], dtype=np.int64)
        for k, (a, b) in enumerate(self.edges):
            key = (min(int(a), int(b)), max(int(a), int(b)))
            found = lookup.get(key, [])
            if len(found) != 1:
                raise MeshError(f"boundary edge {k} ({a}, {b}) belongs to {len(found)} triangles")
            owners[k] = found[0]
        return owners

    @property
    def cavity_indices(self):
        return sorted({int(t) for t in self.edge_tags if t >= 0})

    def edges_with_tags(self, tags):
        """Indices of boundary edges carrying any of the given tags."""
        return np.flatnonzero(np.isin(self.edge_tags, list(tags)))

    @property
    def outer_edge_indices(self):
        return self.edges_with_tags((TAG_OUTER, TAG_SIGMA))

    @property
    def sigma_edge_indices(self):
        return self.edges_with_tags((TAG_SIGMA,))

    def cavity_edge_indices(self, k):
        return self.edges_with_tags((k,))

    def ordered_loop(self, edge_indices):
        """Chain oriented boundary edges into one closed loop of node indices.

        Raises:
            MeshError: If the edges do not form a single closed loop
        """
        edge_indices = np.asarray(edge_indices)
        if edge_indices.size == 0:
            raise MeshError("empty boundary loop")
        successor = {}
        for k in edge_indices:
            a, b = (int(v) for v in self.edges[k])
            if a in successor:
                raise MeshError(f"node {a} starts two boundary edges")
            successor[a] = b
        start = int(self.edges[edge_indices[0], 0])
        loop = [start]
        node = successor[start]
        while node != start:
            loop.append(node)
            if node not in successor or len(loop) > len(successor):
                raise MeshError(f"boundary edges through node {node} do not close into a loop")
            node = successor[node]
        if len(loop) != len(successor):
            raise MeshError("boundary edges form more than one loop")
        return np.array(loop)

    def outer_loop(self):
        """Outer boundary nodes in counterclockwise order."""
        return self.ordered_loop(self.outer_edge_indices)

    def same_as(self, other):
        """Field-by-field equality."""
        return all(
            np.array_equal(getattr(self, name), getattr(other, name))
            for name in ("nodes", "triangles", "regions", "edges", "edge_tags")
        )
