"""
Local orthonormal frames (outward normal, counterclockwise tangent) on boundary edges.
"""
import logging
from dataclasses import dataclass

import numpy as np

from utilities.errors import MeshError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BoundaryFrame:
    """Outward unit normal n and unit tangent tau with tau = (-n2, n1)."""

    n: tuple
    tau: tuple


def edge_geometry(mesh, edge_indices=None):
    """Vectorized frames of boundary edges.

    Args:
        mesh (Mesh): The mesh
        edge_indices (array-like, optional): Subset of boundary edges. Defaults to all.

    Returns:
        dict: ``start``, ``end``, ``length``, ``normal``, ``tangent`` arrays
    """
    if edge_indices is None:
        edge_indices = np.arange(mesh.edges.shape[0])
    edges = mesh.edges[np.asarray(edge_indices, dtype=np.int64)]
    start = mesh.nodes[edges[:, 0]]
    end = mesh.nodes[edges[:, 1]]
    d = end - start
    length = np.linalg.norm(d, axis=1)
    tangent = d / length[:, None]
    normal = np.stack([tangent[:, 1], -tangent[:, 0]], axis=1)
    return {"start": start, "end": end, "length": length, "normal": normal, "tangent": tangent}


def find_boundary_edge(mesh, a, b):
    """Index of the boundary edge joining nodes a and b (either orientation).

    Raises:
        MeshError: If (a, b) is not a boundary edge
    """
    hits = np.flatnonzero(
        ((mesh.edges[:, 0] == a) & (mesh.edges[:, 1] == b)) | ((mesh.edges[:, 0] == b) & (mesh.edges[:, 1] == a))
    )
    if hits.size == 0:
        raise MeshError(f"({a}, {b}) is not a boundary edge")
    return int(hits[0])


def boundary_frame(mesh, edge):
    """Frame of one boundary edge.

    On the outer boundary n points away from Omega; on a cavity boundary it
    points into the cavity. In both cases the domain lies on the left of tau.

    Args:
        mesh (Mesh): The mesh
        edge (int | tuple): Boundary edge index, or a node pair

    Returns:
        BoundaryFrame: (n, tau)

    Raises:
        MeshError: If the edge is not a boundary edge
    """
    if isinstance(edge, tuple):
        index = find_boundary_edge(mesh, int(edge[0]), int(edge[1]))
    else:
        index = int(edge)
        if not 0 <= index < mesh.edges.shape[0]:
            raise MeshError(f"boundary edge index {index} out of range")
    geom = edge_geometry(mesh, [index])
    n = geom["normal"][0]
    t = geom["tangent"][0]
    return BoundaryFrame(n=(float(n[0]), float(n[1])), tau=(float(t[0]), float(t[1])))
