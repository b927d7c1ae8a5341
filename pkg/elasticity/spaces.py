"""
Lagrange P1 / P2 function spaces on a triangle mesh.

Local dof order: the three vertices, then for P2 the midpoints of the edges
(0,1), (1,2), (2,0). Reference vertices are (0,0), (1,0), (0,1) and the
barycentric coordinates are (1 - xi - eta, xi, eta).
"""
import logging
from functools import cached_property

import numpy as np
from scipy.spatial import cKDTree

from mesh.model import unique_edges
from utilities.errors import SolverError

logger = logging.getLogger(__name__)

_LOCATE_CANDIDATES = 8
_INSIDE_TOL = 1e-10


class FunctionSpace:
    """Scalar Lagrange space of order 1 or 2 (vector fields use it per component)."""

    def __init__(self, mesh, order=1):
        if order not in (1, 2):
            raise SolverError(f"element order must be 1 or 2, got {order}")
        self.mesh = mesh
        self.order = order
        if order == 1:
            self.cell_dofs = mesh.triangles.copy()
            self.dof_coords = mesh.nodes.copy()
            self._edge_index = None
        else:
            edges = unique_edges(mesh.triangles)[0]
            lookup = {(int(a), int(b)): k for k, (a, b) in enumerate(edges)}
            n = mesh.n_nodes
            mid = np.empty((mesh.n_triangles, 3), dtype=np.int64)
            for t, tri in enumerate(mesh.triangles):
                for i in range(3):
                    a, b = int(tri[i]), int(tri[(i + 1) % 3])
                    mid[t, i] = n + lookup[(min(a, b), max(a, b))]
            self.cell_dofs = np.hstack([mesh.triangles, mid])
            self.dof_coords = np.vstack([mesh.nodes, 0.5 * (mesh.nodes[edges[:, 0]] + mesh.nodes[edges[:, 1]])])
            self._edge_index = lookup
        self.n_dofs = self.dof_coords.shape[0]
        logger.debug(f"P{order} space with {self.n_dofs} scalar dofs")

    @property
    def n_local(self):
        return 3 if self.order == 1 else 6

    # reference shape functions
    def shape_values(self, bary):
        """Shape functions at barycentric points, shape (q, n_local)."""
        L = np.atleast_2d(bary)
        if self.order == 1:
            return L.copy()
        return np.column_stack(
            [
                L[:, 0] * (2.0 * L[:, 0] - 1.0),
                L[:, 1] * (2.0 * L[:, 1] - 1.0),
                L[:, 2] * (2.0 * L[:, 2] - 1.0),
                4.0 * L[:, 0] * L[:, 1],
                4.0 * L[:, 1] * L[:, 2],
                4.0 * L[:, 2] * L[:, 0],
            ]
        )

    def shape_gradients_ref(self, bary):
        """d/d(xi, eta) of the shape functions, shape (q, n_local, 2)."""
        L = np.atleast_2d(bary)
        dL = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
        q = L.shape[0]
        if self.order == 1:
            return np.broadcast_to(dL, (q, 3, 2)).copy()
        out = np.empty((q, 6, 2))
        for i in range(3):
            out[:, i, :] = (4.0 * L[:, i] - 1.0)[:, None] * dL[i]
        for k, (i, j) in enumerate(((0, 1), (1, 2), (2, 0))):
            out[:, 3 + k, :] = 4.0 * (L[:, j, None] * dL[i] + L[:, i, None] * dL[j])
        return out

    # element geometry
    @cached_property
    def jacobians(self):
        """Affine map Jacobians J = [v1 - v0, v2 - v0] as columns, shape (M, 2, 2)."""
        p = self.mesh.nodes[self.mesh.triangles]
        return np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)

    @cached_property
    def det_jacobians(self):
        det = np.linalg.det(self.jacobians)
        if np.any(det <= 0.0):
            raise SolverError(f"{int(np.sum(det <= 0.0))} triangles are degenerate or clockwise")
        return det

    @cached_property
    def inverse_jacobians(self):
        return np.linalg.inv(self.jacobians)

    def gradients(self, bary, cells=None):
        """Physical shape gradients, shape (M, q, n_local, 2) (or per listed cell)."""
        ref = self.shape_gradients_ref(bary)
        inv = self.inverse_jacobians if cells is None else self.inverse_jacobians[cells]
        # grad_x N = J^{-T} grad_ref N
        return np.einsum("mji,qaj->mqai", inv, ref)

    def map_points(self, bary, cells=None):
        """Physical coordinates of barycentric points, shape (M, q, 2)."""
        p = self.mesh.nodes[self.mesh.triangles if cells is None else self.mesh.triangles[cells]]
        return np.einsum("qi,mid->mqd", np.atleast_2d(bary), p)

    # evaluation
    def interpolate(self, func):
        """Nodal interpolant of a callable mapping (n, 2) points to (n, ...) values."""
        return np.asarray(func(self.dof_coords), dtype=float)

    def evaluate_at(self, values, cells, bary):
        """Field values at (cell, barycentric) pairs."""
        phi = self.shape_values(bary)
        local = values[self.cell_dofs[cells]]
        return np.einsum("na,na...->n...", phi, local)

    def gradient_at(self, values, cells, bary):
        """Field gradients at (cell, barycentric) pairs, shape (n, ..., 2)."""
        ref = self.shape_gradients_ref(bary)
        grads = np.einsum("nji,naj->nai", self.inverse_jacobians[cells], ref)
        local = values[self.cell_dofs[cells]]
        return np.einsum("nai,na...->n...i", grads, local)

    @cached_property
    def _centroid_tree(self):
        centroids = self.mesh.nodes[self.mesh.triangles].mean(axis=1)
        return cKDTree(centroids)

    def barycentric(self, cells, points):
        p0 = self.mesh.nodes[self.mesh.triangles[cells, 0]]
        ref = np.einsum("nij,nj->ni", self.inverse_jacobians[cells], points - p0)
        return np.column_stack([1.0 - ref[:, 0] - ref[:, 1], ref[:, 0], ref[:, 1]])

    def locate(self, points):
        """Containing cell and barycentric coordinates for each point.

        Points outside the mesh (e.g. between a polygonal boundary and the
        exact curve) get the least-outside nearby cell, with the barycentric
        coordinates left unclipped.

        Returns:
            tuple: (cells (n,), bary (n, 3), inside (n,) bool)
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        k = min(_LOCATE_CANDIDATES, self.mesh.n_triangles)
        _, cand = self._centroid_tree.query(points, k=k)
        cand = np.asarray(cand).reshape(points.shape[0], k)
        best_cell = cand[:, 0].copy()
        best_score = np.full(points.shape[0], -np.inf)
        for j in range(k):
            bary = self.barycentric(cand[:, j], points)
            score = bary.min(axis=1)
            better = score > best_score
            best_cell[better] = cand[better, j]
            best_score[better] = score[better]
        bary = self.barycentric(best_cell, points)
        return best_cell, bary, best_score >= -_INSIDE_TOL

    # boundary
    def edge_dofs(self, edge_indices):
        """Dofs along oriented boundary edges: (start, end) for P1, (start, end, mid) for P2."""
        edges = self.mesh.edges[np.asarray(edge_indices, dtype=np.int64)]
        if self.order == 1:
            return edges.copy()
        mids = np.array(
            [self.mesh.n_nodes + self._edge_index[(min(int(a), int(b)), max(int(a), int(b)))] for a, b in edges],
            dtype=np.int64,
        ).reshape(-1, 1)
        return np.hstack([edges, mids])

    def edge_shape_values(self, s):
        """1D shape functions along an edge parameter s in [0, 1], shape (q, 2 or 3)."""
        s = np.atleast_1d(s)
        if self.order == 1:
            return np.column_stack([1.0 - s, s])
        return np.column_stack([(1.0 - s) * (1.0 - 2.0 * s), s * (2.0 * s - 1.0), 4.0 * s * (1.0 - s)])
