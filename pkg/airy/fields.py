"""
Airy functions on a patch: discrete (P2 on the patch sub-mesh) and closed form.

Both kinds answer ``values``, ``gradient`` and ``hessian`` at points, so the
checks in ``airy.checks`` treat them alike.
"""
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from setup.config_conf import DEFAULT_FIT_RADIUS

logger = logging.getLogger(__name__)

_MIN_FIT_POINTS = 10
_MAX_FIT_GROWTH = 4


def rot(A):
    """Rotation A -> (A22, A11, -A12) of symmetric matrices, shape (..., 2, 2).

    Maps the stress to the Hessian of its Airy function and the strain
    functions K to the strain. It is an involution.
    """
    A = np.asarray(A, dtype=float)
    out = np.empty_like(A)
    out[..., 0, 0] = A[..., 1, 1]
    out[..., 1, 1] = A[..., 0, 0]
    out[..., 0, 1] = -A[..., 0, 1]
    out[..., 1, 0] = -A[..., 1, 0]
    return out


def quadratic_basis(d):
    """Monomials 1, x, y, x^2, xy, y^2 of offsets d, shape (n, 6)."""
    x, y = d[:, 0], d[:, 1]
    return np.column_stack([np.ones_like(x), x, y, x * x, x * y, y * y])


def local_quadratic_fits(coords, values, queries, radius, tree=None):
    """Least-squares quadratic fit of sampled values around every query point.

    The fit disk grows (up to 4 times) until it holds enough samples.

    Args:
        coords (numpy.ndarray): Sample locations, shape (n, 2)
        values (numpy.ndarray): Samples, shape (n, k)
        queries (numpy.ndarray): Fit centers, shape (m, 2)
        radius (float): Fit radius
        tree (cKDTree, optional): Prebuilt tree over ``coords``

    Returns:
        numpy.ndarray: Coefficients of the monomials in offsets from each query,
        shape (m, 6, k)
    """
    coords = np.asarray(coords, dtype=float)
    values = np.asarray(values, dtype=float).reshape(coords.shape[0], -1)
    queries = np.atleast_2d(np.asarray(queries, dtype=float))
    tree = tree or cKDTree(coords)
    out = np.empty((queries.shape[0], 6, values.shape[1]))
    neighbours = tree.query_ball_point(queries, radius)
    for i, idx in enumerate(neighbours):
        r = radius
        grow = 0
        while len(idx) < _MIN_FIT_POINTS and grow < _MAX_FIT_GROWTH:
            r *= 1.5
            grow += 1
            idx = tree.query_ball_point(queries[i], r)
        d = (coords[idx] - queries[i]) / r
        coef, *_ = np.linalg.lstsq(quadratic_basis(d), values[idx], rcond=None)
        scale = np.array([1.0, r, r, r * r, r * r, r * r])
        out[i] = coef / scale[:, None]
    return out


def recover_hessian(coords, gradients, queries, radius, tree=None):
    """Hessian of a scalar from samples of its gradient, by local quadratic fits.

    Returns:
        numpy.ndarray: Symmetrized Hessians at the queries, shape (m, 2, 2)
    """
    coef = local_quadratic_fits(coords, gradients, queries, radius, tree)
    # d/dx and d/dy of each gradient component at the fit center
    H = np.stack([coef[:, 1, :], coef[:, 2, :]], axis=-1)
    return 0.5 * (H + np.swapaxes(H, -1, -2))


@dataclass(frozen=True, eq=False)
class AiryField:
    """Discrete Airy function on a patch.

    ``phi`` are P2 nodal values on the patch sub-mesh and ``psi`` the recovered
    gradient in the same space. ``gauge`` holds the prescribed values
    (phi_1, phi_2, phi) at the reference point P0.
    """

    patch: object
    space: object
    phi: np.ndarray
    psi: np.ndarray
    gauge: tuple = (0.0, 0.0, 0.0)
    residual: float = 0.0
    fit_factor: float = DEFAULT_FIT_RADIUS
    _tree: object = field(default=None, repr=False)

    def __post_init__(self):
        for name in ("phi", "psi"):
            array = np.array(getattr(self, name), dtype=float)
            array.setflags(write=False)
            object.__setattr__(self, name, array)
        object.__setattr__(self, "_tree", cKDTree(self.space.dof_coords))

    @property
    def fit_radius(self):
        return self.fit_factor * self.patch.h_max

    def values(self, points):
        cells, bary, _ = self.space.locate(points)
        return self.space.evaluate_at(self.phi, cells, bary)

    def gradient(self, points):
        cells, bary, _ = self.space.locate(points)
        return self.space.evaluate_at(self.psi, cells, bary)

    def hessian(self, points):
        return recover_hessian(self.space.dof_coords, self.psi, points, self.fit_radius, self._tree)

    def nodal_table(self):
        """Vertex coordinates with phi, phi_1, phi_2 there, shape (N, 5)."""
        n = self.patch.mesh.n_nodes
        return np.column_stack([self.patch.mesh.nodes, self.phi[:n], self.psi[:n]])

    def max_values(self):
        """(max |phi|, max |grad phi|) over the patch dofs."""
        return float(np.abs(self.phi).max()), float(np.linalg.norm(self.psi, axis=1).max())

    def with_affine(self, c1, c2, C):
        """Same field plus c1 x1 + c2 x2 + C."""
        x = self.space.dof_coords
        return AiryField(
            patch=self.patch,
            space=self.space,
            phi=self.phi + c1 * x[:, 0] + c2 * x[:, 1] + C,
            psi=self.psi + np.array([c1, c2]),
            gauge=self.gauge,
            residual=self.residual,
            fit_factor=self.fit_factor,
        )


@dataclass(frozen=True, eq=False)
class ClosedFormAiry:
    """Airy function given by callables on (n, 2) points."""

    patch: object
    phi: object
    grad: object
    hess: object
    fit_factor: float = DEFAULT_FIT_RADIUS

    @property
    def fit_radius(self):
        return self.fit_factor * self.patch.h_max

    def values(self, points):
        return np.asarray(self.phi(np.atleast_2d(points)), dtype=float)

    def gradient(self, points):
        return np.asarray(self.grad(np.atleast_2d(points)), dtype=float)

    def hessian(self, points):
        return np.asarray(self.hess(np.atleast_2d(points)), dtype=float)

    def max_values(self):
        nodes = self.patch.mesh.nodes
        return float(np.abs(self.values(nodes)).max()), float(np.linalg.norm(self.gradient(nodes), axis=1).max())
