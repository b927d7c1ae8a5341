"""
Airy functions from stress: boundary data along an arc, and least-squares
recovery on a patch.

On a patch the Hessian of phi must equal the rotated stress
(phi,11 = N22, phi,22 = N11, phi,12 = -N12). The recovery solves two Neumann
problems for the gradient psi = grad phi, then a third one for phi; all three
share the patch Laplacian with the value at P0 pinned to the gauge.
"""
import logging

import numpy as np
from scipy import sparse
from scipy.integrate import cumulative_trapezoid
from scipy.sparse import linalg as sla

from airy.fields import AiryField, rot
from airy.patches import BoundaryArc
from elasticity.spaces import FunctionSpace
from setup.config_conf import DEFAULT_FIT_RADIUS
from utilities.errors import PatchError, SolverError

logger = logging.getLogger(__name__)

_GAP_FACTOR = 10.0
_RESIDUAL_WARNING = 0.1


class ArcGradient:
    """Samples of grad phi along an arc, with their arclength positions."""

    def __init__(self, s, values):
        self.s = s
        self.values = values

    def __repr__(self):
        return f"ArcGradient(n={self.s.size}, end={self.values[-1]})"


def airy_gradient_on_arc(traction, arc, c=(0.0, 0.0)):
    """grad phi along a boundary arc from the traction on it.

    Integrates (phi,1)' = -N2 and (phi,2)' = N1 in arclength from the first
    point, so grad phi(s) = c + g(s).

    Args:
        traction (TractionSpec | callable | None): Boundary traction; a callable
            maps (points, normals) to (n, 2); None means traction-free
        arc (BoundaryArc | numpy.ndarray): Ordered arc points (domain on the left)
        c (tuple, optional): grad phi at the first point. Defaults to zero.

    Returns:
        ArcGradient: Arclength positions and grad phi, shape (n, 2)

    Raises:
        PatchError: If consecutive arc points are far apart compared to the rest
    """
    if not isinstance(arc, BoundaryArc):
        arc = BoundaryArc.from_points(arc)
    steps = np.linalg.norm(np.diff(arc.points, axis=0), axis=1)
    typical = float(np.median(steps)) if steps.size else 0.0
    if steps.size == 0 or typical == 0.0 or np.any(steps > _GAP_FACTOR * typical):
        gap = int(np.argmax(steps)) if steps.size else 0
        raise PatchError(f"arc is not connected: gap after point {gap}")
    s = arc.arclength

    if traction is None or getattr(traction, "is_zero", False):
        N = np.zeros_like(arc.points)
    elif hasattr(traction, "density"):
        N = traction.density(arc.points, arc.normals)
    else:
        N = np.asarray(traction(arc.points, arc.normals), dtype=float)

    g = np.column_stack(
        [-cumulative_trapezoid(N[:, 1], s, initial=0.0), cumulative_trapezoid(N[:, 0], s, initial=0.0)]
    )
    return ArcGradient(s, np.asarray(c, dtype=float) + g)


def _patch_laplacian(space, grads, weights):
    """Stiffness matrix of int grad u . grad v on the patch space."""
    Ke = np.einsum("mq,mqai,mqbi->mab", weights, grads, grads)
    cell = space.cell_dofs
    n = cell.shape[1]
    rows = np.repeat(cell, n, axis=1).ravel()
    cols = np.tile(cell, (1, n)).ravel()
    return sparse.coo_matrix((Ke.ravel(), (rows, cols)), shape=(space.n_dofs, space.n_dofs)).tocsc()


def _gradient_load(space, grads, weights, target):
    """Right-hand sides int grad v . target for one or more vector targets (M, q, k, 2)."""
    be = np.einsum("mq,mqai,mqki->mak", weights, grads, target)
    b = np.zeros((space.n_dofs, target.shape[2]))
    np.add.at(b, space.cell_dofs, be)
    return b


def _pinned_solver(A, pin):
    """Factorization of A with the row and column of ``pin`` removed."""
    keep = np.flatnonzero(np.arange(A.shape[0]) != pin)
    try:
        lu = sla.splu(A[keep][:, keep].tocsc())
    except RuntimeError as e:
        raise SolverError(f"patch Laplacian factorization failed: {e}")

    def solve(b, value):
        b = np.atleast_2d(b.T).T
        x = np.empty(b.shape)
        x[pin] = value
        rhs = b[keep] - A[keep][:, [pin]].toarray() * np.asarray(value, dtype=float)[None, :]
        x[keep] = lu.solve(rhs)
        return x

    return solve


def airy_on_patch(patch, stress, gauge=(0.0, 0.0, 0.0), fit_factor=DEFAULT_FIT_RADIUS):
    """Least-squares Airy function of a stress field on a patch.

    Args:
        patch (Patch): Simply connected patch built on the mesh of the stress
        stress (StressField): Stress at quadrature points of the parent mesh
        gauge (tuple, optional): (phi_1, phi_2, phi) at P0. Zero on a
            traction-free arc gives phi = phi,n = 0 along it.
        fit_factor (float, optional): Hessian fit radius in units of h_max

    Returns:
        AiryField: P2 phi and psi = grad phi on the patch sub-mesh

    Raises:
        PatchError: If the stress does not carry its quadrature points
    """
    if stress.bary is None:
        raise PatchError("stress field has no reference quadrature points")
    space = FunctionSpace(patch.mesh, 2)
    N = stress.values[patch.cells]
    weights = stress.weights[patch.cells]
    grads = space.gradients(stress.bary)
    H = rot(N)

    A = _patch_laplacian(space, grads, weights)
    solve = _pinned_solver(A, patch.reference_node)
    c1, c2, C = (float(v) for v in gauge)

    # psi_i solves grad psi_i ~ row i of the target Hessian
    psi = solve(_gradient_load(space, grads, weights, H), np.array([c1, c2]))
    phi_vals = space.shape_values(stress.bary)
    psi_qp = np.einsum("qa,mak->mqk", phi_vals, psi[space.cell_dofs])
    phi = solve(_gradient_load(space, grads, weights, psi_qp[:, :, None, :]), np.array([C]))[:, 0]

    grad_psi = np.einsum("mqai,mak->mqki", grads, psi[space.cell_dofs])
    misfit = np.sum(weights * np.sum((grad_psi - H) ** 2, axis=(-1, -2)))
    scale = np.sum(weights * np.sum(H ** 2, axis=(-1, -2)))
    residual = float(np.sqrt(misfit / scale)) if scale > 0.0 else float(np.sqrt(misfit))
    if residual > _RESIDUAL_WARNING:
        logger.warning(f"Airy recovery residual {residual:.3e} is large; the stress may not be equilibrated")
    logger.info(f"Airy function on {patch.kind} patch: {space.n_dofs} dofs, relative Hessian residual {residual:.3e}")
    return AiryField(
        patch=patch,
        space=space,
        phi=phi,
        psi=psi,
        gauge=(c1, c2, C),
        residual=residual,
        fit_factor=fit_factor,
    )


def dirichlet_residual(airy, cavity_arc=None):
    """Normalized max |phi| and max |phi,n| along a traction-free arc.

    Args:
        airy (AiryField | ClosedFormAiry): Airy function gauged on the arc
        cavity_arc (BoundaryArc, optional): Arc on the patch boundary.
            Defaults to the cavity arc of the patch.

    Returns:
        tuple: (max|phi| / max_patch|phi|, max|phi,n| / max_patch|grad phi|)

    Raises:
        PatchError: If there is no arc or it does not lie on the patch boundary
    """
    patch = airy.patch
    arc = cavity_arc if cavity_arc is not None else patch.arc
    if arc is None:
        raise PatchError("patch has no cavity arc")
    if not isinstance(arc, BoundaryArc):
        arc = BoundaryArc.from_points(arc)
    off = patch.boundary_distance(arc.points)
    if np.any(off > 0.25 * patch.h_max):
        raise PatchError(f"arc point {int(np.argmax(off))} is {off.max():.3g} away from the patch boundary")

    phi = airy.values(arc.points)
    phi_n = np.sum(airy.gradient(arc.points) * arc.normals, axis=1)
    phi_scale, grad_scale = airy.max_values()
    tiny = np.finfo(float).tiny
    result = (
        float(np.abs(phi).max() / max(phi_scale, tiny)),
        float(np.abs(phi_n).max() / max(grad_scale, tiny)),
    )
    logger.info(f"Dirichlet residual on the arc: phi {result[0]:.3e}, phi_n {result[1]:.3e}")
    return result
