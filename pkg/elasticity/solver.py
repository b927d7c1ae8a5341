"""
Forward solver for the plate Neumann problem with traction-free cavities.

The stiffness system is singular on the rigid motions; it is bordered by three
constraint rows (mean displacement and mean infinitesimal rotation) and solved
as a symmetric saddle-point system for the displacement and three Lagrange
multipliers.
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as sla

from elasticity.spaces import FunctionSpace
from elasticity.traction import check_load_equilibrium, rigid_matrix
from material.plate_material import apply_C
from mesh.quadrature import triangle_rule
from setup.config_conf import DEFAULT_ORDER, DEFAULT_SOLVER_METHOD, DEFAULT_SOLVER_TOL
from utilities.errors import LoadError, SolverError

logger = logging.getLogger(__name__)

_RANK_TOL = 1e-12


def stiffness_rule(order):
    return triangle_rule(2 if order == 1 else 4)


def _strain_displacement(grads):
    """B matrices mapping interleaved element dofs to (eps11, eps22, 2 eps12), shape (..., 3, 2 n_local)."""
    shape = grads.shape[:-2]
    n_local = grads.shape[-2]
    B = np.zeros(shape + (3, 2 * n_local))
    B[..., 0, 0::2] = grads[..., :, 0]
    B[..., 1, 1::2] = grads[..., :, 1]
    B[..., 2, 0::2] = grads[..., :, 1]
    B[..., 2, 1::2] = grads[..., :, 0]
    return B


def element_dofs(space):
    """Interleaved vector dofs per element, shape (M, 2 n_local)."""
    cell = space.cell_dofs
    out = np.empty((cell.shape[0], 2 * cell.shape[1]), dtype=np.int64)
    out[:, 0::2] = 2 * cell
    out[:, 1::2] = 2 * cell + 1
    return out


def assemble_stiffness(space, material, rule=None):
    """Global stiffness matrix of int C grad(a) : grad(v), CSR, size 2 n_dofs."""
    rule = rule or stiffness_rule(space.order)
    grads = space.gradients(rule.points)
    B = _strain_displacement(grads)
    qp = space.map_points(rule.points)
    D = material.voigt(qp)
    weights = rule.weights[None, :] * space.det_jacobians[:, None]
    Ke = np.einsum("mq,mqki,mqkl,mqlj->mij", weights, B, D, B)

    dofs = element_dofs(space)
    n = dofs.shape[1]
    rows = np.repeat(dofs, n, axis=1).ravel()
    cols = np.tile(dofs, (1, n)).ravel()
    size = 2 * space.n_dofs
    K = sparse.coo_matrix((Ke.ravel(), (rows, cols)), shape=(size, size)).tocsr()
    logger.debug(f"Assembled stiffness: {size} dofs, {K.nnz} nonzeros")
    return K


def constraint_matrix(space, rule=None):
    """Rows of int a1, int a2 and int (a2,1 - a1,2), shape (3, 2 n_dofs)."""
    rule = rule or stiffness_rule(space.order)
    det = space.det_jacobians
    phi = space.shape_values(rule.points)
    mean = np.einsum("q,qa,m->ma", rule.weights, phi, det)
    grads = space.gradients(rule.points)
    curl = np.einsum("q,mqad,m->mad", rule.weights, grads, det)

    C = np.zeros((3, 2 * space.n_dofs))
    cell = space.cell_dofs
    np.add.at(C[0], 2 * cell, mean)
    np.add.at(C[1], 2 * cell + 1, mean)
    np.add.at(C[2], 2 * cell + 1, curl[:, :, 0])
    np.add.at(C[2], 2 * cell, -curl[:, :, 1])
    return C


@dataclass(eq=False)
class DisplacementField:
    """Vector field with nodal values in a P1/P2 space (values shape (n_dofs, 2))."""

    space: FunctionSpace
    values: np.ndarray
    normalized: bool = True
    cache: dict = field(default_factory=dict, repr=False)

    @property
    def mesh(self):
        return self.space.mesh

    def __call__(self, points):
        cells, bary, _ = self.space.locate(points)
        return self.space.evaluate_at(self.values, cells, bary)

    def gradient(self, points):
        """grad a at points, shape (n, 2, 2) with [i, j] = d a_i / d x_j."""
        cells, bary, _ = self.space.locate(points)
        return self.space.gradient_at(self.values, cells, bary)

    def strain(self, points):
        g = self.gradient(points)
        return 0.5 * (g + np.swapaxes(g, -1, -2))

    def element_gradients(self, bary, cells=None):
        """grad a at barycentric points of every (listed) element, shape (M, q, 2, 2)."""
        grads = self.space.gradients(bary, cells)
        dofs = self.space.cell_dofs if cells is None else self.space.cell_dofs[cells]
        local = self.values[dofs]
        return np.einsum("mqaj,mai->mqij", grads, local)

    def element_strains(self, bary, cells=None):
        g = self.element_gradients(bary, cells)
        return 0.5 * (g + np.swapaxes(g, -1, -2))

    def normalization_residual(self):
        """Absolute values of the three normalization integrals."""
        C = constraint_matrix(self.space)
        return np.abs(C @ self.values.ravel())

    def with_values(self, values):
        return DisplacementField(self.space, np.asarray(values, dtype=float), self.normalized)


@dataclass(eq=False)
class StressField:
    """Stress resultants N at quadrature points.

    points (M, q, 2), values (M, q, 2, 2) symmetric, weights (M, q) including
    the element area factor, bary (q, 3) the reference points of the rule.
    """

    points: np.ndarray
    values: np.ndarray
    weights: np.ndarray
    bary: np.ndarray = None

    @property
    def flat_points(self):
        return self.points.reshape(-1, 2)

    @property
    def flat_values(self):
        return self.values.reshape(-1, 2, 2)

    def max_norm(self):
        return float(np.linalg.norm(self.flat_values, axis=(1, 2)).max()) if self.values.size else 0.0


@dataclass(eq=False)
class SaddleSolution:
    """Displacement, rigid-constraint multipliers and solve diagnostics."""

    displacement: DisplacementField
    multipliers: np.ndarray
    residual_norm: float
    constraint_residual: float
    energy: float
    work: float
    load: np.ndarray
    traction: object
    load_correction: float = 0.0

    @property
    def mesh(self):
        return self.displacement.mesh

    @property
    def space(self):
        return self.displacement.space

    @property
    def energy_identity_error(self):
        scale = max(abs(self.energy), abs(self.work))
        return 0.0 if scale == 0.0 else abs(self.energy - self.work) / scale


def _solve_direct(A, b):
    try:
        lu = sla.splu(A.tocsc())
    except RuntimeError as e:
        raise SolverError(f"sparse factorization failed: {e}")
    return lu.solve(b)


def _solve_minres(A, b, tol):
    try:
        x, info = sla.minres(A, b, rtol=tol, maxiter=20 * A.shape[0])
    except TypeError:
        x, info = sla.minres(A, b, tol=tol, maxiter=20 * A.shape[0])
    if info != 0:
        residual = np.linalg.norm(A @ x - b) / max(np.linalg.norm(b), np.finfo(float).tiny)
        raise SolverError(f"MINRES did not converge (info={info}, relative residual {residual:.3e})")
    return x


def solve_forward(
    mesh,
    material,
    traction,
    order=DEFAULT_ORDER,
    method=DEFAULT_SOLVER_METHOD,
    tol=DEFAULT_SOLVER_TOL,
    project=True,
):
    """Solve the weak Neumann problem with the normalization constraints.

    Args:
        mesh (Mesh): Mesh of Omega minus the cavities
        material (PlateMaterial): Plate material
        traction (TractionSpec): Boundary load on Sigma
        order (int, optional): Element order 1 or 2
        method (str, optional): ``direct`` (sparse LU) or ``iterative`` (MINRES)
        tol (float, optional): Relative residual tolerance of the iterative solve
        project (bool, optional): Remove the rigid part of an unbalanced load instead of failing

    Returns:
        SaddleSolution: Normalized displacement with multipliers and diagnostics

    Raises:
        LoadError: If the load is unbalanced and ``project`` is False
        SolverError: On constraint rank loss or solver failure
    """
    space = FunctionSpace(mesh, order)
    material.validate(mesh.nodes, float(np.linalg.norm(mesh.nodes, axis=1).max()))

    equilibrium = check_load_equilibrium(traction, mesh, space, project=project)
    if not equilibrium.balanced:
        if not project:
            raise LoadError(
                f"load is not in equilibrium: force {equilibrium.force}, moment {equilibrium.moment:.3e}"
            )
        logger.warning(f"Load projected onto the equilibrated subspace (correction {equilibrium.correction:.3e})")
    F = equilibrium.projected if project else equilibrium.load

    K = assemble_stiffness(space, material)
    C = constraint_matrix(space)
    R = rigid_matrix(space)
    CR = C @ R
    sv = np.linalg.svd(CR, compute_uv=False)
    if sv.min() <= _RANK_TOL * max(sv.max(), 1.0):
        raise SolverError(f"normalization constraints lose rank on the rigid motions (singular values {sv})")

    size = K.shape[0]
    A = sparse.bmat([[K, sparse.csr_matrix(C.T)], [sparse.csr_matrix(C), None]], format="csr")
    b = np.concatenate([F, np.zeros(3)])

    if not np.any(b):
        x = np.zeros(size + 3)
    elif method == "direct":
        x = _solve_direct(A, b)
    elif method == "iterative":
        x = _solve_minres(A, b, tol)
    else:
        raise SolverError(f"unknown solver method '{method}'")

    residual = float(np.linalg.norm(A @ x - b) / max(np.linalg.norm(b), np.finfo(float).tiny))
    if method == "direct" and residual > 1e-6:
        raise SolverError(f"direct solve residual {residual:.3e} too large")

    u = x[:size]
    multipliers = x[size:]
    energy = float(u @ (K @ u))
    work = float(F @ u)
    constraint_residual = float(np.abs(C @ u).max())
    field_ = DisplacementField(space, u.reshape(-1, 2), normalized=True)
    solution = SaddleSolution(
        displacement=field_,
        multipliers=multipliers,
        residual_norm=residual,
        constraint_residual=constraint_residual,
        energy=energy,
        work=work,
        load=F,
        traction=traction,
        load_correction=equilibrium.correction,
    )
    logger.info(
        f"Solved P{order} system with {size} dofs: residual {residual:.2e}, energy {energy:.6g}, "
        f"multipliers {np.abs(multipliers).max():.2e}"
    )
    if solution.energy_identity_error > 1e-8 and energy > 0.0:
        logger.warning(f"Energy identity violated: relative error {solution.energy_identity_error:.2e}")
    return solution


def stress_field(sol, material, rule=None):
    """Stress resultants N = C sym(grad a) at the quadrature points of every element.

    Args:
        sol (SaddleSolution | DisplacementField): Solved displacement
        material (PlateMaterial): Material
        rule (QuadratureRule, optional): Points at which to evaluate

    Returns:
        StressField: Per-quadrature-point symmetric N
    """
    displacement = sol.displacement if isinstance(sol, SaddleSolution) else sol
    space = displacement.space
    rule = rule or stiffness_rule(space.order)
    eps = displacement.element_strains(rule.points)
    qp = space.map_points(rule.points)
    N = apply_C(material, qp, eps)
    weights = rule.weights[None, :] * space.det_jacobians[:, None]
    return StressField(points=qp, values=N, weights=weights, bary=rule.points)


def sampled_stress(mesh, func, rule=None):
    """StressField of a closed-form stress callable mapping (n, 2) points to (n, 2, 2)."""
    space = FunctionSpace(mesh, 1)
    rule = rule or triangle_rule(4)
    qp = space.map_points(rule.points)
    values = np.asarray(func(qp.reshape(-1, 2)), dtype=float).reshape(qp.shape[:2] + (2, 2))
    weights = rule.weights[None, :] * space.det_jacobians[:, None]
    return StressField(points=qp, values=values, weights=weights, bary=rule.points)


def stress_at(sol, material, points):
    """N at arbitrary points, shape (n, 2, 2)."""
    displacement = sol.displacement if isinstance(sol, SaddleSolution) else sol
    points = np.atleast_2d(points)
    return apply_C(material, points, displacement.strain(points))


def rigid_alignment(field_a, field_b):
    """Least-squares rigid motion r minimizing |a - b - r| over the dofs; returns the aligned difference norm."""
    R = rigid_matrix(field_a.space)
    diff = (field_a.values - field_b.values).ravel()
    coef, *_ = np.linalg.lstsq(R, diff, rcond=None)
    return float(np.linalg.norm(diff - R @ coef) / math.sqrt(max(diff.size, 1)))
