"""
Shared fixtures: benchmark domains, materials and a solved Lame annulus.
"""
import numpy as np
import pytest

from elasticity.solver import solve_forward
from elasticity.traction import TractionSpec
from geometry.shapes import DomainSpec, StarShape, rigid_basis
from material.plate_material import PlateMaterial
from mesh.generator import generate_mesh
from mesh.quadrature import triangle_rule

# Lame annulus: inner radius a traction-free, outer radius b under tension p
LAME_A = 1.0
LAME_B = 2.0
LAME_P = 1.0
LAME_E = 1.0
LAME_NU = 0.3


def lame_displacement(points, a=LAME_A, b=LAME_B, p=LAME_P, E=LAME_E, nu=LAME_NU):
    """Closed-form plane-stress displacement of the annulus, shape (n, 2)."""
    points = np.atleast_2d(points)
    A = p * b ** 2 / (b ** 2 - a ** 2)
    B = -A * a ** 2
    r = np.hypot(points[:, 0], points[:, 1])
    u_r = ((1.0 - nu) * A * r - (1.0 + nu) * B / r) / E
    return (u_r / r)[:, None] * points


def lame_stress(points, a=LAME_A, b=LAME_B, p=LAME_P):
    """Closed-form stress resultants (h = 1), shape (n, 2, 2)."""
    points = np.atleast_2d(points)
    A = p * b ** 2 / (b ** 2 - a ** 2)
    B = -A * a ** 2
    r2 = np.sum(points ** 2, axis=1)
    s_rr = A + B / r2
    s_tt = A - B / r2
    c = points[:, 0] / np.sqrt(r2)
    s = points[:, 1] / np.sqrt(r2)
    N = np.empty((points.shape[0], 2, 2))
    N[:, 0, 0] = s_rr * c ** 2 + s_tt * s ** 2
    N[:, 1, 1] = s_rr * s ** 2 + s_tt * c ** 2
    N[:, 0, 1] = N[:, 1, 0] = (s_rr - s_tt) * c * s
    return N


def relative_l2_error(displacement, exact):
    """Relative L2 error modulo rigid motions, with a degree-4 rule on every element."""
    space = displacement.space
    rule = triangle_rule(4)
    qp = space.map_points(rule.points).reshape(-1, 2)
    shape = space.shape_values(rule.points)
    values = np.einsum("qa,mai->mqi", shape, displacement.values[space.cell_dofs]).reshape(-1, 2)
    weights = (rule.weights[None, :] * space.det_jacobians[:, None]).ravel()
    target = exact(qp)
    sqrt_w = np.sqrt(weights)
    R = (rigid_basis(qp) * sqrt_w[:, None, None]).reshape(-1, 3)
    diff = ((values - target) * sqrt_w[:, None]).ravel()
    coef, *_ = np.linalg.lstsq(R, diff, rcond=None)
    error = np.linalg.norm(diff - R @ coef)
    return float(error / np.linalg.norm((target * sqrt_w[:, None]).ravel()))


def pressure_load(domain, p=1.0):
    return TractionSpec(domain, (TractionSpec.parse_segment(domain, f"full pressure {p!r}"),))


def lame_domain_spec():
    return DomainSpec(
        outer=StarShape.circle(0.0, 0.0, LAME_B),
        cavities=(StarShape.circle(0.0, 0.0, LAME_A),),
        r0=0.4,
        M0=1.0,
        M1=20.0,
    )


@pytest.fixture(scope="session")
def material():
    return PlateMaterial.homogeneous(E=LAME_E, nu=LAME_NU, h=1.0)


@pytest.fixture(scope="session")
def material_nu0():
    return PlateMaterial.homogeneous(E=1.0, nu=0.0, h=1.0)


@pytest.fixture(scope="session")
def lame_domain():
    return lame_domain_spec()


@pytest.fixture(scope="session")
def lame_traction(lame_domain):
    return pressure_load(lame_domain, LAME_P)


@pytest.fixture(scope="session")
def lame_mesh(lame_domain):
    return generate_mesh(lame_domain, 0.04 * LAME_B)


@pytest.fixture(scope="session")
def lame_solution(lame_mesh, material, lame_traction):
    return solve_forward(lame_mesh, material, lame_traction, order=1)


@pytest.fixture(scope="session")
def disk_domain():
    """Unit disk without cavities."""
    return DomainSpec(outer=StarShape.circle(0.0, 0.0, 1.0), r0=0.4, M0=1.0, M1=20.0)


@pytest.fixture(scope="session")
def disk_mesh(disk_domain):
    return generate_mesh(disk_domain, 0.1)


class UniformStrain:
    """Stand-in displacement with a constant strain tensor."""

    def __init__(self, eps):
        self.eps = np.asarray(eps, dtype=float)

    def strain(self, points):
        points = np.atleast_2d(points)
        return np.broadcast_to(self.eps, (points.shape[0], 2, 2)).copy()
