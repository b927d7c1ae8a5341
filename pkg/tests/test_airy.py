import numpy as np
import pytest

from airy.checks import field_residuals, polar_rule, residual_disks, sandwich_check, strain_K
from airy.fields import ClosedFormAiry, rot
from airy.patches import boundary_rectangle_patch, check_simply_connected, interior_disk_patch
from airy.reconstruction import airy_gradient_on_arc, airy_on_patch, dirichlet_residual
from conftest import UniformStrain
from elasticity.solver import sampled_stress, solve_forward, stress_field
from elasticity.traction import TractionSpec
from material.plate_material import apply_C
from mesh.generator import generate_mesh
from utilities.errors import PatchError


def constant_stress(N):
    N = np.asarray(N, dtype=float)
    return lambda points: np.broadcast_to(N, (points.shape[0], 2, 2)).copy()


@pytest.fixture(scope="module")
def disk_patch(disk_mesh, disk_domain):
    return interior_disk_patch(disk_mesh, disk_domain, (0.0, 0.0), 0.5)


@pytest.fixture(scope="module")
def cavity_patch(lame_mesh, lame_domain):
    return boundary_rectangle_patch(lame_mesh, lame_domain, 0, 0.0)


def test_rot_is_an_involution():
    A = np.random.default_rng(4).standard_normal((5, 2, 2))
    A = A + np.swapaxes(A, 1, 2)
    np.testing.assert_array_equal(rot(rot(A)), A)
    np.testing.assert_array_equal(rot(np.array([[1.0, 2.0], [2.0, 3.0]])), [[3.0, -2.0], [-2.0, 1.0]])


def test_polar_rule_area():
    _, weights = polar_rule((0.3, -0.1), 0.25)
    assert weights.sum() == pytest.approx(np.pi * 0.25 ** 2, rel=1e-12)


def test_strain_K_of_uniaxial_airy(material_nu0):
    sigma = 2.5
    airy = ClosedFormAiry(
        patch=None,
        phi=lambda x: 0.5 * sigma * x[:, 1] ** 2,
        grad=lambda x: np.column_stack([np.zeros(len(x)), sigma * x[:, 1]]),
        hess=constant_stress([[0.0, 0.0], [0.0, sigma]]),
    )
    K = strain_K(material_nu0, airy, points=np.array([[0.1, 0.2], [-0.3, 0.4]])).values
    np.testing.assert_allclose(K[:, 1, 1], sigma)
    np.testing.assert_allclose(K[:, 0, 0], 0.0)


def cubic_airy(patch):
    """phi = x1^3 x2, which is biharmonic."""
    return ClosedFormAiry(
        patch=patch,
        phi=lambda x: x[:, 0] ** 3 * x[:, 1],
        grad=lambda x: np.column_stack([3.0 * x[:, 0] ** 2 * x[:, 1], x[:, 0] ** 3]),
        hess=lambda x: np.stack(
            [
                np.stack([6.0 * x[:, 0] * x[:, 1], 3.0 * x[:, 0] ** 2], axis=-1),
                np.stack([3.0 * x[:, 0] ** 2, np.zeros(len(x))], axis=-1),
            ],
            axis=-2,
        ),
    )


def test_biharmonic_airy_has_zero_residuals(disk_patch, material):
    disks = (((0.1, 0.0), 0.2), ((-0.1, 0.1), 0.15))
    residuals = field_residuals(cubic_airy(disk_patch), material, disks=disks)
    assert residuals.weak <= 1e-8
    assert residuals.compatibility <= 1e-8


def test_quartic_airy_fails_weak_residual(disk_patch, material):
    cx = 0.05
    airy = ClosedFormAiry(
        patch=disk_patch,
        phi=lambda x: (x[:, 0] - cx) ** 4,
        grad=lambda x: np.column_stack([4.0 * (x[:, 0] - cx) ** 3, np.zeros(len(x))]),
        hess=lambda x: np.stack(
            [
                np.stack([12.0 * (x[:, 0] - cx) ** 2, np.zeros(len(x))], axis=-1),
                np.zeros((len(x), 2)),
            ],
            axis=-2,
        ),
    )
    residuals = field_residuals(airy, material, disks=(((cx, 0.0), 0.3),))
    assert residuals.weak > 1e-2


def test_residual_disks_fit_inside_patch(disk_patch):
    disks = residual_disks(disk_patch)
    assert len(disks) >= 1
    for center, radius in disks:
        assert disk_patch.boundary_distance(np.array(center))[0] >= radius


@pytest.mark.parametrize(
    "eps, ratio",
    [([[0.0, 0.01], [0.01, 0.0]], 1.69), ([[0.01, 0.0], [0.0, 0.01]], 0.49)],
)
def test_sandwich_bounds_are_attained(material, eps, ratio):
    strain = UniformStrain(eps)
    N = apply_C(material, np.zeros(2), np.asarray(eps))
    airy = ClosedFormAiry(patch=None, phi=None, grad=None, hess=constant_stress(rot(N)))
    points = np.random.default_rng(8).uniform(-0.5, 0.5, (50, 2))
    result = sandwich_check(airy, strain, material, slack=1e-8, points=points)
    assert result.fraction == 1.0
    np.testing.assert_allclose(result.ratios, ratio, rtol=1e-10)


@pytest.mark.parametrize(
    "N, hessian",
    [
        ([[1.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [0.0, 1.0]]),
        ([[0.0, 1.0], [1.0, 0.0]], [[0.0, -1.0], [-1.0, 0.0]]),
    ],
)
def test_airy_recovery_of_constant_stress(disk_mesh, disk_patch, N, hessian):
    stress = sampled_stress(disk_mesh, constant_stress(N))
    airy = airy_on_patch(disk_patch, stress)
    assert airy.residual <= 1e-8
    points, _ = disk_patch.quadrature(2)
    H = airy.hessian(points)
    np.testing.assert_allclose(H, np.broadcast_to(hessian, H.shape), atol=1e-6)
    assert airy.values(disk_patch.reference[None, :])[0] == pytest.approx(0.0, abs=1e-10)
    np.testing.assert_allclose(airy.gradient(disk_patch.reference[None, :])[0], 0.0, atol=1e-10)


def test_airy_strain_matches_displacement(disk_domain, disk_mesh, disk_patch, material):
    load = TractionSpec(disk_domain, (TractionSpec.parse_segment(disk_domain, "full stress 1.0 -0.5 0.3"),))
    sol = solve_forward(disk_mesh, material, load)
    airy = airy_on_patch(disk_patch, stress_field(sol, material))
    K = strain_K(material, airy, displacement=sol)
    assert K.strain_mismatch <= 1e-6
    assert sandwich_check(airy, sol, material).fraction == 1.0


def test_airy_gradient_on_straight_arc():
    s = np.linspace(0.0, 1.0, 11)
    arc = np.column_stack([s, np.zeros_like(s)])
    traction = lambda points, normals: np.broadcast_to([0.3, -0.7], points.shape)
    g = airy_gradient_on_arc(traction, arc, c=(1.0, 2.0))
    np.testing.assert_allclose(g.s, s)
    np.testing.assert_allclose(g.values[:, 0], 1.0 + 0.7 * s)
    np.testing.assert_allclose(g.values[:, 1], 2.0 + 0.3 * s)
    np.testing.assert_allclose(airy_gradient_on_arc(None, arc).values, 0.0)


def test_airy_gradient_rejects_broken_arc():
    arc = np.array([[0.0, 0.0], [0.1, 0.0], [0.2, 0.0], [5.0, 0.0]])
    with pytest.raises(PatchError):
        airy_gradient_on_arc(None, arc)


def test_closed_form_dirichlet_residual(cavity_patch):
    def radius(x):
        return np.hypot(x[:, 0], x[:, 1])

    airy = ClosedFormAiry(
        patch=cavity_patch,
        phi=lambda x: (radius(x) - 1.0) ** 2,
        grad=lambda x: (2.0 * (radius(x) - 1.0) / radius(x))[:, None] * x,
        hess=None,
    )
    phi_res, phi_n_res = dirichlet_residual(airy)
    assert phi_res <= 1e-12
    assert phi_n_res <= 1e-12


def test_cavity_patch_geometry(cavity_patch):
    assert cavity_patch.kind == "boundary-rectangle"
    assert cavity_patch.arc.points.shape[0] >= 2
    np.testing.assert_allclose(np.linalg.norm(cavity_patch.arc.points, axis=1), 1.0, atol=1e-12)
    np.testing.assert_allclose(np.linalg.norm(cavity_patch.reference), 1.0, atol=1e-12)


def test_annulus_is_not_simply_connected(lame_mesh):
    with pytest.raises(PatchError):
        check_simply_connected(lame_mesh)


def test_interior_patch_must_stay_inside(disk_mesh, disk_domain):
    with pytest.raises(PatchError):
        interior_disk_patch(disk_mesh, disk_domain, (0.9, 0.0), 0.5)


def test_unknown_cavity_is_rejected(disk_mesh, disk_domain):
    with pytest.raises(PatchError):
        boundary_rectangle_patch(disk_mesh, disk_domain, 0, 0.0)


@pytest.mark.slow
def test_lame_dirichlet_residual(lame_domain, lame_traction, material):
    mesh = generate_mesh(lame_domain, 0.1, h_cavity=0.02, grading=0.3)
    sol = solve_forward(mesh, material, lame_traction, order=2)
    patch = boundary_rectangle_patch(mesh, lame_domain, 0, 0.0)
    airy = airy_on_patch(patch, stress_field(sol, material))
    phi_res, phi_n_res = dirichlet_residual(airy)
    assert phi_res <= 0.05
    assert phi_n_res <= 0.05
