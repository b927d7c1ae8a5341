import math

import numpy as np
import pytest

from conftest import LAME_A, lame_displacement, lame_domain_spec, lame_stress, pressure_load, relative_l2_error
from elasticity.norms import boundary_sobolev_norm, direct_stability_ratio, h1_norm, local_energy
from elasticity.solver import solve_forward, stress_at, stress_field
from elasticity.spaces import FunctionSpace
from elasticity.traction import TractionSpec, check_load_equilibrium
from geometry.shapes import DomainSpec, StarShape
from material.plate_material import PlateMaterial
from mesh.generator import generate_mesh
from utilities.errors import ConfigError, LoadError


def uniform_stress_load(domain, S11=1.0, S22=0.5, S12=0.2):
    return TractionSpec(domain, (TractionSpec.parse_segment(domain, f"full stress {S11} {S22} {S12}"),))


def test_function_space_dofs(disk_mesh):
    p1 = FunctionSpace(disk_mesh, 1)
    p2 = FunctionSpace(disk_mesh, 2)
    assert p1.n_dofs == disk_mesh.n_nodes
    assert p2.n_dofs == disk_mesh.n_nodes + disk_mesh.all_edges.shape[0]
    np.testing.assert_array_equal(p2.dof_coords[: disk_mesh.n_nodes], disk_mesh.nodes)


def test_lame_displacement_error(lame_solution):
    assert relative_l2_error(lame_solution.displacement, lame_displacement) <= 0.02


def test_lame_solution_is_normalized(lame_solution):
    assert lame_solution.constraint_residual <= 1e-10
    assert np.all(lame_solution.displacement.normalization_residual() <= 1e-10)
    assert lame_solution.energy_identity_error <= 1e-8


def test_lame_stress_away_from_boundary(lame_solution, material):
    points = np.array([[1.5, 0.0], [0.0, -1.5], [1.05, 1.05]])
    N = stress_at(lame_solution, material, points)
    np.testing.assert_allclose(N, lame_stress(points), atol=0.1)


def test_cavity_traction_is_small(lame_mesh, lame_solution, material):
    edges = lame_mesh.cavity_edge_indices(0)
    mid = 0.5 * (lame_mesh.nodes[lame_mesh.edges[edges, 0]] + lame_mesh.nodes[lame_mesh.edges[edges, 1]])
    inward = mid * (1.0 + 0.5 * lame_mesh.h_max / LAME_A)
    normals = -inward / np.linalg.norm(inward, axis=1)[:, None]
    N = stress_at(lame_solution, material, inward)
    traction = np.einsum("nij,nj->ni", N, normals)
    scale = stress_field(lame_solution, material).max_norm()
    assert np.abs(traction).max() <= 2.0 * lame_mesh.h_max * scale


@pytest.mark.parametrize("order", [1, 2])
def test_uniform_stress_is_reproduced(disk_domain, disk_mesh, material, order):
    sol = solve_forward(disk_mesh, material, uniform_stress_load(disk_domain), order=order)
    N = stress_field(sol, material).flat_values
    expected = np.array([[1.0, 0.2], [0.2, 0.5]])
    np.testing.assert_allclose(N, np.broadcast_to(expected, N.shape), atol=1e-8)


def test_iterative_solver_matches_direct(disk_domain, disk_mesh, material):
    load = uniform_stress_load(disk_domain)
    direct = solve_forward(disk_mesh, material, load, method="direct")
    iterative = solve_forward(disk_mesh, material, load, method="iterative", tol=1e-12)
    scale = np.abs(direct.displacement.values).max()
    np.testing.assert_allclose(iterative.displacement.values, direct.displacement.values, atol=1e-7 * scale)


def test_zero_load_gives_zero_displacement(disk_domain, disk_mesh, material):
    sol = solve_forward(disk_mesh, material, TractionSpec(disk_domain, ()))
    assert not np.any(sol.displacement.values)


def test_unbalanced_load(disk_domain, disk_mesh, material):
    push = TractionSpec(disk_domain, (TractionSpec.parse_segment(disk_domain, "0 1 constant 1 0"),))
    equilibrium = check_load_equilibrium(push, disk_mesh)
    assert not equilibrium.balanced
    with pytest.raises(LoadError):
        solve_forward(disk_mesh, material, push, project=False)
    sol = solve_forward(disk_mesh, material, push)
    assert sol.load_correction > 0.0
    assert sol.constraint_residual <= 1e-10


def test_pressure_load_is_balanced(lame_domain, lame_mesh, lame_traction):
    assert check_load_equilibrium(lame_traction, lame_mesh).balanced


def test_default_load_space_is_p1(disk_domain, disk_mesh):
    load = uniform_stress_load(disk_domain)
    default = check_load_equilibrium(load, disk_mesh)
    explicit = check_load_equilibrium(load, disk_mesh, space=FunctionSpace(disk_mesh, 1))
    assert default.load.shape == (2 * disk_mesh.n_nodes,)
    np.testing.assert_array_equal(default.load, explicit.load)
    np.testing.assert_array_equal(default.force, explicit.force)


def test_support_outside_sigma_is_rejected():
    domain = DomainSpec(
        outer=StarShape.circle(0.0, 0.0, 1.0), r0=0.4, M0=1.0, M1=20.0, sigma_interval=(0.5, 2.0)
    )
    inside = TractionSpec(domain, (TractionSpec.parse_segment(domain, "0.6 1.9 pressure 1"),))
    inside.check_support()
    outside = TractionSpec(domain, (TractionSpec.parse_segment(domain, "0.1 0.4 pressure 1"),))
    with pytest.raises(LoadError):
        outside.check_support()
    with pytest.raises(LoadError):
        TractionSpec(domain, (TractionSpec.parse_segment(domain, "2.5 point 1 0"),)).check_support()


@pytest.mark.parametrize(
    "text",
    ["0 1 pressure", "0 1 spiral 1", "1 0 pressure 1", "full pressure one", "0.5"],
)
def test_malformed_segment_is_rejected(disk_domain, text):
    with pytest.raises(ConfigError):
        TractionSpec.parse_segment(disk_domain, text)


def test_pressure_norms_on_unit_circle(disk_domain, disk_mesh):
    norm = boundary_sobolev_norm(pressure_load(disk_domain), disk_mesh)
    perimeter = 2.0 * math.pi
    assert norm.half == pytest.approx(math.sqrt(perimeter / math.sqrt(2.0)), rel=1e-2)
    assert norm.one == pytest.approx(math.sqrt(perimeter / 2.0), rel=1e-2)
    assert norm.ratio == pytest.approx(2.0 ** 0.25, rel=1e-2)


def test_norm_ratio_is_scale_invariant(disk_domain, disk_mesh):
    load = TractionSpec(disk_domain, (TractionSpec.parse_segment(disk_domain, "full normal_cos 1 3 0"),))
    F = boundary_sobolev_norm(load, disk_mesh).ratio
    assert boundary_sobolev_norm(load.scaled(3.0), disk_mesh).ratio == pytest.approx(F, rel=1e-12)
    # cos(3 theta) n carries frequencies 2 and 4 with equal power
    expected = math.sqrt((5.0 ** -0.5 + 17.0 ** -0.5) / (1.0 / 5.0 + 1.0 / 17.0))
    assert F == pytest.approx(expected, rel=1e-2)


def test_zero_traction_ratio_is_undefined(disk_domain, disk_mesh):
    with pytest.raises(LoadError):
        boundary_sobolev_norm(TractionSpec(disk_domain, ()), disk_mesh).ratio


def test_local_energy_is_monotone(lame_solution):
    radii = [0.2, 0.3, 0.4, 0.5]
    energies = [local_energy(lame_solution, (1.5, 0.0), r) for r in radii]
    assert all(e > 0.0 for e in energies)
    assert all(a <= b for a, b in zip(energies, energies[1:]))


def test_local_energy_outside_mesh_is_zero(lame_solution):
    assert local_energy(lame_solution, (0.0, 0.0), 0.5) == 0.0


def test_direct_stability_ratio(lame_solution, lame_traction, lame_mesh):
    assert h1_norm(lame_solution, 0.4) > 0.0
    assert 0.0 < direct_stability_ratio(lame_solution, lame_traction, lame_mesh, 0.4) < 1e3


@pytest.mark.slow
def test_lame_convergence_order(material):
    domain = lame_domain_spec()
    load = pressure_load(domain)
    errors = []
    for h in (0.1, 0.05, 0.025):
        sol = solve_forward(generate_mesh(domain, h), material, load, order=1)
        errors.append(relative_l2_error(sol.displacement, lame_displacement))
    orders = [math.log2(coarse / fine) for coarse, fine in zip(errors, errors[1:])]
    assert min(orders) >= 1.8


def kirsch_hoop_stress(r, a, sigma=1.0):
    """Hoop stress at polar angle 90 degrees for uniaxial tension along x1."""
    q2 = (a / r) ** 2
    return 0.5 * sigma * (1.0 + q2) + 0.5 * sigma * (1.0 + 3.0 * q2 * q2)


@pytest.mark.slow
def test_kirsch_stress_concentration():
    a = 0.1
    domain = DomainSpec(
        outer=StarShape.circle(0.0, 0.0, 1.0),
        cavities=(StarShape.circle(0.0, 0.0, a),),
        r0=0.2,
        M0=1.0,
        M1=20.0,
    )
    material = PlateMaterial.homogeneous(E=1.0, nu=0.3, h=1.0)
    mesh = generate_mesh(domain, 0.05, h_cavity=0.004, grading=0.3)
    sol = solve_forward(mesh, material, uniform_stress_load(domain, 1.0, 0.0, 0.0), order=2)
    for delta in (0.02, 0.05):
        r = a * (1.0 + delta)
        N = stress_at(sol, material, np.array([[0.0, r]]))[0]
        assert N[0, 0] == pytest.approx(kirsch_hoop_stress(r, a), rel=0.05)
