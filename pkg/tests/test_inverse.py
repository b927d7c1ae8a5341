import math

import numpy as np
import pytest

from conftest import lame_domain_spec, pressure_load
from elasticity.solver import DisplacementField, solve_forward
from elasticity.spaces import FunctionSpace
from geometry.apriori import apriori_check
from geometry.distances import hausdorff_distance
from geometry.shapes import DomainSpec, RigidMotion, StarShape
from inverse.cauchy_gap import cauchy_gap, sigma_sampling, trace_gap
from inverse.fits import (
    eta_fit,
    linear_fit,
    log_log_fit,
    loglog_omega_fit,
    rank_correlation,
    stability_abscissa,
)
from inverse.rates import ProfilePoint, offset_centers, smallness_profile, vanishing_rate
from inverse.reconstruction import (
    ForwardModel,
    Observation,
    _gauss_newton,
    _Objective,
    reconstruct,
    rigid_projector,
    simulate_observation,
)
from inverse.sweep import CavityFamily, stability_sweep
from mesh.generator import generate_mesh
from utilities.errors import ConstraintError, DegenerateFitError


def bending(points):
    x, y = points[:, 0], points[:, 1]
    return np.column_stack([x * y + 0.1 * y ** 2, np.sin(x) - 0.2 * x * x])


def twisting(points):
    x, y = points[:, 0], points[:, 1]
    return np.column_stack([np.cos(y), x ** 3])


def rigidly_moved(field, motion):
    return lambda points: field(points) + motion(points)


@pytest.fixture(scope="module")
def sigma_domain():
    return DomainSpec(
        outer=StarShape.circle(0.0, 0.0, 1.0), r0=0.4, M0=1.0, M1=20.0, sigma_interval=(0.5, 2.5)
    )


def test_cauchy_gap_ignores_rigid_motions(sigma_domain):
    rng = np.random.default_rng(21)
    for _ in range(20):
        motion = RigidMotion(tuple(rng.uniform(-1.0, 1.0, 2)), float(rng.uniform(-1.0, 1.0)))
        assert cauchy_gap(bending, rigidly_moved(bending, motion), sigma_domain) <= 1e-12


def test_cauchy_gap_is_a_pseudometric(sigma_domain):
    sampling = sigma_sampling(sigma_domain, 256)
    fields = [bending, twisting, rigidly_moved(twisting, RigidMotion((0.3, 0.1), 0.5))]

    def gap(i, j):
        return cauchy_gap(fields[i], fields[j], sigma_domain, sampling=sampling)

    assert gap(0, 1) == pytest.approx(gap(1, 0), rel=1e-12)
    assert gap(0, 1) > 0.0
    assert gap(0, 2) <= gap(0, 1) + gap(1, 2) + 1e-10


def test_trace_gap_returns_the_rigid_part(sigma_domain):
    sampling = sigma_sampling(sigma_domain, 128)
    motion = RigidMotion((0.2, -0.4), 0.7)
    gap, coef = trace_gap(motion(sampling.points), np.zeros((sampling.size, 2)), sampling, sigma_domain.r0)
    assert gap <= 1e-12
    np.testing.assert_allclose(coef, [0.2, -0.4, 0.7], atol=1e-12)


def test_empty_sigma_sampling_is_rejected(sigma_domain):
    with pytest.raises(ConstraintError):
        sigma_sampling(sigma_domain, 0)


def test_sigma_sampling_weights(sigma_domain):
    sampling = sigma_sampling(sigma_domain, 100)
    assert sampling.weights.sum() == pytest.approx(2.0)
    np.testing.assert_allclose(np.linalg.norm(sampling.points, axis=1), 1.0)


def test_linear_and_log_log_fits():
    x = np.array([1.0, 2.0, 3.0, 4.0])
    fit = linear_fit(x, 3.0 * x - 1.0)
    assert fit.exponent == pytest.approx(3.0)
    assert fit.intercept == pytest.approx(-1.0)
    assert fit.r_squared == pytest.approx(1.0)
    r = np.array([0.1, 0.2, 0.4, 0.8])
    decay = log_log_fit(r, 5.0 * r ** -1.5, negate=True)
    assert decay.exponent == pytest.approx(1.5)
    assert decay.window == pytest.approx((0.1, 0.8))


def test_degenerate_fits():
    with pytest.raises(DegenerateFitError):
        linear_fit([1.0, 2.0], [1.0, 2.0])
    with pytest.raises(DegenerateFitError):
        linear_fit([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])
    with pytest.raises(DegenerateFitError):
        eta_fit([0.5, 0.6, 0.9], [1.0, 1.0, 1.0], [0.1, 0.2, 0.3])


def test_stability_abscissa_domain():
    x = stability_abscissa([1e-3, 0.5, 0.0], 1.0)
    assert x[0] == pytest.approx(math.log(-math.log(1e-3)))
    assert np.isnan(x[1]) and np.isnan(x[2])


def test_eta_fit_recovers_logarithmic_law():
    eps = np.logspace(-12, -2, 8)
    d = 0.3 * np.abs(np.log(eps)) ** -0.7
    fit = eta_fit(eps, np.ones_like(eps), d)
    assert fit.exponent == pytest.approx(0.7, rel=1e-10)
    assert fit.window == pytest.approx((1e-12, 1e-2))


def test_loglog_omega_fit_recovers_exponent():
    eps = np.logspace(-30, -3, 10)
    inner = np.log(np.abs(np.log(eps)))
    d = 0.2 * inner ** -0.25
    assert loglog_omega_fit(eps, np.ones_like(eps), d).exponent == pytest.approx(0.25, rel=1e-10)


def test_rank_correlation():
    assert rank_correlation([1, 2, 3, 4], [0.1, 0.5, 0.6, 2.0]) == pytest.approx(1.0)
    assert math.isnan(rank_correlation([1, 2], [1, 2]))


@pytest.fixture(scope="module")
def fine_disk():
    domain = DomainSpec(outer=StarShape.circle(0.0, 0.0, 1.0), r0=0.4, M0=1.0, M1=20.0)
    return domain, generate_mesh(domain, 0.02)


def uniform_strain_field(mesh, eps):
    space = FunctionSpace(mesh, 1)
    return DisplacementField(space, mesh.nodes @ np.asarray(eps, dtype=float).T, normalized=False)


RADII = [0.12, 0.24, 0.48, 0.96]


def test_uniform_strain_vanishing_rate(fine_disk):
    domain, mesh = fine_disk
    field = uniform_strain_field(mesh, [[0.01, 0.002], [0.002, -0.005]])
    fit = vanishing_rate(field, (0.0, 0.0), RADII, domain=domain)
    assert fit.exponent == pytest.approx(2.0, abs=0.05)
    assert fit.n_points == 4


def test_vanishing_rate_rejects_bad_radii(fine_disk):
    domain, mesh = fine_disk
    field = uniform_strain_field(mesh, [[0.01, 0.0], [0.0, 0.0]])
    with pytest.raises(DegenerateFitError):
        vanishing_rate(field, (0.0, 0.0), RADII[:2])
    with pytest.raises(DegenerateFitError):
        vanishing_rate(field, (0.0, 0.0), RADII[:3])
    with pytest.raises(DegenerateFitError):
        vanishing_rate(field, (0.0, 0.0), [0.001, 0.01, 0.1])


def test_vanishing_rate_of_zero_field_is_degenerate(fine_disk):
    domain, mesh = fine_disk
    with pytest.raises(DegenerateFitError):
        vanishing_rate(uniform_strain_field(mesh, np.zeros((2, 2))), (0.0, 0.0), RADII)


def test_vanishing_rate_checks_disks(fine_disk):
    domain, mesh = fine_disk
    field = uniform_strain_field(mesh, [[0.01, 0.0], [0.0, 0.0]])
    with pytest.raises(ConstraintError):
        vanishing_rate(field, (0.5, 0.0), RADII, domain=domain)
    with pytest.raises(ConstraintError):
        vanishing_rate(field, (0.0, 0.0), RADII, mode="boundary", domain=domain)


def test_smallness_profile_is_scale_invariant(lame_domain, lame_mesh, lame_solution, material):
    doubled = solve_forward(lame_mesh, material, pressure_load(lame_domain, 2.0))
    rho = [0.2, 0.3]
    base = smallness_profile(lame_solution, lame_domain, rho)
    scaled = smallness_profile(doubled, lame_domain, rho)
    for a, b in zip(base, scaled):
        assert a.value > 0.0
        assert b.value == pytest.approx(a.value, rel=1e-9)
        assert a.centers == b.centers


def test_smallness_profile_grows_with_the_radius(lame_domain, lame_solution):
    centers = offset_centers(lame_domain, 0.3)
    rho = [0.3, 0.2, 0.15, 0.1]
    profile = smallness_profile(lame_solution, lame_domain, rho, centers=centers)
    values = [p.value for p in profile]
    assert all(v > 0.0 for v in values)
    assert all(smaller <= larger for larger, smaller in zip(values, values[1:]))
    assert all(p.centers == centers.shape[0] for p in profile)


@pytest.mark.slow
def test_boundary_vanishing_rate_on_lame_cavity(lame_domain, material, lame_traction):
    mesh = generate_mesh(lame_domain, 0.02)
    sol = solve_forward(mesh, material, lame_traction)
    fit = vanishing_rate(sol, (1.0, 0.0), RADII, mode="boundary", domain=lame_domain)
    assert math.isfinite(fit.exponent)
    assert 1.0 < fit.exponent < 3.0
    assert fit.r_squared >= 0.95


def test_offset_centers(lame_domain):
    centers = offset_centers(lame_domain, 0.2)
    r = np.linalg.norm(centers, axis=1)
    assert np.all((r > 1.3 - 1e-9) & (r < 1.7 + 1e-9))
    with pytest.raises(ConstraintError):
        offset_centers(lame_domain, 1.0)


def test_profile_point_coordinates():
    x, y = ProfilePoint(rho=0.1, value=math.e, centers=4).shape_coordinates(0.4)
    assert (x, y) == pytest.approx((4.0, 1.0))


@pytest.fixture(scope="module")
def inverse_setup(material):
    domain = DomainSpec(
        outer=StarShape.circle(0.0, 0.0, 2.0),
        cavities=(StarShape.circle(0.0, 0.0, 0.5),),
        r0=0.4,
        M0=1.0,
        M1=20.0,
    )
    return domain, material, pressure_load(domain)


def test_rigid_projector_is_orthonormal(sigma_domain):
    Q, sqrt_w = rigid_projector(sigma_sampling(sigma_domain, 64))
    assert Q.shape == (128, 3)
    np.testing.assert_allclose(Q.T @ Q, np.eye(3), atol=1e-12)
    assert sqrt_w.shape == (128,)


def test_reconstruct_stops_at_exact_initial_guess(inverse_setup):
    domain, material, traction = inverse_setup
    init = domain.cavities[0]
    observation = simulate_observation(domain, material, traction, init, h=0.1, samples=64, refine=1.0)
    result = reconstruct(domain, material, traction, observation, init, reg_weight=0.0, h=0.1, modes=0)
    assert result.iterations == 0
    assert result.converged
    assert result.recovered == init


def test_reconstruct_rejects_init_outside_class(inverse_setup):
    domain, material, traction = inverse_setup
    observation = simulate_observation(domain, material, traction, domain.cavities[0], h=0.1, samples=32)
    with pytest.raises(ConstraintError):
        reconstruct(domain, material, traction, observation, StarShape.circle(0.0, 0.0, 1.5), 0.0, h=0.1)


def test_noisy_observation_is_reproducible(inverse_setup):
    domain, material, traction = inverse_setup
    args = (domain, material, traction, domain.cavities[0])
    first = simulate_observation(*args, h=0.1, samples=32, noise=0.01, seed=5, refine=1.0)
    second = simulate_observation(*args, h=0.1, samples=32, noise=0.01, seed=5, refine=1.0)
    np.testing.assert_array_equal(first.values, second.values)
    assert first.noise_level > 0.0


@pytest.mark.slow
def test_concentric_sweep(material):
    domain = DomainSpec(
        outer=StarShape.circle(0.0, 0.0, 1.5),
        cavities=(StarShape.circle(0.0, 0.0, 0.5),),
        r0=0.2,
        M0=1.0,
        M1=20.0,
    )
    t_values = [0.0, 0.005, 0.01, 0.015, 0.02, 0.03, 0.04, 0.06, 0.08]
    family = CavityFamily(domain.cavities[0], (0.0, 0.0, 1.0), t_values)
    result = stability_sweep(family, domain, material, pressure_load(domain), h=0.05)
    assert all(row.ok for row in result.rows)
    assert result.rows[0].t == 0.0
    assert result.rows[0].d_H == 0.0
    assert result.rows[0].epsilon <= 1e-12
    assert result.spearman >= 0.95
    assert result.eta is not None
    assert result.eta.exponent > 0.0
    assert result.eta.r_squared >= 0.9
    for row in result.rows[1:]:
        assert row.d_H == pytest.approx(row.t, rel=0.02)
        assert row.epsilon > 0.0


@pytest.mark.slow
def test_reconstruct_translated_disk(inverse_setup):
    domain, material, traction = inverse_setup
    target = StarShape.circle(0.05, -0.03, 0.45)
    observation = simulate_observation(domain, material, traction, target, h=0.05, samples=128)
    result = reconstruct(
        domain, material, traction, observation, domain.cavities[0], reg_weight=0.0, h=0.05, modes=0
    )
    assert hausdorff_distance(result.recovered, target) <= 0.02 * domain.r0
    assert np.all(np.diff(result.misfit_history) <= 0.0)


@pytest.mark.slow
def test_reconstruct_noisy_shape_with_fourier_mode(inverse_setup):
    domain, material, traction = inverse_setup
    target = StarShape.from_line("star 0.05 -0.03 0.45 2 0 0 0.01 0")
    observation = simulate_observation(domain, material, traction, target, h=0.05, samples=128, noise=1e-3, seed=11)
    result = reconstruct(
        domain, material, traction, observation, domain.cavities[0], reg_weight=None, h=0.05, modes=2, max_iter=15
    )
    assert result.reg_weight > 0.0
    assert hausdorff_distance(result.recovered, target) <= 0.05 * domain.r0
    assert np.all(np.diff(result.misfit_history) <= 0.0)


class DilationModel(ForwardModel):
    """Sigma trace rho0 * x: linear in the radius, blind to the other parameters."""

    def trace(self, params, sampling):
        return params[2] * sampling.points


def test_trial_steps_stay_in_the_class():
    # data ask for rho0 = 1.6; the distance to the outer circle caps it at 1.2
    domain = lame_domain_spec()
    model = DilationModel(domain, None, None, None, 0, 1, 0.1)
    sampling = sigma_sampling(domain, 64)
    observation = Observation(sampling=sampling, values=1.6 * sampling.points)
    objective = _Objective(model, observation, 0.0)

    params, history, iterations, _ = _gauss_newton(
        objective, np.array([0.0, 0.0, 1.0]), max_iter=6, fd_step=1e-3, step_tol=1e-8, threads=1
    )
    assert 1.0 < params[2] <= 1.2 + 1e-3
    assert iterations >= 1
    assert np.all(np.diff(history) < 0.0)
    recovered = StarShape.from_params(params)
    assert apriori_check(domain.with_cavities((recovered,))).geometry_passed
    with pytest.raises(ConstraintError):
        model.check_shape(StarShape.circle(0.0, 0.0, 1.6))
