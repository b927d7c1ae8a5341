import numpy as np
import pytest

from material.moduli import enu_from_lame, lambda_star, lame_from_enu
from material.plate_material import (
    LameField,
    PlateMaterial,
    ScalarField,
    apply_C,
    apply_L,
    convexity_report,
    random_symmetric,
)
from utilities.errors import MaterialError


@pytest.mark.parametrize(
    "mu, lam, E, nu",
    [(1.0, 0.0, 2.0, 0.0), (1.0, 1.0, 2.5, 0.25)],
)
def test_enu_from_lame(mu, lam, E, nu):
    assert enu_from_lame(mu, lam) == pytest.approx((E, nu))
    assert lame_from_enu(E, nu) == pytest.approx((mu, lam))


def test_moduli_roundtrip():
    rng = np.random.default_rng(3)
    E = rng.uniform(0.5, 5.0, 50)
    nu = rng.uniform(-0.9, 0.49, 50)
    back = enu_from_lame(*lame_from_enu(E, nu))
    np.testing.assert_allclose(back[0], E, rtol=1e-12)
    np.testing.assert_allclose(back[1], nu, rtol=1e-12, atol=1e-14)


@pytest.mark.parametrize("nu", [0.5, -1.0, 0.7])
def test_singular_poisson_ratio_is_rejected(nu):
    with pytest.raises(MaterialError):
        lame_from_enu(1.0, nu)


def test_enu_from_lame_enforces_bounds():
    with pytest.raises(MaterialError):
        enu_from_lame(0.5, 1.0, alpha0=1.0)
    with pytest.raises(MaterialError):
        enu_from_lame(1.0, -0.5, gamma0=1.0)


def test_lambda_star():
    assert lambda_star(1.0, 1.0) == pytest.approx(2.0 / 3.0)
    assert lambda_star(1.0, 0.0) == 0.0
    with pytest.raises(MaterialError):
        lambda_star(1.0, -3.0)


def test_lambda_star_reproduces_plane_stress_law():
    mu, lam = 1.0, 1.0
    E, nu = enu_from_lame(mu, lam)
    material = PlateMaterial.homogeneous(E=E, nu=nu, h=0.5)
    A = random_symmetric(np.random.default_rng(0), 20)
    tr = A[:, 0, 0] + A[:, 1, 1]
    expected = 0.5 * (2.0 * mu * A + lambda_star(mu, lam) * tr[:, None, None] * np.eye(2))
    np.testing.assert_allclose(apply_C(material, np.zeros((20, 2)), A), expected, rtol=1e-12)


@pytest.fixture(scope="module")
def plate():
    return PlateMaterial.homogeneous(E=2.0, nu=0.3, h=0.5)


def test_apply_C_examples(plate):
    x = np.zeros(2)
    Eh = 2.0 * 0.5
    np.testing.assert_allclose(apply_C(plate, x, np.eye(2)), Eh / 0.7 * np.eye(2))
    trace_free = np.array([[1.0, 2.0], [2.0, -1.0]])
    np.testing.assert_allclose(apply_C(plate, x, trace_free), Eh / 1.3 * trace_free)
    np.testing.assert_allclose(apply_C(plate, x, np.array([[0.0, 1.0], [-1.0, 0.0]])), 0.0, atol=1e-15)


def test_apply_L_examples(plate):
    x = np.zeros(2)
    np.testing.assert_allclose(apply_L(plate, x, np.eye(2)), 0.7 / 1.0 * np.eye(2))
    free = PlateMaterial.homogeneous(E=2.0, nu=0.0, h=0.5)
    A = np.array([[1.0, 0.5], [0.5, 3.0]])
    np.testing.assert_allclose(apply_L(free, x, A), A)


def test_C_is_symmetric_and_L_inverts_it(plate):
    rng = np.random.default_rng(11)
    A = random_symmetric(rng, 100)
    B = random_symmetric(rng, 100)
    x = rng.uniform(-1.0, 1.0, (100, 2))
    CA = apply_C(plate, x, A)
    CB = apply_C(plate, x, B)
    np.testing.assert_allclose(np.sum(CA * B, axis=(1, 2)), np.sum(A * CB, axis=(1, 2)), rtol=1e-12)
    np.testing.assert_allclose(apply_L(plate, x, CA), A, rtol=1e-12, atol=1e-14)


def test_convexity_report(plate):
    points = np.random.default_rng(5).uniform(-1.0, 1.0, (100, 2))
    report = convexity_report(plate, points, samples=1000, seed=2)
    assert report["C_ratio"] >= 1.0 - 1e-12
    assert report["L_ratio"] >= 1.0


def test_radial_field_resolves_bounds():
    lame = LameField(ScalarField.radial((1.0, 0.1)), ScalarField.radial((1.0, -0.1)))
    material = PlateMaterial(h=1.0, lame=lame)
    points = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 2.0]])
    resolved = material.resolved(points, r_max=2.0)
    assert resolved.lame.alpha0 == pytest.approx(0.8)
    assert resolved.lame.Lambda0 == pytest.approx(1.2 + 0.1)
    resolved.validate(points, r_max=2.0)


def test_validate_reports_violated_bound():
    lame = LameField(ScalarField.constant(1.0), ScalarField.radial((1.0, -0.1)), alpha0=0.9)
    with pytest.raises(MaterialError, match="alpha0"):
        PlateMaterial(h=1.0, lame=lame).validate(np.array([[0.0, 2.0]]), r_max=2.0)


def test_non_positive_thickness_is_rejected():
    with pytest.raises(MaterialError):
        PlateMaterial.homogeneous(h=0.0)
