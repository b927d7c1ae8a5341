"""
Conversions between Lame moduli and plane-stress Young's modulus / Poisson ratio.
"""
import logging

import numpy as np

from utilities.errors import MaterialError

logger = logging.getLogger(__name__)


def _result(value):
    value = np.asarray(value, dtype=float)
    return float(value) if value.ndim == 0 else value


def enu_from_lame(mu, lam, alpha0=None, gamma0=None):
    """Young's modulus and Poisson ratio from the Lame moduli.

    E = mu (2 mu + 3 lambda) / (mu + lambda), nu = lambda / (2 (mu + lambda)).

    Args:
        mu (float | numpy.ndarray): Shear modulus
        lam (float | numpy.ndarray): First Lame modulus
        alpha0 (float, optional): Lower bound for mu. Defaults to requiring mu > 0.
        gamma0 (float, optional): Lower bound for 2 mu + 3 lambda. Defaults to requiring it > 0.

    Returns:
        tuple: (E, nu)

    Raises:
        MaterialError: If a bound is violated or mu + lambda vanishes
    """
    mu = np.asarray(mu, dtype=float)
    lam = np.asarray(lam, dtype=float)
    bulk = 2.0 * mu + 3.0 * lam
    if alpha0 is None:
        if np.any(mu <= 0.0):
            raise MaterialError(f"mu must be positive, min is {mu.min():.6g}")
    elif np.any(mu < alpha0):
        raise MaterialError(f"mu = {mu.min():.6g} below alpha0 = {alpha0:.6g}")
    if gamma0 is None:
        if np.any(bulk <= 0.0):
            raise MaterialError(f"2 mu + 3 lambda must be positive, min is {bulk.min():.6g}")
    elif np.any(bulk < gamma0):
        raise MaterialError(f"2 mu + 3 lambda = {bulk.min():.6g} below gamma0 = {gamma0:.6g}")
    denom = mu + lam
    if np.any(denom == 0.0):
        raise MaterialError("mu + lambda vanishes")
    E = mu * bulk / denom
    nu = lam / (2.0 * denom)
    return _result(E), _result(nu)


def lame_from_enu(E, nu):
    """Lame moduli from Young's modulus and Poisson ratio.

    Raises:
        MaterialError: If E <= 0 or nu lies outside (-1, 1/2)
    """
    E = np.asarray(E, dtype=float)
    nu = np.asarray(nu, dtype=float)
    if np.any(E <= 0.0):
        raise MaterialError(f"Young's modulus must be positive, got {E.min():.6g}")
    if np.any(nu <= -1.0) or np.any(nu >= 0.5):
        raise MaterialError(f"Poisson ratio must lie in (-1, 1/2), got {nu.min():.6g}..{nu.max():.6g}")
    mu = E / (2.0 * (1.0 + nu))
    lam = nu * E / ((1.0 + nu) * (1.0 - 2.0 * nu))
    return _result(mu), _result(lam)


def lambda_star(mu, lam):
    """Plane-stress effective modulus 2 mu lambda / (lambda + 2 mu).

    Raises:
        MaterialError: If lambda + 2 mu <= 0
    """
    mu = np.asarray(mu, dtype=float)
    lam = np.asarray(lam, dtype=float)
    denom = lam + 2.0 * mu
    if np.any(denom <= 0.0):
        raise MaterialError(f"lambda + 2 mu must be positive, min is {denom.min():.6g}")
    return _result(2.0 * mu * lam / denom)
