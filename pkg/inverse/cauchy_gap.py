"""
Cauchy-data gap on the accessible boundary: the L2(Sigma) distance between two
displacement traces modulo rigid motions, divided by r0.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np

from geometry.shapes import rigid_basis
from setup.config_conf import DEFAULT_SIGMA_SAMPLES
from utilities.errors import ConstraintError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SigmaSampling:
    """Midpoint samples of Sigma on the exact outer curve with their arclength weights."""

    points: np.ndarray
    weights: np.ndarray

    @property
    def size(self):
        return self.points.shape[0]


def sigma_sampling(domain, samples=DEFAULT_SIGMA_SAMPLES):
    """Shared sampling of Sigma.

    Raises:
        ConstraintError: If there are no samples
    """
    if samples < 1 or domain.sigma_length <= 0.0:
        raise ConstraintError(f"Sigma sampling is empty ({samples} samples, length {domain.sigma_length:.3g})")
    s = domain.sigma_arclengths(samples)
    outer = domain.outer
    points = outer.points(outer.theta_at(np.mod(s, outer.perimeter)))
    return SigmaSampling(points, np.full(samples, domain.sigma_length / samples))


def sigma_trace(field, sampling):
    """Displacement values at the Sigma samples, shape (n, 2)."""
    field = getattr(field, "displacement", field)
    return np.asarray(field(sampling.points), dtype=float)


def trace_gap(u1, u2, sampling, r0):
    """min over rigid r of ||u1 - u2 - r||_{L2(Sigma)} / r0 for sampled traces.

    Returns:
        tuple: (gap, rigid coefficients (c1, c2, w))
    """
    diff = np.asarray(u1, dtype=float) - np.asarray(u2, dtype=float)
    if diff.shape[0] == 0:
        raise ConstraintError("Sigma sampling is empty")
    sqrt_w = np.sqrt(sampling.weights)
    R = rigid_basis(sampling.points) * sqrt_w[:, None, None]
    b = (diff * sqrt_w[:, None]).ravel()
    A = R.reshape(-1, 3)
    coef, *_ = np.linalg.lstsq(A, b, rcond=None)
    misfit = b - A @ coef
    return math.sqrt(float(misfit @ misfit)) / r0, coef


def cauchy_gap(a1, a2, domain, samples=DEFAULT_SIGMA_SAMPLES, sampling=None):
    """Cauchy-data gap epsilon between two displacement fields.

    Args:
        a1 (DisplacementField | SaddleSolution): First field
        a2 (DisplacementField | SaddleSolution): Second field
        domain (DomainSpec): Domain carrying Sigma and r0
        samples (int, optional): Sigma samples. Defaults to 512.
        sampling (SigmaSampling, optional): Precomputed sampling

    Returns:
        float: The gap, zero for fields that differ by a rigid motion
    """
    sampling = sampling or sigma_sampling(domain, samples)
    gap, _ = trace_gap(sigma_trace(a1, sampling), sigma_trace(a2, sampling), sampling, domain.r0)
    logger.debug(f"Cauchy gap on {sampling.size} Sigma samples: {gap:.6g}")
    return gap
