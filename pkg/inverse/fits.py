"""
Least-squares rate fits on logarithmic scales.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from utilities.errors import DegenerateFitError

logger = logging.getLogger(__name__)

_MIN_FIT_POINTS = 3


@dataclass(frozen=True)
class RateFit:
    """Fitted exponent with the regression behind it.

    ``exponent`` is the reported rate (the slope, or minus the slope for
    decay laws), ``window`` the range of the abscissa used.
    """

    exponent: float
    intercept: float
    r_squared: float
    window: tuple
    n_points: int
    kind: str = ""

    def __post_init__(self):
        if not math.isfinite(self.exponent):
            raise DegenerateFitError(f"{self.kind or 'rate'} fit produced a non-finite exponent")

    def summary(self):
        lo, hi = self.window
        return (
            f"exponent={self.exponent:.17g}, intercept={self.intercept:.17g}, "
            f"r2={self.r_squared:.17g}, window=[{lo:.17g}, {hi:.17g}]"
        )


def linear_fit(x, y, kind="", negate=False, window=None):
    """Fit y = slope x + intercept.

    Args:
        x (array-like): Abscissae
        y (array-like): Ordinates
        kind (str, optional): Label used in messages
        negate (bool, optional): Report -slope as the exponent
        window (tuple, optional): Window to report. Defaults to (min x, max x).

    Returns:
        RateFit: The fit

    Raises:
        DegenerateFitError: For fewer than three points or a constant abscissa
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < _MIN_FIT_POINTS:
        raise DegenerateFitError(f"{kind or 'rate'} fit needs at least {_MIN_FIT_POINTS} points, got {x.size}")
    if np.ptp(x) == 0.0:
        raise DegenerateFitError(f"{kind or 'rate'} fit has a constant abscissa")
    result = stats.linregress(x, y)
    r2 = float(result.rvalue) ** 2 if np.ptp(y) > 0.0 else 1.0
    fit = RateFit(
        exponent=float(-result.slope if negate else result.slope),
        intercept=float(result.intercept),
        r_squared=min(max(r2, 0.0), 1.0),
        window=tuple(window) if window is not None else (float(x.min()), float(x.max())),
        n_points=int(x.size),
        kind=kind,
    )
    logger.debug(f"{kind or 'rate'} fit: {fit.summary()}")
    return fit


def log_log_fit(x, y, kind="", negate=False):
    """Fit log y against log x; the window is reported in the original x."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return linear_fit(np.log(x), np.log(y), kind=kind, negate=negate, window=(float(x.min()), float(x.max())))


def stability_abscissa(epsilon, norm):
    """log|log(epsilon / norm)| where epsilon / norm < 1/e, NaN elsewhere."""
    t = np.atleast_1d(np.asarray(epsilon, dtype=float) / np.asarray(norm, dtype=float))
    out = np.full(t.shape, np.nan)
    valid = (t > 0.0) & (t < math.exp(-1.0))
    out[valid] = np.log(np.abs(np.log(t[valid])))
    return out


def eta_fit(epsilon, norms, distances, kind="eta"):
    """Fit log distance against log|log(epsilon / ||N||)|; the exponent is minus the slope.

    Only rows with 0 < epsilon / ||N|| < 1/e and a positive distance enter. The
    window is the range of epsilon / ||N|| used.
    """
    epsilon = np.asarray(epsilon, dtype=float)
    norms = np.asarray(norms, dtype=float)
    distances = np.asarray(distances, dtype=float)
    x = stability_abscissa(epsilon, norms)
    keep = np.isfinite(x) & (distances > 0.0)
    if np.count_nonzero(keep) < _MIN_FIT_POINTS:
        raise DegenerateFitError(
            f"{kind} fit needs {_MIN_FIT_POINTS} rows with epsilon/||N|| < 1/e, got {int(np.count_nonzero(keep))}"
        )
    ratio = epsilon[keep] / norms[keep]
    return linear_fit(
        x[keep], np.log(distances[keep]), kind=kind, negate=True, window=(float(ratio.min()), float(ratio.max()))
    )


def loglog_omega_fit(epsilon, norms, distances, kind="loglog"):
    """Fit log distance against log(log|log(epsilon / ||N||)|), rows with log|log| > 0."""
    epsilon = np.asarray(epsilon, dtype=float)
    norms = np.asarray(norms, dtype=float)
    distances = np.asarray(distances, dtype=float)
    inner = stability_abscissa(epsilon, norms)
    keep = np.isfinite(inner) & (inner > 0.0) & (distances > 0.0)
    if np.count_nonzero(keep) < _MIN_FIT_POINTS:
        raise DegenerateFitError(f"{kind} fit needs {_MIN_FIT_POINTS} usable rows, got {int(np.count_nonzero(keep))}")
    ratio = epsilon[keep] / norms[keep]
    return linear_fit(
        np.log(inner[keep]),
        np.log(distances[keep]),
        kind=kind,
        negate=True,
        window=(float(ratio.min()), float(ratio.max())),
    )


def rank_correlation(x, y):
    """Spearman rank correlation (NaN for fewer than three pairs)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 3:
        return float("nan")
    return float(stats.spearmanr(x, y)[0])
