"""
A-priori class verification for a DomainSpec.

Checks the geometric constraints on Omega and its cavities and a sampled
C^{6,alpha} bound of the local boundary graphs with constants r0, M0.
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import pdist

from geometry.distances import boundary_polyline, polyline_distance
from setup.config_conf import DEFAULT_REGULARITY_SAMPLES

logger = logging.getLogger(__name__)

REGULARITY_ORDER = 6
_ANCHOR_STRIDE = 4
_WINDOW_HALF = 24
_WINDOW_REACH = 1.5


@dataclass(frozen=True)
class ConstraintResult:
    name: str
    passed: bool
    value: float
    bound: float
    detail: str = ""


@dataclass
class AprioriReport:
    """Pass/fail per constraint."""

    items: list = field(default_factory=list)

    def add(self, name, passed, value, bound, detail=""):
        self.items.append(ConstraintResult(name, bool(passed), float(value), float(bound), detail))

    @property
    def passed(self):
        return all(item.passed for item in self.items)

    @property
    def geometry_passed(self):
        """All constraints except the sampled regularity bounds."""
        return all(item.passed for item in self.items if not item.name.startswith("regularity"))

    def failures(self):
        return [item for item in self.items if not item.passed]

    def geometry_failures(self):
        return [item for item in self.failures() if not item.name.startswith("regularity")]

    def get(self, name):
        for item in self.items:
            if item.name == name:
                return item
        return None


def _series_mul(a, b):
    """Truncated product of Taylor coefficient rows."""
    out = np.zeros_like(a)
    for k in range(a.shape[1]):
        out[:, k] = np.sum(a[:, : k + 1] * b[:, k::-1], axis=1)
    return out


def curve_jets(shape, theta, order=REGULARITY_ORDER):
    """Taylor coefficients in theta of the curve coordinates.

    Returns:
        tuple: (x, y), each of shape (len(theta), order + 1)
    """
    theta = np.asarray(theta, dtype=float)
    rho = np.stack([shape.radius(theta, m) for m in range(order + 1)], axis=1)
    x = np.zeros((theta.size, order + 1))
    y = np.zeros((theta.size, order + 1))
    for n in range(order + 1):
        for m in range(n + 1):
            c = math.comb(n, m)
            x[:, n] += c * rho[:, m] * np.cos(theta + (n - m) * np.pi / 2.0)
            y[:, n] += c * rho[:, m] * np.sin(theta + (n - m) * np.pi / 2.0)
        x[:, n] /= math.factorial(n)
        y[:, n] /= math.factorial(n)
    x[:, 0] += shape.center.x1
    y[:, 0] += shape.center.x2
    return x, y


def graph_derivatives(X, Y):
    """Derivatives of the graph Y = g(X) from Taylor coefficients of X and Y.

    Reverts the series X(delta) and composes. Rows where X is not increasing
    (no graph) come back as NaN.

    Args:
        X (numpy.ndarray): Taylor coefficients of the abscissa, shape (m, N + 1)
        Y (numpy.ndarray): Taylor coefficients of the ordinate, shape (m, N + 1)

    Returns:
        numpy.ndarray: g^(i)(X_0), shape (m, N + 1)
    """
    m, size = X.shape
    order = size - 1
    slope = X[:, 1].copy()
    bad = slope <= 1e-14 * np.maximum(1.0, np.abs(X).max(axis=1))
    slope[bad] = 1.0

    unit = np.zeros((m, size))
    unit[:, 1] = 1.0
    delta = np.zeros((m, size))
    delta[:, 1] = 1.0 / slope
    for _ in range(order):
        power = delta.copy()
        acc = np.zeros((m, size))
        for k in range(2, size):
            power = _series_mul(power, delta)
            acc += X[:, k, None] * power
        delta = (unit - acc) / slope[:, None]

    g = np.zeros((m, size))
    g[:, 0] = Y[:, 0]
    power = delta.copy()
    g += Y[:, 1, None] * power
    for k in range(2, size):
        power = _series_mul(power, delta)
        g += Y[:, k, None] * power

    g *= np.array([math.factorial(i) for i in range(size)])
    g[bad] = np.nan
    return g


def regularity_norm(shape, r0, alpha, samples=DEFAULT_REGULARITY_SAMPLES):
    """Sampled C^{6,alpha} norm of the local boundary graphs, scaled as in the class definition.

    At each anchor P the curve is written as a graph y = g(x) in the frame with
    origin P, x along the counterclockwise tangent and y along the normal
    pointing into the bounded region. The norm
    sup_{|x| <= r0} sum_i r0^i |g^(i)(x)| + r0^(6+alpha) |g^(6)|_alpha is
    sampled on a window of curve points around P. A graph that breaks down
    before |x| reaches r0 gives an infinite norm.

    Returns:
        float: Maximum over anchors of the scaled norm (to compare with M0 r0)
    """
    anchors = np.linspace(0.0, 2.0 * np.pi, max(1, samples // _ANCHOR_STRIDE), endpoint=False)
    x_a, y_a = curve_jets(shape, anchors, order=1)
    tangent = shape.tangent(anchors)
    inward = np.stack([-tangent[:, 1], tangent[:, 0]], axis=1)

    span = np.minimum(_WINDOW_REACH * r0 / np.hypot(x_a[:, 1], y_a[:, 1]), np.pi)
    steps = np.linspace(-1.0, 1.0, 2 * _WINDOW_HALF + 1)
    theta = (anchors[:, None] + span[:, None] * steps[None, :]).ravel()
    x, y = curve_jets(shape, theta)

    t_a = np.repeat(tangent, steps.size, axis=0)
    n_a = np.repeat(inward, steps.size, axis=0)
    dx = x.copy()
    dy = y.copy()
    dx[:, 0] -= np.repeat(x_a[:, 0], steps.size)
    dy[:, 0] -= np.repeat(y_a[:, 0], steps.size)
    X = dx * t_a[:, 0:1] + dy * t_a[:, 1:2]
    Y = dx * n_a[:, 0:1] + dy * n_a[:, 1:2]
    g = graph_derivatives(X, Y).reshape(anchors.size, steps.size, -1)
    X0 = X[:, 0].reshape(anchors.size, steps.size)

    # walk outwards from the anchor; stop at the first point with |x| > r0
    finite = np.isfinite(g).all(axis=2)
    inside = np.abs(X0) <= r0
    center = _WINDOW_HALF
    usable = np.zeros_like(finite)
    broken = np.zeros(anchors.size, dtype=bool)
    for side in (slice(center, None), slice(center, None, -1)):
        left = np.logical_or.accumulate(~inside[:, side], axis=1)
        graph = np.logical_and.accumulate(finite[:, side], axis=1)
        usable[:, side] |= graph & ~left
        broken |= (~graph & ~left).any(axis=1)

    scale = r0 ** np.arange(REGULARITY_ORDER + 1)
    terms = np.where(usable, np.sum(np.abs(np.nan_to_num(g)) * scale, axis=2), 0.0)
    base = terms.max(axis=1)

    g6 = np.where(usable, g[:, :, REGULARITY_ORDER], 0.0)
    pair = usable[:, :, None] & usable[:, None, :]
    gap = np.abs(X0[:, :, None] - X0[:, None, :])
    pair &= gap > 0.0
    quotient = np.where(
        pair,
        np.abs(g6[:, :, None] - g6[:, None, :]) / np.where(pair, gap, 1.0) ** alpha,
        0.0,
    )
    holder = quotient.max(axis=(1, 2))

    total = base + r0 ** (REGULARITY_ORDER + alpha) * holder
    total[broken] = np.inf
    return float(total.max())


def _rectangle_mask(points, origin, tangent, half_width, half_height):
    rel = points - origin
    u = rel @ tangent
    v = rel @ np.array([-tangent[1], tangent[0]])
    return (np.abs(u) <= half_width) & (np.abs(v) <= half_height)


def apriori_check(domain, samples=DEFAULT_REGULARITY_SAMPLES):
    """Verify the a-priori information on the geometry.

    Args:
        domain (DomainSpec): Domain to check
        samples (int, optional): Boundary sampling density

    Returns:
        AprioriReport: One entry per constraint; never raises for violations
    """
    report = AprioriReport()
    r0, M0, M1 = domain.r0, domain.M0, domain.M1

    report.add("M0", M0 >= 0.5, M0, 0.5, "M0 >= 1/2")

    outer_pts = boundary_polyline(domain.outer, samples)
    diameter = float(pdist(outer_pts[:: max(1, samples // 1024)]).max())
    report.add("diameter", diameter <= M1 * r0, diameter, M1 * r0, "diam(Omega) <= M1 r0")

    cavity_pts = [boundary_polyline(c, samples) for c in domain.cavities]
    inside_all = True
    for k, pts in enumerate(cavity_pts):
        inside = bool(domain.outer.contains(pts).all())
        dist = float(polyline_distance(pts, outer_pts).min()) if inside else 0.0
        inside_all &= inside
        report.add(
            f"cavity_distance:{k}",
            inside and dist >= 2.0 * M0 * r0,
            dist,
            2.0 * M0 * r0,
            "dist(D, boundary of Omega) >= 2 M0 r0" + ("" if inside else " (cavity not inside Omega)"),
        )

    disjoint = True
    for i in range(len(cavity_pts)):
        for j in range(i + 1, len(cavity_pts)):
            overlap = bool(domain.cavities[j].contains(cavity_pts[i]).any()) or bool(
                domain.cavities[i].contains(cavity_pts[j]).any()
            )
            dist = 0.0 if overlap else float(polyline_distance(cavity_pts[i], cavity_pts[j]).min())
            disjoint &= dist > 0.0
            report.add(f"cavity_separation:{i}:{j}", dist >= r0, dist, r0, "pairwise cavity distance >= r0")

    report.add(
        "connected",
        inside_all and disjoint,
        1.0 if inside_all and disjoint else 0.0,
        1.0,
        "Omega minus the cavities is connected",
    )

    curves = [("outer", domain.outer)] + [(f"cavity:{k}", c) for k, c in enumerate(domain.cavities)]
    for label, shape in curves:
        norm = regularity_norm(shape, r0, domain.alpha, samples)
        report.add(
            f"regularity:{label}",
            norm <= M0 * r0,
            norm,
            M0 * r0,
            "sampled C^{6,alpha} norm of the local graph <= M0 r0",
        )

    if domain.full_sigma:
        report.add("sigma_containment", True, 0.0, 0.0, "Sigma is the whole outer boundary")
    else:
        p0 = domain.sigma_anchor.as_array()
        theta0 = float(domain.outer.polar_angle(p0))
        offset = float(np.linalg.norm(domain.outer.points(theta0) - p0))
        tangent = domain.outer.tangent(theta0)
        in_rect = _rectangle_mask(outer_pts, p0, tangent, r0, 2.0 * M0 * r0)
        s = domain.outer_arclength(outer_pts[in_rect])
        contained = bool(domain.sigma_contains(s).all()) and offset <= 1e-6 * r0
        report.add(
            "sigma_containment",
            contained,
            offset,
            1e-6 * r0,
            "boundary of Omega inside R_{r0,2M0r0}(P0) lies in Sigma",
        )

    for item in report.failures():
        logger.info(f"A-priori constraint '{item.name}' fails: value {item.value:.6g}, bound {item.bound:.6g}")
    return report
