"""
Symmetric quadrature rules on the reference triangle and Gauss rules on [0, 1].
"""
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Barycentric points and weights; weights sum to the reference area 1/2."""

    points: np.ndarray
    weights: np.ndarray
    degree: int

    @property
    def size(self):
        return self.weights.size


def _orbit(a, b, c):
    return [(a, b, c), (c, a, b), (b, c, a)]


def triangle_rule(degree=4):
    """Symmetric rule exact for polynomials up to ``degree`` (1, 2 or 4)."""
    if degree <= 1:
        points = np.array([[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]])
        weights = np.array([1.0])
        exact = 1
    elif degree == 2:
        points = np.array(_orbit(2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0))
        weights = np.full(3, 1.0 / 3.0)
        exact = 2
    elif degree <= 4:
        a = 0.445948490915965
        b = 0.091576213509771
        points = np.array(_orbit(1.0 - 2.0 * a, a, a) + _orbit(1.0 - 2.0 * b, b, b))
        weights = np.array([0.223381589678011] * 3 + [0.109951743655322] * 3)
        exact = 4
    else:
        raise ValueError(f"No triangle rule of degree {degree}")
    weights = 0.5 * weights / weights.sum()
    return QuadratureRule(points=points, weights=weights, degree=exact)


def line_rule(n=4):
    """Gauss-Legendre rule on [0, 1]: (abscissae, weights)."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def subdivided_rule(levels=4):
    """Degree-2 rule on each of levels^2 congruent sub-triangles, as one barycentric rule.

    Used to clip partially covered triangles against disks.
    """
    base = triangle_rule(2)
    points = []
    weights = []
    step = 1.0 / levels
    for i in range(levels):
        for j in range(levels - i):
            corners = [
                [(i, j), (i + 1, j), (i, j + 1)],
            ]
            if i + j < levels - 1:
                corners.append([(i + 1, j), (i + 1, j + 1), (i, j + 1)])
            for tri in corners:
                xy = np.array(tri, dtype=float) * step
                for bary, w in zip(base.points, base.weights):
                    p = bary @ xy
                    points.append((1.0 - p[0] - p[1], p[0], p[1]))
                    weights.append(w * step * step)
    return QuadratureRule(points=np.array(points), weights=np.array(weights), degree=2)
