"""
Quadrature rules on the reference triangle (barycentric points) and on edges.

Triangle weights sum to one, so an integral over K is |K| * sum(w_q f(x_q)).
"""

from dataclasses import dataclass

import numpy as np

from constants.exceptions import Exceptions


@dataclass(frozen=True)
class TriangleRule:
    points: np.ndarray  # (nq, 3) barycentric coordinates
    weights: np.ndarray  # (nq,)
    degree: int


def _permutations(a: float, b: float) -> np.ndarray:
    return np.array([[a, b, b], [b, a, b], [b, b, a]])


_CENTROID = TriangleRule(np.full((1, 3), 1.0 / 3.0), np.ones(1), 1)

_DEGREE_2 = TriangleRule(_permutations(2.0 / 3.0, 1.0 / 6.0), np.full(3, 1.0 / 3.0), 2)

# Dunavant, six points
_DEGREE_4 = TriangleRule(
    np.vstack(
        [
            _permutations(0.108103018168070, 0.445948490915965),
            _permutations(0.816847572980459, 0.091576213509771),
        ]
    ),
    np.concatenate(
        [np.full(3, 0.223381589678011), np.full(3, 0.109951743655322)]
    ),
    4,
)


def triangle_rule(degree: int) -> TriangleRule:
    """Smallest tabulated rule exact for polynomials of the given degree."""
    if degree <= 1:
        return _CENTROID
    if degree == 2:
        return _DEGREE_2
    if degree <= 4:
        return _DEGREE_4
    raise Exceptions.parameter_exception("degree", degree, "a quadrature degree <= 4")


def edge_rule(n_points: int = 3) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes on [0, 1] and weights summing to one."""
    nodes, weights = np.polynomial.legendre.leggauss(n_points)
    return 0.5 * (nodes + 1.0), 0.5 * weights


def physical_points(vertices: np.ndarray, triangles: np.ndarray, rule: TriangleRule):
    """Quadrature points of every triangle, shape (nt, nq, 2)."""
    return np.einsum("qj,tjd->tqd", rule.points, vertices[triangles])
