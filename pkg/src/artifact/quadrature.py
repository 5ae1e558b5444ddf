"""Quadrature rules on the reference triangle and on edges.

All triangle rules are stored in barycentric coordinates with weights that sum
to one, so integrating f over a physical triangle T is

    |T| * sum_k w_k f(x_k),    x_k = sum_i bary[k, i] * vertex_i.

The low-order rules (orders 1 to 3) are the classical symmetric Gauss points
used for the interface terms. Higher accuracy, needed for right-hand sides and
error norms, comes from a collapsed tensor Gauss-Legendre rule built on the
fly for any requested polynomial degree.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss

__all__ = [
    "QuadratureRule",
    "gauss_rule",
    "high_order_rule",
    "edge_rule",
    "integrate_on_triangle",
    "triangle_monomial_integral",
]


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes in barycentric coordinates, weights summing to one."""

    points: np.ndarray   # (nq, 3)
    weights: np.ndarray  # (nq,)
    degree: int          # highest total polynomial degree integrated exactly

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        wts = np.asarray(self.weights, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError("points must have shape (nq, 3)")
        if wts.shape != (pts.shape[0],):
            raise ValueError("weights must have shape (nq,)")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", wts)

    @property
    def npoints(self) -> int:
        return self.points.shape[0]

    def physical_points(self, tri: np.ndarray) -> np.ndarray:
        """Map the rule nodes onto one triangle (3, 2) or a batch (..., 3, 2)."""
        tri = np.asarray(tri, dtype=float)
        return np.einsum("qi,...ij->...qj", self.points, tri)


def _symmetric_orbit(a: float) -> np.ndarray:
    """The three cyclic permutations of (a, b, b) with a + 2b = 1."""
    b = 0.5 * (1.0 - a)
    return np.array([[a, b, b], [b, a, b], [b, b, a]])


_RULES = {
    1: QuadratureRule(np.full((1, 3), 1.0 / 3.0), np.array([1.0]), degree=1),
    2: QuadratureRule(_symmetric_orbit(2.0 / 3.0), np.full(3, 1.0 / 3.0), degree=2),
    3: QuadratureRule(
        np.vstack([np.full((1, 3), 1.0 / 3.0), _symmetric_orbit(3.0 / 5.0)]),
        np.array([-9.0 / 16.0, 25.0 / 48.0, 25.0 / 48.0, 25.0 / 48.0]),
        degree=3,
    ),
}


def gauss_rule(order: int) -> QuadratureRule:
    """Symmetric Gauss rule on the reference triangle, order in {1, 2, 3}."""
    try:
        return _RULES[order]
    except KeyError:
        raise ValueError(f"unsupported quadrature order {order}; use 1, 2 or 3") from None


def high_order_rule(degree: int = 10) -> QuadratureRule:
    """Collapsed tensor Gauss-Legendre rule exact for total degree <= degree.

    Maps an m x m Gauss grid on the unit square through the Duffy substitution
    x = s, y = t (1 - s). A monomial of total degree d picks up one extra power
    of s from the Jacobian, so m points per direction handle d <= 2m - 2.
    """
    if degree < 1:
        raise ValueError("degree must be positive")
    m = (degree + 3) // 2  # 2m - 1 >= degree + 1
    t, w = leggauss(m)
    t = 0.5 * (t + 1.0)  # onto [0, 1]
    w = 0.5 * w
    s_grid, t_grid = np.meshgrid(t, t, indexing="ij")
    ws, wt = np.meshgrid(w, w, indexing="ij")
    x = s_grid.ravel()
    y = (t_grid * (1.0 - s_grid)).ravel()
    # Jacobian (1 - s); factor 2 renormalises to unit weight sum since the
    # reference triangle has area 1/2.
    weights = (2.0 * ws * wt * (1.0 - s_grid)).ravel()
    points = np.column_stack([1.0 - x - y, x, y])
    return QuadratureRule(points, weights, degree=degree)


def edge_rule(npoints: int = 6) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [0, 1] (weights sum to one)."""
    t, w = leggauss(npoints)
    return 0.5 * (t + 1.0), 0.5 * w


def integrate_on_triangle(f, tri: np.ndarray, rule: QuadratureRule) -> float:
    """Integrate f(points) over one physical triangle.

    f receives an (nq, 2) array of coordinates and must return (nq,) values.
    Degenerate (zero-area) triangles integrate to zero.
    """
    tri = np.asarray(tri, dtype=float)
    area = 0.5 * abs(
        (tri[1, 0] - tri[0, 0]) * (tri[2, 1] - tri[0, 1])
        - (tri[2, 0] - tri[0, 0]) * (tri[1, 1] - tri[0, 1])
    )
    if area == 0.0:
        return 0.0
    vals = np.asarray(f(rule.physical_points(tri)), dtype=float)
    return float(area * (rule.weights @ vals))


def triangle_monomial_integral(a: int, b: int) -> float:
    """Exact integral of x^a y^b over the reference triangle {x,y>=0, x+y<=1}.

    Equals a! b! / (a + b + 2)!, used as the exactness oracle in tests.
    """
    from math import factorial

    return factorial(a) * factorial(b) / factorial(a + b + 2)
