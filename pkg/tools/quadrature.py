#!/usr/bin/env python3
"""
quadrature.py - Symmetric quadrature rules on the reference simplex

Every rule is a union of symmetry orbits: all distinct permutations of a
barycentric pattern share one weight, so no vertex of the simplex is
preferred. Orbit parameters are tabulated (Dunavant for triangles, Keast and
Walkington for tetrahedra) and refined against the monomial moments to full
double precision when a rule is first requested. Segments use Gauss-Legendre.

Usage:
    from quadrature import quadrature_rule

    rule = quadrature_rule(dim=2, exactness=6)
    integral = rule.weights @ f(rule.reference_points)
"""

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, List, Tuple

import numpy as np
from scipy.optimize import least_squares


MAX_EXACTNESS = 6


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """
    Rule on the reference simplex conv{0, e_1, ..., e_dim}.

    points are barycentric (lambda_0 = 1 - sum(xi)), weights sum to 1/dim!.
    """
    dim: int
    exactness: int
    points: np.ndarray
    weights: np.ndarray

    @property
    def reference_points(self) -> np.ndarray:
        return self.points[:, 1:]

    @property
    def num_points(self) -> int:
        return self.weights.size


@dataclass(frozen=True)
class Orbit:
    """
    Barycentric pattern of labels; labels 0..L-2 take `params`, the last
    label takes whatever makes the coordinates sum to one.
    """
    pattern: Tuple[int, ...]
    params: Tuple[float, ...]
    weight: float

    @property
    def size(self) -> int:
        return len(self.permutations())

    def permutations(self) -> List[Tuple[int, ...]]:
        return sorted(set(itertools.permutations(self.pattern)))

    def label_values(self, params) -> List[float]:
        used = sum(self.pattern.count(label) * value for label, value in enumerate(params))
        last = (1.0 - used) / self.pattern.count(len(params))
        return list(params) + [last]


# (native degree, orbits) per dimension; weights are absolute (sum 1/dim!)
_S5 = math.sqrt(5.0)
ORBIT_TABLES: Dict[int, List[Tuple[int, List[Orbit]]]] = {
    2: [
        (1, [Orbit((0, 0, 0), (), 1 / 2)]),
        (2, [Orbit((0, 0, 1), (1 / 6,), 1 / 6)]),
        (4, [Orbit((0, 0, 1), (0.445948490915965,), 0.223381589678011 / 2),
             Orbit((0, 0, 1), (0.091576213509771,), 0.109951743655322 / 2)]),
        (5, [Orbit((0, 0, 0), (), 0.225 / 2),
             Orbit((0, 0, 1), (0.470142064105115,), 0.132394152788506 / 2),
             Orbit((0, 0, 1), (0.101286507323456,), 0.125939180544827 / 2)]),
        (6, [Orbit((0, 0, 1), (0.249286745170910,), 0.116786275726379 / 2),
             Orbit((0, 0, 1), (0.063089014491502,), 0.050844906370207 / 2),
             Orbit((0, 1, 2), (0.053145049844817, 0.310352451033784), 0.082851075618374 / 2)]),
    ],
    3: [
        (1, [Orbit((0, 0, 0, 0), (), 1 / 6)]),
        (2, [Orbit((0, 0, 0, 1), ((5 - _S5) / 20,), 1 / 24)]),
        (5, [Orbit((0, 0, 0, 1), (0.0927352503108912,), 0.01224884051939366),
             Orbit((0, 0, 0, 1), (0.3108859192633006,), 0.01878132095300264),
             Orbit((0, 0, 1, 1), (0.0455037041256496,), 0.007091003462846911)]),
        (6, [Orbit((0, 0, 0, 1), (0.214602871259151684,), 0.00665379170969464506),
             Orbit((0, 0, 0, 1), (0.0406739585346113397,), 0.00167953517588677620),
             Orbit((0, 0, 0, 1), (0.322337890142275646,), 0.00922619692394239843),
             Orbit((0, 0, 1, 2), (0.0636610018750175299, 0.269672331458315867),
                   0.00803571428571428248)]),
    ],
}


def monomial_exponents(dim: int, degree: int) -> List[Tuple[int, ...]]:
    return [e for e in itertools.product(range(degree + 1), repeat=dim) if sum(e) <= degree]


def monomial_integral(exponents) -> float:
    """int over the reference simplex of prod x_k^a_k = prod a_k! / (sum a + dim)!"""
    numerator = math.prod(math.factorial(a) for a in exponents)
    return numerator / math.factorial(sum(exponents) + len(exponents))


def _expand(orbits: List[Orbit], x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    points = []
    weights = []
    offset = 0
    for orbit in orbits:
        nparams = len(orbit.params)
        values = orbit.label_values(x[offset:offset + nparams])
        weight = x[offset + nparams]
        offset += nparams + 1
        for perm in orbit.permutations():
            points.append([values[label] for label in perm])
            weights.append(weight)
    return np.array(points, dtype=float), np.array(weights, dtype=float)


def _polish(dim: int, degree: int, orbits: List[Orbit]) -> Tuple[np.ndarray, np.ndarray]:
    x0 = np.array([v for orbit in orbits for v in (*orbit.params, orbit.weight)])
    exponents = monomial_exponents(dim, degree)
    exact = np.array([monomial_integral(e) for e in exponents])
    powers = np.array(exponents)

    def residual(x):
        points, weights = _expand(orbits, x)
        ref = points[:, 1:]
        values = np.prod(ref[:, None, :] ** powers[None, :, :], axis=2)
        return weights @ values - exact

    fit = least_squares(residual, x0, method='lm', xtol=1e-15, ftol=1e-15, gtol=1e-15)
    return _expand(orbits, fit.x)


def _segment_rule(exactness: int) -> Tuple[np.ndarray, np.ndarray]:
    nodes, weights = np.polynomial.legendre.leggauss(exactness // 2 + 1)
    t = (nodes + 1.0) / 2.0
    return np.stack([1.0 - t, t], axis=1), weights / 2.0


@lru_cache(maxsize=None)
def quadrature_rule(dim: int, exactness: int) -> QuadratureRule:
    """
    Build a symmetric rule exact for polynomials of total degree <= exactness.

    The cheapest tabulated rule whose degree reaches `exactness` is used.

    Raises:
        ValueError: for dim outside 1..3 or exactness outside 0..MAX_EXACTNESS
    """
    if dim not in (1, 2, 3):
        raise ValueError(f"Unsupported simplex dimension {dim}")
    if not 0 <= exactness <= MAX_EXACTNESS:
        raise ValueError(
            f"Unsupported exactness {exactness}; rules exist for 0..{MAX_EXACTNESS}")

    if dim == 1:
        points, weights = _segment_rule(exactness)
    else:
        degree, orbits = next((d, o) for d, o in ORBIT_TABLES[dim] if d >= exactness)
        points, weights = _polished_rule(dim, degree, tuple(orbits))
    return QuadratureRule(dim=dim, exactness=exactness, points=points, weights=weights)


@lru_cache(maxsize=None)
def _polished_rule(dim: int, degree: int, orbits: Tuple[Orbit, ...]):
    points, weights = _polish(dim, degree, list(orbits))
    points.setflags(write=False)
    weights.setflags(write=False)
    return points, weights
