#!/usr/bin/env python3
"""
benchmark_problems.py - Boundary data, initial iterates and reference values

Problems (registry ids):
    p1          (-1/2,1/2)^2 -> S^2, boundary (x1, x2, 0)/|x|, mollified start
    p2a         (-1/2,1/2)^3 -> S^2, radial map x/|x| (finite energy minimizer)
    p2b         (-1/2,1/2)^2 -> S^1, radial map x/|x| (infinite energy)
    p3k2..p3k5  (-1/2,1/2)^3 -> S^2, degree-kappa boundary data
    p2a-random  as p2a, started from a high-frequency pseudo-random field

Maps act on rows: an (P, n) array of points gives a (P, m) array of values.

Usage:
    from benchmark_problems import get_problem, initial_coefficients

    problem = get_problem('p2a')
    coeffs = initial_coefficients(problem, space)
"""

import logging
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy import integrate

sys.path.insert(0, str(Path(__file__).parent))
from lagrange_space import CoefficientField, LagrangeSpace, interpolate
from simplicial_mesh import BOUNDARY_TOL


logger = logging.getLogger(__name__)

ORACLE_TOL = 1e-4
POLE_TOL = 1e-14


# =============================================================================
# Closed-form maps
# =============================================================================

def radial_projection(x) -> np.ndarray:
    """x/|x|."""
    x = np.asarray(x, dtype=float)
    norm = float(np.linalg.norm(x))
    if norm == 0.0:
        raise ValueError("Radial projection is undefined at the origin")
    return x / norm


def radial_rows(points: np.ndarray) -> np.ndarray:
    """Row-wise x/|x|; the origin maps to the last basis vector."""
    points = np.atleast_2d(points)
    norms = np.linalg.norm(points, axis=1)
    values = np.zeros_like(points, dtype=float)
    nonzero = norms > 0
    values[nonzero] = points[nonzero] / norms[nonzero, None]
    values[~nonzero, -1] = 1.0
    return values


def radial_exact(points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Values and gradients (I - x_hat x_hat^T)/|x| of the radial map."""
    values = radial_rows(points)
    norms = np.linalg.norm(points, axis=1)
    eye = np.eye(points.shape[1])
    grads = (eye[None] - values[:, :, None] * values[:, None, :]) / norms[:, None, None]
    return values, grads


def bump(s: np.ndarray) -> np.ndarray:
    """eta(s) = exp(s^2 / (s^2 - 1)) on [0, 1), extended by 0 for s >= 1."""
    s = np.asarray(s, dtype=float)
    inside = s < 1.0
    safe = np.where(inside, s, 0.0)
    return np.where(inside, np.exp(safe ** 2 / (safe ** 2 - 1.0)), 0.0)


def mollified_rows(points: np.ndarray) -> np.ndarray:
    """Smooth extension of (x/|x|, 0) into the square; (0, 0, 1) at the origin."""
    points = np.atleast_2d(points)
    norms = np.linalg.norm(points, axis=1)
    eta = bump(2.0 * norms)
    planar = radial_rows(points)
    planar[norms == 0.0] = 0.0
    horizontal = np.sqrt(np.maximum(1.0 - eta ** 2, 0.0))[:, None] * planar
    values = np.concatenate([horizontal, eta[:, None]], axis=1)
    values[norms == 0.0] = (0.0, 0.0, 1.0)
    return values


def mollified_initial(x) -> np.ndarray:
    return mollified_rows(np.asarray(x, dtype=float)[None, :])[0]


def planar_boundary_rows(points: np.ndarray) -> np.ndarray:
    """(x1, x2, 0)/|x|."""
    return np.concatenate([radial_rows(points), np.zeros((len(points), 1))], axis=1)


def stereographic(x) -> complex:
    """Projection from the north pole onto the equatorial plane."""
    x = np.asarray(x, dtype=float)
    if 1.0 - x[2] <= POLE_TOL:
        raise ValueError(f"Stereographic projection is undefined at the north pole {x.tolist()}")
    return complex(x[0], x[1]) / (1.0 - x[2])


def inverse_stereographic(z: complex) -> np.ndarray:
    r2 = abs(z) ** 2
    return np.array([2.0 * z.real, 2.0 * z.imag, r2 - 1.0]) / (r2 + 1.0)


def degree_kappa_rows(points: np.ndarray, kappa: int) -> np.ndarray:
    """
    inverse_stereographic(stereographic(x/|x|)^kappa), row-wise.

    Evaluated through half polar angles: tan(theta'/2) = tan(theta/2)^kappa
    and the azimuth is multiplied by kappa, which covers both poles.
    """
    if kappa < 1:
        raise ValueError(f"kappa must be a positive integer, got {kappa}")
    unit = radial_rows(points)
    rho = np.hypot(unit[:, 0], unit[:, 1])
    half = np.where(unit[:, 2] >= 0.0,
                    np.arctan2(rho, 1.0 + unit[:, 2]),
                    np.arctan2(1.0 - unit[:, 2], rho))
    new_half = np.arctan2(np.sin(half) ** kappa, np.cos(half) ** kappa)
    theta = 2.0 * new_half
    phi = kappa * np.arctan2(unit[:, 1], unit[:, 0])
    return np.stack([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)],
                    axis=1)


def degree_kappa_boundary(x, kappa: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if not np.any(x):
        raise ValueError("Degree-kappa data is undefined at the origin")
    return degree_kappa_rows(x[None, :], kappa)[0]


def on_boundary(points: np.ndarray) -> np.ndarray:
    return np.any(np.abs(np.abs(points) - 0.5) <= BOUNDARY_TOL, axis=1)


def pseudo_random_rows(points: np.ndarray) -> np.ndarray:
    """High-frequency spherical-coordinate field inside, x/|x| on the boundary."""
    points = np.atleast_2d(points)
    lam1 = 1e4 * points[:, 0] + 1e5 * points[:, 1] + 1e6 * points[:, 2]
    lam2 = 5e4 * points[:, 0] + 7e5 * points[:, 1] + 9e6 * points[:, 2]
    polar = 0.5 * np.pi * np.sin(lam1)
    azimuth = np.pi * np.sin(lam2)
    values = np.stack([np.sin(polar) * np.cos(azimuth), np.sin(polar) * np.sin(azimuth),
                       np.cos(polar)], axis=1)
    boundary = on_boundary(points)
    values[boundary] = radial_rows(points[boundary])
    return values


def pseudo_random_initial(x) -> np.ndarray:
    return pseudo_random_rows(np.asarray(x, dtype=float)[None, :])[0]


# =============================================================================
# Reference energy of the radial map in 3D
# =============================================================================

def radial_energy_volume_oracle() -> float:
    """
    int_Omega |x|^-2 over the unit cube, via six cones over the faces.

    The radial integral over each cone is exact, leaving
    3 * int_{[-1/2,1/2]^2} dy / (|y|^2 + 1/4).
    """
    value, _ = integrate.dblquad(lambda y2, y1: 1.0 / (y1 * y1 + y2 * y2 + 0.25),
                                 -0.5, 0.5, -0.5, 0.5, epsabs=1e-12, epsrel=1e-12)
    return 3.0 * value


def exact_energy_p2a() -> float:
    """
    E[x/|x|] on the unit cube from the one-dimensional angular integral.

    The integrand behaves like 2*pi/theta at 0, so the lower limit is pi/4;
    the volume oracle decides if the two ever disagree.
    """
    value, _ = integrate.quad(
        lambda t: (math.pi - 2.0 * math.atan(1.0 / math.sin(t))) / math.sin(t),
        math.pi / 4.0, math.pi / 2.0, epsabs=1e-12, epsrel=1e-12)
    energy = 6.0 * value
    oracle = radial_energy_volume_oracle()
    if abs(energy - oracle) > ORACLE_TOL:
        logger.warning("Angular integral %.9f disagrees with volume oracle %.9f; using the oracle",
                       energy, oracle)
        return oracle
    return energy


# =============================================================================
# Problem registry
# =============================================================================

@dataclass(frozen=True)
class ProblemSpec:
    id: str
    dim: int
    target_dim: int
    boundary_map: Callable[[np.ndarray], np.ndarray]
    initial_map: Callable[[np.ndarray], np.ndarray]
    exact_solution: Optional[Callable[[np.ndarray], Tuple[np.ndarray, np.ndarray]]] = None
    exact_energy: Optional[Callable[[], float]] = None
    eps_stop: float = 1e-3
    tau_factor: float = 4.0
    max_level: int = 8
    description: str = ''


def _degree_problem(kappa: int) -> ProblemSpec:
    def data(points):
        return degree_kappa_rows(points, kappa)
    return ProblemSpec(id=f'p3k{kappa}', dim=3, target_dim=3, boundary_map=data,
                       initial_map=data, eps_stop=1e-4, max_level=5,
                       description=f'degree-{kappa} boundary data on the unit cube')


PROBLEMS: Dict[str, ProblemSpec] = {
    'p1': ProblemSpec(
        id='p1', dim=2, target_dim=3, boundary_map=planar_boundary_rows,
        initial_map=mollified_rows, max_level=8,
        description='smooth harmonic map from the square into S^2'),
    'p2a': ProblemSpec(
        id='p2a', dim=3, target_dim=3, boundary_map=radial_rows, initial_map=radial_rows,
        exact_solution=radial_exact, exact_energy=exact_energy_p2a, max_level=6,
        description='radial map x/|x|, finite energy'),
    'p2b': ProblemSpec(
        id='p2b', dim=2, target_dim=2, boundary_map=radial_rows, initial_map=radial_rows,
        exact_solution=radial_exact, max_level=8,
        description='radial map x/|x| into S^1, infinite energy'),
    'p2a-random': ProblemSpec(
        id='p2a-random', dim=3, target_dim=3, boundary_map=radial_rows,
        initial_map=pseudo_random_rows, exact_solution=radial_exact,
        exact_energy=exact_energy_p2a, eps_stop=1e-4, tau_factor=1.0, max_level=6,
        description='radial map started from a pseudo-random field'),
}
PROBLEMS.update({f'p3k{k}': _degree_problem(k) for k in range(2, 6)})


def problem_ids() -> List[str]:
    return list(PROBLEMS)


def get_problem(problem_id: str) -> ProblemSpec:
    try:
        return PROBLEMS[problem_id]
    except KeyError:
        raise ValueError(
            f"Unknown problem '{problem_id}'; expected one of {', '.join(PROBLEMS)}") from None


def initial_coefficients(problem: ProblemSpec, space: LagrangeSpace) -> CoefficientField:
    """Interpolated initial iterate with boundary nodes set from the boundary map."""
    if space.dim != problem.dim:
        raise ValueError(
            f"Problem {problem.id} lives in dimension {problem.dim}, space has {space.dim}")
    coeffs = interpolate(space, problem.initial_map, vectorized=True)
    boundary = space.boundary_node_flags
    coeffs.values[boundary] = problem.boundary_map(space.node_coords[boundary])
    return coeffs
