#!/usr/bin/env python3
"""
trust_region.py - Riemannian trust-region method on products of spheres

Minimizes the discrete Dirichlet energy over unit nodal values. Each
iteration builds the quadratic model of the lifted energy
E(exp_u(phi)) on the tangent space, solves the trust-region subproblem with
Steihaug-Toint truncated CG and retracts with the sphere exponential map.

Usage:
    from trust_region import TrustRegionConfig, trust_region_solve

    trace = trust_region_solve(coeffs, DiscretizationKind.PROJECTION, TrustRegionConfig())
"""

import logging
import math
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Tuple, Union

import numpy as np
from scipy import sparse

sys.path.insert(0, str(Path(__file__).parent))
from dirichlet_energy import (DiscretizationKind, constraint_violation, dirichlet_energy,
                              energy_derivatives, nodal_frames, riemannian_gradient,
                              riemannian_hessian_matrix, tangent_to_ambient)
from gradient_flow import star_inner_product
from lagrange_space import CoefficientField
from solve_trace import IterationRecord, SolveTrace
from sphere_geometry import SingularProjectionError, sphere_exp_rows


logger = logging.getLogger(__name__)

TR_NORMS = ('euclidean', 'lumped')


class DegenerateModelError(ValueError):
    """Quadratic model predicts no decrease."""
    pass


@dataclass
class TrustRegionConfig:
    delta0: float = 0.5
    beta1: float = 0.9
    beta2: float = 1e-2
    eps_stop: float = 1e-3
    inner_tol: float = 1e-10
    max_iters: int = 500
    norm: str = 'euclidean'

    def __post_init__(self):
        if not self.delta0 > 0:
            raise ValueError(f"delta0 must be positive, got {self.delta0}")
        if not self.beta1 > self.beta2 > 0:
            raise ValueError(
                f"Need beta1 > beta2 > 0, got beta1={self.beta1}, beta2={self.beta2}")
        if not self.eps_stop > 0:
            raise ValueError(f"eps_stop must be positive, got {self.eps_stop}")
        if self.norm not in TR_NORMS:
            raise ValueError(f"Unknown trust-region norm '{self.norm}'; expected one of {TR_NORMS}")


def _boundary_step(s: np.ndarray, p: np.ndarray, delta: float) -> float:
    """Positive root sigma of |s + sigma p| = delta."""
    a = p @ p
    b = 2.0 * (s @ p)
    c = s @ s - delta ** 2
    disc = math.sqrt(max(b * b - 4.0 * a * c, 0.0))
    return max(0.0, (-b + disc) / (2.0 * a), (-b - disc) / (2.0 * a))


def tr_subproblem(grad: np.ndarray, hess_apply: Union[Callable, sparse.spmatrix], delta: float,
                  weights: Optional[np.ndarray] = None, tol: float = 1e-10,
                  max_iters: Optional[int] = None) -> Tuple[np.ndarray, float]:
    """
    Steihaug-Toint truncated CG for min g.phi + 1/2 phi.H phi, |phi| <= delta.

    With weights the region is measured in sqrt(sum_k w_k phi_k^2).

    Returns:
        (correction, predicted decrease m(0) - m(phi))
    """
    if not delta > 0:
        raise ValueError(f"Trust-region radius must be positive, got {delta}")
    apply = hess_apply if callable(hess_apply) else hess_apply.dot
    grad = np.asarray(grad, dtype=float)
    scale = np.ones_like(grad) if weights is None else 1.0 / np.sqrt(weights)

    def scaled_apply(x):
        return scale * apply(scale * x)

    g = scale * grad
    s = np.zeros_like(g)
    r = g.copy()
    rr = r @ r
    g_norm = math.sqrt(rr)
    if g_norm == 0.0:
        return s, 0.0
    p = -r
    for _ in range(max_iters or max(g.size, 1)):
        hp = scaled_apply(p)
        curvature = p @ hp
        if curvature <= 0.0:
            s = s + _boundary_step(s, p, delta) * p
            break
        alpha = rr / curvature
        if np.linalg.norm(s + alpha * p) >= delta:
            s = s + _boundary_step(s, p, delta) * p
            break
        s = s + alpha * p
        r = r + alpha * hp
        rr_new = r @ r
        if math.sqrt(rr_new) <= tol * g_norm:
            break
        p = -r + (rr_new / rr) * p
        rr = rr_new

    phi = scale * s
    predicted = -(grad @ phi + 0.5 * (phi @ apply(phi)))
    return phi, float(predicted)


def rho_ratio(e_old: float, e_new: float, m_old: float, m_new: float) -> float:
    """Actual over predicted decrease."""
    predicted = m_old - m_new
    if not predicted > 0:
        raise DegenerateModelError(f"Model predicts no decrease ({predicted!r})")
    return (e_old - e_new) / predicted


def trust_region_solve(initial: CoefficientField, kind: DiscretizationKind,
                       cfg: TrustRegionConfig,
                       on_iteration: Optional[Callable[[IterationRecord], None]] = None
                       ) -> SolveTrace:
    """
    Riemannian trust-region iteration until (phi, phi)_* < eps_stop^2.

    Steps with rho > beta2 are accepted; rho > beta1 doubles the radius and a
    rejection halves it. A trial point where the energy is singular counts as
    a rejection.
    """
    start = time.perf_counter()
    kind = DiscretizationKind(kind)
    space = initial.space
    free = ~space.boundary_node_flags
    tangent_dim = initial.target_dim - 1

    coeffs = initial
    egh = energy_derivatives(coeffs, kind)
    energy = egh.energy
    trace = SolveTrace(solver='tr', initial_energy=energy, final=initial)
    weights = None
    if cfg.norm == 'lumped':
        weights = np.repeat(space.lumped_masses[space.free_nodes], tangent_dim)
    radius = cfg.delta0

    for iteration in range(1, cfg.max_iters + 1):
        frames = nodal_frames(coeffs)
        grad = riemannian_gradient(coeffs, egh, frames)[free].ravel()
        hessian = riemannian_hessian_matrix(coeffs, egh, frames)
        phi, predicted = tr_subproblem(grad, hessian, radius, weights=weights, tol=cfg.inner_tol)

        w = np.zeros((space.num_nodes, tangent_dim))
        w[free] = phi.reshape(-1, tangent_dim)
        step = tangent_to_ambient(frames, w, free)
        norm = math.sqrt(max(star_inner_product(space, step, step), 0.0))

        if norm ** 2 < cfg.eps_stop ** 2:
            delta, squared = constraint_violation(coeffs)
            record = IterationRecord(iteration=iteration, energy=energy, correction_norm=norm,
                                     delta1=delta, squared_violation=squared, radius=radius,
                                     accepted=False)
            trace.records.append(record)
            if on_iteration is not None:
                on_iteration(record)
            trace.converged = True
            break

        trial_values = coeffs.values.copy()
        trial_values[free] = sphere_exp_rows(coeffs.values[free], step[free])
        trial = coeffs.with_values(trial_values)
        try:
            trial_energy = dirichlet_energy(trial, kind)
            rho = rho_ratio(energy, trial_energy, energy, energy - predicted)
        except SingularProjectionError as exc:
            logger.warning("Trial point rejected at iteration %d: %s", iteration, exc)
            rho = -math.inf
        except DegenerateModelError as exc:
            trace.warnings.append(f"Iteration {iteration}: {exc}")
            trace.converged = True
            break

        accepted = rho > cfg.beta2
        if accepted:
            coeffs = trial
            egh = energy_derivatives(coeffs, kind)
            energy = egh.energy
            if rho > cfg.beta1:
                radius *= 2.0
        else:
            radius *= 0.5

        delta, squared = constraint_violation(coeffs)
        record = IterationRecord(iteration=iteration, energy=energy, correction_norm=norm,
                                 delta1=delta, squared_violation=squared, rho=rho,
                                 radius=radius, accepted=accepted)
        trace.records.append(record)
        if on_iteration is not None:
            on_iteration(record)
        logger.debug("tr iter %d: E=%.10g |phi|*=%.3e rho=%.4g radius=%.3g %s",
                     iteration, energy, norm, rho, radius,
                     'accepted' if accepted else 'rejected')
    else:
        logger.warning("Trust region stopped after max_iters=%d without converging",
                       cfg.max_iters)
        trace.warnings.append(f"max_iters={cfg.max_iters} reached")

    trace.final = coeffs
    trace.wall_time = time.perf_counter() - start
    return trace
