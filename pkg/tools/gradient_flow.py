#!/usr/bin/env python3
"""
gradient_flow.py - Tangential discrete gradient flow for harmonic maps

Implicit Euler steps of the H1-seminorm gradient flow with corrections
constrained to the nodewise tangent spaces of the previous iterate:

    find d in T(u) with  (d, v)_* = -(grad(u + tau d), grad v)  for all v in T(u),
    u <- u + tau d  (optionally renormalized at the nodes).

The constrained system is solved in per-node tangent frames, which turns it
into an SPD system for Jacobi-preconditioned CG. Only the nonconforming
discretization admits this scheme.

Usage:
    from gradient_flow import GradientFlowConfig, gradient_flow_solve

    trace = gradient_flow_solve(coeffs, GradientFlowConfig(tau=4 * h))
"""

import logging
import math
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Tuple

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

sys.path.insert(0, str(Path(__file__).parent))
from dirichlet_energy import (DiscretizationKind, constraint_violation, dirichlet_energy,
                              tangent_basis_matrix, vector_stiffness)
from lagrange_space import CoefficientField, LagrangeSpace
from solve_trace import IterationRecord, SolveTrace
from sphere_geometry import project_rows, tangent_frames


logger = logging.getLogger(__name__)

BOUND_SLACK = 1e-12


class LinearSolverError(RuntimeError):
    """Inner conjugate gradient solve did not converge."""
    pass


@dataclass
class GradientFlowConfig:
    tau: float
    eps_stop: float = 1e-3
    project_nodes: bool = False
    max_iters: int = 10000
    linear_tol: float = 1e-10

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if not self.eps_stop > 0:
            raise ValueError(f"eps_stop must be positive, got {self.eps_stop}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be at least 1, got {self.max_iters}")


def star_inner_product(space: LagrangeSpace, a: np.ndarray, b: np.ndarray) -> float:
    """(a, b)_* = (grad a, grad b) summed over all components."""
    return float(np.sum(np.asarray(a) * (space.stiffness_matrix @ np.asarray(b))))


def gradient_flow_step(coeffs: CoefficientField,
                       cfg: GradientFlowConfig) -> Tuple[CoefficientField, np.ndarray, float]:
    """
    One implicit tangential step.

    Returns:
        (new coefficients, update d (N, m), star norm sqrt((d, d)_*))

    Raises:
        LinearSolverError: if CG does not reach linear_tol
        SingularProjectionError: if project_nodes meets a zero nodal value
    """
    space = coeffs.space
    m = coeffs.target_dim
    values = coeffs.values
    frames = tangent_frames(project_rows(values))
    basis = tangent_basis_matrix(coeffs, frames)
    stiffness = vector_stiffness(space, m)

    system = ((1.0 + cfg.tau) * (basis.T @ stiffness @ basis)).tocsr()
    rhs = -(basis.T @ (stiffness @ values.ravel()))
    diagonal = system.diagonal()
    preconditioner = LinearOperator(system.shape, matvec=lambda x: x / diagonal)

    if np.linalg.norm(rhs) == 0.0:
        coords = np.zeros_like(rhs)
    else:
        coords, info = cg(system, rhs, rtol=cfg.linear_tol, atol=0.0, M=preconditioner,
                          maxiter=10 * system.shape[0])
        if info != 0:
            raise LinearSolverError(
                f"CG stopped with info={info} on a system of size {system.shape[0]}")

    update = (basis @ coords).reshape(values.shape)
    norm = math.sqrt(max(star_inner_product(space, update, update), 0.0))
    new_values = values + cfg.tau * update
    if cfg.project_nodes:
        new_values = project_rows(new_values)
    return coeffs.with_values(new_values), update, norm


def gradient_flow_solve(initial: CoefficientField, cfg: GradientFlowConfig,
                        on_iteration: Optional[Callable[[IterationRecord], None]] = None
                        ) -> SolveTrace:
    """
    Iterate gradient_flow_step until (d, d)_* <= eps_stop^2 or max_iters.

    Without nodal projection the energy must not increase and
    int I1 ||u|^2 - 1| must stay below tau * E[u0]; breaches are reported as
    warnings on the trace.
    """
    start = time.perf_counter()
    defect = initial.max_unit_defect()
    if defect > 1e-12:
        logger.warning("Initial nodal values deviate from unit length by %.3e", defect)

    kind = DiscretizationKind.NONCONFORMING
    energy = dirichlet_energy(initial, kind)
    trace = SolveTrace(solver='gf', initial_energy=energy, final=initial)
    bound = cfg.tau * energy
    coeffs = initial

    for iteration in range(1, cfg.max_iters + 1):
        coeffs, _, norm = gradient_flow_step(coeffs, cfg)
        new_energy = dirichlet_energy(coeffs, kind)
        delta, squared = constraint_violation(coeffs)
        record = IterationRecord(iteration=iteration, energy=new_energy, correction_norm=norm,
                                 delta1=delta, squared_violation=squared)
        trace.records.append(record)
        if on_iteration is not None:
            on_iteration(record)
        logger.debug("gf iter %d: E=%.10g |d|*=%.3e delta1=%.3e",
                     iteration, new_energy, norm, delta)

        if not cfg.project_nodes:
            if new_energy > energy * (1.0 + BOUND_SLACK) + BOUND_SLACK:
                trace.warnings.append(
                    f"Energy increased at iteration {iteration}: {energy!r} -> {new_energy!r}")
            if squared > bound * (1.0 + BOUND_SLACK) + BOUND_SLACK:
                trace.warnings.append(
                    f"Constraint bound violated at iteration {iteration}: "
                    f"{squared!r} > tau*E0 = {bound!r}")
        energy = new_energy

        if norm ** 2 <= cfg.eps_stop ** 2:
            trace.converged = True
            break
    else:
        logger.warning("Gradient flow stopped after max_iters=%d without converging", cfg.max_iters)
        trace.warnings.append(f"max_iters={cfg.max_iters} reached")

    trace.final = coeffs
    trace.wall_time = time.perf_counter() - start
    return trace
