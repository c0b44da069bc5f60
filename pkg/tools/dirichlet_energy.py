#!/usr/bin/env python3
"""
dirichlet_energy.py - Dirichlet energy of discrete sphere-valued maps

Energy, Euclidean gradient and sparse Hessian for both discretizations,
their Riemannian counterparts on the product of nodal spheres, constraint
violation measures, error norms and experimental orders of convergence.

Unknowns are flattened node-major: component a of node i sits at i*m + a.

Usage:
    from dirichlet_energy import DiscretizationKind, dirichlet_energy

    energy = dirichlet_energy(coeffs, DiscretizationKind.PROJECTION)
    egh = energy_derivatives(coeffs, DiscretizationKind.NONCONFORMING)
"""

import math
import sys
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Callable, List, Optional, Tuple, Union

import numpy as np
from scipy import sparse

sys.path.insert(0, str(Path(__file__).parent))
from lagrange_space import (CoefficientField, LagrangeSpace, evaluate_points, field_at,
                            nodal_lattice, project_field, shape_functions)
from quadrature import MAX_EXACTNESS, quadrature_rule
from sphere_geometry import EPS_SING, SingularProjectionError, TangencyError, tangent_frames


ENERGY_EXACTNESS = 2
ERROR_EXACTNESS = MAX_EXACTNESS
UNIT_TOL = 1e-8


class DiscretizationKind(str, Enum):
    NONCONFORMING = 'nc'
    PROJECTION = 'proj'


@dataclass
class EnergyGradHess:
    """Energy with Euclidean gradient (N, m) and sparse Hessian (N*m, N*m)."""
    energy: float
    euclidean_gradient: np.ndarray
    hessian: sparse.csr_matrix

    def hessian_apply(self, direction: np.ndarray) -> np.ndarray:
        return (self.hessian @ direction.ravel()).reshape(direction.shape)


# =============================================================================
# Energies
# =============================================================================

def _projected_density(values, grads):
    """
    Integrand 1/2 |grad(v/|v|)|^2 and the quantities its derivatives need.

    With s = |v|^2, b = G^T v and c = |G|^2 the density is (c/s - |b|^2/s^2)/2.
    """
    s = np.einsum('...m,...m->...', values, values)
    b = np.einsum('...mj,...m->...j', grads, values)
    c = np.einsum('...mj,...mj->...', grads, grads)
    bb = np.einsum('...j,...j->...', b, b)
    density = 0.5 * (c / s - bb / s ** 2)
    return density, s, b, c, bb


def _check_singular(values: np.ndarray, offset: int) -> None:
    norms = np.linalg.norm(values, axis=-1)
    if np.any(norms <= EPS_SING):
        element = offset + int(np.argmax(np.any(norms <= EPS_SING, axis=1)))
        raise SingularProjectionError(
            f"Projected field is singular at a quadrature point of element {element}",
            element=element)


def dirichlet_energy(coeffs: CoefficientField, kind: DiscretizationKind) -> float:
    """
    E = 1/2 int |grad u_h|^2.

    Nonconforming: exact, 1/2 U^T K U. Projection: exactness-2 quadrature of
    the projected field.
    """
    kind = DiscretizationKind(kind)
    space = coeffs.space
    if kind is DiscretizationKind.NONCONFORMING:
        return 0.5 * float(np.sum(coeffs.values * (space.stiffness_matrix @ coeffs.values)))

    rule = quadrature_rule(space.dim, ENERGY_EXACTNESS)
    volumes = np.abs(space.mesh.jacobian_determinants)
    total = 0.0
    for chunk in space.element_chunks():
        values, grads = field_at(coeffs, rule, chunk)
        _check_singular(values, chunk.start)
        density = _projected_density(values, grads)[0]
        total += float(np.sum(volumes[chunk] * (density @ rule.weights)))
    return total


def _projected_derivatives(coeffs: CoefficientField) -> EnergyGradHess:
    space = coeffs.space
    m = coeffs.target_dim
    n = space.dim
    count = space.nodes_per_element
    rule = quadrature_rule(n, ENERGY_EXACTNESS)
    shape_values, _ = shape_functions(space.order, n, rule.points)
    volumes = np.abs(space.mesh.jacobian_determinants)

    energy = 0.0
    gradient = np.zeros_like(coeffs.values)
    rows, cols, data = [], [], []
    eye = np.eye(m)

    for chunk in space.element_chunks():
        values, grads = field_at(coeffs, rule, chunk)
        _check_singular(values, chunk.start)
        phi_grads = space.physical_gradients(rule, chunk)
        weights = volumes[chunk, None] * rule.weights[None, :]

        density, s, b, c, bb = _projected_density(values, grads)
        energy += float(np.sum(weights * density))

        s1, s2, s3, s4 = s[..., None], s[..., None] ** 2, s[..., None] ** 3, s[..., None] ** 4
        gb = np.einsum('eqmj,eqj->eqm', grads, b)
        f_v = -c[..., None] * values / s2 - gb / s2 + 2.0 * bb[..., None] * values / s3
        f_g = grads / s1[..., None] - values[..., :, None] * b[..., None, :] / s2[..., None]

        local_grad = (np.einsum('eq,ql,eqm->elm', weights, shape_values, f_v)
                      + np.einsum('eq,eqmj,eqlj->elm', weights, f_g, phi_grads))
        np.add.at(gradient, space.element_nodes[chunk], local_grad)

        # Local Hessian column by column along unit directions (node l, component a)
        local_hess = np.empty((values.shape[0], count, m, count, m))
        for l in range(count):
            for a in range(m):
                dv = shape_values[None, :, l, None] * eye[a]
                dv = np.broadcast_to(dv, values.shape)
                dg = eye[a][None, None, :, None] * phi_grads[:, :, l, None, :]
                ds = 2.0 * np.einsum('eqm,eqm->eq', values, dv)[..., None]
                db = (np.einsum('eqmj,eqm->eqj', dg, values)
                      + np.einsum('eqmj,eqm->eqj', grads, dv))
                dc = 2.0 * np.einsum('eqmj,eqmj->eq', grads, dg)[..., None]
                dbb = 2.0 * np.einsum('eqj,eqj->eq', b, db)[..., None]
                d_f_v = (-dc * values / s2 - c[..., None] * dv / s2
                         + 2.0 * c[..., None] * values * ds / s3
                         - np.einsum('eqmj,eqj->eqm', dg, b) / s2
                         - np.einsum('eqmj,eqj->eqm', grads, db) / s2
                         + 2.0 * gb * ds / s3
                         + 2.0 * dbb * values / s3 + 2.0 * bb[..., None] * dv / s3
                         - 6.0 * bb[..., None] * values * ds / s4)
                d_f_g = (dg / s1[..., None] - grads * (ds / s2)[..., None]
                         - dv[..., :, None] * b[..., None, :] / s2[..., None]
                         - values[..., :, None] * db[..., None, :] / s2[..., None]
                         + 2.0 * values[..., :, None] * b[..., None, :] * (ds / s3)[..., None])
                local_hess[:, :, :, l, a] = (
                    np.einsum('eq,ql,eqm->elm', weights, shape_values, d_f_v)
                    + np.einsum('eq,eqmj,eqlj->elm', weights, d_f_g, phi_grads))

        dofs = (space.element_nodes[chunk][:, :, None] * m + np.arange(m)).reshape(-1, count * m)
        size = count * m
        rows.append(np.repeat(dofs, size, axis=1).ravel())
        cols.append(np.tile(dofs, (1, size)).ravel())
        data.append(local_hess.reshape(-1, size, size).ravel())

    total = space.num_nodes * m
    hessian = sparse.coo_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(total, total)).tocsr()
    return EnergyGradHess(energy=energy, euclidean_gradient=gradient, hessian=hessian)


def vector_stiffness(space: LagrangeSpace, m: int) -> sparse.csr_matrix:
    """Vector Laplace stiffness kron(K, I_m) in node-major ordering."""
    return sparse.kron(space.stiffness_matrix, sparse.identity(m), format='csr')


def energy_derivatives(coeffs: CoefficientField, kind: DiscretizationKind) -> EnergyGradHess:
    """Energy, Euclidean gradient and Hessian of the chosen discretization."""
    kind = DiscretizationKind(kind)
    if kind is DiscretizationKind.PROJECTION:
        return _projected_derivatives(coeffs)
    stiffness = coeffs.space.stiffness_matrix
    gradient = stiffness @ coeffs.values
    return EnergyGradHess(
        energy=0.5 * float(np.sum(coeffs.values * gradient)),
        euclidean_gradient=np.asarray(gradient),
        hessian=vector_stiffness(coeffs.space, coeffs.target_dim))


# =============================================================================
# Riemannian derivatives on the product of nodal spheres
# =============================================================================

def nodal_frames(coeffs: CoefficientField) -> np.ndarray:
    """Tangent frames (N, m, m-1) at unit nodal values."""
    defect = coeffs.max_unit_defect()
    if defect > UNIT_TOL:
        raise TangencyError(f"Nodal values are not unit (max defect {defect:.3e})")
    return tangent_frames(coeffs.values)


def tangent_to_ambient(frames: np.ndarray, w: np.ndarray, free_mask: np.ndarray) -> np.ndarray:
    """Expand tangent coordinates (N, m-1) to ambient vectors (N, m), zero on Dirichlet nodes."""
    ambient = np.einsum('imt,it->im', frames, w)
    ambient[~free_mask] = 0.0
    return ambient


def riemannian_gradient(coeffs: CoefficientField, egh: EnergyGradHess,
                        frames: Optional[np.ndarray] = None) -> np.ndarray:
    """Tangent coordinates of (I - u u^T) g per node; zero rows on boundary nodes."""
    frames = nodal_frames(coeffs) if frames is None else frames
    grad = np.einsum('imt,im->it', frames, egh.euclidean_gradient)
    grad[coeffs.space.boundary_node_flags] = 0.0
    return grad


def riemannian_hessian_apply(coeffs: CoefficientField, egh: EnergyGradHess, w: np.ndarray,
                             frames: Optional[np.ndarray] = None) -> np.ndarray:
    """Hess[w]_i = B_i^T (H w_hat)_i - (u_i . g_i) w_i on free nodes."""
    frames = nodal_frames(coeffs) if frames is None else frames
    free = ~coeffs.space.boundary_node_flags
    ambient = tangent_to_ambient(frames, w, free)
    action = egh.hessian_apply(ambient)
    multiplier = np.einsum('im,im->i', coeffs.values, egh.euclidean_gradient)
    result = np.einsum('imt,im->it', frames, action) - multiplier[:, None] * w
    result[~free] = 0.0
    return result


def tangent_basis_matrix(coeffs: CoefficientField, frames: np.ndarray) -> sparse.csr_matrix:
    """Sparse B mapping stacked free-node tangent coordinates to ambient unknowns."""
    space = coeffs.space
    m = coeffs.target_dim
    free = space.free_nodes
    t = m - 1
    rows = (free[:, None, None] * m + np.arange(m)[None, :, None]) * np.ones((1, 1, t), dtype=int)
    cols = (np.arange(free.size)[:, None, None] * t + np.arange(t)[None, None, :]) * np.ones(
        (1, m, 1), dtype=int)
    return sparse.csr_matrix((frames[free].ravel(), (rows.ravel(), cols.ravel())),
                             shape=(space.num_nodes * m, free.size * t))


def riemannian_hessian_matrix(coeffs: CoefficientField, egh: EnergyGradHess,
                              frames: np.ndarray) -> sparse.csr_matrix:
    """Explicit Riemannian Hessian on free-node tangent coordinates."""
    basis = tangent_basis_matrix(coeffs, frames)
    free = coeffs.space.free_nodes
    multiplier = np.einsum('im,im->i', coeffs.values[free], egh.euclidean_gradient[free])
    shift = sparse.diags(np.repeat(multiplier, coeffs.target_dim - 1))
    return (basis.T @ egh.hessian @ basis - shift).tocsr()


def stationarity_residual(coeffs: CoefficientField, kind: DiscretizationKind) -> float:
    """Euclidean norm of the Riemannian gradient over free nodes."""
    egh = energy_derivatives(coeffs, kind)
    return float(np.linalg.norm(riemannian_gradient(coeffs, egh)))


# =============================================================================
# Constraint violation
# =============================================================================

def _positive_part(values: np.ndarray, volume: float) -> float:
    """Exact integral of max(f, 0) over a simplex for affine f with the given vertex values."""
    dim = values.size - 1
    positive = values > 0
    negative = values < 0
    if not positive.any():
        return 0.0
    if not negative.any():
        return volume * float(values.mean())
    if positive.sum() == 1:
        i = int(np.argmax(positive))
        others = np.delete(values, i)
        return volume * values[i] ** (dim + 1) / ((dim + 1) * np.prod(values[i] - others))
    if negative.sum() == 1:
        return volume * float(values.mean()) + _positive_part(-values, volume)
    # two positive, two negative: cut the edge between a positive and a negative vertex
    p = int(np.argmax(positive))
    q = int(np.argmax(negative))
    t = values[p] / (values[p] - values[q])
    near_p = values.copy()
    near_p[q] = 0.0
    near_q = values.copy()
    near_q[p] = 0.0
    return _positive_part(near_p, t * volume) + _positive_part(near_q, (1.0 - t) * volume)


def _abs_integral(vertex_values: np.ndarray, volumes: np.ndarray) -> float:
    """Exact sum over simplices of int |f| for piecewise affine f, values (E, d+1)."""
    means = vertex_values.mean(axis=1)
    positive = (vertex_values > 0).sum(axis=1)
    negative = (vertex_values < 0).sum(axis=1)
    total = float(np.sum(volumes * np.abs(means) * ((positive == 0) | (negative == 0))))
    for e in np.flatnonzero((positive > 0) & (negative > 0)):
        plus = _positive_part(vertex_values[e], volumes[e])
        total += 2.0 * plus - volumes[e] * means[e]
    return total


def constraint_violation(coeffs: CoefficientField) -> Tuple[float, float]:
    """
    Exact (int |I1(|u| - 1)|, int I1 ||u|^2 - 1|).

    I1 is the piecewise affine nodal interpolant on the lattice whose
    vertices are the Lagrange nodes.
    """
    mesh, vertex_of_node = nodal_lattice(coeffs.space)
    norms = np.empty(mesh.num_vertices)
    norms[vertex_of_node] = np.linalg.norm(coeffs.values, axis=1)
    volumes = mesh.element_volumes
    linear = (norms - 1.0)[mesh.elements]
    squared = np.abs(norms ** 2 - 1.0)[mesh.elements]
    delta = _abs_integral(linear, volumes)
    squared_violation = float(np.sum(volumes * squared.mean(axis=1)))
    return delta, squared_violation


def delta1(coeffs: CoefficientField) -> float:
    """int |I1(|u_h| - 1)|."""
    return constraint_violation(coeffs)[0]


# =============================================================================
# Errors and convergence orders
# =============================================================================

FieldSpec = Tuple[CoefficientField, DiscretizationKind]


def error_norms(fine: FieldSpec, coarse: Union[FieldSpec, Callable]) -> Tuple[float, float]:
    """
    L2 error and H1 seminorm error between two discrete maps, or a discrete
    map and a closed-form one.

    A closed-form reference is a callable x -> (values (P, m), gradients
    (P, m, dim)) on batches of points. Quadrature runs on the finer mesh; the
    coarse field is evaluated through point location on its own mesh.
    """
    fine_coeffs, fine_kind = fine[0], DiscretizationKind(fine[1])
    space = fine_coeffs.space
    mesh = space.mesh
    nonconforming = fine_kind is DiscretizationKind.NONCONFORMING
    if callable(coarse):
        exactness = ERROR_EXACTNESS
    else:
        coarse_coeffs, coarse_kind = coarse[0], DiscretizationKind(coarse[1])
        if nonconforming and coarse_kind is DiscretizationKind.NONCONFORMING:
            exactness = min(2 * max(space.order, coarse_coeffs.space.order) + 2, MAX_EXACTNESS)
        else:
            exactness = ERROR_EXACTNESS
    rule = quadrature_rule(mesh.dim, exactness)
    volumes = np.abs(mesh.jacobian_determinants)

    l2 = 0.0
    h1 = 0.0
    for chunk in space.element_chunks():
        values, grads = field_at(fine_coeffs, rule, chunk)
        if not nonconforming:
            ids = np.arange(chunk.start, chunk.stop)[:, None]
            values, grads = project_field(values, grads, ids)
        points = np.einsum('ql,eld->eqd', rule.points, mesh.vertices[mesh.elements[chunk]])
        flat = points.reshape(-1, mesh.dim)
        if callable(coarse):
            ref_values, ref_grads = coarse(flat)
        else:
            elements, bary = coarse_coeffs.space.mesh.locate_points(flat)
            ref_values, ref_grads = evaluate_points(
                coarse_coeffs, elements, bary,
                projected=coarse_kind is DiscretizationKind.PROJECTION)
        diff = values.reshape(flat.shape[0], -1) - ref_values
        diff_grad = grads.reshape(ref_grads.shape) - ref_grads
        weights = (volumes[chunk, None] * rule.weights[None, :]).ravel()
        l2 += float(weights @ np.einsum('pm,pm->p', diff, diff))
        h1 += float(weights @ np.einsum('pmj,pmj->p', diff_grad, diff_grad))
    return math.sqrt(l2), math.sqrt(h1)


def eoc(errors: List[float]) -> List[float]:
    """
    Experimental orders log2(e_{k-1} / e_k).

    Works on errors against an exact solution as well as on the differences
    between consecutive levels.
    """
    if len(errors) < 2:
        raise ValueError(f"Need at least two errors to compute orders, got {len(errors)}")
    if any(not e > 0 for e in errors):
        raise ValueError(f"Errors must be positive, got {list(errors)}")
    return [math.log2(errors[k - 1] / errors[k]) for k in range(1, len(errors))]
