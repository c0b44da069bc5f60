#!/usr/bin/env python3
"""
lagrange_space.py - Order 1/2 Lagrange spaces and discrete sphere-valued maps

Holds the Lagrange node set of a SimplicialMesh, scalar shape functions,
nodal interpolation and point evaluation of coefficient fields in both
discretizations: the nonconforming one (plain Lagrange field) and the
projection-based one (pointwise normalized Lagrange field).

Usage:
    from lagrange_space import lagrange_space, interpolate, evaluate_proj

    space = lagrange_space(build_uniform_mesh(2, 3), order=2)
    coeffs = interpolate(space, lambda x: np.array([1.0, 0.0, 0.0]))
    value, grad = evaluate_proj(coeffs, 0, [1/3, 1/3, 1/3])
"""

import itertools
import sys
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Callable, Iterator, Tuple

import numpy as np
from scipy import sparse

sys.path.insert(0, str(Path(__file__).parent))
from quadrature import QuadratureRule, quadrature_rule
from simplicial_mesh import BOUNDARY_TOL, SimplicialMesh, build_uniform_mesh
from sphere_geometry import SingularProjectionError, EPS_SING


ELEMENT_CHUNK = 32768


def local_edges(dim: int):
    return list(itertools.combinations(range(dim + 1), 2))


def _barycentric_gradients(dim: int) -> np.ndarray:
    """d(lambda_i)/d(xi), shape (dim + 1, dim)."""
    grads = np.zeros((dim + 1, dim))
    grads[0, :] = -1.0
    grads[1:, :] = np.eye(dim)
    return grads


def shape_functions(order: int, dim: int, barycentric) -> Tuple[np.ndarray, np.ndarray]:
    """
    Evaluate local shape functions and their reference gradients.

    Local numbering: vertices first, then (p=2) edges in
    itertools.combinations order.

    Args:
        barycentric: (dim + 1,) or (Q, dim + 1) coordinates

    Returns:
        values (..., L) and reference gradients (..., L, dim)
    """
    if order not in (1, 2):
        raise ValueError(f"Unsupported Lagrange order {order}; expected 1 or 2")
    lam = np.asarray(barycentric, dtype=float)
    dlam = _barycentric_gradients(dim)

    if order == 1:
        grads = np.broadcast_to(dlam, lam.shape[:-1] + dlam.shape).copy()
        return lam.copy(), grads

    edges = local_edges(dim)
    vertex_values = lam * (2.0 * lam - 1.0)
    vertex_grads = (4.0 * lam - 1.0)[..., None] * dlam
    edge_values = np.stack([4.0 * lam[..., a] * lam[..., b] for a, b in edges], axis=-1)
    edge_grads = np.stack(
        [4.0 * (lam[..., b, None] * dlam[a] + lam[..., a, None] * dlam[b]) for a, b in edges],
        axis=-2)
    return (np.concatenate([vertex_values, edge_values], axis=-1),
            np.concatenate([vertex_grads, edge_grads], axis=-2))


@dataclass(frozen=True, eq=False)
class LagrangeSpace:
    """
    Lagrange node set of order 1 (vertices) or 2 (vertices + edge midpoints).

    For order 2 the edge nodes follow the vertices, ordered like
    SimplicialMesh.edges().
    """
    mesh: SimplicialMesh
    order: int
    node_coords: np.ndarray
    element_nodes: np.ndarray
    boundary_node_flags: np.ndarray

    @property
    def dim(self) -> int:
        return self.mesh.dim

    @property
    def num_nodes(self) -> int:
        return self.node_coords.shape[0]

    @property
    def nodes_per_element(self) -> int:
        return self.element_nodes.shape[1]

    @cached_property
    def free_nodes(self) -> np.ndarray:
        return np.flatnonzero(~self.boundary_node_flags)

    @cached_property
    def boundary_nodes(self) -> np.ndarray:
        return np.flatnonzero(self.boundary_node_flags)

    def element_chunks(self) -> Iterator[slice]:
        for start in range(0, self.mesh.num_elements, ELEMENT_CHUNK):
            yield slice(start, min(start + ELEMENT_CHUNK, self.mesh.num_elements))

    def physical_gradients(self, rule: QuadratureRule, elements: slice) -> np.ndarray:
        """Shape-function gradients at rule points, shape (E, Q, L, dim)."""
        _, ref_grads = shape_functions(self.order, self.dim, rule.points)
        inv = self.mesh.inverse_jacobians[elements]
        return np.einsum('qlk,ekj->eqlj', ref_grads, inv)

    def _assemble(self, local: Callable[[slice], np.ndarray]) -> sparse.csr_matrix:
        rows, cols, data = [], [], []
        size = self.nodes_per_element
        for chunk in self.element_chunks():
            dofs = self.element_nodes[chunk]
            rows.append(np.repeat(dofs, size, axis=1).ravel())
            cols.append(np.tile(dofs, (1, size)).ravel())
            data.append(local(chunk).ravel())
        matrix = sparse.coo_matrix(
            (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.num_nodes, self.num_nodes))
        return matrix.tocsr()

    @cached_property
    def stiffness_matrix(self) -> sparse.csr_matrix:
        """Scalar stiffness matrix K_ij = (grad phi_i, grad phi_j), exact."""
        rule = quadrature_rule(self.dim, 2 * self.order - 2)
        volumes = self.mesh.jacobian_determinants

        def local(chunk):
            grads = self.physical_gradients(rule, chunk)
            weights = rule.weights[None, :] * np.abs(volumes[chunk])[:, None]
            return np.einsum('eq,eqaj,eqbj->eab', weights, grads, grads)

        return self._assemble(local)

    @cached_property
    def mass_matrix(self) -> sparse.csr_matrix:
        """Scalar mass matrix M_ij = (phi_i, phi_j), exact."""
        rule = quadrature_rule(self.dim, 2 * self.order)
        values, _ = shape_functions(self.order, self.dim, rule.points)
        local_mass = np.einsum('q,qa,qb->ab', rule.weights, values, values)
        volumes = np.abs(self.mesh.jacobian_determinants)
        return self._assemble(lambda chunk: volumes[chunk, None, None] * local_mass)

    @cached_property
    def lumped_masses(self) -> np.ndarray:
        """Diagonally scaled (HRZ) nodal volumes, positive and summing to |Omega|."""
        diagonal = self.mass_matrix.diagonal()
        return diagonal * (self.mass_matrix.sum() / diagonal.sum())


def lagrange_space(mesh: SimplicialMesh, order: int) -> LagrangeSpace:
    """Build the order-p Lagrange space on a mesh."""
    if order not in (1, 2):
        raise ValueError(f"Unsupported Lagrange order {order}; expected 1 or 2")

    if order == 1:
        coords = mesh.vertices
        element_nodes = mesh.elements
    else:
        edges = local_edges(mesh.dim)
        pairs = np.stack([mesh.elements[:, [a, b]] for a, b in edges], axis=1)
        pairs.sort(axis=2)
        unique, inverse = np.unique(pairs.reshape(-1, 2), axis=0, return_inverse=True)
        inverse = inverse.reshape(mesh.num_elements, len(edges))
        midpoints = 0.5 * (mesh.vertices[unique[:, 0]] + mesh.vertices[unique[:, 1]])
        coords = np.concatenate([mesh.vertices, midpoints])
        element_nodes = np.concatenate([mesh.elements, mesh.num_vertices + inverse], axis=1)

    boundary = np.any(np.abs(np.abs(coords) - 0.5) <= BOUNDARY_TOL, axis=1)
    return LagrangeSpace(mesh=mesh, order=order, node_coords=coords,
                         element_nodes=element_nodes, boundary_node_flags=boundary)


# =============================================================================
# Coefficient fields
# =============================================================================

@dataclass(eq=False)
class CoefficientField:
    """Nodal vectors in R^m, one row per Lagrange node."""
    space: LagrangeSpace
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2 or self.values.shape[0] != self.space.num_nodes:
            raise ValueError(
                f"Expected values of shape ({self.space.num_nodes}, m), got {self.values.shape}")

    @property
    def target_dim(self) -> int:
        return self.values.shape[1]

    def copy(self) -> 'CoefficientField':
        return CoefficientField(self.space, self.values.copy())

    def with_values(self, values: np.ndarray) -> 'CoefficientField':
        return CoefficientField(self.space, values)

    def max_unit_defect(self) -> float:
        return float(np.max(np.abs(np.linalg.norm(self.values, axis=1) - 1.0)))


def interpolate(space: LagrangeSpace, f: Callable, vectorized: bool = False) -> CoefficientField:
    """
    Nodal interpolation values[i] = f(node_coords[i]).

    With vectorized=True, f receives the whole (N, dim) coordinate array and
    must return an (N, m) array.
    """
    if vectorized:
        values = np.asarray(f(space.node_coords), dtype=float)
    else:
        values = np.array([np.asarray(f(x), dtype=float) for x in space.node_coords])
    return CoefficientField(space, values)


def field_at(coeffs: CoefficientField, rule: QuadratureRule,
             elements: slice) -> Tuple[np.ndarray, np.ndarray]:
    """Values (E, Q, m) and spatial gradients (E, Q, m, dim) of the Lagrange field."""
    space = coeffs.space
    shape_values, _ = shape_functions(space.order, space.dim, rule.points)
    local = coeffs.values[space.element_nodes[elements]]
    values = np.einsum('ql,elm->eqm', shape_values, local)
    grads = np.einsum('eqlj,elm->eqmj', space.physical_gradients(rule, elements), local)
    return values, grads


def _evaluate(coeffs: CoefficientField, element: int, barycentric) -> Tuple[np.ndarray, np.ndarray]:
    space = coeffs.space
    values, ref_grads = shape_functions(space.order, space.dim, barycentric)
    local = coeffs.values[space.element_nodes[element]]
    grads = ref_grads @ space.mesh.inverse_jacobians[element]
    return values @ local, local.T @ grads


def evaluate_nc(coeffs: CoefficientField, element: int, barycentric) -> Tuple[np.ndarray, np.ndarray]:
    """Value in R^m and spatial gradient (m x dim) of the Lagrange field."""
    return _evaluate(coeffs, int(element), barycentric)


def evaluate_proj(coeffs: CoefficientField, element: int, barycentric) -> Tuple[np.ndarray, np.ndarray]:
    """
    Value on the sphere and spatial gradient of the projected field.

    Raises:
        SingularProjectionError: if the Lagrange field is (nearly) zero there
    """
    value, grad = _evaluate(coeffs, int(element), barycentric)
    return project_field(value, grad, np.asarray(int(element)))


def project_field(values: np.ndarray, grads: np.ndarray,
                  element_ids: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Pointwise projection of Lagrange values (..., m) and gradients (..., m, dim).

    element_ids broadcasts against values.shape[:-1] and names the element
    reported on a singular point.
    """
    norms = np.asarray(np.linalg.norm(values, axis=-1))
    singular = norms <= EPS_SING
    if np.any(singular):
        ids = np.broadcast_to(element_ids, norms.shape)
        element = int(ids[singular][0])
        raise SingularProjectionError(
            f"Projected field is singular in element {element} "
            f"(|v| = {float(norms[singular][0]):.3e})", element=element)
    unit = values / norms[..., None]
    tangential = grads - unit[..., :, None] * np.einsum('...m,...mj->...j', unit, grads)[..., None, :]
    return unit, tangential / norms[..., None, None]


def evaluate_points(coeffs: CoefficientField, elements: np.ndarray, barycentric: np.ndarray,
                    projected: bool = False) -> Tuple[np.ndarray, np.ndarray]:
    """Batched evaluate_nc / evaluate_proj at (element, barycentric) pairs."""
    space = coeffs.space
    values, ref_grads = shape_functions(space.order, space.dim, barycentric)
    local = coeffs.values[space.element_nodes[elements]]
    grads = np.einsum('plk,pkj->plj', ref_grads, space.mesh.inverse_jacobians[elements])
    field = np.einsum('pl,plm->pm', values, local)
    field_grads = np.einsum('plj,plm->pmj', grads, local)
    if projected:
        return project_field(field, field_grads, elements)
    return field, field_grads


def nodal_lattice(space: LagrangeSpace) -> Tuple[SimplicialMesh, np.ndarray]:
    """
    Mesh whose vertices are exactly the Lagrange nodes, with node -> vertex map.

    Order 1 uses the mesh itself; order 2 uses the once-refined lattice.
    """
    if space.order == 1:
        return space.mesh, np.arange(space.num_nodes)
    fine = build_uniform_mesh(space.dim, space.mesh.level + 1)
    return fine, fine.lattice_index(space.node_coords)
