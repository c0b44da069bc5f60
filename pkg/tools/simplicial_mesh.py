#!/usr/bin/env python3
"""
simplicial_mesh.py - Uniform simplicial meshes of the cube (-1/2, 1/2)^n

Builds Kuhn (Freudenthal) triangulations of the lattice cube at refinement
level r: the cube is split into (2^r)^n sub-cubes and every sub-cube into n!
simplices, one per ordering of the coordinate axes.

Usage:
    from simplicial_mesh import build_uniform_mesh

    mesh = build_uniform_mesh(dim=2, level=3)
    print(mesh.num_elements, element_diameter(mesh))

    element, bary = mesh.locate_point([0.1, -0.2])
"""

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import List, Tuple

import numpy as np


INDEX_DTYPE = np.int64
BOUNDARY_TOL = 1e-12
MAX_LEVEL = 12


class MeshDomainError(ValueError):
    """Point lies outside the closed cube."""
    pass


def _axis_permutations(dim: int) -> List[Tuple[int, ...]]:
    return list(itertools.permutations(range(dim)))


@dataclass(frozen=True, eq=False)
class SimplicialMesh:
    """
    Kuhn triangulation of [-1/2, 1/2]^dim.

    Vertices are numbered lexicographically by lattice index with x running
    fastest, then y, then z. Elements are numbered sub-cube by sub-cube (same
    lexicographic order), and within a sub-cube by the position of the axis
    permutation in itertools.permutations order.
    """
    dim: int
    level: int
    vertices: np.ndarray            # (num_vertices, dim)
    elements: np.ndarray            # (num_elements, dim + 1)
    boundary_vertex_flags: np.ndarray
    # Per local permutation: True if the last two path vertices were swapped
    # to make the signed volume positive.
    _swapped: np.ndarray = field(repr=False)

    @property
    def num_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def num_elements(self) -> int:
        return self.elements.shape[0]

    @property
    def cells_per_axis(self) -> int:
        return 2 ** self.level

    @property
    def spacing(self) -> float:
        return 1.0 / self.cells_per_axis

    @property
    def mesh_size(self) -> float:
        """Nominal element diameter h = 2^-r * sqrt(n)."""
        return self.spacing * math.sqrt(self.dim)

    @cached_property
    def jacobians(self) -> np.ndarray:
        """Per-element affine Jacobians J with columns v_i - v_0, shape (E, n, n)."""
        verts = self.vertices[self.elements]
        return np.transpose(verts[:, 1:, :] - verts[:, :1, :], (0, 2, 1))

    @cached_property
    def jacobian_determinants(self) -> np.ndarray:
        return np.linalg.det(self.jacobians)

    @cached_property
    def inverse_jacobians(self) -> np.ndarray:
        return np.linalg.inv(self.jacobians)

    @cached_property
    def element_volumes(self) -> np.ndarray:
        return np.abs(self.jacobian_determinants) / math.factorial(self.dim)

    def lattice_index(self, points: np.ndarray) -> np.ndarray:
        """Flat vertex index of lattice points given in physical coordinates."""
        points = np.atleast_2d(points)
        n = self.cells_per_axis
        ijk = np.rint((points + 0.5) * n).astype(INDEX_DTYPE)
        strides = (n + 1) ** np.arange(self.dim, dtype=INDEX_DTYPE)
        return ijk @ strides

    def locate_points(self, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """
        Find containing elements and barycentric coordinates for many points.

        Uses the lattice structure: the sub-cube follows from flooring, the
        simplex inside it from sorting the local coordinates.

        Returns:
            Tuple of (element indices (P,), barycentric coordinates (P, n+1))
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if points.shape[1] != self.dim:
            raise MeshDomainError(
                f"Expected points of dimension {self.dim}, got {points.shape[1]}")
        outside = np.any(np.abs(points) > 0.5 + BOUNDARY_TOL, axis=1)
        if np.any(outside):
            bad = points[np.argmax(outside)]
            raise MeshDomainError(f"Point {bad.tolist()} lies outside the closed cube")

        n = self.cells_per_axis
        scaled = (points + 0.5) * n
        cube = np.clip(np.floor(scaled).astype(INDEX_DTYPE), 0, n - 1)
        local = np.clip(scaled - cube, 0.0, 1.0)

        # Descending order of the local coordinates selects the Kuhn simplex.
        order = np.argsort(-local, axis=1, kind='stable')
        perm_code = np.zeros(len(points), dtype=INDEX_DTYPE)
        for col in range(self.dim):
            perm_code = perm_code * self.dim + order[:, col]
        perm_index = self._perm_lookup[perm_code]

        sorted_local = np.take_along_axis(local, order, axis=1)
        bary = np.empty((len(points), self.dim + 1))
        bary[:, 0] = 1.0 - sorted_local[:, 0]
        bary[:, 1:-1] = sorted_local[:, :-1] - sorted_local[:, 1:]
        bary[:, -1] = sorted_local[:, -1]

        swapped = self._swapped[perm_index]
        if np.any(swapped):
            bary[swapped, -2:] = bary[swapped, -1:-3:-1]

        strides = n ** np.arange(self.dim, dtype=INDEX_DTYPE)
        cube_index = cube @ strides
        elements = cube_index * math.factorial(self.dim) + perm_index
        return elements, bary

    def locate_point(self, x) -> Tuple[int, np.ndarray]:
        """Element index and barycentric coordinates of a single point."""
        elements, bary = self.locate_points(np.asarray(x, dtype=float)[None, :])
        return int(elements[0]), bary[0]

    @cached_property
    def _perm_lookup(self) -> np.ndarray:
        perms = _axis_permutations(self.dim)
        lookup = np.full(self.dim ** self.dim, -1, dtype=INDEX_DTYPE)
        for index, perm in enumerate(perms):
            code = 0
            for axis in perm:
                code = code * self.dim + axis
            lookup[code] = index
        return lookup

    def edges(self) -> np.ndarray:
        """Unique mesh edges as sorted vertex pairs, lexicographically ordered."""
        local = list(itertools.combinations(range(self.dim + 1), 2))
        pairs = np.concatenate([self.elements[:, [a, b]] for a, b in local])
        pairs.sort(axis=1)
        return np.unique(pairs, axis=0)


def build_uniform_mesh(dim: int, level: int) -> SimplicialMesh:
    """
    Build the Kuhn triangulation of (-1/2, 1/2)^dim at the given level.

    Args:
        dim: spatial dimension, 2 or 3
        level: refinement level r, 1 <= r <= 12

    Returns:
        SimplicialMesh with 2*4^r triangles (dim=2) or 6*8^r tetrahedra (dim=3)
    """
    if dim not in (2, 3):
        raise ValueError(f"Unsupported dimension {dim}; expected 2 or 3")
    if not isinstance(level, (int, np.integer)) or not 1 <= level <= MAX_LEVEL:
        raise ValueError(f"Refinement level must be an integer in [1, {MAX_LEVEL}], got {level}")

    n = 2 ** level
    num_vertices = (n + 1) ** dim
    num_elements = math.factorial(dim) * n ** dim
    index_max = np.iinfo(INDEX_DTYPE).max
    if num_vertices > index_max or num_elements * (dim + 1) > index_max:
        raise ValueError(f"Level {level} overflows the {INDEX_DTYPE.__name__} index type")

    axes = [np.arange(n + 1, dtype=INDEX_DTYPE)] * dim
    grid = np.meshgrid(*axes, indexing='ij')
    # x fastest: flatten with the last lattice axis varying slowest
    lattice = np.stack([g.ravel(order='F') for g in grid], axis=1)
    vertices = lattice / n - 0.5

    strides = (n + 1) ** np.arange(dim, dtype=INDEX_DTYPE)
    cube_axes = [np.arange(n, dtype=INDEX_DTYPE)] * dim
    cube_grid = np.meshgrid(*cube_axes, indexing='ij')
    corners = np.stack([g.ravel(order='F') for g in cube_grid], axis=1)

    perms = _axis_permutations(dim)
    swapped = np.zeros(len(perms), dtype=bool)
    per_perm = []
    for index, perm in enumerate(perms):
        path = [np.zeros(dim, dtype=INDEX_DTYPE)]
        for axis in perm:
            step = path[-1].copy()
            step[axis] += 1
            path.append(step)
        offsets = np.array(path)
        # Kuhn simplex volume sign equals the permutation sign
        if np.linalg.det((offsets[1:] - offsets[0]).astype(float).T) < 0:
            offsets[[-2, -1]] = offsets[[-1, -2]]
            swapped[index] = True
        per_perm.append((corners[:, None, :] + offsets[None, :, :]) @ strides)

    # (cubes, perms, n+1) -> cube-major element numbering
    elements = np.stack(per_perm, axis=1).reshape(-1, dim + 1)

    boundary = np.any(np.abs(np.abs(vertices) - 0.5) <= BOUNDARY_TOL, axis=1)
    return SimplicialMesh(dim=dim, level=level, vertices=vertices, elements=elements,
                          boundary_vertex_flags=boundary, _swapped=swapped)


def element_diameter(mesh: SimplicialMesh) -> float:
    """Maximum over elements of the longest edge length."""
    verts = mesh.vertices[mesh.elements]
    longest = 0.0
    for a, b in itertools.combinations(range(mesh.dim + 1), 2):
        lengths = np.linalg.norm(verts[:, a, :] - verts[:, b, :], axis=1)
        longest = max(longest, float(lengths.max()))
    return longest
