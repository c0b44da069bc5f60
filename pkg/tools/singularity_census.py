#!/usr/bin/env python3
"""
singularity_census.py - Locate point singularities of S^2-valued P1 fields

An element is suspicious when the affine interpolant of its nodal values
comes closer than NORM_THRESHOLD to the origin of R^3. Suspicious elements
sharing a vertex form one cluster; the cluster grown by one layer of
elements is enclosed by a closed triangle surface, and the topological
degree of the nodal values on that surface is the sum of the signed solid
angles of the image triangles divided by 4*pi.

Usage:
    from singularity_census import singularity_census

    for s in singularity_census(trace.final):
        print(s.location, s.degree)
"""

import itertools
import logging
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import List

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components

sys.path.insert(0, str(Path(__file__).parent))
from lagrange_space import CoefficientField
from simplicial_mesh import SimplicialMesh


logger = logging.getLogger(__name__)

NORM_THRESHOLD = 0.5
# Unit vectors with pairwise dots >= t^2 keep their convex hull at distance >= t.
PREFILTER_DOT = NORM_THRESHOLD ** 2

# Outward faces of a positively oriented tetrahedron (v0, v1, v2, v3)
OUTWARD_FACES = np.array([[1, 2, 3], [0, 3, 2], [0, 1, 3], [0, 2, 1]])


@dataclass
class Singularity:
    location: np.ndarray
    degree: int
    elements: int

    def to_dict(self):
        return {'location': self.location.tolist(), 'degree': self.degree,
                'elements': self.elements}


def hull_distance(points: np.ndarray) -> float:
    """Distance from the origin to the convex hull of a few points in R^m."""
    best = math.inf
    count = len(points)
    for size in range(1, count + 1):
        for subset in itertools.combinations(range(count), size):
            base = points[subset[0]]
            if size == 1:
                best = min(best, float(np.linalg.norm(base)))
                continue
            directions = (points[list(subset[1:])] - base).T
            coeffs, *_ = np.linalg.lstsq(directions, -base, rcond=None)
            if np.all(coeffs >= -1e-14) and coeffs.sum() <= 1.0 + 1e-14:
                best = min(best, float(np.linalg.norm(base + directions @ coeffs)))
    return best


def solid_angles(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Signed solid angles of spherical triangles with unit vertices (rows)."""
    numerator = np.einsum('ij,ij->i', a, np.cross(b, c))
    denominator = (1.0 + np.einsum('ij,ij->i', a, b) + np.einsum('ij,ij->i', b, c)
                   + np.einsum('ij,ij->i', c, a))
    return 2.0 * np.arctan2(numerator, denominator)


def surface_degree(values: np.ndarray, faces: np.ndarray) -> float:
    """Degree of unit vertex values over a closed, outward oriented triangle surface."""
    if len(faces) == 0:
        return 0.0
    unit = values / np.linalg.norm(values, axis=1)[:, None]
    angles = solid_angles(unit[faces[:, 0]], unit[faces[:, 1]], unit[faces[:, 2]])
    return float(angles.sum() / (4.0 * math.pi))


def boundary_faces(mesh: SimplicialMesh, element_ids: np.ndarray) -> np.ndarray:
    """Outward oriented faces that belong to exactly one of the given tetrahedra."""
    faces = mesh.elements[element_ids][:, OUTWARD_FACES].reshape(-1, 3)
    keys = np.sort(faces, axis=1)
    _, inverse, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    return faces[counts[inverse.ravel()] == 1]


def flag_elements(coeffs: CoefficientField) -> np.ndarray:
    """Indices of elements whose affine interpolant gets closer than the threshold to 0."""
    mesh = coeffs.space.mesh
    local = coeffs.values[mesh.elements]
    unit = local / np.linalg.norm(local, axis=2)[:, :, None]
    dots = np.einsum('eam,ebm->eab', unit, unit)
    candidates = np.flatnonzero(dots.min(axis=(1, 2)) < PREFILTER_DOT)
    return np.array([e for e in candidates if hull_distance(local[e]) < NORM_THRESHOLD],
                    dtype=np.int64)


def singularity_census(coeffs: CoefficientField) -> List[Singularity]:
    """
    Point singularities of a P1 field on a 3D mesh with their degrees.

    Clusters whose enclosing surface carries degree 0 are dropped.
    """
    space = coeffs.space
    mesh = space.mesh
    if space.order != 1 or mesh.dim != 3 or coeffs.target_dim != 3:
        raise ValueError("Singularity census needs a P1 field from a 3D mesh into S^2")

    flagged = flag_elements(coeffs)
    if flagged.size == 0:
        return []

    incidence = sparse.csr_matrix(
        (np.ones(flagged.size * 4), (np.repeat(np.arange(flagged.size), 4),
                                     mesh.elements[flagged].ravel())),
        shape=(flagged.size, mesh.num_vertices))
    count, labels = connected_components(incidence @ incidence.T, directed=False)

    # vertex -> elements, for growing clusters by one layer
    all_incidence = sparse.csr_matrix(
        (np.ones(mesh.num_elements * 4), (np.repeat(np.arange(mesh.num_elements), 4),
                                          mesh.elements.ravel())),
        shape=(mesh.num_elements, mesh.num_vertices))

    found = []
    for label in range(count):
        cluster = flagged[labels == label]
        vertices = np.unique(mesh.elements[cluster])
        touching = np.unique(all_incidence[:, vertices].nonzero()[0])
        faces = boundary_faces(mesh, touching)
        degree = surface_degree(coeffs.values, faces)
        rounded = int(round(degree))
        if abs(degree - rounded) > 0.1:
            logger.warning("Cluster %d has non-integral degree %.4f", label, degree)
        if rounded == 0:
            logger.debug("Dropping degree-0 cluster of %d elements", cluster.size)
            continue
        location = mesh.vertices[mesh.elements[cluster]].mean(axis=(0, 1))
        found.append(Singularity(location=location, degree=rounded, elements=int(cluster.size)))
    return found
