#!/usr/bin/env python3
"""
vtk_export.py - Legacy ASCII VTK output of meshes and nodal vector fields

Triangles are written as cell type 5, tetrahedra as cell type 10. Second
order fields are written on the once-refined lattice, whose vertices are
exactly the order-2 Lagrange nodes.

Usage:
    from vtk_export import write_field

    write_field('level3.vtk', trace.final, name='u')
"""

import sys
from pathlib import Path
from typing import Dict, Optional

import numpy as np

sys.path.insert(0, str(Path(__file__).parent))
from lagrange_space import CoefficientField, nodal_lattice
from simplicial_mesh import SimplicialMesh


CELL_TYPES = {2: 5, 3: 10}


def _padded(rows: np.ndarray) -> np.ndarray:
    """VTK wants three components per point and vector."""
    rows = np.atleast_2d(rows)
    if rows.shape[1] == 3:
        return rows
    return np.hstack([rows, np.zeros((rows.shape[0], 3 - rows.shape[1]))])


def write_vtk(path, mesh: SimplicialMesh, point_vectors: Optional[Dict[str, np.ndarray]] = None,
              title: str = 'harmonic map') -> None:
    """
    Write an unstructured grid with optional per-vertex vector data.

    Raises:
        OSError: with the path in the message if the file cannot be written
    """
    point_vectors = point_vectors or {}
    for name, vectors in point_vectors.items():
        if len(vectors) != mesh.num_vertices:
            raise ValueError(
                f"Field '{name}' has {len(vectors)} rows, mesh has {mesh.num_vertices} vertices")

    lines = ['# vtk DataFile Version 2.0', title, 'ASCII', 'DATASET UNSTRUCTURED_GRID',
             f'POINTS {mesh.num_vertices} double']
    lines.extend(' '.join(repr(float(c)) for c in p) for p in _padded(mesh.vertices))

    corners = mesh.dim + 1
    lines.append(f'CELLS {mesh.num_elements} {mesh.num_elements * (corners + 1)}')
    lines.extend(f'{corners} ' + ' '.join(str(int(v)) for v in cell) for cell in mesh.elements)
    lines.append(f'CELL_TYPES {mesh.num_elements}')
    lines.extend([str(CELL_TYPES[mesh.dim])] * mesh.num_elements)

    if point_vectors:
        lines.append(f'POINT_DATA {mesh.num_vertices}')
        for name, vectors in point_vectors.items():
            lines.append(f'VECTORS {name} double')
            lines.extend(' '.join(repr(float(c)) for c in v) for v in _padded(vectors))

    try:
        with open(path, 'w') as f:
            f.write('\n'.join(lines) + '\n')
    except OSError as exc:
        raise OSError(f"Cannot write VTK file {path}: {exc}") from exc


def write_field(path, coeffs: CoefficientField, name: str = 'u') -> None:
    """Write nodal values on the lattice whose vertices are the Lagrange nodes."""
    mesh, vertex_of_node = nodal_lattice(coeffs.space)
    vectors = np.zeros((mesh.num_vertices, coeffs.target_dim))
    vectors[vertex_of_node] = coeffs.values
    write_vtk(path, mesh, {name: vectors})
